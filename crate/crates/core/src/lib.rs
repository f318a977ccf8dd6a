//! Hybrid Mimetic Mixed (HMM) finite-volume discretisation of single-phase
//! miscible displacement in a porous medium.
//!
//! The library couples a mixed-finite-volume pressure/flux solve to an
//! implicit-Euler hybrid-finite-volume concentration solve with upwinded
//! convection, on general polygonal meshes. A diagnostics module evaluates
//! the discrete energy inequality, a dual-seminorm bound on the discrete
//! time derivative, and mesh-refinement error studies.
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats and the
//! command-line front end live in the companion `hmm` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod discrete;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod pressure;
pub mod scenario;
pub mod transport;

pub use geometry::{SymTensor2, Vec2, DIM};
pub use mesh::{Mesh, MeshQuality};
