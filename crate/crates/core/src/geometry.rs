//! Small fixed-dimension geometric primitives.
//!
//! The implemented dimension is `d = 2`; formulas elsewhere in the crate keep
//! `d` symbolic via [`DIM`] so the scaling factors (`d|K|`, `sqrt(d)`,
//! `|sigma| d_{K,sigma} / d`) read like the general-dimension versions.

use core::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Spatial dimension of the implemented discretisation.
pub const DIM: usize = 2;

/// `DIM` as a float, for measure and scaling formulas.
pub const DIMF: f64 = DIM as f64;

/// A point or vector in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    /// Rotate by -90 degrees: the outward normal of a counter-clockwise
    /// oriented edge with tangent `self`.
    pub fn rot_cw(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        self.scale(s)
    }
}

/// A symmetric 2x2 tensor, used for the mobility `A(x, c)` and the
/// diffusion-dispersion tensor `D(x, zeta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymTensor2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymTensor2 {
    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        SymTensor2 { xx, xy, yy }
    }

    pub fn identity() -> Self {
        SymTensor2::new(1.0, 0.0, 1.0)
    }

    /// Scalar multiple of the identity.
    pub fn isotropic(s: f64) -> Self {
        SymTensor2::new(s, 0.0, s)
    }

    pub fn apply(self, v: Vec2) -> Vec2 {
        Vec2::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }

    /// Positive definiteness via the leading-minor test.
    pub fn is_spd(self) -> bool {
        self.xx > 0.0 && self.xx * self.yy - self.xy * self.xy > 0.0
    }
}
