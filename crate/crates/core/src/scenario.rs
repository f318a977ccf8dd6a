//! Scenario data model: the coefficient functions of the coupled model,
//! their hypothesis constants, optional manufactured forcings and exact
//! solutions, plus the shipped presets.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::geometry::{SymTensor2, Vec2};
use crate::mesh::Mesh;

pub type SpaceFn = Box<dyn Fn(Vec2) -> f64>;
pub type SpaceTimeFn = Box<dyn Fn(Vec2, f64) -> f64>;
/// Mobility A(x, c).
pub type MobilityFn = Box<dyn Fn(Vec2, f64) -> SymTensor2>;
/// Diffusion-dispersion D(x, zeta) with a velocity argument.
pub type DispersionFn = Box<dyn Fn(Vec2, Vec2) -> SymTensor2>;
pub type VectorFn = Box<dyn Fn(Vec2, f64) -> Vec2>;

/// Coefficients, well terms and horizon of one model instance. Manufactured
/// forcings extend the model for verification runs only; every physical
/// preset leaves them unset.
pub struct Scenario {
    pub name: String,
    /// Porosity Phi(x), bounded below by `porosity_lower`.
    pub porosity: SpaceFn,
    pub porosity_lower: f64,
    pub mobility: MobilityFn,
    pub dispersion: DispersionFn,
    /// Coercivity constant alpha_D of the dispersion hypothesis.
    pub dispersion_coercivity: f64,
    /// Growth constant Lambda_D of the dispersion hypothesis.
    pub dispersion_bound: f64,
    /// Injected concentration c-hat(x, t) in [0, 1].
    pub injected_conc: SpaceTimeFn,
    /// Initial concentration c0(x) in [0, 1].
    pub initial_conc: SpaceFn,
    /// Injection well density qI(x, t) >= 0.
    pub injection: SpaceTimeFn,
    /// Production well density qP(x, t) >= 0.
    pub production: SpaceTimeFn,
    pub horizon: f64,
    /// Manufactured right-hand side of the pressure equation.
    pub forcing_pressure: Option<SpaceTimeFn>,
    /// Manufactured right-hand side of the concentration equation.
    pub forcing_conc: Option<SpaceTimeFn>,
    pub exact_pressure: Option<SpaceTimeFn>,
    pub exact_conc: Option<SpaceTimeFn>,
    pub exact_conc_gradient: Option<VectorFn>,
    pub exact_velocity: Option<VectorFn>,
}

impl Scenario {
    pub fn is_manufactured(&self) -> bool {
        self.forcing_pressure.is_some() || self.forcing_conc.is_some()
    }

    /// Spot-check the coefficient hypotheses at the mesh's cell centres and a
    /// few time samples.
    pub fn validate(&self, mesh: &Mesh) -> Result<(), String> {
        if !(self.porosity_lower > 0.0) {
            return Err("porosity lower bound must be positive".into());
        }
        if !(self.dispersion_coercivity > 0.0 && self.dispersion_bound > 0.0) {
            return Err("dispersion constants must be positive".into());
        }
        if !(self.horizon > 0.0) {
            return Err("horizon must be positive".into());
        }
        let times = [0.0, 0.5 * self.horizon, self.horizon];
        for cell in &mesh.cells {
            let x = cell.centre;
            let phi = (self.porosity)(x);
            if !(phi >= self.porosity_lower && phi <= 1.0 / self.porosity_lower) {
                return Err(format!("porosity out of bounds at ({}, {})", x.x, x.y));
            }
            let c0 = (self.initial_conc)(x);
            if !(-1e-12..=1.0 + 1e-12).contains(&c0) {
                return Err(format!("initial concentration outside [0, 1] at ({}, {})", x.x, x.y));
            }
            for &t in &times {
                let chat = (self.injected_conc)(x, t);
                if !(-1e-12..=1.0 + 1e-12).contains(&chat) {
                    return Err(format!("injected concentration outside [0, 1] at ({}, {})", x.x, x.y));
                }
                if (self.injection)(x, t) < 0.0 || (self.production)(x, t) < 0.0 {
                    return Err(format!("negative well density at ({}, {})", x.x, x.y));
                }
            }
        }
        Ok(())
    }
}

fn gauss(centre: Vec2, sigma: f64, amp: f64) -> impl Fn(Vec2) -> f64 {
    move |x: Vec2| amp * libm::exp(-(x - centre).norm_sq() / (2.0 * sigma * sigma))
}

/// Classical five-spot pattern on the unit square: Gaussian injection near
/// (0.1, 0.1) with unit injected concentration, matched production near
/// (0.9, 0.9), identity mobility, dispersion `(1 + |zeta|) Id`.
pub fn five_spot() -> Scenario {
    let qi = gauss(Vec2::new(0.1, 0.1), 0.15, 5.6);
    let qp = gauss(Vec2::new(0.9, 0.9), 0.15, 5.6);
    Scenario {
        name: "five_spot".into(),
        porosity: Box::new(|_| 1.0),
        porosity_lower: 1.0,
        mobility: Box::new(|_, _| SymTensor2::identity()),
        dispersion: Box::new(|_, zeta: Vec2| SymTensor2::isotropic(1.0 + zeta.norm())),
        dispersion_coercivity: 1.0,
        dispersion_bound: 1.0,
        injected_conc: Box::new(|_, _| 1.0),
        initial_conc: Box::new(|_| 0.0),
        injection: Box::new(move |x, _| qi(x)),
        production: Box::new(move |x, _| qp(x)),
        horizon: 1.0,
        forcing_pressure: None,
        forcing_conc: None,
        exact_pressure: None,
        exact_conc: None,
        exact_conc_gradient: None,
        exact_velocity: None,
    }
}

/// Zero wells and a constant initial state: both solves are trivial and the
/// run must stay exactly constant.
pub fn still() -> Scenario {
    Scenario {
        name: "still".into(),
        porosity: Box::new(|_| 1.0),
        porosity_lower: 1.0,
        mobility: Box::new(|_, _| SymTensor2::identity()),
        dispersion: Box::new(|_, zeta: Vec2| SymTensor2::isotropic(1.0 + zeta.norm())),
        dispersion_coercivity: 1.0,
        dispersion_bound: 1.0,
        injected_conc: Box::new(|_, _| 1.0),
        initial_conc: Box::new(|_| 0.5),
        injection: Box::new(|_, _| 0.0),
        production: Box::new(|_, _| 0.0),
        horizon: 1.0,
        forcing_pressure: None,
        forcing_conc: None,
        exact_pressure: Some(Box::new(|_, _| 0.0)),
        exact_conc: Some(Box::new(|_, _| 0.5)),
        exact_conc_gradient: Some(Box::new(|_, _| Vec2::ZERO)),
        exact_velocity: Some(Box::new(|_, _| Vec2::ZERO)),
    }
}

fn cc(x: Vec2) -> f64 {
    libm::cos(PI * x.x) * libm::cos(PI * x.y)
}

/// Decay rate of the pure-diffusion manufactured concentration.
const MMS_DECAY: f64 = 1.0;

/// Exact concentration of the pure-diffusion manufactured preset:
/// `c(x, t) = 1/2 + (1/4) e^{-t} cos(pi x) cos(pi y)`.
fn mms_conc(x: Vec2, t: f64) -> f64 {
    0.5 + 0.25 * libm::exp(-MMS_DECAY * t) * cc(x)
}

fn mms_conc_gradient(x: Vec2, t: f64) -> Vec2 {
    let s = -0.25 * PI * libm::exp(-MMS_DECAY * t);
    Vec2::new(
        s * libm::sin(PI * x.x) * libm::cos(PI * x.y),
        s * libm::cos(PI * x.x) * libm::sin(PI * x.y),
    )
}

/// Pure-diffusion manufactured problem: zero velocity, identity dispersion,
/// exact solution [`mms_conc`], forcing `g_c = dt c - lap c`.
pub fn pure_diffusion_mms() -> Scenario {
    Scenario {
        name: "pure_diffusion_mms".into(),
        porosity: Box::new(|_| 1.0),
        porosity_lower: 1.0,
        mobility: Box::new(|_, _| SymTensor2::identity()),
        dispersion: Box::new(|_, _| SymTensor2::identity()),
        dispersion_coercivity: 1.0,
        dispersion_bound: 1.0,
        injected_conc: Box::new(|_, _| 1.0),
        initial_conc: Box::new(|x| mms_conc(x, 0.0)),
        injection: Box::new(|_, _| 0.0),
        production: Box::new(|_, _| 0.0),
        horizon: 0.5,
        forcing_pressure: None,
        // dt c = -(1/4) e^{-t} cc, -lap c = (pi^2/2) e^{-t} cc
        forcing_conc: Some(Box::new(|x, t| {
            (0.5 * PI * PI - 0.25 * MMS_DECAY) * libm::exp(-MMS_DECAY * t) * cc(x)
        })),
        exact_pressure: Some(Box::new(|_, _| 0.0)),
        exact_conc: Some(Box::new(mms_conc)),
        exact_conc_gradient: Some(Box::new(mms_conc_gradient)),
        exact_velocity: Some(Box::new(|_, _| Vec2::ZERO)),
    }
}

/// Pressure amplitude of the coupled manufactured problem. Kept moderate so
/// the dispersion `(1 + |U|^2) Id` stays well inside the linear-growth band
/// `2 (1 + |U|) Id` over the whole velocity range.
const CPL_PRESSURE_AMP: f64 = 0.5;

/// Decay rate of the coupled manufactured concentration.
const CPL_DECAY: f64 = 2.0;

/// Cosine modes (kx, ky, amplitude) of the coupled manufactured
/// concentration. Several incommensurate modes keep the discretisation error
/// components from cancelling coherently along refinement.
const CPL_MODES: [(f64, f64, f64); 3] = [(1.0, 1.0, 0.15), (2.0, 1.0, 0.08), (1.0, 2.0, 0.05)];

/// Exact concentration of the coupled manufactured preset: a decaying sum of
/// Neumann-compatible cosine modes around the 1/2 background.
fn cpl_conc(x: Vec2, t: f64) -> f64 {
    let e = libm::exp(-CPL_DECAY * t);
    let mut acc = 0.5;
    for &(kx, ky, a) in &CPL_MODES {
        acc += e * a * libm::cos(kx * PI * x.x) * libm::cos(ky * PI * x.y);
    }
    acc
}

fn cpl_conc_gradient(x: Vec2, t: f64) -> Vec2 {
    let e = libm::exp(-CPL_DECAY * t);
    let mut g = Vec2::ZERO;
    for &(kx, ky, a) in &CPL_MODES {
        g += Vec2::new(
            -e * a * kx * PI * libm::sin(kx * PI * x.x) * libm::cos(ky * PI * x.y),
            -e * a * ky * PI * libm::cos(kx * PI * x.x) * libm::sin(ky * PI * x.y),
        );
    }
    g
}

fn cpl_conc_laplacian(x: Vec2, t: f64) -> f64 {
    let e = libm::exp(-CPL_DECAY * t);
    let mut acc = 0.0;
    for &(kx, ky, a) in &CPL_MODES {
        acc -= e * a * PI * PI * (kx * kx + ky * ky)
            * libm::cos(kx * PI * x.x)
            * libm::cos(ky * PI * x.y);
    }
    acc
}

/// Exact velocity of the coupled manufactured problem:
/// `U = -grad p` with `p = a cos(pi x) cos(pi y)`.
fn cpl_velocity(x: Vec2) -> Vec2 {
    Vec2::new(
        CPL_PRESSURE_AMP * PI * libm::sin(PI * x.x) * libm::cos(PI * x.y),
        CPL_PRESSURE_AMP * PI * libm::cos(PI * x.x) * libm::sin(PI * x.y),
    )
}

/// Coupled manufactured problem: steady pressure `p = a cos(pi x) cos(pi y)`
/// (mean zero, zero Neumann), identity mobility, dispersion
/// `D(x, zeta) = (1 + |zeta|^2) Id`, concentration [`cpl_conc`]. Forcings are
/// derived analytically from the strong form.
pub fn coupled_mms() -> Scenario {
    Scenario {
        name: "coupled_mms".into(),
        porosity: Box::new(|_| 1.0),
        porosity_lower: 1.0,
        mobility: Box::new(|_, _| SymTensor2::identity()),
        dispersion: Box::new(|_, zeta: Vec2| SymTensor2::isotropic(1.0 + zeta.norm_sq())),
        // (1 + |z|^2) >= 0.8 (1 + |z|) for all z
        dispersion_coercivity: 0.8,
        dispersion_bound: 2.0,
        injected_conc: Box::new(|_, _| 1.0),
        initial_conc: Box::new(|x| cpl_conc(x, 0.0)),
        injection: Box::new(|_, _| 0.0),
        production: Box::new(|_, _| 0.0),
        horizon: 0.5,
        // div U = -lap p = 2 a pi^2 cos(pi x) cos(pi y)
        forcing_pressure: Some(Box::new(|x, _| 2.0 * CPL_PRESSURE_AMP * PI * PI * cc(x))),
        forcing_conc: Some(Box::new(coupled_mms_forcing)),
        exact_pressure: Some(Box::new(|x, _| CPL_PRESSURE_AMP * cc(x))),
        exact_conc: Some(Box::new(cpl_conc)),
        exact_conc_gradient: Some(Box::new(cpl_conc_gradient)),
        exact_velocity: Some(Box::new(|x, _| cpl_velocity(x))),
    }
}

// g_c = dt c - div((1 + |U|^2) grad c) + U . grad c + c div U  for the exact
// fields above (Phi = 1, no wells).
fn coupled_mms_forcing(x: Vec2, t: f64) -> f64 {
    let c = cpl_conc(x, t);
    let dt_c = -CPL_DECAY * (c - 0.5);
    let lap_c = cpl_conc_laplacian(x, t);
    let grad_c = cpl_conc_gradient(x, t);
    let u = cpl_velocity(x);
    let speed_sq = u.norm_sq(); // a^2 pi^2 (sx^2 cy^2 + cx^2 sy^2)
    // grad |U|^2 = a^2 pi^3 (sin 2pix cos 2piy, cos 2pix sin 2piy)
    let a2 = CPL_PRESSURE_AMP * CPL_PRESSURE_AMP;
    let grad_speed_sq = Vec2::new(
        a2 * PI * PI * PI * libm::sin(2.0 * PI * x.x) * libm::cos(2.0 * PI * x.y),
        a2 * PI * PI * PI * libm::cos(2.0 * PI * x.x) * libm::sin(2.0 * PI * x.y),
    );
    let div_u = 2.0 * CPL_PRESSURE_AMP * PI * PI * cc(x);

    dt_c - ((1.0 + speed_sq) * lap_c + grad_speed_sq.dot(grad_c)) + u.dot(grad_c) + c * div_u
}

/// The shipped preset names.
pub fn preset(name: &str) -> Option<Scenario> {
    match name {
        "five_spot" => Some(five_spot()),
        "still" => Some(still()),
        "pure_diffusion_mms" => Some(pure_diffusion_mms()),
        "coupled_mms" => Some(coupled_mms()),
        _ => None,
    }
}

/// Names of all shipped presets, for CLI listings and error messages.
pub fn preset_names() -> Vec<&'static str> {
    alloc::vec!["five_spot", "still", "pure_diffusion_mms", "coupled_mms"]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_rect_mesh, Rect};

    const FD_H: f64 = 1e-5;

    fn fd_grad(f: &dyn Fn(Vec2, f64) -> f64, x: Vec2, t: f64) -> Vec2 {
        Vec2::new(
            (f(Vec2::new(x.x + FD_H, x.y), t) - f(Vec2::new(x.x - FD_H, x.y), t)) / (2.0 * FD_H),
            (f(Vec2::new(x.x, x.y + FD_H), t) - f(Vec2::new(x.x, x.y - FD_H), t)) / (2.0 * FD_H),
        )
    }

    fn fd_div(f: &dyn Fn(Vec2, f64) -> Vec2, x: Vec2, t: f64) -> f64 {
        (f(Vec2::new(x.x + FD_H, x.y), t).x - f(Vec2::new(x.x - FD_H, x.y), t).x) / (2.0 * FD_H)
            + (f(Vec2::new(x.x, x.y + FD_H), t).y - f(Vec2::new(x.x, x.y - FD_H), t).y)
                / (2.0 * FD_H)
    }

    fn fd_dt(f: &dyn Fn(Vec2, f64) -> f64, x: Vec2, t: f64) -> f64 {
        (f(x, t + FD_H) - f(x, t - FD_H)) / (2.0 * FD_H)
    }

    fn sample_points() -> Vec<(Vec2, f64)> {
        let mut pts = Vec::new();
        for &(x, y) in &[(0.23, 0.41), (0.68, 0.12), (0.5, 0.87), (0.91, 0.66)] {
            for &t in &[0.05, 0.2, 0.45] {
                pts.push((Vec2::new(x, y), t));
            }
        }
        pts
    }

    #[test]
    fn presets_validate_and_resolve() {
        let mesh = generate_rect_mesh(8, 8, Rect::UNIT).unwrap();
        for name in preset_names() {
            let s = preset(name).unwrap();
            assert_eq!(s.name, name);
            s.validate(&mesh).unwrap();
        }
        assert!(preset("nonsense").is_none());
        assert!(preset_names().contains(&"five_spot"));
    }

    #[test]
    fn manufactured_gradients_match_finite_differences() {
        for name in ["pure_diffusion_mms", "coupled_mms", "still"] {
            let s = preset(name).unwrap();
            let c = s.exact_conc.as_ref().unwrap();
            let gc = s.exact_conc_gradient.as_ref().unwrap();
            for (x, t) in sample_points() {
                let fd = fd_grad(&**c, x, t);
                assert!(
                    (gc(x, t) - fd).norm() < 1e-8,
                    "{name}: gradient mismatch at ({}, {})",
                    x.x,
                    x.y
                );
            }
        }
    }

    #[test]
    fn manufactured_velocity_is_minus_mobility_grad_pressure() {
        let s = preset("coupled_mms").unwrap();
        let p = s.exact_pressure.as_ref().unwrap();
        let u = s.exact_velocity.as_ref().unwrap();
        for (x, t) in sample_points() {
            let c = (s.exact_conc.as_ref().unwrap())(x, t);
            let expected = (s.mobility)(x, c).apply(fd_grad(&**p, x, t)).scale(-1.0);
            assert!((u(x, t) - expected).norm() < 1e-8);
        }
    }

    #[test]
    fn manufactured_pressure_forcing_is_div_velocity() {
        let s = preset("coupled_mms").unwrap();
        let u = s.exact_velocity.as_ref().unwrap();
        let gp = s.forcing_pressure.as_ref().unwrap();
        for (x, t) in sample_points() {
            let div = fd_div(&**u, x, t);
            assert!((gp(x, t) - div).abs() < 1e-7);
        }
    }

    #[test]
    fn manufactured_concentration_forcing_closes_the_pde() {
        for name in ["pure_diffusion_mms", "coupled_mms"] {
            let s = preset(name).unwrap();
            let c = s.exact_conc.as_ref().unwrap();
            let grad_c = s.exact_conc_gradient.as_ref().unwrap();
            let u = s.exact_velocity.as_ref().unwrap();
            let gc = s.forcing_conc.as_ref().unwrap();
            // total flux c U - D(U) grad c; its divergence via central
            // differences closes Phi dt c + div(flux) = g_c
            let flux = |x: Vec2, t: f64| -> Vec2 {
                let vel = u(x, t);
                let diffusive = (s.dispersion)(x, vel).apply(grad_c(x, t));
                vel.scale(c(x, t)) - diffusive
            };
            for (x, t) in sample_points() {
                let phi = (s.porosity)(x);
                let lhs = phi * fd_dt(&**c, x, t) + fd_div(&flux, x, t);
                assert!(
                    (gc(x, t) - lhs).abs() < 1e-5,
                    "{name}: forcing residual {} at ({}, {}, {})",
                    (gc(x, t) - lhs).abs(),
                    x.x,
                    x.y,
                    t
                );
            }
        }
    }
}
