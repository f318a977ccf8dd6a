//! Run diagnostics: the discrete energy inequality, the dual seminorm and
//! the quartic time-derivative integral, per-step mass ledgers, error norms
//! against manufactured solutions, and mesh-refinement convergence studies.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::discrete::{
    self, DiscreteField, PyramidTensors,
};
use crate::geometry::Vec2;
use crate::linalg::{self, CsrBuilder, SolverConfig};
use crate::mesh::Mesh;
use crate::scenario::Scenario;
use crate::transport::{self, SimulationState};

/// Relative slack allowed on the energy-inequality residual.
pub const ENERGY_SLACK: f64 = 1e-8;

#[derive(Clone, Debug)]
pub enum DiagnosticsError {
    EnergyViolation { level: usize, residual: f64 },
}

impl fmt::Display for DiagnosticsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagnosticsError::EnergyViolation { level, residual } => {
                write!(f, "discrete energy inequality violated at level {level} (residual {residual:e})")
            }
        }
    }
}

/// The energy-balance terms accumulated up to one time level.
#[derive(Clone, Copy, Debug)]
pub struct EnergyLevel {
    pub level: usize,
    pub time: f64,
    /// (1/2) int Phi (Pi c)^2 at this level.
    pub kinetic: f64,
    /// Injection work accumulated so far: sum dt int Pi c chat qI.
    pub injection_work: f64,
    /// Well dissipation accumulated so far: (1/2) sum dt int (Pi c)^2 (qI + qP).
    pub well_dissipation: f64,
    /// Diffusion dissipation accumulated so far: sum dt a_D(c, c).
    pub diffusion_dissipation: f64,
    /// kinetic + dissipation terms minus initial energy and injection work;
    /// nonpositive (up to slack) for every physical run.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct EnergyReport {
    /// (1/2) int Phi (I_D c0)^2.
    pub initial: f64,
    pub levels: Vec<EnergyLevel>,
}

/// Evaluate the discrete energy balance of a completed run and assert the
/// inequality at every level.
pub fn energy_report(
    mesh: &Mesh,
    scenario: &Scenario,
    state: &SimulationState,
) -> Result<EnergyReport, DiagnosticsError> {
    let phi: Vec<f64> = mesh.cells.iter().map(|k| (scenario.porosity)(k.centre)).collect();
    let c = &state.concentration;
    let initial = 0.5 * discrete::mass_form(mesh, &phi, &c.levels[0], &c.levels[0]);

    let mut injection_work = 0.0;
    let mut well_dissipation = 0.0;
    let mut diffusion_dissipation = 0.0;
    let mut levels = Vec::with_capacity(c.grid.n_steps());
    for n in 1..=c.grid.n_steps() {
        let dt = c.grid.step(n);
        let cn = &c.levels[n];
        let sources = &state.sources[n - 1];
        let tensors =
            transport::sample_dispersion(mesh, scenario, &state.pressure[n - 1].velocity)
                .expect("dispersion tensors were SPD during the run");
        let mut inj = 0.0;
        let mut well = 0.0;
        for (ci, cell) in mesh.cells.iter().enumerate() {
            let m = cell.measure;
            inj += m * cn.cell[ci] * sources.injected_conc[ci] * sources.injection[ci];
            well += 0.5 * m * cn.cell[ci] * cn.cell[ci]
                * (sources.injection[ci] + sources.production[ci]);
        }
        injection_work += dt * inj;
        well_dissipation += dt * well;
        diffusion_dissipation += dt * discrete::diffusion_form(mesh, &tensors, cn, cn);

        let kinetic = 0.5 * discrete::mass_form(mesh, &phi, cn, cn);
        let residual =
            kinetic + diffusion_dissipation + well_dissipation - initial - injection_work;
        let scale = kinetic
            .abs()
            .max(initial.abs())
            .max(injection_work.abs())
            .max(well_dissipation.abs())
            .max(diffusion_dissipation.abs())
            .max(1e-300);
        levels.push(EnergyLevel {
            level: n,
            time: c.grid.node(n),
            kinetic,
            injection_work,
            well_dissipation,
            diffusion_dissipation,
            residual,
        });
        if residual > ENERGY_SLACK * scale {
            return Err(DiagnosticsError::EnergyViolation { level: n, residual });
        }
    }
    Ok(EnergyReport { initial, levels })
}

/// Per-step discrete mass balance of a completed run.
#[derive(Clone, Copy, Debug)]
pub struct MassLedgerRow {
    pub level: usize,
    pub time: f64,
    /// sum_K |K| Phi_K (c^n_K - c^{n-1}_K).
    pub storage_change: f64,
    /// dt sum_K |K| qI chat.
    pub injected: f64,
    /// dt sum_K |K| qP c^n.
    pub produced: f64,
    /// dt sum_K |K| g_c (manufactured runs only).
    pub forcing: f64,
    /// storage_change - injected + produced - forcing; solver-tolerance small.
    pub residual: f64,
}

pub fn mass_ledger(mesh: &Mesh, scenario: &Scenario, state: &SimulationState) -> Vec<MassLedgerRow> {
    let phi: Vec<f64> = mesh.cells.iter().map(|k| (scenario.porosity)(k.centre)).collect();
    let c = &state.concentration;
    (1..=c.grid.n_steps())
        .map(|n| {
            let dt = c.grid.step(n);
            let sources = &state.sources[n - 1];
            let mut storage = 0.0;
            let mut injected = 0.0;
            let mut produced = 0.0;
            let mut forcing = 0.0;
            for (ci, cell) in mesh.cells.iter().enumerate() {
                let m = cell.measure;
                storage += m * phi[ci] * (c.levels[n].cell[ci] - c.levels[n - 1].cell[ci]);
                injected += m * sources.injection[ci] * sources.injected_conc[ci];
                produced += m * sources.production[ci] * c.levels[n].cell[ci];
                forcing += m * sources.forcing_conc[ci];
            }
            MassLedgerRow {
                level: n,
                time: c.grid.node(n),
                storage_change: storage,
                injected: dt * injected,
                produced: dt * produced,
                forcing: dt * forcing,
                residual: storage - dt * (injected - produced + forcing),
            }
        })
        .collect()
}

/// A certified lower-bound estimate of the dual seminorm
/// `sup { int Pi v Pi w : || grad w ||_{L^4} = 1 }` restricted to
/// zero-mean test fields, with the mean pairing reported separately.
#[derive(Clone, Copy, Debug)]
pub struct DualSeminormEstimate {
    pub value: f64,
    /// int Pi v, the pairing against constants (unbounded direction of the
    /// unrestricted supremum).
    pub mean_pairing: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Exponent of the gradient constraint: 2d with d = 2.
const CONSTRAINT_EXPONENT: f64 = 4.0;

fn l4_norm_pow4(mesh: &Mesh, g: &[Vec2]) -> f64 {
    let mut acc = 0.0;
    for (ci, cell) in mesh.cells.iter().enumerate() {
        for li in 0..cell.edges.len() {
            let n2 = g[mesh.incidence(ci, li)].norm_sq();
            acc += mesh.pyramid_measure(ci, li) * n2 * n2;
        }
    }
    acc
}

// d/dw of sum_q m_q |g_q(w)|^4, via the gradient adjoint.
fn l4_pow4_gradient(mesh: &Mesh, g: &[Vec2]) -> DiscreteField {
    let mut weighted = Vec::with_capacity(g.len());
    for (ci, cell) in mesh.cells.iter().enumerate() {
        for li in 0..cell.edges.len() {
            let idx = mesh.incidence(ci, li);
            weighted.push(g[idx].scale(4.0 * mesh.pyramid_measure(ci, li) * g[idx].norm_sq()));
        }
    }
    discrete::gradient_adjoint(mesh, &weighted)
}

fn centre_field(mesh: &Mesh, w: &mut DiscreteField) {
    let mean = discrete::integrate_reconstruction(mesh, w) / mesh.total_measure;
    w.shift(-mean);
}

/// Maximize `int Pi v Pi w` over zero-mean fields with unit L^4 gradient
/// norm by gradient ascent on the scale-invariant ratio, warm-started from
/// the L^2-constrained maximizer (one kernel-deflated linear solve). Every
/// iterate is feasible after normalization, so the returned value is a
/// certified lower bound even without convergence.
pub fn dual_seminorm(
    mesh: &Mesh,
    v: &DiscreteField,
    tol: f64,
    max_iter: usize,
) -> DualSeminormEstimate {
    let mean_pairing = discrete::integrate_reconstruction(mesh, v);
    let mut v_centred = v.clone();
    centre_field(mesh, &mut v_centred);
    // zero the edge values: the objective only sees cell values
    let objective_weights: Vec<f64> = mesh
        .cells
        .iter()
        .zip(&v_centred.cell)
        .map(|(k, &vk)| k.measure * vk)
        .collect();
    let v_scale = discrete::reconstruction_l2_norm(mesh, &v_centred);
    if v_scale == 0.0 {
        return DualSeminormEstimate { value: 0.0, mean_pairing, iterations: 0, converged: true };
    }

    // warm start: the L^2-constrained maximizer solves the Neumann stiffness
    // system with right-hand side |K| v_K
    let n_cells = mesh.n_cells();
    let n = n_cells + mesh.n_edges();
    let mut builder = CsrBuilder::new(n);
    discrete::add_diffusion_entries(mesh, &PyramidTensors::identity(mesh), &mut builder);
    let stiffness = builder.build();
    let mut rhs = vec![0.0; n];
    rhs[..n_cells].copy_from_slice(&objective_weights);
    let kernel = vec![1.0; n];
    let cfg = SolverConfig { tol: 1e-12, ..SolverConfig::cg() };
    let mut w = match linalg::solve_singular_neumann(&stiffness, &rhs, &kernel, &cfg) {
        Ok(sol) => DiscreteField {
            cell: sol.x[..n_cells].to_vec(),
            edge: sol.x[n_cells..].to_vec(),
        },
        // fall back to the raw objective direction
        Err(_) => DiscreteField { cell: v_centred.cell.clone(), edge: v_centred.edge.clone() },
    };
    centre_field(mesh, &mut w);

    let objective = |w: &DiscreteField| -> f64 {
        w.cell.iter().zip(&objective_weights).map(|(wi, oi)| wi * oi).sum()
    };
    let ratio = |w: &DiscreteField| -> (f64, f64) {
        let g = discrete::gradient(mesh, w);
        let n4 = libm::pow(l4_norm_pow4(mesh, &g.values), 1.0 / CONSTRAINT_EXPONENT);
        (objective(w) / n4, n4)
    };

    let (mut best, mut n4) = ratio(&w);
    if !best.is_finite() {
        return DualSeminormEstimate { value: 0.0, mean_pairing, iterations: 0, converged: false };
    }
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let g = discrete::gradient(mesh, &w);
        let grad_n4pow4 = l4_pow4_gradient(mesh, &g.values);
        // grad of L/N4: (grad L - (L/N4) grad N4) / N4, with
        // grad N4 = (1/4) N4^{-3} grad(N4^4)
        let n4_grad_scale = 0.25 / (n4 * n4 * n4);
        let mut direction = DiscreteField::zeros(mesh);
        for i in 0..n_cells {
            direction.cell[i] = (objective_weights[i] - best * n4_grad_scale * grad_n4pow4.cell[i]) / n4;
        }
        for i in 0..mesh.n_edges() {
            direction.edge[i] = -best * n4_grad_scale * grad_n4pow4.edge[i] / n4;
        }
        let dir_scale: f64 = libm::sqrt(
            direction.cell.iter().map(|x| x * x).sum::<f64>()
                + direction.edge.iter().map(|x| x * x).sum::<f64>(),
        );
        if dir_scale == 0.0 {
            converged = true;
            break;
        }
        let w_scale: f64 = libm::sqrt(
            w.cell.iter().map(|x| x * x).sum::<f64>()
                + w.edge.iter().map(|x| x * x).sum::<f64>(),
        )
        .max(1e-300);

        let mut improved = false;
        let mut trial_step = step * w_scale / dir_scale;
        for _ in 0..40 {
            let mut candidate = direction.scale(trial_step);
            candidate = candidate.axpy(1.0, &w);
            centre_field(mesh, &mut candidate);
            let (cand_ratio, cand_n4) = ratio(&candidate);
            if cand_ratio.is_finite() && cand_ratio > best {
                let gain = (cand_ratio - best) / best.abs().max(1e-300);
                w = candidate;
                best = cand_ratio;
                n4 = cand_n4;
                improved = true;
                step = (step * 1.5).min(1.0);
                if gain < tol {
                    converged = true;
                }
                break;
            }
            trial_step *= 0.5;
            step *= 0.5;
        }
        if !improved {
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    DualSeminormEstimate { value: best, mean_pairing, iterations, converged }
}

/// One level of the quartic time-derivative integral.
#[derive(Clone, Copy, Debug)]
pub struct DtcLevel {
    pub level: usize,
    pub seminorm: f64,
    /// int Pi of the time quotient (the constant pairing reported alongside
    /// the zero-mean seminorm).
    pub mean_pairing: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct DtcReport {
    /// sum_n dt |delta c|_{*,D}^4 (exact time quadrature: the quotient is
    /// piecewise constant in time).
    pub total: f64,
    pub levels: Vec<DtcLevel>,
}

/// The discrete counterpart of the quartic time-derivative bound: integrate
/// the fourth power of the dual seminorm of the time quotient over the run.
pub fn dtc_quartic_integral(
    mesh: &Mesh,
    state: &SimulationState,
    tol: f64,
    max_iter: usize,
) -> DtcReport {
    let c = &state.concentration;
    let mut total = 0.0;
    let mut levels = Vec::with_capacity(c.grid.n_steps());
    for n in 1..=c.grid.n_steps() {
        let quotient = c.time_quotient(n).expect("level in range");
        let est = dual_seminorm(mesh, &quotient, tol, max_iter);
        total += c.grid.step(n) * libm::pow(est.value, 4.0);
        levels.push(DtcLevel {
            level: n,
            seminorm: est.value,
            mean_pairing: est.mean_pairing,
            converged: est.converged,
        });
    }
    DtcReport { total, levels }
}

/// Uniform-in-time L^2 concentration error against an exact solution,
/// sampled at cell centres: `max_n || Pi c^n - cbar(., t_n) ||_{L^2}`.
pub fn uniform_error(mesh: &Mesh, state: &SimulationState, exact: impl Fn(Vec2, f64) -> f64) -> f64 {
    let c = &state.concentration;
    let mut worst = 0.0f64;
    for n in 0..=c.grid.n_steps() {
        let t = c.grid.node(n);
        let mut acc = 0.0;
        for (ci, cell) in mesh.cells.iter().enumerate() {
            let d = c.levels[n].cell[ci] - exact(cell.centre, t);
            acc += cell.measure * d * d;
        }
        worst = worst.max(libm::sqrt(acc));
    }
    worst
}

/// Fixed smooth test fields for the weak-gradient convergence proxy.
fn weak_test_fields() -> [fn(Vec2) -> Vec2; 3] {
    [
        |_x| Vec2::new(1.0, 0.0),
        |_x| Vec2::new(0.0, 1.0),
        |x| Vec2::new(libm::sin(core::f64::consts::PI * x.y), libm::cos(core::f64::consts::PI * x.x)),
    ]
}

/// One row of a refinement study.
#[derive(Clone, Copy, Debug)]
pub struct StudyRow {
    pub level: usize,
    pub h: f64,
    pub dt: f64,
    pub cells: usize,
    /// max_n L^2 concentration error.
    pub err_conc_uniform: f64,
    /// L^2(space-time) gradient error.
    pub err_conc_grad: f64,
    /// L^2(space-time) velocity error.
    pub err_velocity: f64,
    /// L^2(space-time) pressure error.
    pub err_pressure: f64,
    /// Largest gap between discrete and exact gradient pairings against the
    /// fixed test fields (weak-convergence proxy).
    pub weak_grad_gap: f64,
    /// Observed orders against the previous row (log ratio of errors over
    /// log ratio of h); `None` on the first row.
    pub order_conc: Option<f64>,
    pub order_velocity: Option<f64>,
    pub order_pressure: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<StudyRow>,
}

/// Errors of one completed manufactured run.
pub fn manufactured_errors(mesh: &Mesh, scenario: &Scenario, state: &SimulationState) -> StudyRow {
    let exact_c = scenario.exact_conc.as_ref().expect("manufactured scenario has exact concentration");
    let c = &state.concentration;
    let err_conc_uniform = uniform_error(mesh, state, |x, t| exact_c(x, t));

    let mut grad_sq = 0.0;
    let mut vel_sq = 0.0;
    let mut p_sq = 0.0;
    let tests = weak_test_fields();
    let mut pairings = [0.0f64; 3];
    let mut exact_pairings = [0.0f64; 3];
    for n in 1..=c.grid.n_steps() {
        let dt = c.grid.step(n);
        let t = c.grid.node(n);
        let g = discrete::gradient(mesh, &c.levels[n]);
        if let Some(exact_grad) = scenario.exact_conc_gradient.as_ref() {
            for (ci, cell) in mesh.cells.iter().enumerate() {
                for li in 0..cell.edges.len() {
                    let m = mesh.pyramid_measure(ci, li);
                    let xq = mesh.pyramid_barycentre(ci, li);
                    let diff = g.values[mesh.incidence(ci, li)] - exact_grad(xq, t);
                    grad_sq += dt * m * diff.norm_sq();
                    for (i, test) in tests.iter().enumerate() {
                        pairings[i] += dt * m * g.values[mesh.incidence(ci, li)].dot(test(xq));
                        exact_pairings[i] += dt * m * exact_grad(xq, t).dot(test(xq));
                    }
                }
            }
        }
        if let Some(exact_u) = scenario.exact_velocity.as_ref() {
            let u = &state.pressure[n - 1].velocity;
            for (ci, cell) in mesh.cells.iter().enumerate() {
                vel_sq += dt * cell.measure * (u[ci] - exact_u(cell.centre, t)).norm_sq();
            }
        }
        if let Some(exact_p) = scenario.exact_pressure.as_ref() {
            let p = &state.pressure[n - 1].p;
            // compare mean-zero representatives: remove the sampled exact
            // solution's discrete mean (a quadrature artifact)
            let sampled: Vec<f64> = mesh.cells.iter().map(|k| exact_p(k.centre, t)).collect();
            let mean: f64 = mesh.cells.iter().zip(&sampled).map(|(k, &v)| k.measure * v).sum::<f64>()
                / mesh.total_measure;
            for (ci, cell) in mesh.cells.iter().enumerate() {
                let d = p.cell[ci] - (sampled[ci] - mean);
                p_sq += dt * cell.measure * d * d;
            }
        }
    }
    let weak_grad_gap = pairings
        .iter()
        .zip(&exact_pairings)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    StudyRow {
        level: 0,
        h: mesh.h,
        dt: c.grid.max_step(),
        cells: mesh.n_cells(),
        err_conc_uniform,
        err_conc_grad: libm::sqrt(grad_sq),
        err_velocity: libm::sqrt(vel_sq),
        err_pressure: libm::sqrt(p_sq),
        weak_grad_gap,
        order_conc: None,
        order_velocity: None,
        order_pressure: None,
    }
}

/// Run a refinement study: the factory produces the mesh, scenario and time
/// grid of each level (h and dt halving by construction).
pub fn convergence_study<F>(
    levels: usize,
    solvers: &transport::RunSolvers,
    mut factory: F,
) -> Result<ConvergenceTable, (ConvergenceTable, String)>
where
    F: FnMut(usize) -> Result<(Mesh, Scenario, crate::discrete::TimeGrid), String>,
{
    let mut table = ConvergenceTable::default();
    for level in 0..levels {
        let (mesh, scenario, grid) = match factory(level) {
            Ok(x) => x,
            Err(e) => return Err((table, e)),
        };
        let state = match transport::run_simulation(&mesh, &scenario, &grid, solvers) {
            Ok(s) => s,
            Err(e) => return Err((table, alloc::format!("level {level}: {e}"))),
        };
        let mut row = manufactured_errors(&mesh, &scenario, &state);
        row.level = level;
        if let Some(prev) = table.rows.last() {
            let hr = libm::log(prev.h / row.h);
            if hr > 0.0 {
                let order = |e_prev: f64, e: f64| {
                    if e > 0.0 && e_prev > 0.0 {
                        Some(libm::log(e_prev / e) / hr)
                    } else {
                        None
                    }
                };
                row.order_conc = order(prev.err_conc_uniform, row.err_conc_uniform);
                row.order_velocity = order(prev.err_velocity, row.err_velocity);
                row.order_pressure = order(prev.err_pressure, row.err_pressure);
            }
        }
        table.rows.push(row);
    }
    Ok(table)
}
