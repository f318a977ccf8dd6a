//! The implicit-Euler concentration scheme with upwinded convection, and the
//! sequential pressure-transport coupling loop.
//!
//! Each time step performs two linear solves: the pressure/flux system with
//! mobility frozen at the previous concentration, then the concentration
//! system, implicit in both its cell and edge unknowns, driven by the fresh
//! fluxes and cell velocities.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::discrete::{
    self, DiscreteField, FluxField, PyramidTensors, SpaceTimeField, TimeGrid,
};
use crate::geometry::Vec2;
use crate::linalg::{self, CsrBuilder, CsrMatrix, LinalgError, SolveStats, SolverConfig};
use crate::mesh::Mesh;
use crate::pressure::{self, PressureError, PressureSolution, PressureSources};
use crate::scenario::Scenario;

/// Positive and negative parts of `-F_{K,sigma}` (the outward volumetric
/// flow). `plus - minus == -F` and `plus * minus == 0`, exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpwindSplit {
    pub plus: f64,
    pub minus: f64,
}

/// Split the outward flow `-F_{K,sigma}` into its positive and negative
/// parts.
pub fn upwind_split(flux: f64) -> UpwindSplit {
    let outflow = -flux;
    if outflow >= 0.0 {
        UpwindSplit { plus: outflow, minus: 0.0 }
    } else {
        UpwindSplit { plus: 0.0, minus: -outflow }
    }
}

/// The upwinded convection form
/// `sum_K sum_{interior sigma = K|L} [(-F_{K,sigma})+ c_K - (-F_{K,sigma})- c_L] w_K`.
pub fn upwind_form(mesh: &Mesh, flux: &FluxField, c: &DiscreteField, w: &DiscreteField) -> f64 {
    let mut acc = 0.0;
    for &ei in &mesh.interior_edges {
        let e = &mesh.edges[ei];
        let k_side = e.side;
        let l_side = e.other_side.unwrap();
        let f_k = flux.values[mesh.incidence(k_side.cell, k_side.local)];
        let f_l = flux.values[mesh.incidence(l_side.cell, l_side.local)];
        let split_k = upwind_split(f_k);
        let split_l = upwind_split(f_l);
        acc += (split_k.plus * c.cell[k_side.cell] - split_k.minus * c.cell[l_side.cell])
            * w.cell[k_side.cell];
        acc += (split_l.plus * c.cell[l_side.cell] - split_l.minus * c.cell[k_side.cell])
            * w.cell[l_side.cell];
    }
    acc
}

/// Cell-sampled sources of one transport step, shared with the pressure
/// solve of the same level so both see identical (balanced) well densities.
#[derive(Clone, Debug)]
pub struct LevelSources {
    pub injection: Vec<f64>,
    pub production: Vec<f64>,
    pub injected_conc: Vec<f64>,
    pub forcing_pressure: Vec<f64>,
    pub forcing_conc: Vec<f64>,
}

impl LevelSources {
    /// Sample the scenario's well and forcing terms at cell centres and
    /// time `t`, then restore discrete well compatibility.
    pub fn sample(mesh: &Mesh, scenario: &Scenario, t: f64) -> Result<Self, PressureError> {
        let at = |f: &dyn Fn(Vec2, f64) -> f64| -> Vec<f64> {
            mesh.cells.iter().map(|k| f(k.centre, t)).collect()
        };
        let zero = vec![0.0; mesh.n_cells()];
        let mut sources = PressureSources {
            injection: at(&scenario.injection),
            production: at(&scenario.production),
            forcing: scenario.forcing_pressure.as_ref().map(|f| at(&**f)).unwrap_or(zero.clone()),
        };
        sources.balance(mesh)?;
        Ok(LevelSources {
            injection: sources.injection,
            production: sources.production,
            injected_conc: at(&scenario.injected_conc),
            forcing_pressure: sources.forcing,
            forcing_conc: scenario.forcing_conc.as_ref().map(|f| at(&**f)).unwrap_or(zero),
        })
    }

    pub fn as_pressure_sources(&self) -> PressureSources {
        PressureSources {
            injection: self.injection.clone(),
            production: self.production.clone(),
            forcing: self.forcing_pressure.clone(),
        }
    }
}

/// Assembled linear system of one implicit transport step, over the stacked
/// unknowns (cell values, then edge values).
pub struct TransportSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Diffusion tensors sampled for this step, kept for diagnostics.
    pub tensors: PyramidTensors,
}

/// Sample the dispersion tensor per pyramid (at the pyramid barycentre, with
/// the cell-centred velocity as its second argument).
pub fn sample_dispersion(
    mesh: &Mesh,
    scenario: &Scenario,
    velocity: &[Vec2],
) -> Result<PyramidTensors, &'static str> {
    PyramidTensors::sample(mesh, |x, cell| (scenario.dispersion)(x, velocity[cell]))
}

/// Assemble the implicit-Euler step: find `c` (cell and edge values) with
/// mass/dt + diffusion + upwind + production terms on the left and the
/// previous level, injection and manufactured forcing on the right.
pub fn assemble_transport_step(
    mesh: &Mesh,
    scenario: &Scenario,
    flux: &FluxField,
    velocity: &[Vec2],
    c_prev: &DiscreteField,
    sources: &LevelSources,
    dt: f64,
) -> Result<TransportSystem, String> {
    let n_cells = mesh.n_cells();
    let n_unknowns = n_cells + mesh.n_edges();
    let tensors = sample_dispersion(mesh, scenario, velocity).map_err(String::from)?;

    let mut builder = CsrBuilder::new(n_unknowns);
    let mut rhs = vec![0.0; n_unknowns];

    // mass, wells and sources: cell equations only
    for (ci, cell) in mesh.cells.iter().enumerate() {
        let phi = (scenario.porosity)(cell.centre);
        let m = cell.measure;
        builder.add(ci, ci, m * phi / dt + m * sources.production[ci]);
        rhs[ci] += m * phi / dt * c_prev.cell[ci]
            + m * sources.injection[ci] * sources.injected_conc[ci]
            + m * sources.forcing_conc[ci];
    }

    // upwinded convection: interior edges, cell-cell coupling
    for &ei in &mesh.interior_edges {
        let e = &mesh.edges[ei];
        let k = e.side;
        let l = e.other_side.unwrap();
        let split_k = upwind_split(flux.values[mesh.incidence(k.cell, k.local)]);
        let split_l = upwind_split(flux.values[mesh.incidence(l.cell, l.local)]);
        builder.add(k.cell, k.cell, split_k.plus);
        builder.add(k.cell, l.cell, -split_k.minus);
        builder.add(l.cell, l.cell, split_l.plus);
        builder.add(l.cell, k.cell, -split_l.minus);
    }

    // diffusion: couples each cell value with its edge values and carries
    // the only equations the edge unknowns appear in
    discrete::add_diffusion_entries(mesh, &tensors, &mut builder);

    Ok(TransportSystem { matrix: builder.build(), rhs, tensors })
}

/// Interpolate the initial concentration onto the hybrid space (level 0).
pub fn initial_condition(mesh: &Mesh, scenario: &Scenario) -> DiscreteField {
    discrete::interpolate(mesh, &*scenario.initial_conc)
}

/// Per-level run log entry.
#[derive(Clone, Copy, Debug)]
pub struct StepLog {
    pub level: usize,
    pub time: f64,
    pub pressure_stats: SolveStats,
    pub transport_stats: SolveStats,
    /// Extrema of the cell concentrations; no maximum principle holds, so
    /// overshoot outside [0, 1] is reported, never clamped.
    pub conc_min: f64,
    pub conc_max: f64,
}

/// Result of one coupled run: the concentration history, the per-level
/// pressure solutions and sampled sources, and the run log.
pub struct SimulationState {
    pub concentration: SpaceTimeField,
    /// Pressure solution of level n is at index n-1.
    pub pressure: Vec<PressureSolution>,
    /// Sources sampled (and balanced) for level n, at index n-1.
    pub sources: Vec<LevelSources>,
    pub log: Vec<StepLog>,
}

#[derive(Debug)]
pub enum SimulationError {
    InvalidScenario(String),
    Pressure { level: usize, source: PressureError },
    Transport { level: usize, source: LinalgError },
    Assembly { level: usize, detail: String },
    EnergyViolation { level: usize, residual: f64 },
}

impl fmt::Display for SimulationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimulationError::InvalidScenario(s) => write!(f, "invalid scenario: {s}"),
            SimulationError::Pressure { level, source } => {
                write!(f, "time level {level}: {source}")
            }
            SimulationError::Transport { level, source } => {
                write!(f, "time level {level}: transport solve failed: {source}")
            }
            SimulationError::Assembly { level, detail } => {
                write!(f, "time level {level}: {detail}")
            }
            SimulationError::EnergyViolation { level, residual } => {
                write!(f, "discrete energy inequality violated at level {level} (residual {residual:e})")
            }
        }
    }
}

/// Solver configurations of one run.
#[derive(Clone, Copy, Debug)]
pub struct RunSolvers {
    pub pressure: SolverConfig,
    pub transport: SolverConfig,
}

impl Default for RunSolvers {
    fn default() -> Self {
        RunSolvers { pressure: SolverConfig::cg(), transport: SolverConfig::bicgstab() }
    }
}

/// Run the sequential coupling loop over the whole time grid.
pub fn run_simulation(
    mesh: &Mesh,
    scenario: &Scenario,
    grid: &TimeGrid,
    solvers: &RunSolvers,
) -> Result<SimulationState, SimulationError> {
    scenario.validate(mesh).map_err(SimulationError::InvalidScenario)?;

    let n_cells = mesh.n_cells();
    let c0 = initial_condition(mesh, scenario);
    let mut levels = vec![c0];
    let mut pressure_levels = Vec::with_capacity(grid.n_steps());
    let mut source_levels = Vec::with_capacity(grid.n_steps());
    let mut log = Vec::with_capacity(grid.n_steps());

    for n in 1..=grid.n_steps() {
        let t = grid.node(n);
        let dt = grid.step(n);
        let c_prev = &levels[n - 1];

        let sources = LevelSources::sample(mesh, scenario, t)
            .map_err(|source| SimulationError::Pressure { level: n, source })?;
        let pressure_solution = pressure::solve_pressure(
            mesh,
            &*scenario.mobility,
            c_prev,
            &sources.as_pressure_sources(),
            &solvers.pressure,
        )
        .map_err(|source| SimulationError::Pressure { level: n, source })?;

        let system = assemble_transport_step(
            mesh,
            scenario,
            &pressure_solution.flux,
            &pressure_solution.velocity,
            c_prev,
            &sources,
            dt,
        )
        .map_err(|detail| SimulationError::Assembly { level: n, detail })?;
        let solution = linalg::solve(&system.matrix, &system.rhs, &solvers.transport)
            .map_err(|source| SimulationError::Transport { level: n, source })?;

        let c_new = DiscreteField {
            cell: solution.x[..n_cells].to_vec(),
            edge: solution.x[n_cells..].to_vec(),
        };
        let (conc_min, conc_max) = c_new
            .cell
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        log.push(StepLog {
            level: n,
            time: t,
            pressure_stats: pressure_solution.stats,
            transport_stats: solution.stats,
            conc_min,
            conc_max,
        });
        levels.push(c_new);
        pressure_levels.push(pressure_solution);
        source_levels.push(sources);
    }

    let state = SimulationState {
        concentration: SpaceTimeField { grid: grid.clone(), levels },
        pressure: pressure_levels,
        sources: source_levels,
        log,
    };

    // the discrete energy inequality is a structural property of every
    // physical run; manufactured forcings fall outside it
    if !scenario.is_manufactured() {
        crate::diagnostics::energy_report(mesh, scenario, &state)
            .map_err(|e| match e {
                crate::diagnostics::DiagnosticsError::EnergyViolation { level, residual } => {
                    SimulationError::EnergyViolation { level, residual }
                }
            })?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::TimeGrid;
    use crate::mesh::{generate_perturbed_mesh, generate_rect_mesh, Rect};
    use crate::scenario;

    #[test]
    fn upwind_split_hand_values() {
        // flux -2: outward flow 2
        assert_eq!(upwind_split(-2.0), UpwindSplit { plus: 2.0, minus: 0.0 });
        // flux 3: inward flow 3
        assert_eq!(upwind_split(3.0), UpwindSplit { plus: 0.0, minus: 3.0 });
        assert_eq!(upwind_split(0.0), UpwindSplit { plus: 0.0, minus: 0.0 });
        for f in [-1.75, 0.0, 0.3, 42.0] {
            let s = upwind_split(f);
            assert_eq!(s.plus - s.minus, -f);
            assert_eq!(s.plus * s.minus, 0.0);
            assert!(s.plus >= 0.0 && s.minus >= 0.0);
        }
    }

    #[test]
    fn upwind_form_hand_enumeration() {
        // two cells side by side, one interior edge; flow 1.5 from cell 0 to
        // cell 1 means F_{0,sigma} = -1.5 on cell 0's side
        let mesh = generate_rect_mesh(2, 1, Rect::UNIT).unwrap();
        assert_eq!(mesh.interior_edges.len(), 1);
        let e = &mesh.edges[mesh.interior_edges[0]];
        let (k, l) = (e.side, e.other_side.unwrap());
        let (from, to) = if mesh.cells[k.cell].centre.x < mesh.cells[l.cell].centre.x {
            (k, l)
        } else {
            (l, k)
        };
        let mut flux = FluxField::zeros(&mesh);
        flux.values[mesh.incidence(from.cell, from.local)] = -1.5;
        flux.values[mesh.incidence(to.cell, to.local)] = 1.5;

        let mut c = DiscreteField::zeros(&mesh);
        let mut w = DiscreteField::zeros(&mesh);
        c.cell[from.cell] = 2.0;
        c.cell[to.cell] = 5.0;
        w.cell[from.cell] = 1.0;
        w.cell[to.cell] = -3.0;
        // upwind value is the upstream cell's: 1.5 * 2.0 leaves `from` and
        // enters `to`, so the form is 1.5*2*(w_from - w_to) = 3 * 4 = 12
        assert_eq!(upwind_form(&mesh, &flux, &c, &w), 12.0);
    }

    #[test]
    fn upwind_form_conserves_mass_for_conservative_fluxes() {
        let mesh = generate_perturbed_mesh(6, 6, Rect::UNIT, 0.2, 13).unwrap();
        // arbitrary conservative flux field
        let mut flux = FluxField::zeros(&mesh);
        for (i, &ei) in mesh.interior_edges.iter().enumerate() {
            let e = &mesh.edges[ei];
            let f = libm::sin(1.0 + i as f64);
            flux.values[mesh.incidence(e.side.cell, e.side.local)] = f;
            let l = e.other_side.unwrap();
            flux.values[mesh.incidence(l.cell, l.local)] = -f;
        }
        let c = crate::discrete::interpolate(&mesh, |x| x.x * x.x + 0.3 * x.y);
        let ones = DiscreteField::constant(&mesh, 1.0);
        assert!(upwind_form(&mesh, &flux, &c, &ones).abs() < 1e-13);
    }

    #[test]
    fn still_run_stays_exactly_constant() {
        let mesh = generate_perturbed_mesh(4, 4, Rect::UNIT, 0.2, 1).unwrap();
        let scenario = scenario::still();
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let state = run_simulation(&mesh, &scenario, &grid, &RunSolvers::default()).unwrap();
        for level in &state.concentration.levels {
            for &c in &level.cell {
                assert!((c - 0.5).abs() < 1e-10);
            }
        }
        for sol in &state.pressure {
            for &f in &sol.flux.values {
                assert!(f.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn level_sources_share_balanced_wells() {
        let mesh = generate_rect_mesh(16, 16, Rect::UNIT).unwrap();
        let scenario = scenario::five_spot();
        let sources = LevelSources::sample(&mesh, &scenario, 0.0).unwrap();
        let si: f64 = mesh.cells.iter().zip(&sources.injection).map(|(k, q)| k.measure * q).sum();
        let sp: f64 = mesh.cells.iter().zip(&sources.production).map(|(k, q)| k.measure * q).sum();
        assert!((si - sp).abs() < 1e-13 * si.abs());
        let ps = sources.as_pressure_sources();
        assert_eq!(ps.injection, sources.injection);
        assert_eq!(ps.production, sources.production);
    }

    #[test]
    fn invalid_scenario_is_reported() {
        let mesh = generate_rect_mesh(4, 4, Rect::UNIT).unwrap();
        let mut scenario = scenario::still();
        scenario.initial_conc = alloc::boxed::Box::new(|_| 2.0);
        let grid = TimeGrid::uniform(1.0, 1).unwrap();
        let result = run_simulation(&mesh, &scenario, &grid, &RunSolvers::default());
        assert!(matches!(result, Err(SimulationError::InvalidScenario(_))));
    }
}
