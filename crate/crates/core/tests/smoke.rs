//! End-to-end sanity checks on coarse meshes: pressure accuracy on a
//! manufactured solution, a short coupled run, and the energy report.

use hmm_core::discrete::TimeGrid;
use hmm_core::mesh::generate_rect_mesh;
use hmm_core::pressure::{solve_pressure, PressureSources};
use hmm_core::scenario::preset;
use hmm_core::transport::{run_simulation, RunSolvers};
use hmm_core::linalg::SolverConfig;
use hmm_core::discrete::DiscreteField;

fn pressure_mms_error(n: usize) -> (f64, f64) {
    let mesh = generate_rect_mesh(n, n, hmm_core::mesh::Rect::UNIT).unwrap();
    let scenario = preset("coupled_mms").unwrap();
    let mut sources = PressureSources::zero(&mesh);
    let g = scenario.forcing_pressure.as_ref().unwrap();
    for (ci, cell) in mesh.cells.iter().enumerate() {
        sources.forcing[ci] = g(cell.centre, 0.0);
    }
    let c0 = DiscreteField::zeros(&mesh);
    let sol = solve_pressure(&mesh, &scenario.mobility, &c0, &sources, &SolverConfig::cg()).unwrap();

    let exact_p = scenario.exact_pressure.as_ref().unwrap();
    let sampled: Vec<f64> = mesh.cells.iter().map(|k| exact_p(k.centre, 0.0)).collect();
    let mean: f64 = mesh.cells.iter().zip(&sampled).map(|(k, &v)| k.measure * v).sum::<f64>()
        / mesh.total_measure;
    let mut p_err = 0.0;
    for (ci, cell) in mesh.cells.iter().enumerate() {
        let d = sol.p.cell[ci] - (sampled[ci] - mean);
        p_err += cell.measure * d * d;
    }

    let exact_u = scenario.exact_velocity.as_ref().unwrap();
    let mut u_err = 0.0;
    for (ci, cell) in mesh.cells.iter().enumerate() {
        u_err += cell.measure * (sol.velocity[ci] - exact_u(cell.centre, 0.0)).norm_sq();
    }
    (p_err.sqrt(), u_err.sqrt())
}

#[test]
fn pressure_mms_second_order() {
    let (p1, u1) = pressure_mms_error(8);
    let (p2, u2) = pressure_mms_error(16);
    let p_order = (p1 / p2).ln() / 2f64.ln();
    let u_order = (u1 / u2).ln() / 2f64.ln();
    println!("p errors {p1:.3e} {p2:.3e} order {p_order:.2}");
    println!("u errors {u1:.3e} {u2:.3e} order {u_order:.2}");
    assert!(p_order > 1.5, "pressure order {p_order}");
    assert!(u_order > 0.8, "velocity order {u_order}");
}

#[test]
fn short_five_spot_run_stays_bounded() {
    let mesh = generate_rect_mesh(8, 8, hmm_core::mesh::Rect::UNIT).unwrap();
    let scenario = preset("five_spot").unwrap();
    let grid = TimeGrid::uniform(0.5, 5).unwrap();
    let state = run_simulation(&mesh, &scenario, &grid, &RunSolvers::default()).unwrap();
    for log in &state.log {
        println!(
            "t={:.2} c in [{:.4}, {:.4}]",
            log.time, log.conc_min, log.conc_max
        );
        assert!(log.conc_min > -0.05 && log.conc_max < 1.2);
    }
}

#[test]
fn coupled_mms_short_run_tracks_exact_solution() {
    let mesh = generate_rect_mesh(16, 16, hmm_core::mesh::Rect::UNIT).unwrap();
    let scenario = preset("coupled_mms").unwrap();
    let grid = TimeGrid::uniform(0.5, 16).unwrap();
    let state = run_simulation(&mesh, &scenario, &grid, &RunSolvers::default()).unwrap();
    let exact = scenario.exact_conc.as_ref().unwrap();
    let err = hmm_core::diagnostics::uniform_error(&mesh, &state, |x, t| exact(x, t));
    println!("coupled mms uniform error {err:.4e}");
    assert!(err < 0.05, "uniform error {err}");
}
