//! Subcommand implementations: run, converge, check-mesh.

use std::path::Path;

use hmm_core::diagnostics;
use hmm_core::mesh::{check_admissibility, refine_uniform, Mesh};
use hmm_core::pressure::PressureError;
use hmm_core::scenario::Scenario;
use hmm_core::transport::{run_simulation, SimulationError, SimulationState};

use crate::config::RunConfig;
use crate::report;
use crate::vtk::{write_vtk, CellScalars};
use crate::CliError;

fn classify(e: SimulationError) -> CliError {
    match &e {
        SimulationError::InvalidScenario(_) => CliError::model(e.to_string()),
        SimulationError::Pressure { source: PressureError::Solver(_), .. } => {
            CliError::solver(e.to_string())
        }
        SimulationError::Pressure { .. } => CliError::model(e.to_string()),
        SimulationError::Transport { .. } => CliError::solver(e.to_string()),
        SimulationError::Assembly { .. } => CliError::model(e.to_string()),
        SimulationError::EnergyViolation { .. } => CliError::model(e.to_string()),
    }
}

fn write_fields(
    config: &RunConfig,
    mesh: &Mesh,
    state: &SimulationState,
    out_dir: &Path,
) -> Result<usize, CliError> {
    let stride = config.field_stride()?;
    if stride == 0 {
        return Ok(0);
    }
    let n_steps = state.concentration.grid.n_steps();
    let mut written = 0;
    // every stride-th level, plus the final level exactly once
    let mut levels: Vec<usize> = (0..=n_steps).step_by(stride).collect();
    if levels.last() != Some(&n_steps) {
        levels.push(n_steps);
    }
    for level in levels {
        let conc = &state.concentration.levels[level].cell;
        // pressure/velocity of the slab ending at this level (level 0 has none)
        let (pressure, velocity) = if level == 0 {
            (None, None)
        } else {
            let sol = &state.pressure[level - 1];
            (Some(&sol.p.cell), Some(sol.velocity.as_slice()))
        };
        let mut scalars = vec![CellScalars { name: "concentration", values: conc }];
        if let Some(p) = pressure {
            scalars.push(CellScalars { name: "pressure", values: p });
        }
        let title = format!("hmm fields, time level {level}");
        let text = write_vtk(mesh, &scalars, velocity, &title);
        report::write_file(&out_dir.join(format!("fields_{level:05}.vtk")), &text)?;
        written += 1;
    }
    Ok(written)
}

pub fn cmd_run(config: &RunConfig) -> Result<(), CliError> {
    let mesh = config.build_mesh()?;
    let scenario = config.build_scenario()?;
    let grid = config.build_time_grid(scenario.horizon)?;
    let solvers = config.build_solvers()?;
    let state = run_simulation(&mesh, &scenario, &grid, &solvers).map_err(classify)?;
    let out_dir = config.output_dir();
    let echo = config.echo_lines();

    report::write_file(&out_dir.join("run_log.csv"), &report::run_log_csv(echo, &state.log))?;
    let ledger = diagnostics::mass_ledger(&mesh, &scenario, &state);
    report::write_file(&out_dir.join("mass_ledger.csv"), &report::mass_ledger_csv(echo, &ledger))?;
    if !scenario.is_manufactured() {
        // the inequality was already asserted during the run
        let energy = diagnostics::energy_report(&mesh, &scenario, &state)
            .map_err(|e| CliError::model(e.to_string()))?;
        report::write_file(&out_dir.join("energy.csv"), &report::energy_csv(echo, &energy))?;
    }
    let fields = write_fields(config, &mesh, &state, &out_dir)?;

    println!(
        "run complete: {} cells, {} steps, {} field file(s), artifacts in {}",
        mesh.n_cells(),
        grid.n_steps(),
        fields,
        out_dir.display()
    );
    Ok(())
}

fn scenario_for_study(config: &RunConfig) -> Result<Scenario, CliError> {
    let scenario = config.build_scenario()?;
    if scenario.exact_conc.is_none() || !scenario.is_manufactured() {
        return Err(CliError::model(format!(
            "convergence studies need a manufactured scenario with an exact solution; '{}' has none",
            scenario.name
        )));
    }
    Ok(scenario)
}

pub fn cmd_converge(config: &RunConfig, levels: usize) -> Result<(), CliError> {
    if levels < 3 {
        return Err(CliError::input(format!("a study needs at least 3 levels, got {levels}")));
    }
    scenario_for_study(config)?;
    let base_mesh = config.build_mesh()?;
    let base_steps = config.time_steps()?;
    let solvers = config.build_solvers()?;

    let table = diagnostics::convergence_study(levels, &solvers, |level| {
        let mut mesh = base_mesh.clone();
        for _ in 0..level {
            mesh = refine_uniform(&mesh).map_err(|e| e.to_string())?;
        }
        let scenario = scenario_for_study(config).map_err(|e| e.to_string())?;
        let steps = base_steps << level;
        let grid = hmm_core::discrete::TimeGrid::uniform(scenario.horizon, steps)
            .map_err(|e| e.to_string())?;
        Ok((mesh, scenario, grid))
    })
    .map_err(|(_, msg)| CliError::model(msg))?;

    let out_dir = config.output_dir();
    report::write_file(
        &out_dir.join("convergence.csv"),
        &report::convergence_csv(config.echo_lines(), &table),
    )?;
    println!("level     h        dt     cells   uniform_conc_err  order");
    for r in &table.rows {
        println!(
            "{:>5} {:>9.3e} {:>9.3e} {:>6} {:>16.6e}  {}",
            r.level,
            r.h,
            r.dt,
            r.cells,
            r.err_conc_uniform,
            r.order_conc.map(|o| format!("{o:.2}")).unwrap_or_else(|| "-".into()),
        );
    }
    println!("table written to {}", out_dir.join("convergence.csv").display());
    Ok(())
}

pub fn cmd_check_mesh(path: &Path) -> Result<(), CliError> {
    let mesh = crate::mesh_io::read_mesh(path)?;
    let quality = check_admissibility(&mesh).map_err(CliError::model_from)?;
    println!("mesh ok: {} cells, {} edges, {} vertices", mesh.n_cells(), mesh.n_edges(), mesh.vertices.len());
    println!("h (max cell diameter): {:.6e}", quality.h);
    println!("max diam/dist ratio:   {:.6e}", quality.max_diam_over_dist);
    println!("min centre-edge dist:  {:.6e}", quality.min_dist);
    println!("max edges per cell:    {}", quality.max_edges_per_cell);
    Ok(())
}
