//! CSV report writers. Every file starts with a `#`-prefixed provenance
//! block (library version and config echo) so artifacts are reproducible;
//! numeric cells use a fixed scientific format so reruns are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use hmm_core::diagnostics::{ConvergenceTable, DtcReport, EnergyReport, MassLedgerRow};
use hmm_core::transport::StepLog;

use crate::CliError;

pub fn provenance_block(echo: &[String]) -> String {
    let mut out = String::new();
    writeln!(out, "# hmm {}", crate::VERSION).expect("string write");
    for line in echo {
        writeln!(out, "# config: {line}").expect("string write");
    }
    out
}

fn num(v: f64) -> String {
    format!("{v:.17e}")
}

pub fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::input(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, content)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

pub fn run_log_csv(echo: &[String], log: &[StepLog]) -> String {
    let mut out = provenance_block(echo);
    out.push_str(
        "level,time,pressure_iterations,pressure_residual,transport_iterations,transport_residual,conc_min,conc_max\n",
    );
    for row in log {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.level,
            num(row.time),
            row.pressure_stats.iterations,
            num(row.pressure_stats.residual),
            row.transport_stats.iterations,
            num(row.transport_stats.residual),
            num(row.conc_min),
            num(row.conc_max),
        )
        .expect("string write");
    }
    out
}

pub fn mass_ledger_csv(echo: &[String], rows: &[MassLedgerRow]) -> String {
    let mut out = provenance_block(echo);
    out.push_str("level,time,storage_change,injected,produced,forcing,residual\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.level,
            num(r.time),
            num(r.storage_change),
            num(r.injected),
            num(r.produced),
            num(r.forcing),
            num(r.residual),
        )
        .expect("string write");
    }
    out
}

pub fn energy_csv(echo: &[String], report: &EnergyReport) -> String {
    let mut out = provenance_block(echo);
    writeln!(out, "# initial_energy,{}", num(report.initial)).expect("string write");
    out.push_str(
        "level,time,kinetic,injection_work,well_dissipation,diffusion_dissipation,residual\n",
    );
    for l in &report.levels {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            l.level,
            num(l.time),
            num(l.kinetic),
            num(l.injection_work),
            num(l.well_dissipation),
            num(l.diffusion_dissipation),
            num(l.residual),
        )
        .expect("string write");
    }
    out
}

pub fn convergence_csv(echo: &[String], table: &ConvergenceTable) -> String {
    let mut out = provenance_block(echo);
    out.push_str(
        "level,h,dt,cells,err_conc_uniform,err_conc_grad,err_velocity,err_pressure,weak_grad_gap,order_conc,order_velocity,order_pressure\n",
    );
    let opt = |o: Option<f64>| o.map(num).unwrap_or_default();
    for r in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.level,
            num(r.h),
            num(r.dt),
            r.cells,
            num(r.err_conc_uniform),
            num(r.err_conc_grad),
            num(r.err_velocity),
            num(r.err_pressure),
            num(r.weak_grad_gap),
            opt(r.order_conc),
            opt(r.order_velocity),
            opt(r.order_pressure),
        )
        .expect("string write");
    }
    out
}

pub fn dtc_csv(echo: &[String], report: &DtcReport) -> String {
    let mut out = provenance_block(echo);
    writeln!(out, "# quartic_integral,{}", num(report.total)).expect("string write");
    out.push_str("level,seminorm,mean_pairing,converged\n");
    for l in &report.levels {
        writeln!(out, "{},{},{},{}", l.level, num(l.seminorm), num(l.mean_pairing), l.converged)
            .expect("string write");
    }
    out
}
