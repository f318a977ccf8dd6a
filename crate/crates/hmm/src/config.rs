//! Flat `key = value` run configuration with dotted section keys.
//!
//! Unknown keys are rejected so typos surface immediately. Values are plain
//! scalars, names, paths or inline coefficient expressions (see [`crate::expr`]).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hmm_core::discrete::TimeGrid;
use hmm_core::geometry::{SymTensor2, Vec2};
use hmm_core::linalg::{SolverConfig, SolverMethod};
use hmm_core::mesh::{
    generate_perturbed_mesh, generate_rect_mesh, generate_tri_mesh, Mesh, Rect,
};
use hmm_core::scenario::{preset, preset_names, Scenario};
use hmm_core::transport::RunSolvers;

use crate::expr::{Bindings, Expr};
use crate::CliError;

/// One parsed configuration file: ordered key/value pairs plus provenance.
#[derive(Clone, Debug)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
    /// Original lines, for artifact echoes.
    echo: Vec<String>,
    base_dir: PathBuf,
}

const KNOWN_KEYS: &[&str] = &[
    "mesh.kind",
    "mesh.nx",
    "mesh.ny",
    "mesh.amplitude",
    "mesh.seed",
    "mesh.path",
    "scenario.preset",
    "scenario.porosity",
    "scenario.porosity_lower",
    "scenario.mobility",
    "scenario.dispersion",
    "scenario.dispersion_coercivity",
    "scenario.dispersion_bound",
    "scenario.injected_conc",
    "scenario.initial_conc",
    "scenario.injection",
    "scenario.production",
    "scenario.horizon",
    "time.steps",
    "time.nodes",
    "solver.pressure.method",
    "solver.pressure.tol",
    "solver.pressure.max_iter",
    "solver.transport.method",
    "solver.transport.tol",
    "solver.transport.max_iter",
    "output.dir",
    "output.field_stride",
];

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<RunConfig, CliError> {
        let mut entries = BTreeMap::new();
        let mut echo = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            echo.push(raw.to_owned());
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::input(format!("config line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(CliError::input(format!(
                    "config line {}: unknown key '{key}'",
                    lineno + 1
                )));
            }
            if entries.insert(key.to_owned(), value.to_owned()).is_some() {
                return Err(CliError::input(format!(
                    "config line {}: duplicate key '{key}'",
                    lineno + 1
                )));
            }
        }
        Ok(RunConfig { entries, echo, base_dir: base_dir.to_owned() })
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new(".")).to_owned();
        RunConfig::parse(&text, &base)
    }

    /// Original config lines, for reproducibility echoes in artifacts.
    pub fn echo_lines(&self) -> &[String] {
        &self.echo
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key).ok_or_else(|| CliError::input(format!("missing config key '{key}'")))
    }

    fn get_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| CliError::input(format!("config key '{key}': not a number: '{v}'")))
            })
            .transpose()
    }

    fn get_usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| CliError::input(format!("config key '{key}': not a count: '{v}'")))
            })
            .transpose()
    }

    pub fn build_mesh(&self) -> Result<Mesh, CliError> {
        let kind = self.get("mesh.kind").unwrap_or("rect");
        let nx = self.get_usize("mesh.nx")?.unwrap_or(16);
        let ny = self.get_usize("mesh.ny")?.unwrap_or(nx);
        match kind {
            "rect" => generate_rect_mesh(nx, ny, Rect::UNIT).map_err(CliError::model_from),
            "tri" => generate_tri_mesh(nx, ny, Rect::UNIT).map_err(CliError::model_from),
            "perturbed" => {
                let amplitude = self.get_f64("mesh.amplitude")?.unwrap_or(0.2);
                let seed = self.get_usize("mesh.seed")?.unwrap_or(1) as u64;
                generate_perturbed_mesh(nx, ny, Rect::UNIT, amplitude, seed)
                    .map_err(CliError::model_from)
            }
            "file" => {
                let rel = self.require("mesh.path")?;
                let path = self.base_dir.join(rel);
                crate::mesh_io::read_mesh(&path)
            }
            other => Err(CliError::input(format!("mesh.kind '{other}' is not one of rect, tri, perturbed, file"))),
        }
    }

    pub fn build_scenario(&self) -> Result<Scenario, CliError> {
        if let Some(name) = self.get("scenario.preset") {
            let mut scenario = preset(name).ok_or_else(|| {
                CliError::input(format!(
                    "unknown preset '{name}' (available: {})",
                    preset_names().join(", ")
                ))
            })?;
            if let Some(h) = self.get_f64("scenario.horizon")? {
                scenario.horizon = h;
            }
            return Ok(scenario);
        }
        self.build_inline_scenario()
    }

    fn expr(&self, key: &str, default: &str) -> Result<Expr, CliError> {
        let src = self.get(key).unwrap_or(default);
        Expr::parse(src)
            .map_err(|e| CliError::input(format!("config key '{key}': {e}")))
    }

    fn build_inline_scenario(&self) -> Result<Scenario, CliError> {
        let porosity = self.expr("scenario.porosity", "1")?;
        let mobility = self.expr("scenario.mobility", "1")?;
        let dispersion = self.expr("scenario.dispersion", "1 + u")?;
        let injected = self.expr("scenario.injected_conc", "1")?;
        let initial = self.expr("scenario.initial_conc", "0")?;
        let injection = self.expr("scenario.injection", "0")?;
        let production = self.expr("scenario.production", "0")?;
        let horizon = self.get_f64("scenario.horizon")?.unwrap_or(1.0);
        let porosity_lower = self.get_f64("scenario.porosity_lower")?.unwrap_or(1.0);
        let coercivity = self.get_f64("scenario.dispersion_coercivity")?.unwrap_or(1.0);
        let bound = self.get_f64("scenario.dispersion_bound")?.unwrap_or(1.0);
        let at = |e: &Expr, x: Vec2, t: f64| e.eval(&Bindings { x: x.x, y: x.y, t, ..Bindings::default() });
        Ok(Scenario {
            name: "inline".into(),
            porosity: {
                let e = porosity;
                Box::new(move |x| at(&e, x, 0.0))
            },
            porosity_lower,
            mobility: {
                let e = mobility;
                Box::new(move |x, c| {
                    SymTensor2::isotropic(e.eval(&Bindings { x: x.x, y: x.y, c, ..Bindings::default() }))
                })
            },
            dispersion: {
                let e = dispersion;
                Box::new(move |x, zeta: Vec2| {
                    SymTensor2::isotropic(e.eval(&Bindings {
                        x: x.x,
                        y: x.y,
                        u: zeta.norm(),
                        ..Bindings::default()
                    }))
                })
            },
            dispersion_coercivity: coercivity,
            dispersion_bound: bound,
            injected_conc: {
                let e = injected;
                Box::new(move |x, t| at(&e, x, t))
            },
            initial_conc: {
                let e = initial;
                Box::new(move |x| at(&e, x, 0.0))
            },
            injection: {
                let e = injection;
                Box::new(move |x, t| at(&e, x, t))
            },
            production: {
                let e = production;
                Box::new(move |x, t| at(&e, x, t))
            },
            horizon,
            forcing_pressure: None,
            forcing_conc: None,
            exact_pressure: None,
            exact_conc: None,
            exact_conc_gradient: None,
            exact_velocity: None,
        })
    }

    pub fn build_time_grid(&self, horizon: f64) -> Result<TimeGrid, CliError> {
        if let Some(list) = self.get("time.nodes") {
            let nodes: Result<Vec<f64>, _> = list.split_whitespace().map(|v| v.parse::<f64>()).collect();
            let nodes =
                nodes.map_err(|_| CliError::input("time.nodes: not a list of numbers".into()))?;
            return TimeGrid::from_nodes(nodes).map_err(CliError::model_from);
        }
        let steps = self.get_usize("time.steps")?.unwrap_or(50);
        TimeGrid::uniform(horizon, steps).map_err(CliError::model_from)
    }

    pub fn time_steps(&self) -> Result<usize, CliError> {
        Ok(self.get_usize("time.steps")?.unwrap_or(50))
    }

    fn solver(&self, section: &str, default: SolverConfig) -> Result<SolverConfig, CliError> {
        let mut cfg = default;
        if let Some(m) = self.get(&format!("solver.{section}.method")) {
            cfg.method = match m {
                "cg" => SolverMethod::ConjugateGradient,
                "bicgstab" => SolverMethod::BiCgStab,
                "direct" => SolverMethod::Direct,
                other => {
                    return Err(CliError::input(format!(
                        "solver.{section}.method '{other}' is not one of cg, bicgstab, direct"
                    )))
                }
            };
        }
        if let Some(tol) = self.get_f64(&format!("solver.{section}.tol"))? {
            cfg.tol = tol;
        }
        if let Some(it) = self.get_usize(&format!("solver.{section}.max_iter"))? {
            cfg.max_iter = Some(it);
        }
        Ok(cfg)
    }

    pub fn build_solvers(&self) -> Result<RunSolvers, CliError> {
        let defaults = RunSolvers::default();
        Ok(RunSolvers {
            pressure: self.solver("pressure", defaults.pressure)?,
            transport: self.solver("transport", defaults.transport)?,
        })
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(self.get("output.dir").unwrap_or("out"))
    }

    /// Write field files every this many levels (the final level is always
    /// written); 0 disables field output.
    pub fn field_stride(&self) -> Result<usize, CliError> {
        Ok(self.get_usize("output.field_stride")?.unwrap_or(10))
    }
}
