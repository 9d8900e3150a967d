//! End-to-end steps: each reads its upstream artifacts, checks their config
//! hash and writes its own artifact into the output directory.

use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundaries::{extract_boundaries, FreeBoundaries};
use crate::config::RunConfig;
use crate::diagnostics::{regularity_report, RegularityReport, Resolution};
use crate::error::{Error, Result};
use crate::grid::{make_grid, LatticeGrid};
use crate::io;
use crate::model::{validate_assumptions, AssumptionReport, GameModel};
use crate::os_solver::{solve_vx_os_with, OsSurface};
use crate::simulate::{
    default_deviations, moment_experiment, saddle_deviation_test, stopping_time_convergence, ApproachPoint,
    ConvergenceTable, Curve, McReport, MomentReport, PathBundle, StoppingKind,
};
use crate::vi_solver::{residual_report, solve_vi_with, ResidualSummary, SolverSettings, ValueSurface};

pub const SURFACE_FILE: &str = "surface.csv";
pub const SOLVE_META_FILE: &str = "solve.json";
pub const BOUNDARIES_FILE: &str = "boundaries.csv";
pub const OS_FILE: &str = "os_surface.csv";
pub const REPORT_FILE: &str = "report.json";
pub const PLOT_FILE: &str = "plot.svg";

/// A validated configuration with its resolved model and lattice.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub hash: String,
    pub model: GameModel,
    pub grid: LatticeGrid,
    pub settings: SolverSettings,
}

pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    config.validate()?;
    let model = config.model()?;
    let grid = config.lattice(&model)?;
    Ok(Prepared { config: config.clone(), hash: config.hash(), model, grid, settings: config.settings() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveMeta {
    pub config_hash: String,
    pub model: String,
    pub grid: LatticeGrid,
    pub status: String,
    pub assumptions: AssumptionReport,
    pub residual: Option<ResidualSummary>,
    pub x_ref: f64,
    /// `v(0, x_ref)` by linear interpolation.
    pub value_at_ref: Option<f64>,
    pub max_iterations: Option<usize>,
}

/// Screens assumptions and solves the variational inequality in memory.
pub fn solve_surface(p: &Prepared) -> Result<(ValueSurface, AssumptionReport)> {
    let report = validate_assumptions(&p.model, &p.grid);
    if !report.hard_pass() {
        return Err(Error::AssumptionFailure {
            failed: report.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect(),
        });
    }
    Ok((solve_vi_with(&p.model, &p.grid, p.settings)?, report))
}

fn ensure_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

/// Writes the surface CSV and solve metadata.
pub fn cmd_solve(p: &Prepared, out: &Path) -> Result<SolveMeta> {
    ensure_dir(out)?;
    let assumptions = validate_assumptions(&p.model, &p.grid);
    let mut meta = SolveMeta {
        config_hash: p.hash.clone(),
        model: p.config.model.name.clone(),
        grid: p.grid,
        status: "assumption_failure".into(),
        assumptions,
        residual: None,
        x_ref: p.model.x_ref,
        value_at_ref: None,
        max_iterations: None,
    };
    if !meta.assumptions.hard_pass() {
        io::write_json(&out.join(SOLVE_META_FILE), &meta)?;
        return Err(Error::AssumptionFailure {
            failed: meta.assumptions.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect(),
        });
    }
    let surface = match solve_vi_with(&p.model, &p.grid, p.settings) {
        Ok(s) => s,
        Err(e) => {
            meta.status = "solver_fault".into();
            io::write_json(&out.join(SOLVE_META_FILE), &meta)?;
            return Err(e);
        }
    };
    io::write_surface_csv(&out.join(SURFACE_FILE), &surface, &p.hash)?;
    meta.status = "ok".into();
    meta.residual = Some(residual_report(&surface));
    meta.value_at_ref = Some(surface.value_at(0, p.model.x_ref));
    meta.max_iterations = surface.iterations.iter().copied().max();
    io::write_json(&out.join(SOLVE_META_FILE), &meta)?;
    Ok(meta)
}

/// Rebuilds the surface from its CSV after checking the config hash.
pub fn load_surface(p: &Prepared, out: &Path) -> Result<ValueSurface> {
    let path = out.join(SURFACE_FILE);
    let (hash, v) = io::read_surface_values(&path, &p.grid)?;
    io::check_hash(&path, &p.hash, &hash)?;
    ValueSurface::from_values(p.model, p.grid, p.settings, v)
}

pub fn load_boundaries(p: &Prepared, out: &Path) -> Result<FreeBoundaries> {
    let path = out.join(BOUNDARIES_FILE);
    let (hash, fb) = io::read_boundaries_csv(&path, &p.grid)?;
    io::check_hash(&path, &p.hash, &hash)?;
    Ok(fb)
}

pub fn cmd_boundaries(p: &Prepared, out: &Path) -> Result<FreeBoundaries> {
    let surface = load_surface(p, out)?;
    let fb = extract_boundaries(&surface)?;
    io::write_boundaries_csv(&out.join(BOUNDARIES_FILE), &fb, &p.hash)?;
    Ok(fb)
}

pub fn cmd_osolve(p: &Prepared, out: &Path) -> Result<OsSurface> {
    let fb = load_boundaries(p, out)?;
    let os = solve_vx_os_with(&p.model, &p.grid, &fb, p.settings)?;
    io::write_os_csv(&out.join(OS_FILE), &os, &p.hash)?;
    Ok(os)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Saddle,
    Convergence,
    Moments,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [Experiment::Saddle, Experiment::Convergence, Experiment::Moments];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Saddle => "saddle",
            Experiment::Convergence => "convergence",
            Experiment::Moments => "moments",
        }
    }

    pub fn file_name(self) -> String {
        format!("mc_{}.json", self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            Error::invalid("experiment", format!("unknown experiment `{s}` (saddle, convergence, moments)"))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config_hash: String,
    pub seed: u64,
    /// `sigma` started inside the continuation region.
    pub sigma_interior: ConvergenceTable,
    /// `sigma` started on the action boundary.
    pub sigma_boundary: ConvergenceTable,
    /// `tau` started inside the continuation region.
    pub tau_interior: ConvergenceTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsOutput {
    pub config_hash: String,
    pub seed: u64,
    pub n_paths: usize,
    #[serde(flatten)]
    pub report: MomentReport,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimulationOutput {
    Saddle(McReport),
    Convergence(ConvergenceReport),
    Moments(MomentsOutput),
}

pub fn run_saddle(p: &Prepared, fb: &FreeBoundaries) -> Result<McReport> {
    let c = &p.config.sim;
    let bundle = PathBundle::checked(c.master_seed, c.n_paths, p.config.dt_sim(&p.model), p.model.horizon)?;
    let delta = c.delta_nodes * p.grid.dx;
    let devs = default_deviations(delta, p.model.horizon - c.t0);
    let mut rep = saddle_deviation_test(&p.model, c.t0, p.config.x0(&p.model), fb, &bundle, &devs)?;
    rep.config_hash = p.hash.clone();
    Ok(rep)
}

pub fn run_convergence(p: &Prepared, fb: &FreeBoundaries) -> Result<ConvergenceReport> {
    let sim = &p.config.sim;
    let c = &sim.convergence;
    let bundle = PathBundle::checked(sim.master_seed, c.n_paths, p.config.dt_sim(&p.model), p.model.horizon)?;
    let t = c.target_t;
    if !(0.0..p.model.horizon).contains(&t) {
        return Err(Error::invalid("sim.convergence.target_t", "must lie in [0, T)"));
    }
    if fb.b[p.grid.nearest_level(t)].value().is_none() {
        return Err(Error::invalid("sim.convergence.target_t", "action boundary undefined at the target time"));
    }
    let a = Curve::stopping(fb, 0.0).at(t);
    let b = Curve::action(fb, 0.0).at(t);
    let y = c.interior_y.unwrap_or(p.model.x_ref);
    if !(y > a && y < b) {
        return Err(Error::invalid("sim.convergence.interior_y", format!("{y} is not between a and b at t = {t}")));
    }
    let approach = |target| ApproachPoint::geometric(target, c.eps0, c.dt0, c.levels, p.model.horizon);
    let run = |kind, target| stopping_time_convergence(&p.model, fb, kind, target, &approach(target), &bundle);
    Ok(ConvergenceReport {
        config_hash: p.hash.clone(),
        seed: sim.master_seed,
        sigma_interior: run(StoppingKind::Sigma, (t, y))?,
        sigma_boundary: run(StoppingKind::Sigma, (t, b))?,
        tau_interior: run(StoppingKind::Tau, (t, y))?,
    })
}

/// Equally spaced start points across the window, ends included.
pub fn moment_points(grid: &LatticeGrid, count: usize) -> Vec<f64> {
    let lo = if grid.x_lo == 0.0 { grid.dx } else { grid.x_lo };
    (0..count).map(|k| lo + (grid.x_hi - lo) * k as f64 / (count - 1) as f64).collect()
}

pub fn run_moments(p: &Prepared, fb: &FreeBoundaries) -> Result<MomentsOutput> {
    let sim = &p.config.sim;
    let c = &sim.moments;
    let bundle = PathBundle::checked(sim.master_seed, c.n_paths, p.config.dt_sim(&p.model), p.model.horizon)?;
    let report = moment_experiment(&p.model, fb, sim.t0, &moment_points(&p.grid, c.points), &bundle)?;
    Ok(MomentsOutput { config_hash: p.hash.clone(), seed: sim.master_seed, n_paths: c.n_paths, report })
}

pub fn cmd_simulate(p: &Prepared, out: &Path, experiment: Experiment) -> Result<SimulationOutput> {
    let fb = load_boundaries(p, out)?;
    let path = out.join(experiment.file_name());
    Ok(match experiment {
        Experiment::Saddle => {
            let r = run_saddle(p, &fb)?;
            io::write_json(&path, &r)?;
            SimulationOutput::Saddle(r)
        }
        Experiment::Convergence => {
            let r = run_convergence(p, &fb)?;
            io::write_json(&path, &r)?;
            SimulationOutput::Convergence(r)
        }
        Experiment::Moments => {
            let r = run_moments(p, &fb)?;
            io::write_json(&path, &r)?;
            SimulationOutput::Moments(r)
        }
    })
}

/// One solved level of the refinement study.
#[derive(Debug, Clone)]
pub struct Level {
    pub surface: ValueSurface,
    pub fb: FreeBoundaries,
    pub os: OsSurface,
}

impl Level {
    pub fn resolution(&self) -> Resolution<'_> {
        Resolution { surface: &self.surface, fb: &self.fb, os: Some(&self.os) }
    }
}

/// Solves every level of the refinement study, coarse to fine.
pub fn solve_levels(p: &Prepared, levels: usize) -> Result<Vec<Level>> {
    let d = &p.config.diagnostics;
    let window = p.config.window(&p.model);
    (0..levels)
        .into_par_iter()
        .map(|k| {
            let grid = make_grid(&p.model, window, d.base_nx << k, d.base_nt << k)?;
            let surface = solve_vi_with(&p.model, &grid, p.settings)?;
            let fb = extract_boundaries(&surface)?;
            let os = solve_vx_os_with(&p.model, &grid, &fb, p.settings)?;
            Ok(Level { surface, fb, os })
        })
        .collect()
}

pub fn cmd_diagnose(p: &Prepared, out: &Path, levels: Option<usize>) -> Result<RegularityReport> {
    ensure_dir(out)?;
    let k = levels.unwrap_or(p.config.diagnostics.levels);
    if k == 0 {
        return Err(Error::invalid("levels", "must be positive"));
    }
    let report = validate_assumptions(&p.model, &p.grid);
    if !report.hard_pass() {
        return Err(Error::AssumptionFailure {
            failed: report.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect(),
        });
    }
    let solved = solve_levels(p, k)?;
    let res: Vec<Resolution> = solved.iter().map(Level::resolution).collect();
    let rep = regularity_report(&res, &p.hash)?;
    io::write_json(&out.join(REPORT_FILE), &rep)?;
    Ok(rep)
}

/// Runs solve, boundaries, osolve, every experiment and the diagnostics.
pub fn run_all(p: &Prepared, out: &Path) -> Result<()> {
    cmd_solve(p, out)?;
    cmd_boundaries(p, out)?;
    cmd_osolve(p, out)?;
    for e in Experiment::ALL {
        cmd_simulate(p, out, e)?;
    }
    cmd_diagnose(p, out, None)?;
    Ok(())
}
