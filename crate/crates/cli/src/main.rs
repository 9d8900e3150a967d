//! `stopctl`: solve, analyse and simulate the stopper-controller game from a JSON config.

mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stopctl_core::pipeline::{self, Experiment, Prepared, SimulationOutput, PLOT_FILE};
use stopctl_core::{Error, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "stopctl",
    version,
    about = "Numerical laboratory for a stopper-controller game with a double obstacle"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `sim.master_seed`. Changes the config hash, so pass it to every step.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the variational inequality; writes surface.csv and solve.json.
    Solve(Common),
    /// Extract a(t) and b(t) from surface.csv; writes boundaries.csv.
    Boundaries(Common),
    /// Solve the auxiliary stopping problem for v_x; writes os_surface.csv.
    Osolve(Common),
    /// Run a Monte Carlo experiment against boundaries.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// saddle, convergence or moments.
        #[arg(long)]
        experiment: String,
    },
    /// Multi-resolution regularity study; writes report.json.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// Number of refinement levels; overrides `diagnostics.levels`.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Draw surface.csv and boundaries.csv to plot.svg.
    Plot(Common),
    /// Every step in order, then the plot.
    Run(Common),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput { .. } | Error::Json(_) => 1,
        Error::AssumptionFailure { .. } => 2,
        Error::DomainViolation { .. }
        | Error::NonConvergence { .. }
        | Error::DisconnectedRegion { .. }
        | Error::GridMismatch(_) => 3,
        Error::Artifact { .. } | Error::Io(_) => 4,
    }
}

fn prepare(c: &Common) -> Result<(Prepared, PathBuf), Error> {
    let mut config = RunConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        config.sim.master_seed = seed;
    }
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from(&config.output.dir));
    Ok((pipeline::prepare(&config)?, out))
}

fn cmd_plot(p: &Prepared, out: &Path) -> Result<PathBuf, Error> {
    let surface = pipeline::load_surface(p, out)?;
    let fb = pipeline::load_boundaries(p, out)?;
    let title = format!("{} (config {})", p.config.model.name, &p.hash[..12]);
    let path = out.join(PLOT_FILE);
    std::fs::write(&path, plot::render_svg(&surface, &fb, &title))?;
    Ok(path)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Solve(c) => {
            let (p, out) = prepare(&c)?;
            let meta = pipeline::cmd_solve(&p, &out)?;
            println!(
                "solved {} on {}x{}: v(0, {}) = {:.6}",
                meta.model,
                p.grid.nx,
                p.grid.nt,
                meta.x_ref,
                meta.value_at_ref.unwrap_or(f64::NAN)
            );
        }
        Command::Boundaries(c) => {
            let (p, out) = prepare(&c)?;
            let fb = pipeline::cmd_boundaries(&p, &out)?;
            let a = fb.a.iter().filter(|a| a.value().is_some()).count();
            let b = fb.b.iter().filter(|b| b.value().is_some()).count();
            println!("boundaries: a defined on {a} levels, b on {b} of {}", fb.t.len());
        }
        Command::Osolve(c) => {
            let (p, out) = prepare(&c)?;
            let os = pipeline::cmd_osolve(&p, &out)?;
            println!(
                "auxiliary problem solved: u(0, {}) = {:.6}",
                p.model.x_ref,
                os.u.interp_row(0, (p.model.x_ref - p.grid.x_lo) / p.grid.dx)
            );
        }
        Command::Simulate { common, experiment } => {
            let (p, out) = prepare(&common)?;
            let e: Experiment = experiment.parse()?;
            match pipeline::cmd_simulate(&p, &out, e)? {
                SimulationOutput::Saddle(r) => {
                    let ok = r.rows.iter().filter(|d| d.pass).count();
                    println!(
                        "saddle: estimate {:.6} +/- {:.6}, {ok}/{} deviations consistent",
                        r.estimate,
                        r.stderr,
                        r.rows.len()
                    );
                }
                SimulationOutput::Convergence(r) => {
                    println!(
                        "convergence: interior final {:.3e}, boundary final {:.3e}",
                        r.sigma_interior.final_max(|x| x.mean_abs_diff),
                        r.sigma_boundary.final_max(|x| x.mean_time)
                    );
                }
                SimulationOutput::Moments(r) => println!("moments: growth exponent {:.3}", r.report.exponent),
            }
        }
        Command::Diagnose { common, levels } => {
            let (p, out) = prepare(&common)?;
            let rep = pipeline::cmd_diagnose(&p, &out, levels)?;
            for c in &rep.checks {
                println!("{:<28} {:?}", c.name, c.status);
            }
        }
        Command::Plot(c) => {
            let (p, out) = prepare(&c)?;
            println!("wrote {}", cmd_plot(&p, &out)?.display());
        }
        Command::Run(c) => {
            let (p, out) = prepare(&c)?;
            pipeline::run_all(&p, &out)?;
            cmd_plot(&p, &out)?;
            println!("pipeline complete in {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stopctl: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
