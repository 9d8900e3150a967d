use serde::{Deserialize, Serialize};

use super::{check_start, mean_stderr, Curve, Dynamics, PathBundle};
use crate::boundaries::FreeBoundaries;
use crate::error::{Error, Result};
use crate::model::GameModel;

/// How the stopper chooses `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StopperRule {
    /// First time the controlled state is at or below `a + delta`.
    Boundary { delta: f64 },
    /// First step at or after elapsed time `s`.
    FixedTime(f64),
    /// Stop at the horizon.
    Never,
}

/// How the controller acts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ControllerRule {
    /// Reflect downward at `b + delta`.
    Reflect {
        delta: f64,
    },
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviationSide {
    /// The stopper deviates; the payoff must not rise.
    Stopper,
    /// The controller deviates; the payoff must not fall.
    Controller,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub label: String,
    pub side: DeviationSide,
    pub stopper: StopperRule,
    pub controller: ControllerRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub label: String,
    pub estimate: f64,
    pub stderr: f64,
    /// Mean paired difference against the saddle strategies.
    pub diff: f64,
    pub diff_stderr: f64,
    pub z: f64,
    pub side: DeviationSide,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub estimate: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub rows: Vec<McRow>,
    pub config_hash: String,
}

impl McReport {
    pub fn all_rows_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Significance multiple for the one-sided saddle inequalities.
pub const SADDLE_Z: f64 = 4.0;

/// The eight default deviations: stopping at `a +- delta`, at fixed times
/// `0`, `(T - t0) / 2`, `T - t0`, reflecting at `b +- delta`, and no control.
pub fn default_deviations(delta: f64, span: f64) -> Vec<Deviation> {
    let reflect = ControllerRule::Reflect { delta: 0.0 };
    let stop = StopperRule::Boundary { delta: 0.0 };
    let s = |label: &str, rule| Deviation {
        label: label.to_string(),
        side: DeviationSide::Stopper,
        stopper: rule,
        controller: reflect,
    };
    let c = |label: &str, rule| Deviation {
        label: label.to_string(),
        side: DeviationSide::Controller,
        stopper: stop,
        controller: rule,
    };
    vec![
        s("stop at a+delta", StopperRule::Boundary { delta }),
        s("stop at a-delta", StopperRule::Boundary { delta: -delta }),
        s("stop immediately", StopperRule::FixedTime(0.0)),
        s("stop at half horizon", StopperRule::FixedTime(0.5 * span)),
        s("stop at horizon", StopperRule::FixedTime(span)),
        c("reflect at b+delta", ControllerRule::Reflect { delta }),
        c("reflect at b-delta", ControllerRule::Reflect { delta: -delta }),
        c("no control", ControllerRule::Null),
    ]
}

/// Deterministic per-start quantities shared by every path.
struct Schedule {
    steps: Vec<f64>,
    elapsed: Vec<f64>,
    disc: Vec<f64>,
    h_time: Vec<f64>,
    g: Vec<f64>,
}

impl Schedule {
    fn new(model: &GameModel, t0: f64, bundle: &PathBundle) -> Self {
        let steps = bundle.steps_from(t0);
        let mut elapsed = Vec::with_capacity(steps.len() + 1);
        let mut s = 0.0;
        elapsed.push(s);
        for h in &steps {
            s += h;
            elapsed.push(s);
        }
        let disc = elapsed.iter().map(|s| (-model.r * s).exp()).collect();
        let h_time = elapsed.iter().map(|s| model.h_time(t0 + s)).collect();
        let g = elapsed.iter().map(|s| model.g(t0 + s)).collect();
        Schedule { steps, elapsed, disc, h_time, g }
    }
}

/// A rule pair resolved against the step grid.
struct Scenario {
    stop_curve: Option<Vec<f64>>,
    stop_step: usize,
    reflect: Option<Vec<f64>>,
}

impl Scenario {
    fn resolve(
        stopper: StopperRule,
        controller: ControllerRule,
        fb: Option<&FreeBoundaries>,
        t0: f64,
        sched: &Schedule,
    ) -> Result<Self> {
        let n = sched.steps.len();
        let need =
            |what: &str| fb.ok_or_else(|| Error::invalid("sim.rules", format!("{what} needs extracted boundaries")));
        let (stop_curve, stop_step) = match stopper {
            StopperRule::Boundary { delta } => {
                let curve = Curve::stopping(need("boundary stopping")?, delta);
                (Some(curve.sample(t0, &sched.elapsed)), n)
            }
            StopperRule::FixedTime(s) => {
                if s.is_nan() || s < 0.0 {
                    return Err(Error::invalid("sim.rules", "fixed stopping time must be non-negative"));
                }
                let k = sched.elapsed.iter().position(|&e| e >= s - 1e-12 * (1.0 + s)).unwrap_or(n);
                (None, k)
            }
            StopperRule::Never => (None, n),
        };
        let reflect = match controller {
            ControllerRule::Reflect { delta } => {
                let curve = Curve::action(need("reflection")?, delta);
                Some(curve.sample(t0, &sched.elapsed))
            }
            ControllerRule::Null => None,
        };
        Ok(Scenario { stop_curve, stop_step, reflect })
    }

    /// Discounted payoff of one path driven by normals `z`.
    fn play(&self, model: &GameModel, sched: &Schedule, x0: f64, z: &[f64]) -> f64 {
        let n = sched.steps.len();
        let mut x = x0;
        let mut payoff = 0.0;
        if let Some(b) = &self.reflect {
            if x > b[0] {
                payoff += model.alpha0 * (x - b[0]);
                x = b[0];
            }
        }
        let mut absorbed = false;
        for k in 0..=n {
            let stop = k == self.stop_step || k == n || self.stop_curve.as_ref().is_some_and(|a| x <= a[k]);
            if stop {
                payoff += sched.disc[k] * sched.g[k];
                break;
            }
            let h = sched.steps[k];
            payoff += sched.disc[k] * sched.h_time[k] * model.h_space(x) * h;
            if !absorbed {
                let (next, hit) = Dynamics::X0.euler_step(model, x, h, h.sqrt() * z[k]);
                x = next;
                absorbed = hit;
                if let Some(b) = &self.reflect {
                    if !absorbed && x > b[k + 1] {
                        payoff += model.alpha0 * sched.disc[k + 1] * (x - b[k + 1]);
                        x = b[k + 1];
                    }
                }
            }
        }
        payoff
    }
}

fn scenario_payoffs(
    model: &GameModel,
    x0: f64,
    scenarios: &[Scenario],
    sched: &Schedule,
    bundle: &PathBundle,
) -> Vec<Vec<f64>> {
    let per_path: Vec<Vec<f64>> = bundle.map_paths(|p| {
        let mut z = vec![0.0; sched.steps.len()];
        bundle.fill_normals(p, &mut z);
        scenarios.iter().map(|sc| sc.play(model, sched, x0, &z)).collect()
    });
    (0..scenarios.len()).map(|s| per_path.iter().map(|row| row[s]).collect()).collect()
}

/// Monte Carlo estimate of the game payoff under a rule pair.
pub fn mc_payoff(
    model: &GameModel,
    t0: f64,
    x0: f64,
    stopper: StopperRule,
    controller: ControllerRule,
    fb: Option<&FreeBoundaries>,
    bundle: &PathBundle,
) -> Result<McReport> {
    check_start(model, t0, x0, bundle)?;
    let sched = Schedule::new(model, t0, bundle);
    let sc = Scenario::resolve(stopper, controller, fb, t0, &sched)?;
    let payoffs = scenario_payoffs(model, x0, std::slice::from_ref(&sc), &sched, bundle);
    let (estimate, stderr) = mean_stderr(&payoffs[0]);
    Ok(McReport {
        estimate,
        stderr,
        n_paths: bundle.n_paths,
        seed: bundle.master_seed,
        rows: Vec::new(),
        config_hash: String::new(),
    })
}

/// Paired comparison of each deviation against the saddle strategies
/// (stop at `a`, reflect at `b`) on common noise.
pub fn saddle_deviation_test(
    model: &GameModel,
    t0: f64,
    x0: f64,
    fb: &FreeBoundaries,
    bundle: &PathBundle,
    deviations: &[Deviation],
) -> Result<McReport> {
    check_start(model, t0, x0, bundle)?;
    let sched = Schedule::new(model, t0, bundle);
    let mut scenarios = vec![Scenario::resolve(
        StopperRule::Boundary { delta: 0.0 },
        ControllerRule::Reflect { delta: 0.0 },
        Some(fb),
        t0,
        &sched,
    )?];
    for d in deviations {
        scenarios.push(Scenario::resolve(d.stopper, d.controller, Some(fb), t0, &sched)?);
    }
    let payoffs = scenario_payoffs(model, x0, &scenarios, &sched, bundle);
    let (estimate, stderr) = mean_stderr(&payoffs[0]);
    let rows = deviations
        .iter()
        .zip(&payoffs[1..])
        .map(|(d, pay)| {
            let (est, se) = mean_stderr(pay);
            let diffs: Vec<f64> = pay.iter().zip(&payoffs[0]).map(|(p, q)| p - q).collect();
            let (diff, diff_se) = mean_stderr(&diffs);
            let z = if diff_se > 0.0 { diff / diff_se } else { 0.0 };
            let pass = match d.side {
                DeviationSide::Stopper => diff <= SADDLE_Z * diff_se,
                DeviationSide::Controller => diff >= -SADDLE_Z * diff_se,
            };
            McRow {
                label: d.label.clone(),
                estimate: est,
                stderr: se,
                diff,
                diff_stderr: diff_se,
                z,
                side: d.side,
                pass,
            }
        })
        .collect();
    Ok(McReport {
        estimate,
        stderr,
        n_paths: bundle.n_paths,
        seed: bundle.master_seed,
        rows,
        config_hash: String::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog_model;

    fn ou(overrides: &[(&str, f64)]) -> GameModel {
        let map = overrides.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        catalog_model("ou_quadratic", None, &map).unwrap()
    }

    #[test]
    fn constant_running_payoff_is_deterministic() {
        let c = 0.8;
        let m = ou(&[("c2", 0.0), ("c0", c), ("beta", 0.0), ("r", 0.0), ("g0", 0.0)]);
        let bundle = PathBundle::new(1, 500, 1.0 / 2000.0, 1.0);
        let rep = mc_payoff(&m, 0.0, 0.5, StopperRule::FixedTime(1.0), ControllerRule::Null, None, &bundle).unwrap();
        assert!((rep.estimate - c).abs() < 1e-12);
        assert!(rep.stderr < 1e-12);
    }

    #[test]
    fn unit_obstacle_without_running_payoff() {
        let m = ou(&[("c2", 0.0), ("r", 0.0)]);
        let bundle = PathBundle::new(2, 200, 0.01, 1.0);
        for rule in [StopperRule::Never, StopperRule::FixedTime(0.3), StopperRule::FixedTime(0.0)] {
            let rep = mc_payoff(&m, 0.2, 0.1, rule, ControllerRule::Null, None, &bundle).unwrap();
            assert_eq!(rep.estimate, 1.0);
        }
    }

    #[test]
    fn immediate_stop_returns_obstacle() {
        let m = ou(&[("g1", -0.3)]);
        let bundle = PathBundle::new(2, 50, 0.01, 1.0);
        let rep = mc_payoff(&m, 0.4, 0.9, StopperRule::FixedTime(0.0), ControllerRule::Null, None, &bundle).unwrap();
        assert_eq!(rep.estimate, m.g(0.4));
    }

    #[test]
    fn boundary_rules_need_boundaries() {
        let m = ou(&[]);
        let bundle = PathBundle::new(2, 10, 0.01, 1.0);
        let err = mc_payoff(&m, 0.0, 0.5, StopperRule::Boundary { delta: 0.0 }, ControllerRule::Null, None, &bundle);
        assert!(matches!(err, Err(Error::InvalidInput { .. })));
    }

    #[test]
    fn eight_default_deviations() {
        let d = default_deviations(0.04, 1.0);
        assert_eq!(d.len(), 8);
        assert_eq!(d.iter().filter(|d| d.side == DeviationSide::Stopper).count(), 5);
    }
}
