use serde::{Deserialize, Serialize};

use super::hitting::first_hitting_bridge;
use super::{check_start, mean_stderr, pairwise_sum, Curve, Direction, Dynamics, PathBundle};
use crate::boundaries::FreeBoundaries;
use crate::error::{Error, Result};
use crate::model::GameModel;

/// Which optimal stopping time is tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoppingKind {
    /// First time `Y` reaches `b`.
    Sigma,
    /// First time the reflected state reaches `a`.
    Tau,
}

/// One start point of an approach sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachPoint {
    /// Approach direction label: `y+`, `y-`, `t+` or `t-`.
    pub direction: String,
    pub n: usize,
    pub t: f64,
    pub y: f64,
}

impl ApproachPoint {
    /// Geometric approach from four directions: `(t, y +- eps0 2^-n)` and
    /// `(t +- dt0 2^-n, y)`, `n = 0..levels`. Time shifts leaving `[0, T)` are skipped.
    pub fn geometric(target: (f64, f64), eps0: f64, dt0: f64, levels: usize, horizon: f64) -> Vec<ApproachPoint> {
        let (t, y) = target;
        let mut out = Vec::new();
        for (dir, dt_sign, dy_sign) in [("y+", 0.0, 1.0), ("y-", 0.0, -1.0), ("t+", 1.0, 0.0), ("t-", -1.0, 0.0)] {
            let t_first = t + dt_sign * dt0;
            if !(0.0..horizon).contains(&t_first) {
                continue;
            }
            for n in 0..levels {
                let f = 0.5f64.powi(n as i32);
                out.push(ApproachPoint {
                    direction: dir.to_string(),
                    n,
                    t: t + dt_sign * dt0 * f,
                    y: y + dy_sign * eps0 * f,
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub direction: String,
    pub n: usize,
    pub t: f64,
    pub y: f64,
    /// Mean stopping time from this start point.
    pub mean_time: f64,
    /// Mean `|time_n - time|` against the target on common noise.
    pub mean_abs_diff: f64,
    pub stderr_abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub kind: StoppingKind,
    pub target_t: f64,
    pub target_y: f64,
    pub target_mean_time: f64,
    pub n_paths: usize,
    pub dt_sim: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Rows of one direction, ordered by `n`.
    pub fn direction(&self, dir: &str) -> Vec<&ConvergenceRow> {
        let mut rows: Vec<&ConvergenceRow> = self.rows.iter().filter(|r| r.direction == dir).collect();
        rows.sort_by_key(|r| r.n);
        rows
    }

    pub fn directions(&self) -> Vec<String> {
        let mut d: Vec<String> = self.rows.iter().map(|r| r.direction.clone()).collect();
        d.dedup();
        d
    }

    /// True when `key` is non-increasing along every direction.
    pub fn monotone_by<F: Fn(&ConvergenceRow) -> f64>(&self, key: F) -> bool {
        self.directions().iter().all(|d| self.direction(d).windows(2).all(|w| key(w[1]) <= key(w[0])))
    }

    /// Largest value of `key` at the last level of each direction.
    pub fn final_max<F: Fn(&ConvergenceRow) -> f64>(&self, key: F) -> f64 {
        self.directions().iter().filter_map(|d| self.direction(d).last().map(|r| key(r))).fold(0.0, f64::max)
    }
}

/// Hitting time of one start point on common noise `z` and uniforms `u`.
#[allow(clippy::too_many_arguments)]
fn stopping_time(
    kind: StoppingKind,
    model: &GameModel,
    t0: f64,
    y0: f64,
    a: &Curve,
    b: &Curve,
    bundle: &PathBundle,
    z: &[f64],
    u: &[f64],
) -> f64 {
    let steps = bundle.steps_from(t0);
    let n = steps.len();
    let mut times = Vec::with_capacity(n + 1);
    let mut xs = Vec::with_capacity(n + 1);
    let mut s = 0.0;
    times.push(0.0);
    let (dynamics, mut x) = match kind {
        StoppingKind::Sigma => (Dynamics::Y, y0),
        StoppingKind::Tau => (Dynamics::X0, y0.min(b.at(t0))),
    };
    xs.push(x);
    for (k, h) in steps.iter().enumerate() {
        s += h;
        let (next, _) = dynamics.euler_step(model, x, *h, h.sqrt() * z[k]);
        x = match kind {
            StoppingKind::Sigma => next,
            StoppingKind::Tau => next.min(b.at(t0 + s)),
        };
        times.push(s);
        xs.push(x);
    }
    let sigma: Vec<f64> = xs.iter().map(|&x| model.sigma(x)).collect();
    let (curve, dir) = match kind {
        StoppingKind::Sigma => (b.sample(t0, &times), Direction::Up),
        StoppingKind::Tau => (a.sample(t0, &times), Direction::Down),
    };
    first_hitting_bridge(&times, &xs, &curve, &sigma, u, dir).elapsed
}

/// Mean stopping times along an approach sequence on common noise.
///
/// Every start point uses the same normals and uniforms, indexed by elapsed
/// step, so differences are pathwise.
pub fn stopping_time_convergence(
    model: &GameModel,
    fb: &FreeBoundaries,
    kind: StoppingKind,
    target: (f64, f64),
    approach: &[ApproachPoint],
    bundle: &PathBundle,
) -> Result<ConvergenceTable> {
    check_start(model, target.0, target.1, bundle)?;
    for p in approach {
        check_start(model, p.t, p.y, bundle)?;
    }
    if approach.is_empty() {
        return Err(Error::invalid("sim.approach", "approach sequence is empty"));
    }
    let a = Curve::stopping(fb, 0.0);
    let b = Curve::action(fb, 0.0);
    let t_min = approach.iter().map(|p| p.t).fold(target.0, f64::min);
    let n_max = bundle.steps_from(t_min).len();
    let per_path: Vec<Vec<f64>> = bundle.map_paths(|p| {
        let mut z = vec![0.0; n_max];
        let mut u = vec![0.0; n_max];
        bundle.fill_normals(p, &mut z);
        bundle.fill_uniforms(p, &mut u);
        let mut out = Vec::with_capacity(approach.len() + 1);
        out.push(stopping_time(kind, model, target.0, target.1, &a, &b, bundle, &z, &u));
        for ap in approach {
            out.push(stopping_time(kind, model, ap.t, ap.y, &a, &b, bundle, &z, &u));
        }
        out
    });
    let column = |c: usize| -> Vec<f64> { per_path.iter().map(|row| row[c]).collect() };
    let base = column(0);
    let rows = approach
        .iter()
        .enumerate()
        .map(|(k, ap)| {
            let times = column(k + 1);
            let diffs: Vec<f64> = times.iter().zip(&base).map(|(s, b)| (s - b).abs()).collect();
            let (mean_abs_diff, stderr_abs_diff) = mean_stderr(&diffs);
            ConvergenceRow {
                direction: ap.direction.clone(),
                n: ap.n,
                t: ap.t,
                y: ap.y,
                mean_time: pairwise_sum(&times) / times.len() as f64,
                mean_abs_diff,
                stderr_abs_diff,
            }
        })
        .collect();
    Ok(ConvergenceTable {
        kind,
        target_t: target.0,
        target_y: target.1,
        target_mean_time: pairwise_sum(&base) / base.len() as f64,
        n_paths: bundle.n_paths,
        dt_sim: bundle.dt_sim,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub x0: f64,
    /// `E[sup_s |X_s|^2 + |nu_{T-t}|^2]` on the reflected path.
    pub second_moment: f64,
    pub stderr: f64,
    /// `E[|nu_{T-t}|^2]` alone.
    pub control_moment: f64,
    pub control_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub t0: f64,
    pub rows: Vec<MomentRow>,
    /// Least-squares slope of `log second_moment` against `log(1 + x0^2)`.
    pub exponent: f64,
    /// Same fit for the control moment alone.
    pub control_exponent: f64,
    /// Smallest `K` with `second_moment <= K (1 + x0^2)` on the sampled points.
    pub k2: f64,
}

fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(_, y)| **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Second moments of the reflected state and control for several start points.
pub fn moment_experiment(
    model: &GameModel,
    fb: &FreeBoundaries,
    t0: f64,
    x0s: &[f64],
    bundle: &PathBundle,
) -> Result<MomentReport> {
    let b = Curve::action(fb, 0.0);
    let mut rows = Vec::with_capacity(x0s.len());
    for &x0 in x0s {
        check_start(model, t0, x0, bundle)?;
        let steps = bundle.steps_from(t0);
        let barrier = b.sample(t0, &{
            let mut e = vec![0.0];
            let mut s = 0.0;
            for h in &steps {
                s += h;
                e.push(s);
            }
            e
        });
        let per_path: Vec<(f64, f64)> = bundle.map_paths(|p| {
            let mut z = vec![0.0; steps.len()];
            bundle.fill_normals(p, &mut z);
            let mut x = x0.min(barrier[0]);
            let mut nu = (x0 - barrier[0]).max(0.0);
            let mut sup = x * x;
            let mut absorbed = false;
            for (k, h) in steps.iter().enumerate() {
                if absorbed {
                    break;
                }
                let (next, hit) = Dynamics::X0.euler_step(model, x, *h, h.sqrt() * z[k]);
                absorbed = hit;
                x = if next > barrier[k + 1] && !hit {
                    nu += next - barrier[k + 1];
                    barrier[k + 1]
                } else {
                    next
                };
                sup = sup.max(x * x);
            }
            (sup + nu * nu, nu * nu)
        });
        let total: Vec<f64> = per_path.iter().map(|p| p.0).collect();
        let control: Vec<f64> = per_path.iter().map(|p| p.1).collect();
        let (second_moment, stderr) = mean_stderr(&total);
        let (control_moment, control_stderr) = mean_stderr(&control);
        rows.push(MomentRow { x0, second_moment, stderr, control_moment, control_stderr });
    }
    let abscissa: Vec<f64> = rows.iter().map(|r| 1.0 + r.x0 * r.x0).collect();
    let exponent = log_log_slope(&abscissa, &rows.iter().map(|r| r.second_moment).collect::<Vec<_>>());
    let control_exponent = log_log_slope(&abscissa, &rows.iter().map(|r| r.control_moment).collect::<Vec<_>>());
    let k2 = rows.iter().map(|r| r.second_moment / (1.0 + r.x0 * r.x0)).fold(0.0, f64::max);
    Ok(MomentReport { t0, rows, exponent, control_exponent, k2 })
}
