//! Monte Carlo engine for the uncontrolled, auxiliary and reflected diffusions.
//!
//! Every random draw is keyed on `(master_seed, path_index)` and consumed in step
//! order, so results do not depend on the parallel schedule. Reductions over
//! paths use a fixed pairwise tree in path order.

mod curve;
mod experiments;
mod hitting;
mod payoff;
mod reflect;

pub use curve::Curve;
pub use experiments::{
    moment_experiment, stopping_time_convergence, ApproachPoint, ConvergenceRow, ConvergenceTable, MomentReport,
    MomentRow, StoppingKind,
};
pub use hitting::{first_hitting, first_hitting_bridge, Direction};
pub use payoff::{
    default_deviations, mc_payoff, saddle_deviation_test, ControllerRule, Deviation, DeviationSide, McReport, McRow,
    StopperRule,
};
pub use reflect::{reflect_along_b, reflect_running_sup, ControlledPath};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DomainKind, GameModel};

/// Deterministic source of per-path Brownian increments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathBundle {
    pub master_seed: u64,
    pub n_paths: usize,
    pub dt_sim: f64,
    /// Longest simulated time span; paths never need more than `n_steps` draws.
    pub horizon: f64,
    pub n_steps: usize,
}

impl PathBundle {
    pub fn new(master_seed: u64, n_paths: usize, dt_sim: f64, horizon: f64) -> Self {
        let n_steps = steps_for(horizon, dt_sim);
        PathBundle { master_seed, n_paths, dt_sim, horizon, n_steps }
    }

    /// Validating constructor for user-facing entry points.
    pub fn checked(master_seed: u64, n_paths: usize, dt_sim: f64, horizon: f64) -> Result<Self> {
        if !(dt_sim > 0.0 && dt_sim.is_finite()) {
            return Err(Error::invalid("sim.dt_sim", "must be positive"));
        }
        if n_paths == 0 {
            return Err(Error::invalid("sim.n_paths", "must be positive"));
        }
        if horizon.is_nan() || horizon <= 0.0 {
            return Err(Error::invalid("model.params.T", "must be positive"));
        }
        Ok(Self::new(master_seed, n_paths, dt_sim, horizon))
    }

    fn stream(&self, path: usize, lane: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(2 * path as u64 + lane);
        rng
    }

    /// Standard normals for `path`; entry `k` drives step `k`.
    pub fn fill_normals(&self, path: usize, out: &mut [f64]) {
        let mut rng = self.stream(path, 0);
        for z in out.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
    }

    /// Uniforms on `(0, 1)` for `path`, used by bridge crossing tests.
    pub fn fill_uniforms(&self, path: usize, out: &mut [f64]) {
        let mut rng = self.stream(path, 1);
        for u in out.iter_mut() {
            *u = 1.0 - rng.random::<f64>();
        }
    }

    /// Time steps for a path started at `t0` and run to `horizon`: full steps of
    /// `dt_sim` and a shorter final step.
    pub fn steps_from(&self, t0: f64) -> Vec<f64> {
        step_sizes(self.horizon - t0, self.dt_sim)
    }

    /// Evaluates `f` on every path in parallel and returns the results in path order.
    pub fn map_paths<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..self.n_paths).into_par_iter().map(f).collect()
    }
}

fn steps_for(span: f64, dt: f64) -> usize {
    if span <= 0.0 {
        return 0;
    }
    let n = (span / dt).ceil() as usize;
    // Guard against a spurious extra step from rounding in span / dt.
    if n > 1 && span - (n - 1) as f64 * dt <= 1e-12 * dt {
        n - 1
    } else {
        n.max(1)
    }
}

fn step_sizes(span: f64, dt: f64) -> Vec<f64> {
    let n = steps_for(span, dt);
    (0..n).map(|k| if k + 1 < n { dt } else { span - (n - 1) as f64 * dt }).collect()
}

/// Pairwise sum in a fixed tree order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Sample mean and standard error `std / sqrt(n)`.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Which SDE a path follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dynamics {
    /// `dX = mu dt + sigma dW`.
    X0,
    /// `dY = (mu + sigma sigma_x) dt + sigma dW`.
    Y,
}

impl Dynamics {
    /// One Euler-Maruyama step. Returns the new state and whether the half-line
    /// path was absorbed at zero.
    #[inline]
    pub fn euler_step(self, model: &GameModel, x: f64, dt: f64, dw: f64) -> (f64, bool) {
        let s = model.sigma(x);
        let drift = match self {
            Dynamics::X0 => model.mu(x),
            Dynamics::Y => model.mu(x) + s * model.sigma_x(x),
        };
        let next = x + drift * dt + s * dw;
        if model.domain == DomainKind::HalfLine && next <= 0.0 {
            (0.0, true)
        } else {
            (next, false)
        }
    }
}

/// A simulated path on the step grid of its start time.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    /// Elapsed times `s_k` from the start, `s_0 = 0`.
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    /// Step at which the path was absorbed at zero (half-line only).
    pub absorbed_at: Option<usize>,
}

fn simulate(
    dynamics: Dynamics,
    model: &GameModel,
    t0: f64,
    x0: f64,
    bundle: &PathBundle,
    path: usize,
) -> Result<SimPath> {
    check_start(model, t0, x0, bundle)?;
    let steps = bundle.steps_from(t0);
    let mut z = vec![0.0; steps.len()];
    bundle.fill_normals(path, &mut z);
    let mut times = Vec::with_capacity(steps.len() + 1);
    let mut xs = Vec::with_capacity(steps.len() + 1);
    let (mut s, mut x) = (0.0, x0);
    let mut absorbed_at = None;
    times.push(s);
    xs.push(x);
    for (k, (&h, &zk)) in steps.iter().zip(&z).enumerate() {
        if absorbed_at.is_none() {
            let (next, hit) = dynamics.euler_step(model, x, h, h.sqrt() * zk);
            x = next;
            if hit {
                absorbed_at = Some(k + 1);
            }
        }
        s += h;
        times.push(s);
        xs.push(x);
    }
    Ok(SimPath { times, x: xs, absorbed_at })
}

pub(crate) fn check_start(model: &GameModel, t0: f64, x0: f64, bundle: &PathBundle) -> Result<()> {
    if bundle.dt_sim.is_nan() || bundle.dt_sim <= 0.0 {
        return Err(Error::invalid("sim.dt_sim", "must be positive"));
    }
    if !(0.0..=model.horizon).contains(&t0) {
        return Err(Error::DomainViolation { t: t0, x: x0 });
    }
    if !x0.is_finite() || (model.domain == DomainKind::HalfLine && x0 < 0.0) {
        return Err(Error::DomainViolation { t: t0, x: x0 });
    }
    if bundle.horizon.to_bits() != model.horizon.to_bits() {
        return Err(Error::invalid("sim.horizon", "bundle horizon differs from the model horizon"));
    }
    Ok(())
}

/// Path `path` of the uncontrolled state `X0` started at `(t0, x0)`.
pub fn simulate_uncontrolled(model: &GameModel, t0: f64, x0: f64, bundle: &PathBundle, path: usize) -> Result<SimPath> {
    simulate(Dynamics::X0, model, t0, x0, bundle, path)
}

/// Path `path` of the auxiliary diffusion `Y` started at `(t0, y0)`.
#[allow(non_snake_case)]
pub fn simulate_Y(model: &GameModel, t0: f64, y0: f64, bundle: &PathBundle, path: usize) -> Result<SimPath> {
    simulate(Dynamics::Y, model, t0, y0, bundle, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog_model;
    use std::collections::BTreeMap;

    #[test]
    fn step_sizes_end_exactly_at_span() {
        let s = step_sizes(1.0, 1.0 / 2000.0);
        assert_eq!(s.len(), 2000);
        let s = step_sizes(0.3337, 0.001);
        assert_eq!(s.len(), 334);
        assert!((s.iter().sum::<f64>() - 0.3337).abs() < 1e-12);
        assert!(s[333] < 0.001 && s[333] > 0.0);
        assert!(step_sizes(0.0, 0.01).is_empty());
    }

    #[test]
    fn streams_are_independent_of_order() {
        let b = PathBundle::new(42, 10, 0.01, 1.0);
        let mut first = vec![0.0; 5];
        let mut again = vec![0.0; 5];
        b.fill_normals(7, &mut first);
        let mut other = vec![0.0; 5];
        b.fill_normals(3, &mut other);
        b.fill_normals(7, &mut again);
        assert_eq!(first, again);
        assert_ne!(first, other);
        let mut u = vec![0.0; 5];
        b.fill_uniforms(7, &mut u);
        assert!(u.iter().all(|&x| x > 0.0 && x <= 1.0));
    }

    #[test]
    fn pairwise_sum_matches_exact_integers() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
        let (m, se) = mean_stderr(&[2.0, 2.0, 2.0]);
        assert_eq!((m, se), (2.0, 0.0));
    }

    #[test]
    fn zero_noise_is_deterministic() {
        let params = BTreeMap::from([("kappa".to_string(), 0.0), ("sigma".to_string(), 1e-300)]);
        let m = catalog_model("ou_quadratic", None, &params).unwrap();
        let b = PathBundle::new(1, 4, 0.01, 1.0);
        let p = simulate_uncontrolled(&m, 0.0, 0.3, &b, 2).unwrap();
        assert!(p.x.iter().all(|&x| (x - 0.3).abs() < 1e-200));
        assert!(simulate_uncontrolled(&m, 0.0, 0.3, &PathBundle { dt_sim: 0.0, ..b }, 0).is_err());
    }

    #[test]
    fn whole_line_y_equals_x0() {
        let m = catalog_model("ou_quadratic", None, &BTreeMap::new()).unwrap();
        let b = PathBundle::new(9, 3, 0.01, 1.0);
        for p in 0..3 {
            let x = simulate_uncontrolled(&m, 0.2, 0.5, &b, p).unwrap();
            let y = simulate_Y(&m, 0.2, 0.5, &b, p).unwrap();
            assert_eq!(x, y);
        }
    }
}
