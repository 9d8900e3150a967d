use super::{check_start, Curve, Dynamics, PathBundle};
use crate::error::Result;
use crate::model::GameModel;

/// State path reflected downward at a moving barrier.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlledPath {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    /// Cumulative control, non-increasing, `nu[0]` includes the initial jump.
    pub nu: Vec<f64>,
    /// Total variation `|nu|` at the end of the path.
    pub total_variation: f64,
    pub absorbed_at: Option<usize>,
}

/// Euler scheme for `X` reflected at `b`: after each step the state is
/// projected onto `{x <= b(t0 + s)}` and the excess is booked as control.
pub fn reflect_along_b(
    model: &GameModel,
    t0: f64,
    x0: f64,
    b: &Curve,
    bundle: &PathBundle,
    path: usize,
) -> Result<ControlledPath> {
    check_start(model, t0, x0, bundle)?;
    let steps = bundle.steps_from(t0);
    let mut z = vec![0.0; steps.len()];
    bundle.fill_normals(path, &mut z);
    let n = steps.len();
    let mut times = Vec::with_capacity(n + 1);
    let mut xs = Vec::with_capacity(n + 1);
    let mut nu = Vec::with_capacity(n + 1);
    let b0 = b.at(t0);
    let mut x = x0.min(b0);
    let mut cum = -(x0 - b0).max(0.0);
    let mut s = 0.0;
    let mut absorbed_at = None;
    times.push(s);
    xs.push(x);
    nu.push(cum);
    for (k, (&h, &zk)) in steps.iter().zip(&z).enumerate() {
        s += h;
        if absorbed_at.is_none() {
            let (free, hit) = Dynamics::X0.euler_step(model, x, h, h.sqrt() * zk);
            if hit {
                absorbed_at = Some(k + 1);
                x = 0.0;
            } else {
                let bar = b.at(t0 + s);
                x = free.min(bar);
                cum -= (free - bar).max(0.0);
            }
        }
        times.push(s);
        xs.push(x);
        nu.push(cum);
    }
    Ok(ControlledPath { times, x: xs, total_variation: -cum, nu, absorbed_at })
}

/// Literal Skorokhod map of a given free path: `nu_s = -sup_{u <= s} (free_u - b_u)_+`.
/// Exact when the drift does not depend on the state.
pub fn reflect_running_sup(free: &[f64], barrier: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut sup = 0.0_f64;
    let mut x = Vec::with_capacity(free.len());
    let mut nu = Vec::with_capacity(free.len());
    for (f, b) in free.iter().zip(barrier) {
        sup = sup.max(f - b);
        nu.push(-sup);
        x.push(f - sup);
    }
    (x, nu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog_model;
    use std::collections::BTreeMap;

    fn ramp_model() -> GameModel {
        // mu = kappa (mean - x) with kappa -> 0, kappa * mean = 1 gives drift 1.
        let params =
            BTreeMap::from([("kappa".to_string(), 1e-12), ("mean".to_string(), 1e12), ("sigma".to_string(), 1e-300)]);
        catalog_model("ou_quadratic", None, &params).unwrap()
    }

    #[test]
    fn ramp_reflection_is_explicit() {
        let m = ramp_model();
        let bundle = PathBundle::new(3, 1, 1.0 / 1000.0, 1.0);
        let p = reflect_along_b(&m, 0.0, 0.0, &Curve::constant(0.5), &bundle, 0).unwrap();
        for ((s, x), nu) in p.times.iter().zip(&p.x).zip(&p.nu) {
            assert!((x - s.min(0.5)).abs() < 1e-9, "s={s} x={x}");
            assert!((nu + (s - 0.5).max(0.0)).abs() < 1e-9);
        }
        assert!((p.total_variation - 0.5).abs() < 1e-9);
        let free: Vec<f64> = p.times.clone();
        let (x, nu) = reflect_running_sup(&free, &vec![0.5; free.len()]);
        for k in 0..free.len() {
            assert!((x[k] - p.x[k]).abs() < 1e-9 && (nu[k] - p.nu[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn infinite_barrier_leaves_path_uncontrolled() {
        let m = catalog_model("ou_quadratic", None, &BTreeMap::new()).unwrap();
        let bundle = PathBundle::new(11, 2, 0.01, 1.0);
        let p = reflect_along_b(&m, 0.1, 0.7, &Curve::constant(f64::INFINITY), &bundle, 1).unwrap();
        let free = super::super::simulate_uncontrolled(&m, 0.1, 0.7, &bundle, 1).unwrap();
        assert_eq!(p.x, free.x);
        assert!(p.nu.iter().all(|&n| n == 0.0));
    }

    #[test]
    fn initial_jump_and_complementarity() {
        let m = catalog_model("ou_quadratic", None, &BTreeMap::new()).unwrap();
        let bundle = PathBundle::new(5, 20, 0.005, 1.0);
        let b = Curve::from_samples(vec![0.0, 1.0], vec![1.0, 1.5]);
        for path in 0..20 {
            let p = reflect_along_b(&m, 0.0, 2.0, &b, &bundle, path).unwrap();
            assert_eq!(p.nu[0], -1.0);
            assert_eq!(p.x[0], 1.0);
            for k in 1..p.x.len() {
                let bar = b.at(p.times[k]);
                assert!(p.x[k] <= bar);
                assert!(p.nu[k] <= p.nu[k - 1]);
                if p.nu[k] < p.nu[k - 1] {
                    assert_eq!(p.x[k], bar);
                }
            }
        }
    }
}
