//! Obstacle problem for the auxiliary stopping value `u`, which equals `v_x`:
//!
//! `min{ u_t + G u - lambda u + h_x, alpha0 - u } = 0` above `a(t)`,
//! `u = 0` on and below `a(t)`, `u(T, .) = 0`,
//!
//! where `G` is the generator of `Y` (drift `mu + sigma sigma_x`) and
//! `lambda = r - mu_x`.

use serde::{Deserialize, Serialize};

use crate::boundaries::{first_reach, FreeBoundaries, LowerBoundary, UpperBoundary};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::LatticeGrid;
use crate::linalg::solve_tridiagonal;
use crate::model::GameModel;
use crate::vi_solver::SolverSettings;

/// Largest admissible `|lambda| dt`.
pub const MAX_LAMBDA_DT: f64 = 0.5;

/// Absorption points closer than this fraction of `dx` to a node are snapped onto it.
const SNAP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct OsSurface {
    pub grid: LatticeGrid,
    pub model: GameModel,
    pub u: Field,
    /// `u >= alpha0 - tol` per node, time-major.
    pub stop_region: Vec<bool>,
    pub b_os: Vec<UpperBoundary>,
    /// Absorption level used at each time level.
    pub absorption: Vec<f64>,
    pub tol: f64,
    pub iterations: Vec<usize>,
}

impl OsSurface {
    #[inline]
    pub fn is_stop(&self, j: usize, i: usize) -> bool {
        self.stop_region[j * (self.grid.nx + 1) + i]
    }

    /// Rebuilds stop flags and the stopping boundary from `u`.
    pub fn from_values(model: GameModel, grid: LatticeGrid, u: Field, absorption: Vec<f64>, tol: f64) -> Self {
        let mut s = OsSurface {
            grid,
            model,
            stop_region: u.as_slice().iter().map(|&x| x >= model.alpha0 - tol).collect(),
            u,
            b_os: Vec::new(),
            absorption,
            tol,
            iterations: vec![0; grid.nt + 1],
        };
        s.b_os = extract_b_os(&s);
        s
    }
}

/// Lowest crossing of `u = alpha0 - tol` per level.
pub fn extract_b_os(os: &OsSurface) -> Vec<UpperBoundary> {
    let level = os.model.alpha0 - os.tol;
    (0..=os.grid.nt)
        .map(|j| match first_reach(&os.grid, os.u.row(j), level) {
            Some(x) => UpperBoundary::Defined(x),
            None => UpperBoundary::NoneHigh,
        })
        .collect()
}

/// Solves the auxiliary problem with absorption at the extracted `a`.
pub fn solve_vx_os(model: &GameModel, grid: &LatticeGrid, fb: &FreeBoundaries) -> Result<OsSurface> {
    solve_vx_os_with(model, grid, fb, SolverSettings::default())
}

pub fn solve_vx_os_with(
    model: &GameModel,
    grid: &LatticeGrid,
    fb: &FreeBoundaries,
    settings: SolverSettings,
) -> Result<OsSurface> {
    if !fb.grid.same_lattice(grid) {
        return Err(Error::GridMismatch("boundaries were extracted on a different lattice".into()));
    }
    let nx = grid.nx;
    let (dx, dt) = (grid.dx, grid.dt);
    let alpha0 = model.alpha0;

    let mut lower = vec![0.0; nx + 1];
    let mut upper = vec![0.0; nx + 1];
    let mut lam = vec![0.0; nx + 1];
    let mut drift = vec![0.0; nx + 1];
    let mut half_var = vec![0.0; nx + 1];
    for i in 0..=nx {
        let x = grid.x(i);
        let s = model.sigma(x);
        lam[i] = model.lambda_unchecked(x);
        if lam[i].abs() * dt > MAX_LAMBDA_DT {
            return Err(Error::invalid(
                "grid.nt",
                format!("|lambda({x})| dt = {} exceeds {MAX_LAMBDA_DT}", lam[i].abs() * dt),
            ));
        }
        drift[i] = model.mu(x) + s * model.sigma_x(x);
        half_var[i] = 0.5 * s * s;
        lower[i] = half_var[i] / (dx * dx) + (-drift[i]).max(0.0) / dx;
        upper[i] = half_var[i] / (dx * dx) + drift[i].max(0.0) / dx;
    }

    let mut u = Field::zeros(grid.nt + 1, nx + 1);
    let mut absorption = vec![grid.x_lo; grid.nt + 1];
    let mut iterations = vec![0; grid.nt + 1];
    for j in (0..grid.nt).rev() {
        let t = grid.t(j);
        let a = match fb.a[j] {
            LowerBoundary::Defined(x) => x,
            LowerBoundary::NoneLow => grid.x_lo,
            LowerBoundary::AllStop => grid.x_hi,
        };
        absorption[j] = a;
        // First free node strictly above the absorption point.
        let mut k = ((a - grid.x_lo) / dx).floor() as isize + 1;
        if k >= 1 && grid.x(k as usize) - a < SNAP * dx {
            k += 1;
        }
        let k = k.max(1) as usize;
        if k >= nx {
            continue;
        }
        let h_a = (grid.x(k) - a).min(dx);

        let next = u.row(j + 1).to_vec();
        let mut l = vec![0.0; nx + 1];
        let mut d = vec![0.0; nx + 1];
        let mut r = vec![0.0; nx + 1];
        let mut rhs = vec![0.0; nx + 1];
        d[..k].fill(1.0);
        for i in k..nx {
            l[i] = lower[i];
            r[i] = upper[i];
            if i == k {
                // Non-uniform stencil with the absorbing value 0 at distance h_a.
                let c = 2.0 * half_var[i] / (h_a + dx);
                l[i] = c / h_a + (-drift[i]).max(0.0) / h_a;
                r[i] = c / dx + drift[i].max(0.0) / dx;
            }
            d[i] = 1.0 / dt + l[i] + r[i] + lam[i];
            rhs[i] = next[i] / dt + model.h_x(t, grid.x(i));
        }
        l[k] = 0.0;

        // Unconstrained implicit step as the starting point, top row u_nx = u_{nx-1}.
        let mut tl: Vec<f64> = l.iter().map(|x| -x).collect();
        let mut tu: Vec<f64> = r.iter().map(|x| -x).collect();
        let mut td = d.clone();
        let mut tb = rhs.clone();
        tl[nx] = -1.0;
        td[nx] = 1.0;
        tb[nx] = 0.0;
        tu[nx] = 0.0;
        for i in 0..k {
            tl[i] = 0.0;
            tu[i] = 0.0;
        }
        let mut w = solve_tridiagonal(&tl, &td, &tu, &tb);
        for x in w.iter_mut() {
            *x = x.min(alpha0);
        }
        w[..k].fill(0.0);
        tl.clear();
        tu.clear();
        td.clear();
        tb.clear();

        let mut converged = false;
        let mut update = f64::INFINITY;
        for iter in 1..=settings.max_iters {
            update = 0.0;
            for i in k..nx {
                let left = if i == k { 0.0 } else { w[i - 1] };
                let gs = (l[i] * left + r[i] * w[i + 1] + rhs[i]) / d[i];
                let new = gs.min(alpha0);
                update = update.max((new - w[i]).abs());
                w[i] = new;
            }
            let top = w[nx - 1].min(alpha0);
            update = update.max((top - w[nx]).abs());
            w[nx] = top;
            if update < settings.tol_solve {
                iterations[j] = iter;
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence { level: j, update_norm: update });
        }
        u.row_mut(j).copy_from_slice(&w);
    }
    absorption[grid.nt] = match fb.a[grid.nt] {
        LowerBoundary::Defined(x) => x,
        LowerBoundary::NoneLow => grid.x_lo,
        LowerBoundary::AllStop => grid.x_hi,
    };
    let mut s = OsSurface::from_values(*model, *grid, u, absorption, settings.tol_grad(model));
    s.iterations = iterations;
    Ok(s)
}

/// Serializable summary of an auxiliary solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsSummary {
    pub max_u: f64,
    pub min_u: f64,
    pub stop_nodes: usize,
}

pub fn summarize(os: &OsSurface) -> OsSummary {
    let vals = os.u.as_slice();
    OsSummary {
        max_u: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min_u: vals.iter().copied().fold(f64::INFINITY, f64::min),
        stop_nodes: os.stop_region.iter().filter(|&&s| s).count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundaries::extract_boundaries;
    use crate::grid::make_grid;
    use crate::model::catalog_model;
    use crate::vi_solver::solve_vi;
    use std::collections::BTreeMap;

    fn model(overrides: &[(&str, f64)]) -> GameModel {
        let map = overrides.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        catalog_model("ou_quadratic", None, &map).unwrap()
    }

    fn open_boundaries(grid: LatticeGrid) -> FreeBoundaries {
        let mut a = vec![LowerBoundary::NoneLow; grid.nt + 1];
        a[grid.nt] = LowerBoundary::AllStop;
        FreeBoundaries::with_flags(grid, a, vec![UpperBoundary::NoneHigh; grid.nt + 1])
    }

    #[test]
    fn zero_running_cost_gives_zero_value() {
        let m = model(&[("c2", 0.0)]);
        let g = make_grid(&m, (-2.0, 4.0), 60, 40).unwrap();
        let os = solve_vx_os(&m, &g, &open_boundaries(g)).unwrap();
        assert!(os.u.as_slice().iter().all(|&u| u.abs() < 1e-12));
        assert!(os.b_os.iter().all(|b| *b == UpperBoundary::NoneHigh));
    }

    #[test]
    fn undiscounted_constant_cost_matches_deterministic_program() {
        let c = 2.0;
        let m = model(&[("c2", 0.0), ("c1", c), ("kappa", 0.0), ("r", 0.0), ("sigma", 0.05), ("beta", 0.0)]);
        let g = make_grid(&m, (-4.0, 6.0), 200, 200).unwrap();
        let os = solve_vx_os(&m, &g, &open_boundaries(g)).unwrap();
        for j in [0, 50, 100, 150, 199] {
            let expected = (c * (1.0 - g.t(j))).min(m.alpha0);
            for i in [80, 100, 120] {
                assert!((os.u.at(j, i) - expected).abs() < 1e-6, "j={j} i={i}: {}", os.u.at(j, i));
            }
        }
    }

    #[test]
    fn catalog_surface_respects_bounds_and_absorption() {
        let m = catalog_model("ou_quadratic", None, &BTreeMap::new()).unwrap();
        let g = make_grid(&m, (-2.0, 4.0), 120, 120).unwrap();
        let fb = extract_boundaries(&solve_vi(&m, &g).unwrap()).unwrap();
        let os = solve_vx_os(&m, &g, &fb).unwrap();
        for j in 0..=g.nt {
            for i in 0..=g.nx {
                let u = os.u.at(j, i);
                assert!(u >= -1e-12 && u <= m.alpha0 + 1e-12);
                if g.x(i) <= os.absorption[j] {
                    assert_eq!(u, 0.0);
                }
            }
        }
        assert!(os.u.row(g.nt).iter().all(|&u| u == 0.0));
    }

    #[test]
    fn lattice_mismatch_is_rejected() {
        let m = model(&[]);
        let g = make_grid(&m, (-2.0, 4.0), 60, 40).unwrap();
        let other = make_grid(&m, (-2.0, 4.0), 60, 80).unwrap();
        assert!(matches!(solve_vx_os(&m, &g, &open_boundaries(other)), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn strong_discount_on_coarse_time_grid_faults() {
        let m = model(&[("kappa", 10.0)]);
        let g = make_grid(&m, (-2.0, 4.0), 60, 8).unwrap();
        assert!(solve_vx_os(&m, &g, &open_boundaries(g)).is_err());
    }

    #[test]
    fn stopping_boundary_conventions() {
        let m = model(&[]);
        let g = make_grid(&m, (-2.0, 4.0), 60, 40).unwrap();
        let full = OsSurface::from_values(m, g, Field::filled(41, 61, m.alpha0), vec![g.x_lo; 41], 1e-6);
        assert!(full.b_os.iter().all(|b| *b == UpperBoundary::Defined(g.x_lo)));
        let empty = OsSurface::from_values(m, g, Field::zeros(41, 61), vec![g.x_lo; 41], 1e-6);
        assert!(empty.b_os.iter().all(|b| *b == UpperBoundary::NoneHigh));
    }
}
