//! Backward-in-time solver for the min-max variational inequality
//!
//! `max{ min{ v_t + L v - r v + h, alpha0 - v_x }, g - v } = 0`,  `v(T, .) = g(T)`.
//!
//! Each level is an implicit Euler step. The discrete complementarity problem is
//! solved by projected Gauss-Seidel; the penalty variant uses policy iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::LatticeGrid;
use crate::linalg::{solve_tridiagonal, solve_tridiagonal_with_tail};
use crate::model::{DomainKind, GameModel};

/// Per-node region label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// `v = g`: the stopper stops.
    Stop,
    /// `v > g` and `v_x < alpha0`.
    Interior,
    /// `v_x = alpha0`: the controller pushes.
    Action,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::Stop => "S",
            Region::Interior => "CI",
            Region::Action => "M",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "S" => Some(Region::Stop),
            "CI" => Some(Region::Interior),
            "M" => Some(Region::Action),
            _ => None,
        }
    }
}

/// Iteration and classification tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub tol_solve: f64,
    pub max_iters: usize,
    pub tol_contact: f64,
    /// Gradient tolerance relative to `alpha0`.
    pub tol_grad_rel: f64,
    pub tol_convex: f64,
    /// Over-relaxation factor for the Gauss-Seidel sweep.
    pub omega: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol_solve: 1e-10,
            max_iters: 10_000,
            tol_contact: 1e-8,
            tol_grad_rel: 1e-6,
            tol_convex: 1e-6,
            omega: 1.0,
        }
    }
}

impl SolverSettings {
    pub fn tol_grad(&self, model: &GameModel) -> f64 {
        self.tol_grad_rel * model.alpha0
    }
}

/// Discrete value function with derived fields and region labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    pub grid: LatticeGrid,
    pub model: GameModel,
    pub settings: SolverSettings,
    pub v: Field,
    pub vx: Field,
    pub vt: Field,
    pub vxx: Field,
    pub region: Vec<Region>,
    pub residual: Field,
    /// Gauss-Seidel sweeps per level (index `j`), zero at `j = nt`.
    pub iterations: Vec<usize>,
}

impl ValueSurface {
    #[inline]
    pub fn region_at(&self, j: usize, i: usize) -> Region {
        self.region[j * (self.grid.nx + 1) + i]
    }

    /// Forward difference `(v_{i+1} - v_i) / dx`, for `i < nx`.
    #[inline]
    pub fn d_plus(&self, j: usize, i: usize) -> f64 {
        (self.v.at(j, i + 1) - self.v.at(j, i)) / self.grid.dx
    }

    /// Linear interpolation of `v` in `x` on level `j`.
    pub fn value_at(&self, j: usize, x: f64) -> f64 {
        self.v.interp_row(j, (x - self.grid.x_lo) / self.grid.dx)
    }

    /// Assembles a surface from raw values, recomputing derived fields.
    pub fn from_values(model: GameModel, grid: LatticeGrid, settings: SolverSettings, v: Field) -> Result<Self> {
        if v.rows() != grid.nt + 1 || v.cols() != grid.nx + 1 {
            return Err(Error::GridMismatch(format!(
                "values are {}x{}, lattice needs {}x{}",
                v.rows(),
                v.cols(),
                grid.nt + 1,
                grid.nx + 1
            )));
        }
        let mut s = ValueSurface {
            grid,
            model,
            settings,
            vx: Field::zeros(v.rows(), v.cols()),
            vt: Field::zeros(v.rows(), v.cols()),
            vxx: Field::zeros(v.rows(), v.cols()),
            region: Vec::new(),
            residual: Field::zeros(v.rows(), v.cols()),
            iterations: vec![0; grid.nt + 1],
            v,
        };
        s.fill_derived();
        Ok(s)
    }

    fn fill_derived(&mut self) {
        let LatticeGrid { nx, nt, dx, dt, .. } = self.grid;
        let v = &self.v;
        for j in 0..=nt {
            for i in 0..=nx {
                let vx = if i == 0 {
                    (v.at(j, 1) - v.at(j, 0)) / dx
                } else if i == nx {
                    (v.at(j, nx) - v.at(j, nx - 1)) / dx
                } else {
                    (v.at(j, i + 1) - v.at(j, i - 1)) / (2.0 * dx)
                };
                let k = i.clamp(1, nx - 1);
                let vxx = (v.at(j, k + 1) - 2.0 * v.at(j, k) + v.at(j, k - 1)) / (dx * dx);
                let vt = if j < nt { (v.at(j + 1, i) - v.at(j, i)) / dt } else { (v.at(nt, i) - v.at(nt - 1, i)) / dt };
                self.vx.set(j, i, vx);
                self.vxx.set(j, i, vxx);
                self.vt.set(j, i, vt);
            }
        }

        let m = &self.model;
        let tol_grad = self.settings.tol_grad(m);
        let mut region = Vec::with_capacity((nt + 1) * (nx + 1));
        for j in 0..=nt {
            let g = m.g(self.grid.t(j));
            for i in 0..=nx {
                let gap = v.at(j, i) - g;
                let r = if j == nt || gap <= self.settings.tol_contact {
                    Region::Stop
                } else if i > 0 && (v.at(j, i) - v.at(j, i - 1)) / dx >= m.alpha0 - tol_grad {
                    Region::Action
                } else {
                    Region::Interior
                };
                region.push(r);
            }
        }
        self.region = region;

        for j in 0..=nt {
            let t = self.grid.t(j);
            let g = m.g(t);
            for i in 0..=nx {
                let res = match self.region[j * (nx + 1) + i] {
                    Region::Stop => v.at(j, i) - g,
                    Region::Action => (v.at(j, i) - v.at(j, i - 1)) / dx - m.alpha0,
                    Region::Interior => {
                        if i == 0 {
                            match m.domain {
                                DomainKind::WholeLine => v.at(j, 0) - g.max(v.at(j, 1)),
                                DomainKind::HalfLine => v.at(j, 0) - g,
                            }
                        } else if i == nx {
                            let lower = v.at(j, nx - 1) - v.at(j, nx - 2);
                            v.at(j, nx) - v.at(j, nx - 1) - lower.min(m.alpha0 * dx)
                        } else {
                            let x = self.grid.x(i);
                            let s = m.sigma(x);
                            self.vt.at(j, i) + m.mu(x) * self.vx.at(j, i) + 0.5 * s * s * self.vxx.at(j, i)
                                - m.r * v.at(j, i)
                                + m.h(t, x)
                        }
                    }
                };
                self.residual.set(j, i, res);
            }
        }
    }
}

/// Implicit-step coefficients: row `i` reads
/// `diag w_i - lower w_{i-1} - upper w_{i+1} = w^{j+1}_i / dt + h_i`.
struct Stencil {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Stencil {
    fn new(model: &GameModel, grid: &LatticeGrid) -> Self {
        let n = grid.nx + 1;
        let (dx, dt) = (grid.dx, grid.dt);
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 1..grid.nx {
            let x = grid.x(i);
            let s = model.sigma(x);
            let mu = model.mu(x);
            let diff = 0.5 * s * s / (dx * dx);
            lower[i] = diff + mu.min(0.0).abs() / dx;
            upper[i] = diff + mu.max(0.0) / dx;
            diag[i] = 1.0 / dt + lower[i] + upper[i] + model.r;
        }
        Stencil { lower, diag, upper }
    }
}

/// Solves the variational inequality with default settings.
pub fn solve_vi(model: &GameModel, grid: &LatticeGrid) -> Result<ValueSurface> {
    solve_vi_with(model, grid, SolverSettings::default())
}

pub fn solve_vi_with(model: &GameModel, grid: &LatticeGrid, settings: SolverSettings) -> Result<ValueSurface> {
    check_lattice(model, grid)?;
    let nx = grid.nx;
    let (dx, dt) = (grid.dx, grid.dt);
    let stencil = Stencil::new(model, grid);
    let cap = model.alpha0 * dx;
    let omega = settings.omega;
    let mut v = Field::zeros(grid.nt + 1, nx + 1);
    v.row_mut(grid.nt).fill(model.g(grid.horizon));
    let mut iterations = vec![0; grid.nt + 1];
    let mut rhs = vec![0.0; nx + 1];

    for j in (0..grid.nt).rev() {
        let t = grid.t(j);
        let g = model.g(t);
        let next = v.row(j + 1).to_vec();
        for i in 1..nx {
            rhs[i] = next[i] / dt + model.h(t, grid.x(i));
        }
        let mut w = unconstrained_step(model, &stencil, &next, &rhs, cap);
        let mut converged = false;
        let mut update = f64::INFINITY;
        for iter in 1..=settings.max_iters {
            update = 0.0;
            let w0 = match model.domain {
                DomainKind::WholeLine => g.max(w[1]),
                DomainKind::HalfLine => g,
            };
            update = f64::max(update, (w0 - w[0]).abs());
            w[0] = w0;
            for i in 1..nx {
                let gs = (stencil.lower[i] * w[i - 1] + stencil.upper[i] * w[i + 1] + rhs[i]) / stencil.diag[i];
                let relaxed = w[i] + omega * (gs - w[i]);
                let projected = relaxed.max(g).min(w[i - 1] + cap);
                update = update.max((projected - w[i]).abs());
                w[i] = projected;
            }
            let top = (w[nx - 1] + (w[nx - 1] - w[nx - 2]).min(cap)).max(g);
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
        v.row_mut(j).copy_from_slice(&w);
    }

    let mut surface = ValueSurface::from_values(*model, *grid, settings, v)?;
    surface.iterations = iterations;
    Ok(surface)
}

/// One implicit step ignoring both constraints, with the far-field rows
/// `w_0 = w_1` (or `w_0 = g` on the half-line) and `w_nx - w_{nx-1}` copied
/// from the later level, capped at `alpha0 dx`.
fn unconstrained_step(model: &GameModel, st: &Stencil, next: &[f64], rhs: &[f64], cap: f64) -> Vec<f64> {
    let n = next.len();
    let nx = n - 1;
    let mut lower: Vec<f64> = st.lower.iter().map(|l| -l).collect();
    let mut upper: Vec<f64> = st.upper.iter().map(|u| -u).collect();
    let mut diag = st.diag.clone();
    let mut b = rhs.to_vec();
    diag[0] = 1.0;
    match model.domain {
        DomainKind::WholeLine => {
            upper[0] = -1.0;
            b[0] = 0.0;
        }
        DomainKind::HalfLine => {
            upper[0] = 0.0;
            b[0] = next[0];
        }
    }
    diag[nx] = 1.0;
    lower[nx] = -1.0;
    b[nx] = (next[nx] - next[nx - 1]).min(cap);
    solve_tridiagonal(&lower, &diag, &upper, &b)
}

fn check_lattice(model: &GameModel, grid: &LatticeGrid) -> Result<()> {
    if grid.horizon.to_bits() != model.horizon.to_bits() {
        return Err(Error::GridMismatch(format!(
            "grid horizon {} differs from model horizon {}",
            grid.horizon, model.horizon
        )));
    }
    if model.domain == DomainKind::HalfLine && grid.x_lo != 0.0 {
        return Err(Error::invalid("grid.x_lo", "half-line windows start at 0"));
    }
    Ok(())
}

/// Region-wise residual summary of a solved surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    /// `max |v_t + L v - r v + h|` over interior nodes at least two nodes away
    /// from any region change.
    pub interior_pde: f64,
    /// `max (g - v)_+` over all nodes.
    pub obstacle_violation: f64,
    /// `max (D+ v - alpha0)_+` over all nodes.
    pub gradient_violation: f64,
    /// `max |v - g|` over stopping nodes.
    pub stop_gap: f64,
    /// `max |D v - alpha0|` over action nodes.
    pub action_gap: f64,
}

pub fn residual_report(surface: &ValueSurface) -> ResidualSummary {
    let LatticeGrid { nx, nt, dx, .. } = surface.grid;
    let m = &surface.model;
    let v = &surface.v;
    let mut out = ResidualSummary {
        interior_pde: 0.0,
        obstacle_violation: 0.0,
        gradient_violation: 0.0,
        stop_gap: 0.0,
        action_gap: 0.0,
    };
    for j in 0..=nt {
        let g = m.g(surface.grid.t(j));
        for i in 0..=nx {
            out.obstacle_violation = out.obstacle_violation.max((g - v.at(j, i)).max(0.0));
            if i < nx {
                out.gradient_violation = out.gradient_violation.max((surface.d_plus(j, i) - m.alpha0).max(0.0));
            }
            match surface.region_at(j, i) {
                Region::Stop => out.stop_gap = out.stop_gap.max((v.at(j, i) - g).abs()),
                Region::Action => {
                    let d = if i < nx { surface.d_plus(j, i) } else { (v.at(j, i) - v.at(j, i - 1)) / dx };
                    out.action_gap = out.action_gap.max((d - m.alpha0).abs());
                }
                Region::Interior => {
                    if i < 2 || i + 2 > nx || j >= nt {
                        continue;
                    }
                    let settled = (i - 2..=i + 2).all(|k| surface.region_at(j, k) == Region::Interior)
                        && surface.region_at(j + 1, i) == Region::Interior;
                    if settled {
                        out.interior_pde = out.interior_pde.max(surface.residual.at(j, i).abs());
                    }
                }
            }
        }
    }
    out
}

/// Penalised equation solved by policy iteration, for cross-validation.
///
/// `v_t + L v - r v + h + (g - v)_+ / eps - (D- v - alpha0)_+ / eps = 0`,
/// with the gradient penalty on the backward difference so each linearisation
/// is an M-matrix.
pub fn solve_vi_penalty(model: &GameModel, grid: &LatticeGrid, eps: f64) -> Result<ValueSurface> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid("eps", "penalty weight must be positive"));
    }
    check_lattice(model, grid)?;
    const MAX_POLICY_ITERS: usize = 200;
    let settings = SolverSettings::default();
    let nx = grid.nx;
    let (dx, dt) = (grid.dx, grid.dt);
    let st = Stencil::new(model, grid);
    let cap = model.alpha0 * dx;
    let pen = 1.0 / eps;
    let mut v = Field::zeros(grid.nt + 1, nx + 1);
    v.row_mut(grid.nt).fill(model.g(grid.horizon));
    let mut iterations = vec![0; grid.nt + 1];

    for j in (0..grid.nt).rev() {
        let t = grid.t(j);
        let g = model.g(t);
        let next = v.row(j + 1).to_vec();
        let mut w = next.clone();
        let mut done = false;
        let mut update = f64::INFINITY;
        for iter in 1..=MAX_POLICY_ITERS {
            let mut lower = vec![0.0; nx + 1];
            let mut diag = vec![0.0; nx + 1];
            let mut upper = vec![0.0; nx + 1];
            let mut b = vec![0.0; nx + 1];
            diag[0] = 1.0;
            match model.domain {
                DomainKind::WholeLine => upper[0] = -1.0,
                DomainKind::HalfLine => b[0] = g,
            }
            for i in 1..nx {
                let stop = g - w[i] > 0.0;
                let push = (w[i] - w[i - 1]) / dx - model.alpha0 > 0.0;
                lower[i] = -st.lower[i];
                upper[i] = -st.upper[i];
                diag[i] = st.diag[i];
                b[i] = next[i] / dt + model.h(t, grid.x(i));
                if stop {
                    diag[i] += pen;
                    b[i] += pen * g;
                }
                if push {
                    diag[i] += pen / dx;
                    lower[i] -= pen / dx;
                    b[i] += pen * model.alpha0;
                }
            }
            let extrapolate = w[nx - 1] - w[nx - 2] < cap;
            let extra;
            diag[nx] = 1.0;
            if extrapolate {
                lower[nx] = -2.0;
                extra = 1.0;
            } else {
                lower[nx] = -1.0;
                b[nx] = cap;
                extra = 0.0;
            }
            let fresh = solve_tridiagonal_with_tail(&mut lower, &mut diag, &mut upper, &mut b, extra);
            update = fresh.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            w = fresh;
            if update < settings.tol_solve {
                iterations[j] = iter;
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::NonConvergence { level: j, update_norm: update });
        }
        v.row_mut(j).copy_from_slice(&w);
    }
    let mut surface = ValueSurface::from_values(*model, *grid, settings, v)?;
    surface.iterations = iterations;
    Ok(surface)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::model::catalog_model;
    use std::collections::BTreeMap;

    pub(crate) fn ou(overrides: &[(&str, f64)]) -> GameModel {
        let map = overrides.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        catalog_model("ou_quadratic", None, &map).unwrap()
    }

    fn grid(m: &GameModel, n: usize) -> LatticeGrid {
        make_grid(m, crate::grid::default_window(m), n, n).unwrap()
    }

    #[test]
    fn constant_obstacle_without_running_payoff() {
        let m = ou(&[("c2", 0.0), ("r", 0.0), ("g0", 1.0)]);
        let s = solve_vi(&m, &grid(&m, 60)).unwrap();
        for x in s.v.as_slice() {
            assert!((x - 1.0).abs() < 1e-10);
        }
        let r = residual_report(&s);
        assert!(r.interior_pde <= 1e-9 && r.obstacle_violation <= 1e-9 && r.stop_gap <= 1e-9);
        assert!(r.gradient_violation <= 1e-9 && r.action_gap <= 1e-9);
    }

    #[test]
    fn constant_running_payoff_integrates_exactly() {
        let c = 0.7;
        let m = ou(&[("c2", 0.0), ("c0", c), ("beta", 0.0), ("r", 0.0), ("g0", 0.0)]);
        let gr = grid(&m, 60);
        let s = solve_vi(&m, &gr).unwrap();
        for j in 0..=gr.nt {
            let exact = c * (1.0 - gr.t(j));
            for i in 0..=gr.nx {
                assert!((s.v.at(j, i) - exact).abs() < 1e-9, "j={j} i={i}");
            }
        }
        assert!(residual_report(&s).interior_pde < 1e-8);
    }

    #[test]
    fn terminal_and_half_line_boundary_rows() {
        let m = catalog_model("halfline_linear", None, &BTreeMap::new()).unwrap();
        let gr = grid(&m, 64);
        let s = solve_vi(&m, &gr).unwrap();
        for i in 0..=gr.nx {
            assert_eq!(s.v.at(gr.nt, i), m.g(1.0));
        }
        for j in 0..=gr.nt {
            assert_eq!(s.v.at(j, 0), m.g(gr.t(j)));
        }
    }

    #[test]
    fn penalty_rejects_bad_weight() {
        let m = ou(&[]);
        assert!(solve_vi_penalty(&m, &grid(&m, 16), 0.0).is_err());
    }

    #[test]
    fn penalty_reproduces_constant_solution() {
        let m = ou(&[("c2", 0.0), ("r", 0.0), ("g0", 1.0)]);
        let s = solve_vi_penalty(&m, &grid(&m, 40), 1e-3).unwrap();
        for x in s.v.as_slice() {
            assert!((x - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn nonconvergence_reports_level() {
        let m = ou(&[]);
        let settings = SolverSettings { max_iters: 1, ..SolverSettings::default() };
        match solve_vi_with(&m, &grid(&m, 40), settings) {
            Err(Error::NonConvergence { level, update_norm }) => {
                assert_eq!(level, 39);
                assert!(update_norm > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn region_labels_round_trip() {
        for r in [Region::Stop, Region::Interior, Region::Action] {
            assert_eq!(Region::parse(r.label()), Some(r));
        }
    }
}
