//! Extraction and shape checks for the stopping boundary `a(t)` and the action
//! boundary `b(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::LatticeGrid;
use crate::model::GameModel;
use crate::vi_solver::ValueSurface;

/// Stopping boundary at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LowerBoundary {
    Defined(f64),
    /// `v > g` on the whole window: the stopping region is empty.
    NoneLow,
    /// `v = g` on the whole window.
    AllStop,
}

/// Action boundary at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum UpperBoundary {
    Defined(f64),
    /// The gradient constraint never binds on the window.
    NoneHigh,
}

impl LowerBoundary {
    pub fn value(self) -> Option<f64> {
        match self {
            LowerBoundary::Defined(x) => Some(x),
            _ => None,
        }
    }
}

impl UpperBoundary {
    pub fn value(self) -> Option<f64> {
        match self {
            UpperBoundary::Defined(x) => Some(x),
            UpperBoundary::NoneHigh => None,
        }
    }
}

/// Edge-flag bits.
pub const EDGE_A: u8 = 1;
pub const EDGE_B: u8 = 2;
pub const EDGE_ALL_STOP: u8 = 4;

/// Nodes from a window edge within which a boundary is flagged.
pub const EDGE_NODES: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeBoundaries {
    pub grid: LatticeGrid,
    pub t: Vec<f64>,
    pub a: Vec<LowerBoundary>,
    pub b: Vec<UpperBoundary>,
    pub edge_flags: Vec<u8>,
}

impl FreeBoundaries {
    /// Recomputes edge flags from the boundary values.
    pub fn with_flags(grid: LatticeGrid, a: Vec<LowerBoundary>, b: Vec<UpperBoundary>) -> Self {
        let near = |x: f64| x - grid.x_lo < EDGE_NODES * grid.dx || grid.x_hi - x < EDGE_NODES * grid.dx;
        let edge_flags = a
            .iter()
            .zip(&b)
            .map(|(la, ub)| {
                let mut f = 0;
                match la {
                    LowerBoundary::Defined(x) if near(*x) => f |= EDGE_A,
                    LowerBoundary::AllStop => f |= EDGE_ALL_STOP,
                    _ => {}
                }
                if let UpperBoundary::Defined(x) = ub {
                    if near(*x) {
                        f |= EDGE_B;
                    }
                }
                f
            })
            .collect();
        FreeBoundaries { grid, t: (0..=grid.nt).map(|j| grid.t(j)).collect(), a, b, edge_flags }
    }

    /// Level where both boundaries are usable for regularity probes.
    pub fn clean(&self, j: usize) -> bool {
        self.edge_flags[j] == 0
    }
}

/// Extracts `a` and `b` level by level.
pub fn extract_boundaries(surface: &ValueSurface) -> Result<FreeBoundaries> {
    let grid = surface.grid;
    let m = &surface.model;
    let tol_contact = surface.settings.tol_contact;
    let tol_grad = surface.settings.tol_grad(m);
    let mut a = Vec::with_capacity(grid.nt + 1);
    let mut b = Vec::with_capacity(grid.nt + 1);
    for j in 0..=grid.nt {
        let g = m.g(grid.t(j));
        let gap: Vec<f64> = surface.v.row(j).iter().map(|v| v - g - tol_contact).collect();
        a.push(lower_crossing(&grid, &gap, j)?);
        let slack: Vec<f64> = (0..grid.nx).map(|i| m.alpha0 - surface.d_plus(j, i) - tol_grad).collect();
        b.push(upper_crossing(&grid, &slack, j)?);
    }
    Ok(FreeBoundaries::with_flags(grid, a, b))
}

/// Lowest upcrossing of `gap` through zero on the nodes.
fn lower_crossing(grid: &LatticeGrid, gap: &[f64], level: usize) -> Result<LowerBoundary> {
    let Some(first) = gap.iter().position(|&f| f > 0.0) else {
        return Ok(LowerBoundary::AllStop);
    };
    if gap[first..].iter().any(|&f| f <= 0.0) {
        return Err(Error::DisconnectedRegion { level, what: "continuation region" });
    }
    if first == 0 {
        return Ok(LowerBoundary::NoneLow);
    }
    let (f0, f1) = (gap[first - 1], gap[first]);
    let x0 = grid.x(first - 1);
    Ok(LowerBoundary::Defined(x0 + grid.dx * (-f0) / (f1 - f0)))
}

/// Highest downcrossing of `slack` (sampled at cell midpoints) through zero.
fn upper_crossing(grid: &LatticeGrid, slack: &[f64], level: usize) -> Result<UpperBoundary> {
    let n = slack.len();
    let Some(last) = slack.iter().rposition(|&q| q > 0.0) else {
        return Ok(UpperBoundary::Defined(grid.x_lo));
    };
    if slack[..last].iter().any(|&q| q <= 0.0) {
        return Err(Error::DisconnectedRegion { level, what: "inaction region" });
    }
    if last + 1 == n {
        return Ok(UpperBoundary::NoneHigh);
    }
    let (q0, q1) = (slack[last], slack[last + 1]);
    let mid = grid.x(last) + 0.5 * grid.dx;
    Ok(UpperBoundary::Defined(mid + grid.dx * q0 / (q0 - q1)))
}

/// Lowest crossing of `values` up to `level_value` on the nodes of a row, or
/// `None` when the row never reaches it. Used for the stopping boundary of the
/// auxiliary problem.
pub(crate) fn first_reach(grid: &LatticeGrid, values: &[f64], level_value: f64) -> Option<f64> {
    let k = values.iter().position(|&u| u >= level_value)?;
    if k == 0 {
        return Some(grid.x_lo);
    }
    let (u0, u1) = (values[k - 1], values[k]);
    Some(grid.x(k - 1) + grid.dx * (level_value - u0) / (u1 - u0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    /// False when neither boundary is defined at any level before `T`.
    pub applicable: bool,
    /// `max_j (a(t_j) - a(t_{j+1}))_+` over consecutive defined levels.
    pub a_monotonicity_defect: f64,
    pub b_monotonicity_defect: f64,
    /// `|a(t_{nt-1}) - Theta_(T)|`.
    pub terminal_gap: Option<f64>,
    pub theta_low_at_horizon: Option<f64>,
    /// `min (b - a)` over levels where both are defined.
    pub min_separation: Option<f64>,
    pub edge_flagged_levels: usize,
}

pub fn check_boundary_shape(fb: &FreeBoundaries, surface: &ValueSurface) -> ShapeReport {
    let grid = fb.grid;
    let model: &GameModel = &surface.model;
    let nt = grid.nt;
    let defined_a: Vec<Option<f64>> = fb.a.iter().map(|x| x.value()).collect();
    let defined_b: Vec<Option<f64>> = fb.b.iter().map(|x| x.value()).collect();
    let applicable = defined_a[..nt].iter().any(Option::is_some) || defined_b[..nt].iter().any(Option::is_some);
    let defect = |xs: &[Option<f64>]| {
        xs.windows(2)
            .filter_map(|w| match (w[0], w[1]) {
                (Some(p), Some(q)) => Some((p - q).max(0.0)),
                _ => None,
            })
            .fold(0.0, f64::max)
    };
    let theta_low = model.theta_lower_root(grid.horizon, grid.x_lo, grid.x_hi);
    let terminal_gap = match (defined_a[nt - 1], theta_low) {
        (Some(a), Some(th)) => Some((a - th).abs()),
        _ => None,
    };
    let min_separation =
        defined_a.iter().zip(&defined_b).filter_map(|(a, b)| Some(b.as_ref()? - a.as_ref()?)).reduce(f64::min);
    ShapeReport {
        applicable,
        a_monotonicity_defect: defect(&defined_a),
        b_monotonicity_defect: defect(&defined_b),
        terminal_gap,
        theta_low_at_horizon: theta_low,
        min_separation,
        edge_flagged_levels: fb.edge_flags.iter().filter(|&&f| f & (EDGE_A | EDGE_B) != 0).count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;
    use crate::grid::make_grid;
    use crate::model::catalog_model;
    use crate::vi_solver::{solve_vi, SolverSettings};
    use std::collections::BTreeMap;

    fn ou(overrides: &[(&str, f64)]) -> GameModel {
        let map = overrides.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        catalog_model("ou_quadratic", None, &map).unwrap()
    }

    fn grid(m: &GameModel, n: usize) -> LatticeGrid {
        make_grid(m, crate::grid::default_window(m), n, n).unwrap()
    }

    #[test]
    fn flat_obstacle_surface_is_all_stop() {
        let m = ou(&[("c2", 0.0), ("r", 0.0)]);
        let s = solve_vi(&m, &grid(&m, 40)).unwrap();
        let fb = extract_boundaries(&s).unwrap();
        assert!(fb.a.iter().all(|a| *a == LowerBoundary::AllStop));
        assert!(fb.b.iter().all(|b| *b == UpperBoundary::NoneHigh));
        assert!(fb.edge_flags.iter().all(|f| f & EDGE_ALL_STOP != 0));
        assert!(!check_boundary_shape(&fb, &s).applicable);
    }

    #[test]
    fn linear_in_time_surface_has_no_boundaries() {
        let m = ou(&[("c2", 0.0), ("c0", 0.5), ("beta", 0.0), ("r", 0.0), ("g0", 0.0)]);
        let gr = grid(&m, 40);
        let s = solve_vi(&m, &gr).unwrap();
        let fb = extract_boundaries(&s).unwrap();
        for j in 0..gr.nt {
            assert_eq!(fb.a[j], LowerBoundary::NoneLow);
            assert_eq!(fb.b[j], UpperBoundary::NoneHigh);
        }
        assert_eq!(fb.a[gr.nt], LowerBoundary::AllStop);
    }

    #[test]
    fn interpolated_roots_on_synthetic_surface() {
        let m = ou(&[]);
        let gr = make_grid(&m, (-2.0, 4.0), 60, 8).unwrap();
        // v = g + max(x - 0.55, 0)^2 / 2 capped at slope alpha0 above x = 1.55.
        let rows: Vec<Vec<f64>> = (0..=gr.nt)
            .map(|_| {
                (0..=gr.nx)
                    .map(|i| {
                        let y = (gr.x(i) - 0.55).max(0.0);
                        m.g0 + if y < 1.0 { 0.5 * y * y } else { 0.5 + (y - 1.0) }
                    })
                    .collect()
            })
            .collect();
        let s = ValueSurface::from_values(m, gr, SolverSettings::default(), Field::from_rows(rows)).unwrap();
        let fb = extract_boundaries(&s).unwrap();
        let a = fb.a[0].value().unwrap();
        let b = fb.b[0].value().unwrap();
        assert!((a - 0.55).abs() <= gr.dx, "a = {a}");
        assert!((b - 1.55).abs() <= 1.5 * gr.dx, "b = {b}");
    }

    #[test]
    fn disconnected_slice_is_a_fault() {
        let m = ou(&[]);
        let gr = make_grid(&m, (-2.0, 4.0), 60, 8).unwrap();
        let rows: Vec<Vec<f64>> = (0..=gr.nt)
            .map(|_| (0..=gr.nx).map(|i| if (20..30).contains(&i) { m.g0 + 0.01 } else { m.g0 }).collect())
            .collect();
        let s = ValueSurface::from_values(m, gr, SolverSettings::default(), Field::from_rows(rows)).unwrap();
        assert!(matches!(extract_boundaries(&s), Err(Error::DisconnectedRegion { level: 0, .. })));
    }

    #[test]
    fn first_reach_conventions() {
        let m = catalog_model("ou_quadratic", None, &BTreeMap::new()).unwrap();
        let gr = make_grid(&m, (0.0, 1.0), 10, 8).unwrap();
        assert_eq!(first_reach(&gr, &[0.0; 11], 1.0), None);
        assert_eq!(first_reach(&gr, &[1.0; 11], 1.0), Some(0.0));
    }
}
