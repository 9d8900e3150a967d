//! Uniform time-space lattice over a truncated state window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DomainKind, GameModel};

/// Uniform lattice `t_j = j T / nt`, `x_i = x_lo + i dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeGrid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub nx: usize,
    pub nt: usize,
    pub horizon: f64,
    pub dx: f64,
    pub dt: f64,
}

impl LatticeGrid {
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_lo + i as f64 * self.dx
    }

    #[inline]
    pub fn t(&self, j: usize) -> f64 {
        if j == self.nt {
            self.horizon
        } else {
            j as f64 * self.dt
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..=self.nx).map(|i| self.x(i)).collect()
    }

    /// Index of the time level closest to `t`.
    pub fn nearest_level(&self, t: f64) -> usize {
        ((t / self.dt).round().max(0.0) as usize).min(self.nt)
    }

    /// Cell index `i` with `x_i <= x < x_{i+1}`, clamped to `[0, nx-1]`.
    pub fn cell(&self, x: f64) -> usize {
        let k = ((x - self.x_lo) / self.dx).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.nx - 1)
        }
    }

    /// Grid with both spacings halved.
    pub fn refined(&self) -> LatticeGrid {
        LatticeGrid {
            nx: 2 * self.nx,
            nt: 2 * self.nt,
            dx: (self.x_hi - self.x_lo) / (2 * self.nx) as f64,
            dt: self.horizon / (2 * self.nt) as f64,
            ..*self
        }
    }

    pub fn same_lattice(&self, other: &LatticeGrid) -> bool {
        self.nx == other.nx
            && self.nt == other.nt
            && self.x_lo.to_bits() == other.x_lo.to_bits()
            && self.x_hi.to_bits() == other.x_hi.to_bits()
            && self.horizon.to_bits() == other.horizon.to_bits()
    }
}

/// Default truncation window: six stationary deviations around the mean on the
/// whole line, `[0, 8 x_ref]` on the half-line.
pub fn default_window(model: &GameModel) -> (f64, f64) {
    match model.domain {
        DomainKind::WholeLine => {
            let centre = match model.drift {
                crate::model::Drift::MeanReverting { mean, .. } => mean,
                crate::model::Drift::Logistic { .. } => model.x_ref,
            };
            let spread = model.stationary_std().unwrap_or(model.sigma_param * model.horizon.sqrt());
            (centre - 6.0 * spread, centre + 6.0 * spread)
        }
        DomainKind::HalfLine => (0.0, 8.0 * model.x_ref),
    }
}

/// Builds a lattice on `window` and checks it against the model's domain and
/// evaluation point.
pub fn make_grid(model: &GameModel, window: (f64, f64), nx: usize, nt: usize) -> Result<LatticeGrid> {
    let (x_lo, x_hi) = window;
    if nx < 8 {
        return Err(Error::invalid("grid.nx", format!("need at least 8 intervals, got {nx}")));
    }
    if nt < 8 {
        return Err(Error::invalid("grid.nt", format!("need at least 8 intervals, got {nt}")));
    }
    if !(x_lo.is_finite() && x_hi.is_finite() && x_lo < x_hi) {
        return Err(Error::invalid("grid.x_lo", format!("window [{x_lo}, {x_hi}] is empty")));
    }
    if model.domain == DomainKind::HalfLine && x_lo != 0.0 {
        return Err(Error::invalid("grid.x_lo", "half-line windows start at 0"));
    }
    if !(x_lo < model.x_ref && model.x_ref < x_hi) {
        return Err(Error::invalid(
            "grid.x_hi",
            format!("window [{x_lo}, {x_hi}] does not contain x_ref = {}", model.x_ref),
        ));
    }
    Ok(LatticeGrid {
        x_lo,
        x_hi,
        nx,
        nt,
        horizon: model.horizon,
        dx: (x_hi - x_lo) / nx as f64,
        dt: model.horizon / nt as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog_model;
    use std::collections::BTreeMap;

    fn ou() -> GameModel {
        catalog_model("ou_quadratic", None, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn spacing_arithmetic() {
        let g = make_grid(&ou(), (0.0, 4.0), 400, 400).unwrap();
        assert!((g.dx - 0.01).abs() < 1e-15);
        assert!((g.dt - 0.0025).abs() < 1e-15);
        assert_eq!(g.t(g.nt), 1.0);
    }

    #[test]
    fn rejects_bad_windows() {
        let half = catalog_model("halfline_linear", None, &BTreeMap::new()).unwrap();
        assert!(make_grid(&half, (0.1, 4.0), 100, 100).is_err());
        assert!(make_grid(&half, (0.0, 4.0), 100, 100).is_ok());
        assert!(make_grid(&ou(), (0.0, 4.0), 4, 100).is_err());
        assert!(make_grid(&ou(), (0.0, 4.0), 100, 4).is_err());
        assert!(make_grid(&ou(), (1.0, 0.0), 100, 100).is_err());
        // x_ref = 0.5 outside [1, 4]
        assert!(make_grid(&ou(), (1.0, 4.0), 100, 100).is_err());
    }

    #[test]
    fn default_windows() {
        let (lo, hi) = default_window(&ou());
        assert!((lo + 2.0).abs() < 1e-12 && (hi - 4.0).abs() < 1e-12);
        let half = catalog_model("halfline_linear", None, &BTreeMap::new()).unwrap();
        assert_eq!(default_window(&half), (0.0, 4.0));
    }

    proptest::proptest! {
        #[test]
        fn refinement_nests_bit_exactly(nx in 8usize..300, nt in 8usize..300, lo in -5.0..0.0f64, w in 0.5..10.0f64) {
            let m = GameModel { x_ref: lo + 0.5 * w, ..ou() };
            let coarse = make_grid(&m, (lo, lo + w), nx, nt).unwrap();
            let fine = coarse.refined();
            for i in 0..=nx {
                proptest::prop_assert_eq!(coarse.x(i).to_bits(), fine.x(2 * i).to_bits());
            }
            for j in 0..=nt {
                proptest::prop_assert_eq!(coarse.t(j).to_bits(), fine.t(2 * j).to_bits());
            }
            let rebuilt = make_grid(&m, (lo, lo + w), 2 * nx, 2 * nt).unwrap();
            proptest::prop_assert!(rebuilt.same_lattice(&fine));
            proptest::prop_assert_eq!(rebuilt.dx.to_bits(), fine.dx.to_bits());
        }
    }
}
