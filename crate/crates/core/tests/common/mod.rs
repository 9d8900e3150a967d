#![allow(dead_code)]

pub mod oracle;

use stopctl_core::boundaries::check_boundary_shape;
use stopctl_core::diagnostics::monotonicity_defects;
use stopctl_core::{FreeBoundaries, ValueSurface};

/// One structural invariant: observed worst value against its allowance.
#[derive(Debug, Clone)]
pub struct Invariant {
    pub name: &'static str,
    pub worst: f64,
    pub allowed: f64,
}

impl Invariant {
    pub fn holds(&self) -> bool {
        self.worst <= self.allowed
    }
}

/// Obstacle, gradient bounds, boundary shape and the three monotonicity properties.
pub fn structural_invariants(s: &ValueSurface, fb: &FreeBoundaries) -> Vec<Invariant> {
    let g = &s.grid;
    let m = &s.model;
    let mut below_g: f64 = f64::NEG_INFINITY;
    let mut neg_slope: f64 = f64::NEG_INFINITY;
    let mut over_cap: f64 = f64::NEG_INFINITY;
    for j in 0..=g.nt {
        let row = s.v.row(j);
        let gj = m.g(g.t(j));
        for i in 0..=g.nx {
            below_g = below_g.max(gj - row[i]);
            if i < g.nx {
                let d = (row[i + 1] - row[i]) / g.dx;
                neg_slope = neg_slope.max(-d);
                over_cap = over_cap.max(d - m.alpha0);
            }
        }
    }
    let shape = check_boundary_shape(fb, s);
    let mono = monotonicity_defects(s);
    let set = s.settings;
    vec![
        Invariant { name: "v >= g", worst: below_g, allowed: 1e-8 },
        Invariant { name: "D+v >= 0", worst: neg_slope, allowed: 1e-6 * m.alpha0 },
        Invariant { name: "D+v <= alpha0", worst: over_cap, allowed: 1e-6 * m.alpha0 },
        Invariant { name: "a non-decreasing", worst: shape.a_monotonicity_defect, allowed: 2.0 * g.dx },
        Invariant { name: "b non-decreasing", worst: shape.b_monotonicity_defect, allowed: 2.0 * g.dx },
        Invariant {
            name: "a < b",
            worst: shape.min_separation.map_or(f64::NEG_INFINITY, |d| -d),
            allowed: -f64::MIN_POSITIVE,
        },
        Invariant { name: "x -> v non-decreasing", worst: mono.x_monotone, allowed: 10.0 * set.tol_solve },
        Invariant { name: "t -> v - g non-increasing", worst: mono.time_monotone_gap, allowed: 10.0 * set.tol_solve },
        Invariant { name: "t -> v_x non-increasing", worst: mono.time_monotone_vx, allowed: set.tol_grad(m) },
    ]
}
