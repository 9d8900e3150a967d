//! Brute-force recombining-tree dynamic program for the catalog OU-quadratic
//! game. Shares no code with the library solvers: the model formulas are
//! restated here from the catalog defaults.

#[derive(Debug, Clone, Copy)]
pub struct OuGame {
    pub kappa: f64,
    pub mean: f64,
    pub sigma: f64,
    pub r: f64,
    pub alpha0: f64,
    pub horizon: f64,
    pub g0: f64,
    pub g1: f64,
    pub c2: f64,
    pub beta: f64,
    pub x_ref: f64,
}

impl Default for OuGame {
    fn default() -> Self {
        OuGame {
            kappa: 0.5,
            mean: 1.0,
            sigma: 0.5,
            r: 0.1,
            alpha0: 1.0,
            horizon: 1.0,
            g0: 1.0,
            g1: 0.0,
            c2: 1.0,
            beta: 0.5,
            x_ref: 0.5,
        }
    }
}

/// Value slice at time zero on the tree lattice.
#[derive(Debug, Clone)]
pub struct TreeSlice {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub dx: f64,
}

impl TreeSlice {
    pub fn at(&self, x: f64) -> f64 {
        let s = (x - self.x[0]) / self.dx;
        let k = (s.floor() as usize).min(self.x.len() - 2);
        let w = s - k as f64;
        (1.0 - w) * self.v[k] + w * self.v[k + 1]
    }

    /// First point where `v` leaves the obstacle, linearly interpolated.
    pub fn stopping_boundary(&self, g: f64, tol: f64) -> Option<f64> {
        let k = self.v.iter().position(|&v| v > g + tol)?;
        if k == 0 {
            return None;
        }
        let (e0, e1) = (self.v[k - 1] - g - tol, self.v[k] - g - tol);
        Some(self.x[k - 1] + self.dx * (-e0) / (e1 - e0))
    }

    /// Last midpoint where the slope is below `alpha0 - tol`.
    pub fn action_boundary(&self, alpha0: f64, tol: f64) -> Option<f64> {
        let slope: Vec<f64> = self.v.windows(2).map(|w| (w[1] - w[0]) / self.dx).collect();
        let k = slope.iter().rposition(|&s| s < alpha0 - tol)?;
        if k + 1 >= slope.len() {
            return None;
        }
        let (e0, e1) = (slope[k] - alpha0 + tol, slope[k + 1] - alpha0 + tol);
        Some(self.x[k] + 0.5 * self.dx + self.dx * (-e0) / (e1 - e0))
    }
}

impl OuGame {
    fn g(&self, t: f64) -> f64 {
        self.g0 + self.g1 * t
    }

    fn h(&self, t: f64, x: f64) -> f64 {
        let xp = x.max(0.0);
        self.c2 * xp * xp * (-self.beta * t).exp()
    }

    /// Backward induction with `steps` time steps. Each step takes the
    /// discounted expectation plus running payoff, lifts to the obstacle and
    /// caps the upward slope at `alpha0`.
    pub fn solve(&self, steps: usize) -> TreeSlice {
        let dt = self.horizon / steps as f64;
        let dx = self.sigma * dt.sqrt();
        let half = steps + steps / 5 + 10;
        let x: Vec<f64> = (0..=2 * half).map(|k| self.x_ref + (k as f64 - half as f64) * dx).collect();
        let p: Vec<f64> = x
            .iter()
            .map(|&y| (0.5 + self.kappa * (self.mean - y) * dt.sqrt() / (2.0 * self.sigma)).clamp(0.0, 1.0))
            .collect();
        let disc = (-self.r * dt).exp();
        let mut v = vec![self.g(self.horizon); x.len()];
        let mut next = v.clone();
        let last = x.len() - 1;
        for n in (0..steps).rev() {
            let t = n as f64 * dt;
            let g = self.g(t);
            for k in 0..=last {
                let up = v[(k + 1).min(last)];
                let dn = v[k.saturating_sub(1)];
                let cont = disc * (p[k] * up + (1.0 - p[k]) * dn) + self.h(t, x[k]) * dt;
                next[k] = cont.max(g);
            }
            for k in 1..=last {
                next[k] = next[k].min(next[k - 1] + self.alpha0 * dx);
            }
            std::mem::swap(&mut v, &mut next);
        }
        TreeSlice { x, v, dx }
    }

    /// `2 V(2n) - V(n)` at `x_ref`.
    pub fn richardson_at_ref(&self, steps: usize) -> f64 {
        let coarse = self.solve(steps).at(self.x_ref);
        let fine = self.solve(2 * steps).at(self.x_ref);
        2.0 * fine - coarse
    }
}
