use crate::boundaries::{FreeBoundaries, LowerBoundary, UpperBoundary};

/// A boundary curve in absolute time, linear between samples.
///
/// Infinite samples encode "never crosses" (`-inf` below, `+inf` above); a
/// segment with an infinite endpoint takes its left value.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Curve {
    pub fn constant(value: f64) -> Self {
        Curve { times: vec![0.0], values: vec![value] }
    }

    pub fn from_samples(times: Vec<f64>, values: Vec<f64>) -> Self {
        assert!(!times.is_empty() && times.len() == values.len());
        assert!(times.windows(2).all(|w| w[0] < w[1]), "sample times must increase");
        Curve { times, values }
    }

    /// Stopping curve `a + delta`. The terminal level, where the whole slice is
    /// stopping by construction, holds the previous level's value.
    pub fn stopping(fb: &FreeBoundaries, delta: f64) -> Self {
        let mut values: Vec<f64> =
            fb.a.iter()
                .map(|a| match a {
                    LowerBoundary::Defined(x) => x + delta,
                    LowerBoundary::NoneLow => f64::NEG_INFINITY,
                    LowerBoundary::AllStop => f64::INFINITY,
                })
                .collect();
        let n = values.len();
        if n >= 2 {
            values[n - 1] = values[n - 2];
        }
        Curve::from_samples(fb.t.clone(), values)
    }

    /// Reflection curve `b + delta`.
    pub fn action(fb: &FreeBoundaries, delta: f64) -> Self {
        let values =
            fb.b.iter()
                .map(|b| match b {
                    UpperBoundary::Defined(x) => x + delta,
                    UpperBoundary::NoneHigh => f64::INFINITY,
                })
                .collect();
        Curve::from_samples(fb.t.clone(), values)
    }

    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.values[0];
        }
        if k == self.times.len() {
            return self.values[k - 1];
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        if v0.is_finite() && v1.is_finite() {
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        } else {
            v0
        }
    }

    /// Samples at `t0 + s` for each elapsed time `s`.
    pub fn sample(&self, t0: f64, elapsed: &[f64]) -> Vec<f64> {
        elapsed.iter().map(|s| self.at(t0 + s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_clamps() {
        let c = Curve::from_samples(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, f64::INFINITY]);
        assert_eq!(c.at(-1.0), 0.0);
        assert_eq!(c.at(0.25), 0.25);
        assert_eq!(c.at(1.5), 1.0);
        assert_eq!(c.at(3.0), f64::INFINITY);
        assert_eq!(Curve::constant(0.5).at(7.0), 0.5);
    }
}
