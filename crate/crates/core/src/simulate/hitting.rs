/// Side from which a path meets a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Path at or below the curve (stopping at `a`).
    Down,
    /// Path at or above the curve (reaching `b`).
    Up,
}

/// Elapsed hitting time, capped at the end of the path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitTime {
    pub elapsed: f64,
    pub crossed: bool,
}

#[inline]
fn distance(dir: Direction, x: f64, c: f64) -> f64 {
    match dir {
        Direction::Down => x - c,
        Direction::Up => c - x,
    }
}

/// First time the path meets the curve, with linear interpolation inside the
/// crossing step. `times`, `path` and `curve` share the path's step grid.
pub fn first_hitting(times: &[f64], path: &[f64], curve: &[f64], dir: Direction) -> HitTime {
    let span = *times.last().expect("empty path");
    let mut prev = distance(dir, path[0], curve[0]);
    if prev <= 0.0 {
        return HitTime { elapsed: 0.0, crossed: true };
    }
    for k in 1..times.len() {
        let d = distance(dir, path[k], curve[k]);
        if d <= 0.0 {
            let w = if d.is_finite() { prev / (prev - d) } else { 0.0 };
            return HitTime { elapsed: times[k - 1] + w * (times[k] - times[k - 1]), crossed: true };
        }
        prev = d;
    }
    HitTime { elapsed: span, crossed: false }
}

/// As [`first_hitting`], but also detects crossings between steps with the
/// Brownian-bridge probability `exp(-2 d_k d_{k+1} / (sigma_k^2 h_k))`, using one
/// uniform per step. A detected in-step crossing is placed at
/// `s_k + h_k d_k / (d_k + d_{k+1})`.
pub fn first_hitting_bridge(
    times: &[f64],
    path: &[f64],
    curve: &[f64],
    sigma: &[f64],
    uniforms: &[f64],
    dir: Direction,
) -> HitTime {
    let span = *times.last().expect("empty path");
    let mut prev = distance(dir, path[0], curve[0]);
    if prev <= 0.0 {
        return HitTime { elapsed: 0.0, crossed: true };
    }
    for k in 1..times.len() {
        let h = times[k] - times[k - 1];
        let d = distance(dir, path[k], curve[k]);
        if d <= 0.0 {
            let w = if d.is_finite() { prev / (prev - d) } else { 0.0 };
            return HitTime { elapsed: times[k - 1] + w * h, crossed: true };
        }
        let s2h = sigma[k - 1] * sigma[k - 1] * h;
        if s2h > 0.0 && prev.is_finite() && d.is_finite() {
            let p = (-2.0 * prev * d / s2h).exp();
            if uniforms[k - 1] < p {
                return HitTime { elapsed: times[k - 1] + h * prev / (prev + d), crossed: true };
            }
        }
        prev = d;
    }
    HitTime { elapsed: span, crossed: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, span: f64) -> Vec<f64> {
        (0..=n).map(|k| span * k as f64 / n as f64).collect()
    }

    #[test]
    fn linear_down_crossing() {
        let t = grid(7, 1.0);
        let y: Vec<f64> = t.iter().map(|s| 1.0 - 2.0 * s).collect();
        let hit = first_hitting(&t, &y, &vec![0.0; t.len()], Direction::Down);
        assert!(hit.crossed);
        assert!((hit.elapsed - 0.5).abs() < 1e-15);
    }

    #[test]
    fn linear_up_crossing() {
        let t = grid(9, 1.0);
        let y: Vec<f64> = t.iter().map(|s| 0.5 + s).collect();
        let hit = first_hitting(&t, &y, &vec![1.0; t.len()], Direction::Up);
        assert!((hit.elapsed - 0.5).abs() < 1e-15);
    }

    #[test]
    fn never_crossing_caps_at_horizon() {
        let t = grid(10, 0.8);
        let hit = first_hitting(&t, &[0.0; 11], &[1.0; 11], Direction::Up);
        assert_eq!(hit, HitTime { elapsed: 0.8, crossed: false });
        let hit = first_hitting(&t, &[0.0; 11], &[f64::NEG_INFINITY; 11], Direction::Down);
        assert!(!hit.crossed);
    }

    #[test]
    fn bridge_without_noise_matches_grid_monitoring() {
        let t = grid(7, 1.0);
        let y: Vec<f64> = t.iter().map(|s| 1.0 - 2.0 * s).collect();
        let c = vec![0.0; t.len()];
        let u = vec![0.5; t.len()];
        let plain = first_hitting(&t, &y, &c, Direction::Down);
        let bridged = first_hitting_bridge(&t, &y, &c, &vec![0.0; t.len()], &u, Direction::Down);
        assert_eq!(plain, bridged);
    }

    #[test]
    fn bridge_detects_excursion_between_steps() {
        let t = grid(2, 1.0);
        let y = [0.1, 0.1, 0.1];
        let c = [0.0; 3];
        // exp(-2 * 0.01 / (1 * 0.5)) ~ 0.96 > 0.5
        let hit = first_hitting_bridge(&t, &y, &c, &[1.0; 3], &[0.5; 3], Direction::Down);
        assert!(hit.crossed);
        assert!((hit.elapsed - 0.25).abs() < 1e-15);
    }
}
