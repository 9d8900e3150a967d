//! Game instances: coefficients, constants and the domain, plus sampled
//! screening of the standing assumptions.
//!
//! Models come from a small built-in catalog whose parameters may be
//! overridden from the run configuration. Every coefficient family is closed
//! form, so derivatives are exact and evaluation is pure.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::LatticeGrid;
use crate::simulate::{Dynamics, PathBundle};

/// State space of the uncontrolled diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainKind {
    /// `O = R`, constant volatility `sigma0`.
    #[serde(rename = "R")]
    WholeLine,
    /// `O = (0, inf)`, volatility `sigma1 * x`, absorbing at zero.
    #[serde(rename = "halfline")]
    HalfLine,
}

impl DomainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainKind::WholeLine => "R",
            DomainKind::HalfLine => "halfline",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "R" => Some(DomainKind::WholeLine),
            "halfline" => Some(DomainKind::HalfLine),
            _ => None,
        }
    }
}

/// Drift families. Both are affine or quadratic so `mu_xx` is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drift {
    /// `mu(x) = kappa * (mean - x)`.
    MeanReverting { kappa: f64, mean: f64 },
    /// `mu(x) = kappa * x * (1 - inv_cap * x)`; linear when `inv_cap = 0`.
    Logistic { kappa: f64, inv_cap: f64 },
}

impl Drift {
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Drift::MeanReverting { kappa, mean } => kappa * (mean - x),
            Drift::Logistic { kappa, inv_cap } => kappa * x * (1.0 - inv_cap * x),
        }
    }

    #[inline]
    pub fn dx(&self, x: f64) -> f64 {
        match *self {
            Drift::MeanReverting { kappa, .. } => -kappa,
            Drift::Logistic { kappa, inv_cap } => kappa * (1.0 - 2.0 * inv_cap * x),
        }
    }

    #[inline]
    pub fn dxx(&self, _x: f64) -> f64 {
        match *self {
            Drift::MeanReverting { .. } => 0.0,
            Drift::Logistic { kappa, inv_cap } => -2.0 * kappa * inv_cap,
        }
    }
}

/// A complete problem instance. Immutable once built.
///
/// The stopper's payoff is `g(t) = g0 + g1 t`; the running payoff is
/// `h(t, x) = exp(-beta t) (c2 x_+^2 + c1 x + c0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameModel {
    pub domain: DomainKind,
    pub drift: Drift,
    /// `sigma0` on the whole line, `sigma1` on the half-line.
    pub sigma_param: f64,
    pub g0: f64,
    pub g1: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub beta: f64,
    pub r: f64,
    pub alpha0: f64,
    pub horizon: f64,
    /// Evaluation point used by reports and Monte Carlo experiments.
    pub x_ref: f64,
}

impl GameModel {
    /// Checks the structural invariants and returns the model unchanged.
    pub fn validated(self) -> Result<Self> {
        let p = "model.params";
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::invalid(format!("{p}.alpha0"), "must be positive"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid(format!("{p}.T"), "must be positive"));
        }
        if !(self.sigma_param > 0.0 && self.sigma_param.is_finite()) {
            return Err(Error::invalid(format!("{p}.sigma"), "must be positive"));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(Error::invalid(format!("{p}.r"), "must be non-negative"));
        }
        for (name, v) in [
            ("g0", self.g0),
            ("g1", self.g1),
            ("c0", self.c0),
            ("c1", self.c1),
            ("c2", self.c2),
            ("beta", self.beta),
            ("x_ref", self.x_ref),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{p}.{name}"), "must be finite"));
            }
        }
        if self.domain == DomainKind::HalfLine {
            if self.drift.value(0.0) != 0.0 {
                return Err(Error::invalid(format!("{p}.kappa"), "half-line drift must vanish at 0"));
            }
            if self.x_ref <= 0.0 {
                return Err(Error::invalid(format!("{p}.x_ref"), "must lie in (0, inf)"));
            }
        }
        Ok(self)
    }

    #[inline]
    pub fn mu(&self, x: f64) -> f64 {
        self.drift.value(x)
    }

    #[inline]
    pub fn mu_x(&self, x: f64) -> f64 {
        self.drift.dx(x)
    }

    #[inline]
    pub fn mu_xx(&self, x: f64) -> f64 {
        self.drift.dxx(x)
    }

    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        match self.domain {
            DomainKind::WholeLine => self.sigma_param,
            DomainKind::HalfLine => self.sigma_param * x,
        }
    }

    #[inline]
    pub fn sigma_x(&self, _x: f64) -> f64 {
        match self.domain {
            DomainKind::WholeLine => 0.0,
            DomainKind::HalfLine => self.sigma_param,
        }
    }

    #[inline]
    pub fn g(&self, t: f64) -> f64 {
        self.g0 + self.g1 * t
    }

    #[inline]
    pub fn g_dot(&self, _t: f64) -> f64 {
        self.g1
    }

    #[inline]
    pub fn h(&self, t: f64, x: f64) -> f64 {
        let xp = x.max(0.0);
        (-self.beta * t).exp() * (self.c2 * xp * xp + self.c1 * x + self.c0)
    }

    /// `h(t, x) = h_time(t) * h_space(x)`.
    #[inline]
    pub fn h_time(&self, t: f64) -> f64 {
        (-self.beta * t).exp()
    }

    #[inline]
    pub fn h_space(&self, x: f64) -> f64 {
        let xp = x.max(0.0);
        self.c2 * xp * xp + self.c1 * x + self.c0
    }

    #[inline]
    pub fn h_x(&self, t: f64, x: f64) -> f64 {
        (-self.beta * t).exp() * (2.0 * self.c2 * x.max(0.0) + self.c1)
    }

    #[inline]
    pub fn h_xx(&self, t: f64, x: f64) -> f64 {
        if x > 0.0 {
            (-self.beta * t).exp() * 2.0 * self.c2
        } else {
            0.0
        }
    }

    /// `g'(t) - r g(t) + h(t, x)` without domain checks.
    #[inline]
    pub fn theta_unchecked(&self, t: f64, x: f64) -> f64 {
        self.g_dot(t) - self.r * self.g(t) + self.h(t, x)
    }

    /// `r - mu_x(y)` without domain checks.
    #[inline]
    pub fn lambda_unchecked(&self, y: f64) -> f64 {
        self.r - self.mu_x(y)
    }

    fn check_point(&self, t: f64, x: f64) -> Result<()> {
        let t_ok = t.is_finite() && (0.0..=self.horizon).contains(&t);
        let x_ok = x.is_finite() && (self.domain == DomainKind::WholeLine || x >= 0.0);
        if t_ok && x_ok {
            Ok(())
        } else {
            Err(Error::DomainViolation { t, x })
        }
    }

    /// Stationary standard deviation of the mean-reverting drift, if any.
    pub fn stationary_std(&self) -> Option<f64> {
        match self.drift {
            Drift::MeanReverting { kappa, .. } if kappa > 0.0 => Some(self.sigma_param / (2.0 * kappa).sqrt()),
            _ => None,
        }
    }

    /// `Theta_(t) = inf { y : Theta(t, y) > 0 }`, located by bisection on `[lo, hi]`.
    /// Returns `None` when `Theta(t, .)` never becomes positive on the interval and
    /// `Some(lo)` when it is already positive at `lo`.
    pub fn theta_lower_root(&self, t: f64, lo: f64, hi: f64) -> Option<f64> {
        // Theta is non-decreasing in x because h_x >= 0 for admissible models.
        let f = |x: f64| self.theta_unchecked(t, x);
        if f(lo) > 0.0 {
            return Some(lo);
        }
        if f(hi) <= 0.0 {
            return None;
        }
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f(m) > 0.0 {
                b = m;
            } else {
                a = m;
            }
            if b - a <= 1e-15 * (1.0 + b.abs()) {
                break;
            }
        }
        Some(0.5 * (a + b))
    }
}

/// `Theta(t, x) = g'(t) - r g(t) + h(t, x)`.
pub fn theta(model: &GameModel, t: f64, x: f64) -> Result<f64> {
    model.check_point(t, x)?;
    Ok(model.theta_unchecked(t, x))
}

/// Discount rate `r - mu_x(y)` of the auxiliary stopping problem.
pub fn lambda_rate(model: &GameModel, y: f64) -> Result<f64> {
    model.check_point(0.0, y)?;
    Ok(model.lambda_unchecked(y))
}

/// Names accepted by [`catalog_model`].
pub const CATALOG: [&str; 2] = ["ou_quadratic", "halfline_linear"];

/// Builds a catalog model with optional parameter overrides.
///
/// `ou_quadratic`: whole line, `mu = kappa (mean - x)`, constant `sigma`,
/// constant obstacle, `h = c2 x_+^2 exp(-beta t)`.
/// `halfline_linear`: half-line, `mu = kappa x (1 - inv_cap x)` (linear by
/// default), `sigma(x) = sigma x`, same payoff family.
pub fn catalog_model(name: &str, domain: Option<DomainKind>, overrides: &BTreeMap<String, f64>) -> Result<GameModel> {
    let (native, mut params): (DomainKind, BTreeMap<&str, f64>) = match name {
        "ou_quadratic" => (
            DomainKind::WholeLine,
            BTreeMap::from([
                ("kappa", 0.5),
                ("mean", 1.0),
                ("sigma", 0.5),
                ("r", 0.1),
                ("alpha0", 1.0),
                ("T", 1.0),
                ("g0", 1.0),
                ("g1", 0.0),
                ("c0", 0.0),
                ("c1", 0.0),
                ("c2", 1.0),
                ("beta", 0.5),
                ("x_ref", 0.5),
            ]),
        ),
        "halfline_linear" => (
            DomainKind::HalfLine,
            BTreeMap::from([
                ("kappa", 0.05),
                ("inv_cap", 0.0),
                ("sigma", 0.3),
                ("r", 0.1),
                ("alpha0", 1.0),
                ("T", 1.0),
                ("g0", 1.0),
                ("g1", 0.0),
                ("c0", 0.0),
                ("c1", 0.0),
                ("c2", 1.0),
                ("beta", 0.5),
                ("x_ref", 0.5),
            ]),
        ),
        other => {
            return Err(Error::invalid(
                "model.name",
                format!("unknown catalog model `{other}` (known: {})", CATALOG.join(", ")),
            ))
        }
    };
    if let Some(d) = domain {
        if d != native {
            return Err(Error::invalid("model.domain", format!("`{name}` lives on `{}`", native.as_str())));
        }
    }
    for (k, v) in overrides {
        match params.get_mut(k.as_str()) {
            Some(slot) => *slot = *v,
            None => return Err(Error::invalid(format!("model.params.{k}"), format!("not a parameter of `{name}`"))),
        }
    }
    let drift = match native {
        DomainKind::WholeLine => Drift::MeanReverting { kappa: params["kappa"], mean: params["mean"] },
        DomainKind::HalfLine => Drift::Logistic { kappa: params["kappa"], inv_cap: params["inv_cap"] },
    };
    if !drift.value(0.0).is_finite() || !params["kappa"].is_finite() {
        return Err(Error::invalid("model.params.kappa", "must be finite"));
    }
    GameModel {
        domain: native,
        drift,
        sigma_param: params["sigma"],
        g0: params["g0"],
        g1: params["g1"],
        c0: params["c0"],
        c1: params["c1"],
        c2: params["c2"],
        beta: params["beta"],
        r: params["r"],
        alpha0: params["alpha0"],
        horizon: params["T"],
        x_ref: params["x_ref"],
    }
    .validated()
}

/// Whether a failed check aborts the pipeline or is only reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Hard,
    Soft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub samples: String,
    pub severity: Severity,
    pub pass: bool,
    /// Largest violation observed; 0 when the check passes.
    pub worst_violation: f64,
    /// `(t, x)` of the worst violation, when one exists.
    pub location: Option<(f64, f64)>,
    /// Check-specific measured quantity (e.g. the observed `K1`).
    pub measured: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    /// True when no hard check failed.
    pub fn hard_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass || c.severity == Severity::Soft)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Observed `K1 = -min Theta` on the sampled window.
    pub fn k1(&self) -> f64 {
        self.get(CHECK_THETA_BOUNDED).and_then(|c| c.measured).unwrap_or(f64::NAN)
    }
}

pub const CHECK_HX_NONNEG: &str = "h_x >= 0";
pub const CHECK_HX_X_MONO: &str = "x -> h_x non-decreasing";
pub const CHECK_HX_T_MONO: &str = "t -> h_x non-increasing";
pub const CHECK_THETA_T_MONO: &str = "t -> theta non-increasing";
pub const CHECK_THETA_BOUNDED: &str = "inf theta finite";
pub const CHECK_THETA_SUP_POS: &str = "sup_x theta > 0 for t < T";
pub const CHECK_THETA_ORIGIN: &str = "theta(0,0) < 0 on the half-line";
pub const CHECK_MU_ORIGIN: &str = "mu(0) = 0 on the half-line";
pub const CHECK_MU_CONVEX: &str = "mu convex";
pub const CHECK_MU_X_BOUNDED: &str = "mu_x bounded above";
pub const CHECK_EXIT_INTEGRAL: &str = "exit integral exceeds alpha0 at window top";

/// Accumulates the worst violation of an inequality over samples.
struct Worst {
    mag: f64,
    at: Option<(f64, f64)>,
}

impl Worst {
    fn new() -> Self {
        Worst { mag: 0.0, at: None }
    }

    /// Records a violation of size `excess` when positive.
    fn see(&mut self, excess: f64, t: f64, x: f64) {
        if excess > self.mag || (excess.is_nan() && self.at.is_none()) {
            self.mag = excess;
            self.at = Some((t, x));
        }
    }

    fn into_check(self, name: &str, samples: &str, tol: f64) -> AssumptionCheck {
        let pass = self.mag <= tol;
        AssumptionCheck {
            name: name.to_string(),
            samples: samples.to_string(),
            severity: Severity::Hard,
            pass,
            worst_violation: if pass { 0.0 } else { self.mag },
            location: if pass { None } else { self.at },
            measured: None,
        }
    }
}

/// Screens the standing assumptions by sampling every node of `grid`.
///
/// The exit-integral condition at the top of the window is estimated by Monte
/// Carlo with a conservative proxy for the absorption time (the first entry
/// below `Theta_(t)`, which precedes the true exit) and is only flagged.
pub fn validate_assumptions(model: &GameModel, grid: &LatticeGrid) -> AssumptionReport {
    let xs: Vec<f64> = (0..=grid.nx).map(|i| grid.x(i)).collect();
    let ts: Vec<f64> = (0..=grid.nt).map(|j| grid.t(j)).collect();
    let all = format!("{}x{} lattice nodes", ts.len(), xs.len());
    // Relative slack for rounding in exp(-beta t) products.
    let tol = 1e-12;
    let mut checks = Vec::new();

    let mut w = Worst::new();
    for &t in &ts {
        for &x in &xs {
            w.see(-model.h_x(t, x), t, x);
        }
    }
    checks.push(w.into_check(CHECK_HX_NONNEG, &all, tol));

    let mut w = Worst::new();
    for &t in &ts {
        for pair in xs.windows(2) {
            w.see(model.h_x(t, pair[0]) - model.h_x(t, pair[1]), t, pair[1]);
        }
    }
    checks.push(w.into_check(CHECK_HX_X_MONO, &all, tol));

    let mut w = Worst::new();
    for pair in ts.windows(2) {
        for &x in &xs {
            w.see(model.h_x(pair[1], x) - model.h_x(pair[0], x), pair[1], x);
        }
    }
    checks.push(w.into_check(CHECK_HX_T_MONO, &all, tol));

    let mut w = Worst::new();
    for pair in ts.windows(2) {
        for &x in &xs {
            let rise = model.theta_unchecked(pair[1], x) - model.theta_unchecked(pair[0], x);
            w.see(rise, pair[1], x);
        }
    }
    checks.push(w.into_check(CHECK_THETA_T_MONO, &all, tol));

    let mut min_theta = f64::INFINITY;
    let mut min_at = (0.0, 0.0);
    for &t in &ts {
        for &x in &xs {
            let th = model.theta_unchecked(t, x);
            if th < min_theta || th.is_nan() {
                min_theta = th;
                min_at = (t, x);
            }
        }
    }
    let finite = min_theta.is_finite();
    checks.push(AssumptionCheck {
        name: CHECK_THETA_BOUNDED.to_string(),
        samples: all.clone(),
        severity: Severity::Hard,
        pass: finite,
        worst_violation: if finite { 0.0 } else { f64::MAX },
        location: if finite { None } else { Some(min_at) },
        measured: Some(-min_theta),
    });

    let mut w = Worst::new();
    for &t in ts.iter().filter(|&&t| t < model.horizon) {
        let sup = xs.iter().map(|&x| model.theta_unchecked(t, x)).fold(f64::NEG_INFINITY, f64::max);
        // Violation magnitude: how far the supremum falls short of being positive.
        if sup <= 0.0 {
            w.see(-sup + f64::MIN_POSITIVE, t, grid.x_hi);
        }
    }
    checks.push(w.into_check(CHECK_THETA_SUP_POS, &all, 0.0));

    if model.domain == DomainKind::HalfLine {
        let th00 = model.theta_unchecked(0.0, 0.0);
        let mut w = Worst::new();
        if th00 >= 0.0 {
            w.see(th00 + f64::MIN_POSITIVE, 0.0, 0.0);
        }
        checks.push(w.into_check(CHECK_THETA_ORIGIN, "(0, 0)", 0.0));

        let mut w = Worst::new();
        let mu0 = model.mu(0.0).abs();
        if mu0 > 0.0 {
            w.see(mu0, 0.0, 0.0);
        }
        checks.push(w.into_check(CHECK_MU_ORIGIN, "x = 0", 0.0));
    }

    let mut w = Worst::new();
    for k in 1..xs.len().saturating_sub(1) {
        let second = model.mu(xs[k + 1]) - 2.0 * model.mu(xs[k]) + model.mu(xs[k - 1]);
        w.see(-second / (grid.dx * grid.dx), 0.0, xs[k]);
    }
    // Rounding in the second difference is of order eps * |mu| / dx^2.
    let mu_scale = xs.iter().map(|&x| model.mu(x).abs()).fold(1.0, f64::max);
    let conv_tol = 16.0 * f64::EPSILON * mu_scale / (grid.dx * grid.dx);
    checks.push(w.into_check(CHECK_MU_CONVEX, &format!("{} window nodes", xs.len()), conv_tol));

    let sup_mu_x = xs.iter().map(|&x| model.mu_x(x)).fold(f64::NEG_INFINITY, f64::max);
    checks.push(AssumptionCheck {
        name: CHECK_MU_X_BOUNDED.to_string(),
        samples: format!("{} window nodes", xs.len()),
        severity: Severity::Hard,
        pass: sup_mu_x.is_finite(),
        worst_violation: if sup_mu_x.is_finite() { 0.0 } else { f64::MAX },
        location: None,
        measured: Some(sup_mu_x),
    });

    checks.push(exit_integral_check(model, grid));

    AssumptionReport { checks }
}

/// Monte Carlo lower bound for the expected discounted `h_x` integral of `Y`
/// started at the top of the window, up to the first entry below `Theta_`.
fn exit_integral_check(model: &GameModel, grid: &LatticeGrid) -> AssumptionCheck {
    const PATHS: usize = 2000;
    const STEPS: usize = 400;
    let y0 = grid.x_hi;
    let dt = model.horizon / STEPS as f64;
    let bundle = PathBundle::new(0x5eed_a55e, PATHS, dt, model.horizon);
    let theta_low: Vec<f64> = (0..=STEPS)
        .map(|k| {
            let t = k as f64 * dt;
            model.theta_lower_root(t, grid.x_lo, grid.x_hi).unwrap_or(grid.x_hi)
        })
        .collect();
    let mut z = vec![0.0; STEPS];
    let mut total = 0.0;
    for p in 0..PATHS {
        bundle.fill_normals(p, &mut z);
        let mut y = y0;
        let mut log_disc = 0.0_f64;
        let mut acc = 0.0;
        for (k, zk) in z.iter().enumerate() {
            let t = k as f64 * dt;
            if y <= theta_low[k] {
                break;
            }
            acc += (-log_disc).exp() * model.h_x(t, y) * dt;
            log_disc += model.lambda_unchecked(y) * dt;
            y = Dynamics::Y.euler_step(model, y, dt, dt.sqrt() * zk).0;
        }
        total += acc;
    }
    let estimate = total / PATHS as f64;
    let pass = estimate > model.alpha0;
    AssumptionCheck {
        name: CHECK_EXIT_INTEGRAL.to_string(),
        samples: format!("t=0, y={y0}, {PATHS} paths, {STEPS} steps"),
        severity: Severity::Soft,
        pass,
        worst_violation: if pass { 0.0 } else { model.alpha0 - estimate },
        location: if pass { None } else { Some((0.0, y0)) },
        measured: Some(estimate),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn ou(overrides: &[(&str, f64)]) -> GameModel {
        let map = overrides.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        catalog_model("ou_quadratic", None, &map).unwrap()
    }

    #[test]
    fn theta_direct_substitution() {
        let m = ou(&[("g0", 1.0), ("r", 0.1), ("c2", 1.0), ("beta", 0.0)]);
        assert!((theta(&m, 0.0, 0.5).unwrap() - 0.15).abs() < 1e-15);
    }

    #[test]
    fn theta_zero_case() {
        let m = ou(&[("g0", 0.0), ("r", 0.0), ("c2", 0.0)]);
        for &(t, x) in &[(0.0, -3.0), (0.3, 0.0), (1.0, 2.5)] {
            assert_eq!(theta(&m, t, x).unwrap(), 0.0);
        }
    }

    #[test]
    fn theta_reference_model_hand_value() {
        // Defaults: g = 1, r = 0.1, h = x_+^2 exp(-0.5 t).
        // theta(0.5, 1.0) = 0 - 0.1 + exp(-0.25) = 0.6788007830714049
        let m = ou(&[]);
        let expected = -0.1 + (-0.25f64).exp();
        assert!((theta(&m, 0.5, 1.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.678_800_783_071_404_9).abs() < 1e-15);
    }

    #[test]
    fn theta_rejects_points_off_the_half_line() {
        let m = catalog_model("halfline_linear", None, &BTreeMap::new()).unwrap();
        assert!(matches!(theta(&m, 0.0, -0.1), Err(Error::DomainViolation { .. })));
        assert!(theta(&m, 0.0, 0.0).is_ok());
    }

    #[test]
    fn lambda_constant_for_linear_drift() {
        let m = ou(&[("kappa", 0.5), ("mean", 1.0), ("r", 0.1)]);
        for y in [-2.0, 0.0, 3.0] {
            assert!((lambda_rate(&m, y).unwrap() - 0.6).abs() < 1e-15);
        }
        let z = ou(&[("kappa", 0.0), ("r", 0.0)]);
        assert_eq!(lambda_rate(&z, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn lambda_logistic_hand_derivative() {
        // mu = kappa x (1 - x/m) => mu_x(1) = kappa (1 - 2/m)
        let (kappa, m_cap, r) = (0.3, 4.0, 0.05);
        let params =
            [("kappa", kappa), ("inv_cap", 1.0 / m_cap), ("r", r)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let m = catalog_model("halfline_linear", None, &params).unwrap();
        let expected = r - kappa * (1.0 - 2.0 / m_cap);
        assert!((lambda_rate(&m, 1.0).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn catalog_rejects_bad_parameters() {
        let bad = BTreeMap::from([("alpha0".to_string(), -1.0)]);
        match catalog_model("ou_quadratic", None, &bad) {
            Err(Error::InvalidInput { field, .. }) => assert_eq!(field, "model.params.alpha0"),
            other => panic!("unexpected {other:?}"),
        }
        let unknown = BTreeMap::from([("zeta".to_string(), 1.0)]);
        assert!(catalog_model("ou_quadratic", None, &unknown).is_err());
        assert!(catalog_model("nope", None, &BTreeMap::new()).is_err());
        assert!(catalog_model("ou_quadratic", Some(DomainKind::HalfLine), &BTreeMap::new()).is_err());
    }

    fn default_grid(m: &GameModel) -> LatticeGrid {
        let w = crate::grid::default_window(m);
        make_grid(m, w, 100, 50).unwrap()
    }

    #[test]
    fn catalog_models_pass_screening() {
        for name in CATALOG {
            let m = catalog_model(name, None, &BTreeMap::new()).unwrap();
            let report = validate_assumptions(&m, &default_grid(&m));
            for c in &report.checks {
                assert!(c.pass, "{name}: {c:?}");
            }
        }
    }

    #[test]
    fn negative_slope_running_payoff_fails_hx_check() {
        let m = ou(&[("c2", 0.0), ("c1", -1.0)]);
        let report = validate_assumptions(&m, &default_grid(&m));
        let c = report.get(CHECK_HX_NONNEG).unwrap();
        assert!(!c.pass);
        assert!((c.worst_violation - 1.0).abs() < 1e-12);
        assert!(c.location.is_some());
        assert!(!report.hard_pass());
    }

    #[test]
    fn constant_theta_passes_everything_hard() {
        // g(t) = t, r = 0, h = 0 gives theta = 1.
        let m = ou(&[("g0", 0.0), ("g1", 1.0), ("r", 0.0), ("c2", 0.0)]);
        let report = validate_assumptions(&m, &default_grid(&m));
        assert!(report.hard_pass());
        assert!((report.k1() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn concave_drift_fails_convexity() {
        let params = [("kappa", 0.3), ("inv_cap", 0.25)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let m = catalog_model("halfline_linear", None, &params).unwrap();
        let report = validate_assumptions(&m, &default_grid(&m));
        assert!(!report.get(CHECK_MU_CONVEX).unwrap().pass);
    }

    proptest::proptest! {
        #[test]
        fn theta_and_lambda_are_pure(t in 0.0..1.0f64, x in -3.0..4.0f64) {
            let m = ou(&[]);
            proptest::prop_assert_eq!(theta(&m, t, x).unwrap().to_bits(), theta(&m, t, x).unwrap().to_bits());
            proptest::prop_assert_eq!(lambda_rate(&m, x).unwrap().to_bits(), lambda_rate(&m, x).unwrap().to_bits());
        }

        #[test]
        fn lambda_bounded_below_by_r_minus_sup_mu_x(x in 0.0..8.0f64) {
            let m = catalog_model("halfline_linear", None, &BTreeMap::new()).unwrap();
            let grid = default_grid(&m);
            let sup = (0..=grid.nx).map(|i| m.mu_x(grid.x(i))).fold(f64::NEG_INFINITY, f64::max);
            proptest::prop_assert!(lambda_rate(&m, x).unwrap() >= m.r - sup - 1e-15);
        }
    }
}
