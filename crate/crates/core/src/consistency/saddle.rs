//! Saddle-point ratio evaluator for one-dimensional parameter families.
//!
//! Evaluates `R_n = ∫ e^{-n·h_n(θ)} g(θ) π(θ) dθ / ∫ e^{-n·h_n(θ)} π(θ) dθ`
//! over a support in `(0, ∞)`. When `h` has a unique minimum at `θ0` and the
//! usual uniformity conditions hold, `R_n → g(θ0)`; for non-integrable
//! priors an integrable envelope `exp(-a(θ))` plays the role of the missing
//! prior decay, with `h̃_n = h_n - a/n` carrying the rest.

use std::sync::Arc;

use super::experiments::{ConvergenceRow, ConvergenceTable};
use crate::bayes::Prior;
use crate::error::{Error, Result};
use crate::quad::{expectation_1d, QuadResult};

type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type FnFamily = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A saddle-point problem: the family `h_n`, its limit `h` with unique
/// minimum at `theta0`, the payoff functional `g`, the prior, and the
/// optional envelope `a` for non-integrable priors.
///
/// Construction asserts numerically, on a grid over the support, that no
/// point outside a shrinking neighbourhood of `theta0` comes within half
/// of the observed exterior margin of the minimum; the margin is stored as
/// `gamma`.
pub struct SaddleProblem {
    h_n: FnFamily,
    h: Fn1,
    g: Fn1,
    prior: Prior,
    theta0: f64,
    envelope_a: Option<Fn1>,
    support: (f64, f64),
    gamma: f64,
}

const VALIDATION_GRID: usize = 2049;
const BRACKET_DROP: f64 = 27.631; // ln(1e12)

impl SaddleProblem {
    /// `support` is `(lo, hi)` with `lo ≥ 0`; `hi` may be `f64::INFINITY`.
    pub fn new(
        h_n: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        prior: Prior,
        theta0: f64,
        envelope_a: Option<Fn1>,
        support: (f64, f64),
    ) -> Result<Self> {
        let (lo, hi) = support;
        if !(lo >= 0.0) || !lo.is_finite() {
            return Err(Error::invalid("support lower bound must be finite and >= 0"));
        }
        if !(lo < theta0 && theta0 < hi) {
            return Err(Error::invalid(format!(
                "theta0 = {theta0} must lie inside the support ({lo}, {hi})"
            )));
        }

        // Grid check of the unique-minimum assumption on a finite window.
        let hi_eff = if hi.is_finite() { hi } else { (10.0 * theta0).max(theta0 + 10.0) };
        let lo_eff = if lo > 0.0 { lo } else { hi_eff * 1e-9 };
        let beta0 = h(theta0);
        if !beta0.is_finite() {
            return Err(Error::invalid("h(theta0) must be finite"));
        }
        let radius = (hi_eff - lo_eff) / 64.0;
        let mut exterior_margin = f64::INFINITY;
        for i in 0..VALIDATION_GRID {
            let x = lo_eff + (hi_eff - lo_eff) * i as f64 / (VALIDATION_GRID - 1) as f64;
            let hx = h(x);
            if hx.is_nan() {
                continue;
            }
            if hx < beta0 - 1e-12 * (1.0 + beta0.abs()) {
                return Err(Error::invalid(format!(
                    "h attains {hx} < h(theta0) = {beta0} at theta = {x}; theta0 is not the minimum"
                )));
            }
            if (x - theta0).abs() > radius {
                exterior_margin = exterior_margin.min(hx - beta0);
            }
        }
        if !(exterior_margin > 0.0) {
            return Err(Error::invalid(
                "h has no positive margin outside the neighbourhood of theta0; the minimum is not unique on the grid",
            ));
        }

        Ok(Self {
            h_n: Arc::new(h_n),
            h: Arc::new(h),
            g: Arc::new(g),
            prior,
            theta0,
            envelope_a,
            support,
            gamma: exterior_margin,
        })
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    /// Observed exterior margin `min_{|θ-θ0|>r} h(θ) - h(θ0)` from the
    /// validation grid.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn g_at_theta0(&self) -> f64 {
        (self.g)(self.theta0)
    }

    /// `h̃_n = h_n - a/n`, the envelope-adjusted family (equal to `h_n`
    /// when no envelope is set).
    pub fn tilde_h(&self, n: f64, theta: f64) -> f64 {
        let base = (self.h_n)(n, theta);
        match &self.envelope_a {
            Some(a) => base - a(theta) / n,
            None => base,
        }
    }

    /// Full log-integrand `-n·h_n(θ) + ln π(θ)`; the envelope regrouping
    /// `e^{-n·h̃_n}·e^{-a}π` multiplies out to exactly this.
    fn log_weight(&self, n: f64, theta: f64) -> f64 {
        -n * (self.h_n)(n, theta) + self.prior.factor_log(0, theta)
    }

    /// Integration bracket: the support clipped to where the weight is
    /// within `1e12` of its running peak, grown outward from `theta0`.
    fn bracket(&self, n: f64) -> Result<(f64, f64)> {
        let (slo, shi) = self.support;
        let mut c = 2.0f64;
        for _ in 0..200 {
            let lo = slo.max(self.theta0 / c);
            let hi = shi.min(self.theta0 * c);
            let mut peak = f64::NEG_INFINITY;
            for i in 0..257 {
                let t = i as f64 / 256.0;
                let x = (lo.ln() + t * (hi.ln() - lo.ln())).exp();
                peak = peak.max(self.log_weight(n, x));
            }
            if !peak.is_finite() {
                return Err(Error::DegenerateDensity(
                    "saddle weight not finite anywhere on the bracketing grid".into(),
                ));
            }
            let lo_done = lo <= slo || self.log_weight(n, lo) < peak - BRACKET_DROP
                || lo <= self.theta0 * 1e-12;
            let hi_done = hi >= shi || self.log_weight(n, hi) < peak - BRACKET_DROP;
            if lo_done && hi_done {
                return Ok((lo, hi));
            }
            c *= 2.0;
        }
        Err(Error::Numerical(
            "saddle bracket did not close; the weight's tails decay too slowly".into(),
        ))
    }
}

impl std::fmt::Debug for SaddleProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SaddleProblem")
            .field("theta0", &self.theta0)
            .field("support", &self.support)
            .field("gamma", &self.gamma)
            .field("prior", &self.prior)
            .field("envelope", &self.envelope_a.is_some())
            .finish()
    }
}

/// Evaluates the ratio `R_n` to absolute tolerance `tol`.
pub fn saddle_ratio(prob: &SaddleProblem, n: u32, tol: f64) -> Result<QuadResult> {
    if n < 1 {
        return Err(Error::invalid("saddle ratio needs n >= 1"));
    }
    let nf = n as f64;
    let bracket = prob.bracket(nf)?;
    expectation_1d(|x| (prob.g)(x), |x| prob.log_weight(nf, x), bracket, tol)
}

/// Tabulates `R_n` against `g(θ0)` over an increasing list of `n`.
///
/// Row columns: index `n`, the ratio, the reference `g(θ0)`, the relative
/// difference `|R_n - g(θ0)| / max(|g(θ0)|, 1e-300)` and the quadrature
/// error estimate. [`ConvergenceTable::fraction_decreasing`] gives the
/// monotone-trend statistic.
pub fn saddle_convergence_check(
    prob: &SaddleProblem,
    n_list: &[u32],
    tol: f64,
) -> Result<ConvergenceTable> {
    if !n_list.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid("n_list must be strictly increasing"));
    }
    let g0 = prob.g_at_theta0();
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let q = saddle_ratio(prob, n, tol)?;
        rows.push(ConvergenceRow {
            index: n as f64,
            subjective: q.value,
            reference: g0,
            rel_diff: (q.value - g0).abs() / g0.abs().max(1e-300),
            err: q.abs_error_estimate,
        });
    }
    ConvergenceTable::new(rows)
}
