//! Posterior construction from market observations and the posterior-mixture
//! ("subjective") option prices.
//!
//! The Black-Scholes posterior over the variance `σ²` is fitted from the
//! normalized log-return increments of a discrete observation series; the
//! Merton posterior over `θ = (λ, δ², m)` is fitted from the jump record of
//! a continuously observed path. Subjective prices mix the parametric
//! prices over these posteriors: a one-dimensional adaptive quadrature for
//! the Black-Scholes mixture, exact-conjugate (or grid inverse-CDF)
//! posterior sampling for the three-dimensional Merton mixture.

mod bs;
mod merton;

pub use bs::{fit_bs_posterior, subjective_bs_price, BsPosterior};
pub use merton::{fit_merton_posterior, subjective_merton_price, MertonPosterior};

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sim::ObservationSeries;

type LogFactor = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Prior over the unknown parameters.
///
/// Custom priors are supplied as per-coordinate log-density factors (the
/// prior is their product), which is the structure the posterior engines
/// exploit: the Merton posterior factorizes into a `λ` part and a `(δ², m)`
/// part exactly when the prior does. Factors must be bounded above on the
/// support; `Noninformative` is the constant prior `π ≡ 1`.
#[derive(Clone)]
pub enum Prior {
    Noninformative,
    Custom(CustomPrior),
}

#[derive(Clone)]
pub struct CustomPrior {
    support_note: String,
    factors: Vec<Option<LogFactor>>,
}

impl fmt::Debug for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prior::Noninformative => write!(f, "Prior::Noninformative"),
            Prior::Custom(c) => write!(f, "Prior::Custom({:?})", c.support_note),
        }
    }
}

impl Prior {
    /// Custom prior over `σ²` for the Black-Scholes posterior.
    pub fn custom_sigma_sq<F>(support_note: impl Into<String>, log_density: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Prior::Custom(CustomPrior {
            support_note: support_note.into(),
            factors: vec![Some(Arc::new(log_density))],
        })
    }

    /// Custom factorized prior over `(λ, δ², m)` for the Merton posterior;
    /// `None` leaves a coordinate flat.
    pub fn custom_merton(
        support_note: impl Into<String>,
        log_lambda: Option<LogFactor>,
        log_delta_sq: Option<LogFactor>,
        log_m: Option<LogFactor>,
    ) -> Self {
        Prior::Custom(CustomPrior {
            support_note: support_note.into(),
            factors: vec![log_lambda, log_delta_sq, log_m],
        })
    }

    /// Helper to box a factor for [`Prior::custom_merton`].
    pub fn factor<F>(f: F) -> LogFactor
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Arc::new(f)
    }

    pub fn is_noninformative(&self) -> bool {
        matches!(self, Prior::Noninformative)
    }

    pub fn support_note(&self) -> &str {
        match self {
            Prior::Noninformative => "constant prior on the natural parameter domain",
            Prior::Custom(c) => &c.support_note,
        }
    }

    /// Log-density contribution of coordinate `i` at `x` (0 when flat).
    pub(crate) fn factor_log(&self, i: usize, x: f64) -> f64 {
        match self {
            Prior::Noninformative => 0.0,
            Prior::Custom(c) => match c.factors.get(i) {
                Some(Some(f)) => f(x),
                _ => 0.0,
            },
        }
    }

    pub(crate) fn has_factor(&self, i: usize) -> bool {
        match self {
            Prior::Noninformative => false,
            Prior::Custom(c) => matches!(c.factors.get(i), Some(Some(_))),
        }
    }

    /// Joint log-density over the coordinate vector.
    pub fn log_density(&self, coords: &[f64]) -> f64 {
        (0..coords.len()).map(|i| self.factor_log(i, coords[i])).sum()
    }
}

/// Normalized log-return increments
/// `X_j = (ln(S_{t_{j+1}} / S_{t_j}) - ρ·Δt_j) / √Δt_j`,
/// which under the Black-Scholes model are i.i.d. `N(0, σ²)`.
pub fn log_returns(series: &ObservationSeries, rho: f64) -> Result<Vec<f64>> {
    if !rho.is_finite() {
        return Err(Error::invalid("rho must be finite"));
    }
    let times = series.times();
    let quotes = series.quotes();
    Ok((0..series.len() - 1)
        .map(|j| {
            let dt = times[j + 1] - times[j];
            ((quotes[j + 1] / quotes[j]).ln() - rho * dt) / dt.sqrt()
        })
        .collect())
}

/// Order-insensitive pairwise summation; keeps parallel reductions
/// independent of block count.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Mean and standard error of the mean.
pub(crate) fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Inverse-CDF sampling grid used for custom priors.
pub(crate) const INV_CDF_GRID: usize = 4097;

/// Piecewise-linear inverse CDF over a fixed grid of unnormalized density
/// values. The grid is documented posterior metadata: `INV_CDF_GRID`
/// log-spaced (positive domains) or linear (signed domains) nodes over the
/// fitted bracket.
pub(crate) struct GridSampler {
    nodes: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridSampler {
    pub(crate) fn from_log_density<L: Fn(f64) -> f64>(
        nodes: Vec<f64>,
        log_density: L,
    ) -> Result<Self> {
        let logs: Vec<f64> = nodes.iter().map(|&x| log_density(x)).collect();
        let lmax = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lmax.is_finite() {
            return Err(Error::DegeneratePrior(
                "prior leaves no finite density on the sampling grid".into(),
            ));
        }
        let dens: Vec<f64> = logs.iter().map(|&l| (l - lmax).exp()).collect();
        let mut cdf = Vec::with_capacity(nodes.len());
        cdf.push(0.0);
        for i in 1..nodes.len() {
            let seg = 0.5 * (dens[i] + dens[i - 1]) * (nodes[i] - nodes[i - 1]);
            cdf.push(cdf[i - 1] + seg);
        }
        let total = *cdf.last().unwrap();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegeneratePrior(
                "prior mass vanishes everywhere on the sampling grid".into(),
            ));
        }
        Ok(Self { nodes, cdf })
    }

    pub(crate) fn invert(&self, u: f64) -> f64 {
        let target = u * *self.cdf.last().unwrap();
        let k = self.cdf.partition_point(|&c| c < target).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let t = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
        self.nodes[k - 1] + t * (self.nodes[k] - self.nodes[k - 1])
    }
}

/// Log-spaced nodes for positive domains.
pub(crate) fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut v: Vec<f64> = (0..count)
        .map(|i| (llo + (lhi - llo) * i as f64 / (count - 1) as f64).exp())
        .collect();
    v[0] = lo;
    v[count - 1] = hi;
    v
}

/// Linearly spaced nodes for signed domains.
pub(crate) fn lin_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect();
    v[0] = lo;
    v[count - 1] = hi;
    v
}

/// Grows a multiplicative bracket `[center/c, center·c]` until the
/// log-density at both ends has dropped `drop` nats below its maximum over a
/// scouting grid (the inverse-gamma-type tails of every posterior here
/// guarantee termination).
pub(crate) fn bracket_positive<L: Fn(f64) -> f64>(center: f64, log_density: &L) -> Result<(f64, f64)> {
    const DROP: f64 = 27.631; // ln(1e12)
    let mut c = 2.0f64;
    for _ in 0..200 {
        let (lo, hi) = (center / c, center * c);
        let peak = log_spaced(lo, hi, 129)
            .into_iter()
            .map(&log_density)
            .fold(f64::NEG_INFINITY, f64::max);
        if !peak.is_finite() {
            return Err(Error::DegenerateDensity(
                "log-density not finite anywhere on the bracketing grid".into(),
            ));
        }
        if log_density(lo) < peak - DROP && log_density(hi) < peak - DROP {
            return Ok((lo, hi));
        }
        c *= 2.0;
    }
    Err(Error::Numerical(
        "density bracket did not close; tails decay too slowly to normalize".into(),
    ))
}
