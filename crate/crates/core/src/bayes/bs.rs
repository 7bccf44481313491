//! Posterior over the Black-Scholes variance and the subjective price.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;

use super::{bracket_positive, log_returns, log_spaced, GridSampler, Prior, INV_CDF_GRID};
use crate::error::{Error, Result};
use crate::pricing::{bs_price_raw, OptionSpec, PriceMethod, PriceResult};
use crate::quad::{expectation_1d, log_integral_1d};
use crate::rng::rng_from_seed;
use crate::sim::ObservationSeries;

/// Posterior over `σ²` given `n` normalized increments with second moment
/// `σ̂²_n`:
///
/// `f_n(σ²) ∝ σ^{-n} · exp(-n·σ̂²_n / (2σ²)) · π(σ²)`.
///
/// Under the noninformative prior this is inverse-gamma with shape
/// `n/2 - 1` and scale `n·σ̂²/2`, and the normalization is closed-form;
/// custom priors are normalized by adaptive quadrature over an
/// automatically grown bracket `[σ̂²/c, σ̂²·c]`.
#[derive(Debug, Clone)]
pub struct BsPosterior {
    n: usize,
    sigma_hat_sq: f64,
    prior: Prior,
    log_norm: f64,
    bracket: (f64, f64),
}

/// Relative tolerance used for posterior normalization constants.
const NORM_REL_TOL: f64 = 1e-8;

impl BsPosterior {
    /// Builds the posterior directly from sufficient statistics.
    ///
    /// Needs `n ≥ 2`; the noninformative prior additionally needs `n ≥ 3`,
    /// because for `n = 2` the density `σ^{-2}·exp(-σ̂²/σ²)` is not
    /// integrable in `dσ²` and no posterior distribution exists.
    pub fn from_stats(n: usize, sigma_hat_sq: f64, prior: Prior) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("posterior needs n >= 2 increments, got {n}")));
        }
        if !(sigma_hat_sq > 0.0) || !sigma_hat_sq.is_finite() {
            return Err(Error::DegenerateData(format!(
                "variance estimate must be positive, got {sigma_hat_sq}"
            )));
        }
        if prior.is_noninformative() && n < 3 {
            return Err(Error::invalid(
                "the noninformative prior needs n >= 3: for n = 2 the posterior kernel is not integrable",
            ));
        }

        let nf = n as f64;
        let beta = 0.5 * nf * sigma_hat_sq;
        let prior_for_bracket = prior.clone();
        let log_unnorm =
            move |v: f64| -0.5 * nf * v.ln() - beta / v + prior_for_bracket.factor_log(0, v);
        let bracket = bracket_positive(sigma_hat_sq, &log_unnorm)?;

        let log_norm = if prior.is_noninformative() {
            let alpha = 0.5 * nf - 1.0;
            statrs::function::gamma::ln_gamma(alpha) - alpha * beta.ln()
        } else {
            log_integral_1d(&log_unnorm, bracket, NORM_REL_TOL)?
        };

        Ok(Self { n, sigma_hat_sq, prior, log_norm, bracket })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma_hat_sq(&self) -> f64 {
        self.sigma_hat_sq
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// Bracket `[σ̂²/c, σ̂²·c]` outside which the density is below `1e-12`
    /// of its mode; quadrature and grid sampling operate on it.
    pub fn bracket(&self) -> (f64, f64) {
        self.bracket
    }

    /// Unnormalized log-density in `σ²`.
    pub fn log_unnorm(&self, sigma_sq: f64) -> f64 {
        let nf = self.n as f64;
        -0.5 * nf * sigma_sq.ln() - 0.5 * nf * self.sigma_hat_sq / sigma_sq
            + self.prior.factor_log(0, sigma_sq)
    }

    /// Normalized posterior density in `σ²`.
    pub fn density(&self, sigma_sq: f64) -> f64 {
        if sigma_sq <= 0.0 {
            return 0.0;
        }
        (self.log_unnorm(sigma_sq) - self.log_norm).exp()
    }

    /// Draws `count` variance samples; exact inverse-gamma sampling under
    /// the noninformative prior, grid inverse-CDF otherwise. Deterministic
    /// per seed.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<f64>> {
        if count < 1 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        let mut rng = rng_from_seed(seed);
        if self.prior.is_noninformative() {
            let alpha = 0.5 * self.n as f64 - 1.0;
            let beta = 0.5 * self.n as f64 * self.sigma_hat_sq;
            let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::Numerical(e.to_string()))?;
            Ok((0..count).map(|_| beta / gamma.sample(&mut rng)).collect())
        } else {
            let nodes = log_spaced(self.bracket.0, self.bracket.1, INV_CDF_GRID);
            let sampler = GridSampler::from_log_density(nodes, |v| self.log_unnorm(v))?;
            Ok((0..count).map(|_| sampler.invert(rng.random::<f64>())).collect())
        }
    }

    /// Posterior summary for serialization.
    pub fn summary(&self) -> BsPosteriorSummary {
        BsPosteriorSummary {
            n: self.n,
            sigma_hat_sq: self.sigma_hat_sq,
            prior: self.prior.support_note().to_string(),
            log_norm: self.log_norm,
            bracket_lo: self.bracket.0,
            bracket_hi: self.bracket.1,
            grid_points: INV_CDF_GRID,
        }
    }
}

/// JSON-friendly posterior summary: sufficient statistics, prior kind,
/// cached normalization and grid metadata.
#[derive(Debug, Clone, Serialize)]
pub struct BsPosteriorSummary {
    pub n: usize,
    pub sigma_hat_sq: f64,
    pub prior: String,
    pub log_norm: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub grid_points: usize,
}

/// Fits the variance posterior from an observation series with known drift.
pub fn fit_bs_posterior(series: &ObservationSeries, rho: f64, prior: Prior) -> Result<BsPosterior> {
    if series.len() < 3 {
        return Err(Error::invalid(format!(
            "posterior fitting needs at least 3 observations (n >= 2 increments), got {}",
            series.len()
        )));
    }
    let xs = log_returns(series, rho)?;
    let n = xs.len();
    let sigma_hat_sq = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if sigma_hat_sq == 0.0 {
        return Err(Error::DegenerateData(
            "all normalized increments are zero; the variance posterior is degenerate".into(),
        ));
    }
    BsPosterior::from_stats(n, sigma_hat_sq, prior)
}

/// Subjective Black-Scholes price: the parametric price mixed over the
/// variance posterior,
///
/// `V = ∫ V_BS(σ) · f_n(σ²) dσ²`,
///
/// evaluated by adaptive quadrature to absolute tolerance `tol`. The
/// integrand is bounded by `max(S0, K)` and the posterior integrates to
/// one, so the value inherits the payoff bounds.
pub fn subjective_bs_price(
    opt: &OptionSpec,
    s0: f64,
    rho: f64,
    post: &BsPosterior,
    tol: f64,
) -> Result<PriceResult> {
    if !(s0 > 0.0) || !s0.is_finite() {
        return Err(Error::invalid(format!("s0 must be positive, got {s0}")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    let g = |v: f64| bs_price_raw(opt.kind, opt.strike, opt.maturity, s0, rho, v.sqrt());
    let q = expectation_1d(g, |v| post.log_unnorm(v), post.bracket, tol)?;
    if !q.converged {
        return Err(Error::Numerical(format!(
            "subjective price quadrature did not converge: error estimate {:.3e} after {} evaluations (tol {tol:.3e})",
            q.abs_error_estimate, q.evaluations
        )));
    }
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("evaluations".to_string(), q.evaluations as f64);
    diagnostics.insert("posterior_n".to_string(), post.n as f64);
    Ok(PriceResult {
        value: q.value,
        abs_error_estimate: q.abs_error_estimate,
        method: PriceMethod::Quadrature,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::bs_price;
    use crate::quad::integrate_adaptive;
    use crate::sim::{simulate_bs_path, BsParams};
    use approx::assert_relative_eq;
    use statrs::distribution::{Continuous, InverseGamma};

    fn fitted(n_obs: usize, seed: u64) -> BsPosterior {
        let p = BsParams::new(100.0, 0.002, 0.158).unwrap();
        let grid: Vec<f64> = (0..=n_obs).map(|i| -((n_obs - i) as f64) / 252.0).collect();
        let s = simulate_bs_path(&p, &grid, seed).unwrap();
        fit_bs_posterior(&s, 0.002, Prior::Noninformative).unwrap()
    }

    #[test]
    fn noninformative_matches_inverse_gamma_closed_form() {
        // Oracle: statrs' InverseGamma(shape n/2 - 1, rate n·σ̂²/2).
        for (n, shat) in [(5usize, 0.02), (20, 0.025), (150, 0.0251)] {
            let post = BsPosterior::from_stats(n, shat, Prior::Noninformative).unwrap();
            let ig = InverseGamma::new(n as f64 / 2.0 - 1.0, n as f64 * shat / 2.0).unwrap();
            let (lo, hi) = post.bracket();
            for i in 0..1000 {
                let v = lo + (hi - lo) * (i as f64 + 0.5) / 1000.0;
                let ours = post.density(v);
                let oracle = ig.pdf(v);
                if oracle > 1e-300 {
                    assert_relative_eq!(ours, oracle, max_relative = 1e-8);
                }
            }
        }
    }

    #[test]
    fn density_peaks_at_the_variance_estimate() {
        let post = BsPosterior::from_stats(40, 0.02, Prior::Noninformative).unwrap();
        let (lo, hi) = post.bracket();
        let mut best = (0.0, f64::NEG_INFINITY);
        for i in 0..20_000 {
            let v = lo + (hi - lo) * i as f64 / 20_000.0;
            if v <= 0.0 {
                continue;
            }
            let d = post.log_unnorm(v);
            if d > best.1 {
                best = (v, d);
            }
        }
        assert_relative_eq!(best.0, 0.02, max_relative = 1e-3);
    }

    #[test]
    fn posterior_integrates_to_one() {
        for post in [
            BsPosterior::from_stats(8, 0.03, Prior::Noninformative).unwrap(),
            BsPosterior::from_stats(
                20,
                0.025,
                Prior::custom_sigma_sq("sigma² · exp(-sigma²) on (0, ∞)", |v: f64| v.ln() - v),
            )
            .unwrap(),
        ] {
            let q = integrate_adaptive(
                |v| post.density(v),
                0.0,
                f64::INFINITY,
                1e-12,
                1e-10,
            )
            .unwrap();
            assert!(q.converged);
            assert!((q.value - 1.0).abs() <= 1e-8, "mass {} for n={}", q.value, post.n());
        }
    }

    #[test]
    fn degenerate_increments_are_rejected() {
        // σ = 0 and ρ = 0: constant quotes, exactly zero increments.
        let p = BsParams::new(100.0, 0.0, 0.0).unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| -((10 - i) as f64) / 252.0).collect();
        let s = simulate_bs_path(&p, &grid, 1).unwrap();
        assert!(matches!(
            fit_bs_posterior(&s, 0.0, Prior::Noninformative),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn noninformative_needs_three_increments() {
        assert!(BsPosterior::from_stats(2, 0.02, Prior::Noninformative).is_err());
        // A decaying custom prior makes n = 2 integrable.
        let prior = Prior::custom_sigma_sq("exp(-sigma²)", |v: f64| -v);
        assert!(BsPosterior::from_stats(2, 0.02, prior).is_ok());
    }

    #[test]
    fn sampling_matches_posterior_moments() {
        let post = BsPosterior::from_stats(30, 0.025, Prior::Noninformative).unwrap();
        let alpha = 14.0f64;
        let beta = 15.0f64 * 0.025;
        let vs = post.sample(100_000, 7).unwrap();
        let mean = vs.iter().sum::<f64>() / vs.len() as f64;
        let expected = beta / (alpha - 1.0);
        let sd = (beta * beta / ((alpha - 1.0) * (alpha - 1.0) * (alpha - 2.0))).sqrt();
        assert!((mean - expected).abs() <= 3.0 * sd / (vs.len() as f64).sqrt());
        // Determinism.
        assert_eq!(post.sample(1000, 3).unwrap(), post.sample(1000, 3).unwrap());
    }

    #[test]
    fn grid_sampling_tracks_custom_posterior() {
        let prior = Prior::custom_sigma_sq("sigma²·exp(-sigma²)", |v: f64| v.ln() - v);
        let post = BsPosterior::from_stats(25, 0.02, prior).unwrap();
        let vs = post.sample(200_000, 11).unwrap();
        let mean_mc = vs.iter().sum::<f64>() / vs.len() as f64;
        let mean_quad =
            expectation_1d(|v| v, |v| post.log_unnorm(v), post.bracket(), 1e-10).unwrap();
        assert_relative_eq!(mean_mc, mean_quad.value, max_relative = 2e-3);
    }

    #[test]
    fn concentrated_posterior_recovers_the_parametric_price() {
        let sigma0 = 0.158f64;
        let post = BsPosterior::from_stats(1_000_000, sigma0 * sigma0, Prior::Noninformative).unwrap();
        let opt = OptionSpec::call(100.0, 0.25).unwrap();
        let tol = 1e-6;
        let subj = subjective_bs_price(&opt, 100.0, 0.002, &post, tol).unwrap();
        let parametric = bs_price(&opt, 100.0, 0.002, sigma0).unwrap();
        assert!(
            (subj.value - parametric.value).abs() <= 10.0 * tol,
            "subjective {} vs parametric {}",
            subj.value,
            parametric.value
        );
    }

    #[test]
    fn subjective_parity_holds_through_the_mixture() {
        let post = fitted(20, 5);
        let (s0, rho, t, k) = (100.0, 0.002, 0.25, 100.0);
        let tol = 1e-8;
        let call = subjective_bs_price(&OptionSpec::call(k, t).unwrap(), s0, rho, &post, tol).unwrap();
        let put = subjective_bs_price(&OptionSpec::put(k, t).unwrap(), s0, rho, &post, tol).unwrap();
        let parity = s0 - k * (-rho * t).exp();
        assert!((call.value - put.value - parity).abs() <= 2.0 * tol);
    }

    #[test]
    fn subjective_price_respects_payoff_bounds() {
        let post = fitted(10, 9);
        for k in [60.0, 100.0, 140.0] {
            let c = subjective_bs_price(&OptionSpec::call(k, 0.25).unwrap(), 100.0, 0.002, &post, 1e-8)
                .unwrap();
            assert!(c.value >= 0.0 && c.value <= 100.0f64.max(k));
        }
    }
}
