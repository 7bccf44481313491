//! Posterior over the Merton jump parameters and the subjective price.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::{
    bracket_positive, lin_spaced, log_spaced, mean_and_stderr, GridSampler, Prior, INV_CDF_GRID,
};
use crate::error::{Error, Result};
use crate::pricing::{merton_series_price, OptionSpec, PriceMethod, PriceResult};
use crate::quad::log_integral_1d;
use crate::rng::rng_from_seed;
use crate::sim::{JumpRecord, MertonTheta};

/// Posterior over `θ = (λ, δ², m)` given `N` observed jumps with heights
/// `Y_j` over a window of length `τ`:
///
/// `f_τ(θ) ∝ e^{-τλ}·λ^N · δ^{-N}·exp(-(N/2)(δ̂²/δ² + ((m̂-m)/δ)²)) · π(θ)`,
///
/// with `λ̂ = N/τ`, `m̂` the sample mean and `δ̂²` the `1/N`-normalized
/// sample variance of the jump heights. The `λ` factor and the `(δ², m)`
/// factor are independent whenever the prior factorizes, which is the
/// structure the normalization and the sampler use. Under the
/// noninformative prior the marginals are conjugate: `λ ~ Gamma(N+1, τ)`,
/// `δ² ~ InvGamma((N-3)/2, N·δ̂²/2)` and `m | δ² ~ N(m̂, δ²/N)`.
#[derive(Debug, Clone)]
pub struct MertonPosterior {
    n_jumps: usize,
    tau: f64,
    lambda_hat: f64,
    m_hat: f64,
    delta_hat_sq: f64,
    prior: Prior,
    log_norm: f64,
}

const NORM_REL_TOL: f64 = 1e-8;

/// Half-width, in posterior standard deviations of `m | δ²`, of the grid
/// used when a custom prior deforms the `m` conditional.
const M_GRID_SIGMAS: f64 = 12.0;

impl MertonPosterior {
    /// Builds the posterior from sufficient statistics.
    ///
    /// Needs `N ≥ 2`. The noninformative prior additionally needs `N ≥ 4`:
    /// the `δ²` marginal is inverse-gamma with shape `(N-3)/2`, which is a
    /// distribution only for `N > 3`.
    pub fn from_stats(
        n_jumps: usize,
        tau: f64,
        m_hat: f64,
        delta_hat_sq: f64,
        prior: Prior,
    ) -> Result<Self> {
        if n_jumps < 2 {
            return Err(Error::InsufficientJumps {
                required: 2,
                observed: n_jumps,
                note: String::new(),
            });
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::invalid(format!("tau must be positive, got {tau}")));
        }
        if !(delta_hat_sq > 0.0) || !delta_hat_sq.is_finite() {
            return Err(Error::DegenerateData(format!(
                "jump-height variance estimate must be positive, got {delta_hat_sq}"
            )));
        }
        if !m_hat.is_finite() {
            return Err(Error::DegenerateData("jump-height mean must be finite".into()));
        }
        if prior.is_noninformative() && n_jumps < 4 {
            return Err(Error::InsufficientJumps {
                required: 4,
                observed: n_jumps,
                note: " (the noninformative prior needs N >= 4 for a normalizable posterior)"
                    .into(),
            });
        }

        let mut post = Self {
            n_jumps,
            tau,
            lambda_hat: n_jumps as f64 / tau,
            m_hat,
            delta_hat_sq,
            prior,
            log_norm: 0.0,
        };
        post.log_norm = post.compute_log_norm()?;
        Ok(post)
    }

    pub fn n_jumps(&self) -> usize {
        self.n_jumps
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn lambda_hat(&self) -> f64 {
        self.lambda_hat
    }

    pub fn m_hat(&self) -> f64 {
        self.m_hat
    }

    pub fn delta_hat_sq(&self) -> f64 {
        self.delta_hat_sq
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// Unnormalized log-density of the `λ` factor (`N·λ/λ̂ = τ·λ`).
    pub fn log_unnorm_lambda(&self, lambda: f64) -> f64 {
        -self.tau * lambda + self.n_jumps as f64 * lambda.ln() + self.prior.factor_log(0, lambda)
    }

    /// Unnormalized log-density of the `(δ², m)` factor.
    pub fn log_unnorm_vm(&self, delta_sq: f64, m: f64) -> f64 {
        let nf = self.n_jumps as f64;
        let dm = self.m_hat - m;
        -0.5 * nf * delta_sq.ln() - 0.5 * nf * (self.delta_hat_sq + dm * dm) / delta_sq
            + self.prior.factor_log(1, delta_sq)
            + self.prior.factor_log(2, m)
    }

    /// Unnormalized joint log-density.
    pub fn log_unnorm(&self, theta: &MertonTheta) -> f64 {
        self.log_unnorm_lambda(theta.lambda) + self.log_unnorm_vm(theta.delta_sq, theta.m)
    }

    /// Normalized joint posterior density.
    pub fn density(&self, theta: &MertonTheta) -> f64 {
        if theta.lambda <= 0.0 || theta.delta_sq <= 0.0 {
            return 0.0;
        }
        (self.log_unnorm(theta) - self.log_norm).exp()
    }

    /// Log-density of the `m` integral at fixed `δ²` (closed form for a flat
    /// `m` factor, quadrature otherwise).
    fn log_m_mass(&self, delta_sq: f64) -> Result<f64> {
        let nf = self.n_jumps as f64;
        if !self.prior.has_factor(2) {
            return Ok(0.5 * (2.0 * std::f64::consts::PI * delta_sq / nf).ln());
        }
        let sd = (delta_sq / nf).sqrt();
        let half = M_GRID_SIGMAS * sd;
        let logd = |m: f64| {
            let dm = self.m_hat - m;
            -0.5 * nf * dm * dm / delta_sq + self.prior.factor_log(2, m)
        };
        log_integral_1d(&logd, (self.m_hat - half, self.m_hat + half), NORM_REL_TOL)
    }

    /// Log-density of the `δ²` marginal within the `(δ², m)` factor.
    fn log_unnorm_v_marginal(&self, delta_sq: f64) -> Result<f64> {
        let nf = self.n_jumps as f64;
        Ok(-0.5 * nf * delta_sq.ln() - 0.5 * nf * self.delta_hat_sq / delta_sq
            + self.prior.factor_log(1, delta_sq)
            + self.log_m_mass(delta_sq)?)
    }

    fn compute_log_norm(&self) -> Result<f64> {
        let nf = self.n_jumps as f64;
        if self.prior.is_noninformative() {
            // Closed form from the conjugate structure:
            // ∫ e^{-τλ} λ^N dλ = Γ(N+1)/τ^{N+1};
            // ∫∫ factor dδ² dm = √(2π/N) · Γ((N-3)/2) / β^{(N-3)/2},
            // β = N·δ̂²/2.
            let beta = 0.5 * nf * self.delta_hat_sq;
            let lg = statrs::function::gamma::ln_gamma;
            let log_lambda_mass = lg(nf + 1.0) - (nf + 1.0) * self.tau.ln();
            let alpha = 0.5 * (nf - 3.0);
            let log_vm_mass =
                0.5 * (2.0 * std::f64::consts::PI / nf).ln() + lg(alpha) - alpha * beta.ln();
            return Ok(log_lambda_mass + log_vm_mass);
        }

        let log_lambda_mass = {
            let f = |l: f64| self.log_unnorm_lambda(l);
            let bracket = bracket_positive(self.lambda_hat, &f)?;
            log_integral_1d(&f, bracket, NORM_REL_TOL)?
        };
        let log_vm_mass = {
            let f = |v: f64| self.log_unnorm_v_marginal(v).unwrap_or(f64::NEG_INFINITY);
            let bracket = bracket_positive(self.delta_hat_sq, &f)?;
            log_integral_1d(&f, bracket, NORM_REL_TOL)?
        };
        Ok(log_lambda_mass + log_vm_mass)
    }

    /// Draws `count` parameter samples, deterministic per seed.
    ///
    /// Noninformative prior: exact conjugate sampling (λ from its Gamma
    /// marginal, δ² from its inverse-gamma marginal, m from the Gaussian
    /// conditional). Custom factorized priors: grid inverse-CDF sampling on
    /// `INV_CDF_GRID`-point grids over the normalization brackets.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<MertonTheta>> {
        if count < 1 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        let mut rng = rng_from_seed(seed);
        let nf = self.n_jumps as f64;

        if self.prior.is_noninformative() {
            let lambda_marginal = Gamma::new(nf + 1.0, 1.0 / self.tau)
                .map_err(|e| Error::Numerical(e.to_string()))?;
            let v_shape = 0.5 * (nf - 3.0);
            let v_beta = 0.5 * nf * self.delta_hat_sq;
            let v_gamma = Gamma::new(v_shape, 1.0).map_err(|e| Error::Numerical(e.to_string()))?;
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                let lambda = lambda_marginal.sample(&mut rng);
                let v = v_beta / v_gamma.sample(&mut rng);
                let z: f64 = rng.sample(StandardNormal);
                let m = self.m_hat + (v / nf).sqrt() * z;
                out.push(MertonTheta { lambda, delta_sq: v, m });
            }
            return Ok(out);
        }

        let lambda_sampler = {
            let f = |l: f64| self.log_unnorm_lambda(l);
            let bracket = bracket_positive(self.lambda_hat, &f)?;
            GridSampler::from_log_density(log_spaced(bracket.0, bracket.1, INV_CDF_GRID), f)?
        };
        let v_sampler = {
            let f = |v: f64| self.log_unnorm_v_marginal(v).unwrap_or(f64::NEG_INFINITY);
            let bracket = bracket_positive(self.delta_hat_sq, &f)?;
            GridSampler::from_log_density(log_spaced(bracket.0, bracket.1, INV_CDF_GRID), f)?
        };

        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let lambda = lambda_sampler.invert(rng.random::<f64>());
            let v = v_sampler.invert(rng.random::<f64>());
            let m = if self.prior.has_factor(2) {
                let sd = (v / nf).sqrt();
                let half = M_GRID_SIGMAS * sd;
                let nodes = lin_spaced(self.m_hat - half, self.m_hat + half, INV_CDF_GRID);
                let cond = GridSampler::from_log_density(nodes, |m| {
                    let dm = self.m_hat - m;
                    -0.5 * nf * dm * dm / v + self.prior.factor_log(2, m)
                })?;
                cond.invert(rng.random::<f64>())
            } else {
                let z: f64 = rng.sample(StandardNormal);
                self.m_hat + (v / nf).sqrt() * z
            };
            out.push(MertonTheta { lambda, delta_sq: v, m });
        }
        Ok(out)
    }

    pub fn summary(&self) -> MertonPosteriorSummary {
        MertonPosteriorSummary {
            n_jumps: self.n_jumps,
            tau: self.tau,
            lambda_hat: self.lambda_hat,
            m_hat: self.m_hat,
            delta_hat_sq: self.delta_hat_sq,
            prior: self.prior.support_note().to_string(),
            log_norm: self.log_norm,
            grid_points: INV_CDF_GRID,
        }
    }
}

/// JSON-friendly posterior summary.
#[derive(Debug, Clone, Serialize)]
pub struct MertonPosteriorSummary {
    pub n_jumps: usize,
    pub tau: f64,
    pub lambda_hat: f64,
    pub m_hat: f64,
    pub delta_hat_sq: f64,
    pub prior: String,
    pub log_norm: f64,
    pub grid_points: usize,
}

/// Fits the jump-parameter posterior from an observed jump record.
pub fn fit_merton_posterior(rec: &JumpRecord, prior: Prior) -> Result<MertonPosterior> {
    let n = rec.n_jumps();
    if n < 2 {
        return Err(Error::InsufficientJumps { required: 2, observed: n, note: String::new() });
    }
    let ys = rec.jump_sizes();
    let m_hat = ys.iter().sum::<f64>() / n as f64;
    // 1/N normalization, no Bessel correction.
    let delta_hat_sq = ys.iter().map(|y| (y - m_hat) * (y - m_hat)).sum::<f64>() / n as f64;
    MertonPosterior::from_stats(n, rec.tau(), m_hat, delta_hat_sq, prior)
}

/// Subjective Merton price: the mean-corrected series price averaged over
/// posterior parameter samples.
///
/// `abs_error_estimate` is three standard errors of the sample mean plus
/// the series tolerance. Samples whose series evaluation hits a
/// non-positive shifted strike are rejected and counted instead of
/// clamped; more than 1% rejections aborts with an error carrying the
/// counts, since a silently truncated mixture would bias the estimate by
/// an unquantifiable amount.
pub fn subjective_merton_price(
    opt: &OptionSpec,
    s0: f64,
    rho: f64,
    sigma: f64,
    post: &MertonPosterior,
    n_samples: usize,
    seed: u64,
    series_tol: f64,
) -> Result<PriceResult> {
    if n_samples < 1_000 {
        return Err(Error::invalid(format!(
            "subjective Merton price needs at least 1000 posterior samples, got {n_samples}"
        )));
    }
    let thetas = post.sample(n_samples, seed)?;
    let evaluations: Vec<Result<f64>> = thetas
        .par_iter()
        .map(|theta| merton_series_price(opt, s0, rho, sigma, theta, series_tol).map(|p| p.value))
        .collect();

    let mut values = Vec::with_capacity(n_samples);
    let mut rejected = 0usize;
    for ev in evaluations {
        match ev {
            Ok(v) => values.push(v),
            Err(Error::ShiftedStrike { .. }) => rejected += 1,
            Err(other) => return Err(other),
        }
    }
    if rejected * 100 > n_samples {
        return Err(Error::Unreliable(format!(
            "{rejected} of {n_samples} posterior samples rejected by the series domain check (> 1%)"
        )));
    }
    if values.len() < 2 {
        return Err(Error::Unreliable("too few accepted posterior samples".into()));
    }

    let (mean, stderr) = mean_and_stderr(&values);
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("n_samples".to_string(), n_samples as f64);
    diagnostics.insert("n_rejected".to_string(), rejected as f64);
    diagnostics.insert("stderr".to_string(), stderr);
    Ok(PriceResult {
        value: mean,
        abs_error_estimate: 3.0 * stderr + series_tol,
        method: PriceMethod::PosteriorMc,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{expectation_1d, integrate_adaptive};
    use crate::sim::{simulate_merton_path, BsParams};
    use approx::assert_relative_eq;
    use statrs::distribution::{Continuous, Gamma as StatGamma};

    fn fitted(tau: f64, seed: u64) -> MertonPosterior {
        let p = BsParams::new(100.0, 0.002, 0.158).unwrap();
        let th = MertonTheta::new(4.0, 0.0025, 0.0).unwrap();
        let (_, rec) = simulate_merton_path(&p, &th, tau, 1.0 / 252.0, seed).unwrap();
        fit_merton_posterior(&rec, Prior::Noninformative).unwrap()
    }

    #[test]
    fn lambda_marginal_is_gamma() {
        // The λ factor, normalized by quadrature, must match statrs'
        // Gamma(shape N+1, rate τ) pointwise.
        let post = fitted(2.0, 42);
        let n = post.n_jumps() as f64;
        let f = |l: f64| post.log_unnorm_lambda(l);
        let bracket = bracket_positive(post.lambda_hat(), &f).unwrap();
        let log_mass = log_integral_1d(&f, bracket, 1e-10).unwrap();
        let oracle = StatGamma::new(n + 1.0, post.tau()).unwrap();
        for i in 0..1000 {
            let l = bracket.0 + (bracket.1 - bracket.0) * (i as f64 + 0.5) / 1000.0;
            let ours = (post.log_unnorm_lambda(l) - log_mass).exp();
            let want = oracle.pdf(l);
            if want > 1e-12 {
                assert_relative_eq!(ours, want, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn m_conditional_is_gaussian_with_shrinking_variance() {
        let post = fitted(2.0, 7);
        let nf = post.n_jumps() as f64;
        let v = post.delta_hat_sq();
        // At fixed δ² = v, the conditional over m is ∝ exp(-N(m-m̂)²/(2v)).
        let sd = (v / nf).sqrt();
        let mean = expectation_1d(
            |m| m,
            |m| post.log_unnorm_vm(v, m),
            (post.m_hat() - 10.0 * sd, post.m_hat() + 10.0 * sd),
            1e-10,
        )
        .unwrap();
        assert!((mean.value - post.m_hat()).abs() <= 1e-9);
        let second = expectation_1d(
            |m| (m - post.m_hat()) * (m - post.m_hat()),
            |m| post.log_unnorm_vm(v, m),
            (post.m_hat() - 10.0 * sd, post.m_hat() + 10.0 * sd),
            1e-12,
        )
        .unwrap();
        assert_relative_eq!(second.value, v / nf, max_relative = 1e-6);
    }

    #[test]
    fn joint_density_integrates_to_one() {
        // Nested 1-dim quadratures over the factorized structure.
        let post = fitted(2.0, 3);
        let f_l = |l: f64| post.log_unnorm_lambda(l);
        let bl = bracket_positive(post.lambda_hat(), &f_l).unwrap();
        let lambda_mass = integrate_adaptive(
            |l| (post.log_unnorm_lambda(l) - post.log_norm() / 2.0).exp(),
            bl.0,
            bl.1,
            1e-300,
            1e-9,
        )
        .unwrap();
        // (δ², m) via an inner adaptive integral over m per δ² node.
        let nf = post.n_jumps() as f64;
        let vm = |v: f64| {
            let sd = (v / nf).sqrt();
            let inner = integrate_adaptive(
                |m| (post.log_unnorm_vm(v, m) - post.log_norm() / 2.0).exp(),
                post.m_hat() - 12.0 * sd,
                post.m_hat() + 12.0 * sd,
                1e-300,
                1e-9,
            )
            .unwrap();
            inner.value
        };
        let f_v = |v: f64| post.log_unnorm_v_marginal(v).unwrap();
        let bv = bracket_positive(post.delta_hat_sq(), &f_v).unwrap();
        let vm_mass = integrate_adaptive(vm, bv.0, bv.1, 1e-300, 1e-8).unwrap();
        let total = lambda_mass.value * vm_mass.value;
        assert!((total - 1.0).abs() <= 1e-6, "joint mass {total}");
    }

    #[test]
    fn insufficient_jumps_are_rejected() {
        let rec = JumpRecord::new(1.0, vec![-0.5], vec![0.01]).unwrap();
        assert!(matches!(
            fit_merton_posterior(&rec, Prior::Noninformative),
            Err(Error::InsufficientJumps { required: 2, .. })
        ));
        // N = 3 is enough data but not enough for a proper noninformative
        // posterior.
        let rec3 =
            JumpRecord::new(1.0, vec![-0.7, -0.5, -0.2], vec![0.01, -0.02, 0.015]).unwrap();
        assert!(matches!(
            fit_merton_posterior(&rec3, Prior::Noninformative),
            Err(Error::InsufficientJumps { required: 4, .. })
        ));
        let decaying = Prior::custom_merton(
            "exp(-λ)·exp(-δ²)·exp(-m²) envelope",
            Some(Prior::factor(|l: f64| -l)),
            Some(Prior::factor(|v: f64| -v)),
            Some(Prior::factor(|m: f64| -m * m)),
        );
        assert!(fit_merton_posterior(&rec3, decaying).is_ok());
    }

    #[test]
    fn conjugate_sampling_moments() {
        let post = fitted(2.0, 19);
        let n = post.n_jumps() as f64;
        let count = 100_000usize;
        let thetas = post.sample(count, 4).unwrap();

        // λ over its Gamma(N+1, τ) marginal.
        let mean_l = thetas.iter().map(|t| t.lambda).sum::<f64>() / count as f64;
        let expect_l = (n + 1.0) / post.tau();
        let sd_l = (n + 1.0).sqrt() / post.tau();
        assert!((mean_l - expect_l).abs() <= 3.0 * sd_l / (count as f64).sqrt());

        // m over its marginal centred at m̂.
        let mean_m = thetas.iter().map(|t| t.m).sum::<f64>() / count as f64;
        let sample_sd_m = {
            let var = thetas.iter().map(|t| (t.m - mean_m) * (t.m - mean_m)).sum::<f64>()
                / (count as f64 - 1.0);
            var.sqrt()
        };
        assert!((mean_m - post.m_hat()).abs() <= 3.0 * sample_sd_m / (count as f64).sqrt());

        // Determinism.
        assert_eq!(post.sample(500, 9).unwrap(), post.sample(500, 9).unwrap());
    }

    #[test]
    fn truncated_lambda_prior_shifts_the_marginal() {
        let p = BsParams::new(100.0, 0.002, 0.158).unwrap();
        let th = MertonTheta::new(4.0, 0.0025, 0.0).unwrap();
        let (_, rec) = simulate_merton_path(&p, &th, 2.0, 1.0 / 252.0, 23).unwrap();
        let lambda_hat = rec.n_jumps() as f64 / 2.0;
        let truncated = Prior::custom_merton(
            "indicator λ ≥ λ̂ (upper half)",
            Some(Prior::factor(move |l: f64| {
                if l >= lambda_hat {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            })),
            None,
            None,
        );
        let post = fit_merton_posterior(&rec, truncated).unwrap();
        let thetas = post.sample(20_000, 8).unwrap();
        // Piecewise-linear CDF inversion can leak into the single grid cell
        // straddling the truncation point, nothing more.
        let below = thetas.iter().filter(|t| t.lambda < lambda_hat).count();
        assert!(below as f64 <= 20_000.0 * 2e-3, "{below} samples below the cut");
        assert!(thetas.iter().all(|t| t.lambda >= lambda_hat * 0.99));
        let flat = fit_merton_posterior(&rec, Prior::Noninformative).unwrap();
        let mean_trunc = thetas.iter().map(|t| t.lambda).sum::<f64>() / 20_000.0;
        let mean_flat = (flat.n_jumps() as f64 + 1.0) / flat.tau();
        assert!(mean_trunc > mean_flat);
    }

    #[test]
    fn degenerate_prior_is_reported() {
        let rec = JumpRecord::new(
            2.0,
            vec![-1.5, -1.0, -0.5, -0.2],
            vec![0.01, -0.02, 0.03, 0.015],
        )
        .unwrap();
        let hopeless = Prior::custom_merton(
            "zero mass everywhere",
            Some(Prior::factor(|_| f64::NEG_INFINITY)),
            None,
            None,
        );
        assert!(matches!(
            fit_merton_posterior(&rec, hopeless),
            Err(Error::DegenerateDensity(_) | Error::DegeneratePrior(_))
        ));
    }

    #[test]
    fn concentrated_posterior_recovers_the_parametric_price() {
        // A huge synthetic N pins the posterior at θ0.
        let theta0 = MertonTheta::new(4.0, 0.0025, 0.0).unwrap();
        let n = 4_000_000usize;
        let tau = n as f64 / theta0.lambda;
        let post =
            MertonPosterior::from_stats(n, tau, theta0.m, theta0.delta_sq, Prior::Noninformative)
                .unwrap();
        let opt = OptionSpec::call(100.0, 0.25).unwrap();
        let series_tol = 1e-9;
        let subj =
            subjective_merton_price(&opt, 100.0, 0.002, 0.158, &post, 2_000, 5, series_tol).unwrap();
        let parametric = merton_series_price(&opt, 100.0, 0.002, 0.158, &theta0, series_tol).unwrap();
        assert!(
            (subj.value - parametric.value).abs() <= subj.abs_error_estimate,
            "subjective {} vs parametric {} (err {})",
            subj.value,
            parametric.value,
            subj.abs_error_estimate
        );
    }

    #[test]
    fn parity_gap_is_within_sampling_noise_for_centered_jumps() {
        // Parity holds per-sample only at m = 0; for a posterior centred at
        // zero the residual gap is e^{-ρT}·T·mean(m_i·λ_i), a zero-mean
        // statistic whose scale the common-sample stderr bounds.
        let post = MertonPosterior::from_stats(8, 2.0, 0.0, 0.0025, Prior::Noninformative).unwrap();
        let (s0, rho, sigma, t, k) = (100.0, 0.002, 0.158, 0.25, 100.0);
        let tol = 1e-9;
        let n_samples = 4_000usize;
        let seed = 31;
        let call = subjective_merton_price(
            &OptionSpec::call(k, t).unwrap(),
            s0,
            rho,
            sigma,
            &post,
            n_samples,
            seed,
            tol,
        )
        .unwrap();
        let put = subjective_merton_price(
            &OptionSpec::put(k, t).unwrap(),
            s0,
            rho,
            sigma,
            &post,
            n_samples,
            seed,
            tol,
        )
        .unwrap();
        let gap = call.value - put.value - (s0 - k * (-rho * t as f64).exp());
        // Same seed → same θ samples for call and put, so the gap reduces to
        // the per-sample parity defect averaged over the posterior.
        let thetas = post.sample(n_samples, seed).unwrap();
        let defects: Vec<f64> = thetas
            .iter()
            .map(|th| (-rho * t as f64).exp() * th.m * th.lambda * t)
            .collect();
        let (defect_mean, defect_stderr) = mean_and_stderr(&defects);
        assert_relative_eq!(gap, defect_mean, max_relative = 1e-6, epsilon = 2.0 * tol);
        assert!(defect_mean.abs() <= 3.0 * defect_stderr);
    }

    #[test]
    fn excessive_rejections_abort() {
        // m̂ large and positive: strike shifts cross zero for most samples.
        let post = MertonPosterior::from_stats(40, 2.0, 30.0, 4.0, Prior::Noninformative).unwrap();
        let opt = OptionSpec::call(100.0, 1.0).unwrap();
        let err = subjective_merton_price(&opt, 100.0, 0.002, 0.158, &post, 1_000, 3, 1e-8);
        assert!(matches!(err, Err(Error::Unreliable(_))), "got {err:?}");
    }
}
