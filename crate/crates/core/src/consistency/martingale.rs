//! Monte-Carlo checks of the equivalent-martingale property of the
//! posterior-mixture pricing measures: under `Q_π` the discounted terminal
//! price must average to the spot, for any prior.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::bayes::{BsPosterior, MertonPosterior};
use crate::error::{Error, Result};
use crate::pricing::mean_correction_drift;
use crate::rng::{derive_seed, rng_from_seed};
use crate::sim::MertonTheta;

fn mean_stderr_streaming(values: impl Iterator<Item = f64>, n: usize) -> (f64, f64) {
    // Two-pass is wasteful at n = 1e6 draws; Welford keeps one pass stable.
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    let mut count = 0usize;
    for v in values {
        count += 1;
        let d = v - mean;
        mean += d / count as f64;
        m2 += d * (v - mean);
    }
    debug_assert_eq!(count, n);
    let var = m2 / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Draws `σ²` from the posterior and `S_T` under `Q_σ`, and returns the
/// mean of `e^{-ρT}·S_T` with its standard error. The mixture is a
/// martingale measure, so the mean must equal `s0` (PASS at three standard
/// errors in the tests).
pub fn martingale_check_bs(
    post: &BsPosterior,
    s0: f64,
    rho: f64,
    maturity: f64,
    n_mc: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_mc < 10_000 {
        return Err(Error::invalid("martingale check needs at least 10_000 draws"));
    }
    if !(s0 > 0.0) || !(maturity > 0.0) {
        return Err(Error::invalid("s0 and maturity must be positive"));
    }
    let variances = post.sample(n_mc, derive_seed(seed, 0))?;
    let mut rng = rng_from_seed(derive_seed(seed, 1));
    // log S_T = log s0 + (ρ - σ²/2)T + σ√T·Z; the discount factor cancels ρ.
    let _ = rho;
    let values = variances.into_iter().map(|v| {
        let z: f64 = rng.sample(StandardNormal);
        s0 * (-0.5 * v * maturity + (v * maturity).sqrt() * z).exp()
    });
    Ok(mean_stderr_streaming(values, n_mc))
}

/// Merton analogue: draws `θ` from the posterior, then `S_T` under the
/// mean-corrected `Q_θ` (drift `ρ + μ_θ` plus compound-Poisson jumps).
pub fn martingale_check_merton(
    post: &MertonPosterior,
    s0: f64,
    rho: f64,
    sigma: f64,
    maturity: f64,
    n_mc: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_mc < 10_000 {
        return Err(Error::invalid("martingale check needs at least 10_000 draws"));
    }
    if !(s0 > 0.0) || !(sigma > 0.0) || !(maturity > 0.0) {
        return Err(Error::invalid("s0, sigma and maturity must be positive"));
    }
    let thetas = post.sample(n_mc, derive_seed(seed, 0))?;
    let mut rng = rng_from_seed(derive_seed(seed, 1));
    let _ = rho;
    let sqrt_t = maturity.sqrt();
    let values = thetas.into_iter().map(|theta: MertonTheta| {
        // Discounted exponent: (ρ + μ_θ)T − ρT = μ_θ·T.
        let mut x = mean_correction_drift(&theta, sigma) * maturity;
        let z: f64 = rng.sample(StandardNormal);
        x += sigma * sqrt_t * z;
        let lambda_t = theta.lambda * maturity;
        if lambda_t > 0.0 {
            let n = Poisson::new(lambda_t).unwrap().sample(&mut rng) as u64;
            let delta = theta.delta_sq.sqrt();
            for _ in 0..n {
                let y: f64 = rng.sample(StandardNormal);
                x += theta.m + delta * y;
            }
        }
        s0 * x.exp()
    });
    Ok(mean_stderr_streaming(values, n_mc))
}
