//! Path simulation for the Black-Scholes and Merton markets, plus the
//! observation series and ground-truth jump records the Bayesian
//! estimators consume.
//!
//! Both simulators pin the path to the present: the Brownian part is
//! generated forward from `t = -τ` and shifted so `W_0 = 0`, and the jump
//! sum is likewise anchored so that the quote at `t = 0` equals `s0`
//! exactly. This is distributionally the same as conditioning the path to
//! the present value and running it backward in time.
//!
//! Continuous observation of the Merton market is modelled by handing the
//! estimator the exact jump times and heights the simulator used; there is
//! no jump detection from discrete data here.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Black-Scholes market parameters for `S_t = S0·exp(ρt + σW_t)`.
///
/// `sigma = 0` is accepted as a degenerate pure-drift market for
/// simulation; pricing functions reject it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsParams {
    pub s0: f64,
    pub rho: f64,
    pub sigma: f64,
}

impl BsParams {
    pub fn new(s0: f64, rho: f64, sigma: f64) -> Result<Self> {
        if !(s0 > 0.0) || !s0.is_finite() {
            return Err(Error::invalid(format!("s0 must be positive, got {s0}")));
        }
        if !rho.is_finite() {
            return Err(Error::invalid("rho must be finite"));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be non-negative, got {sigma}")));
        }
        Ok(Self { s0, rho, sigma })
    }
}

/// Jump parameters `θ = (λ, δ², m)` of the Merton market: Poisson intensity
/// `λ`, and `N(m, δ²)`-distributed jump heights.
///
/// `lambda = 0` is accepted as the degenerate no-jump case (it makes the
/// simulator and the series price collapse to Black-Scholes); fitted
/// posteriors always carry `λ̂ > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MertonTheta {
    pub lambda: f64,
    pub delta_sq: f64,
    pub m: f64,
}

impl MertonTheta {
    pub fn new(lambda: f64, delta_sq: f64, m: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be non-negative, got {lambda}")));
        }
        if !(delta_sq > 0.0) || !delta_sq.is_finite() {
            return Err(Error::invalid(format!("delta_sq must be positive, got {delta_sq}")));
        }
        if !m.is_finite() {
            return Err(Error::invalid("m must be finite"));
        }
        Ok(Self { lambda, delta_sq, m })
    }
}

/// Timestamped positive quotes `S_{t_1}, ..., S_{t_{n+1}}` on `[-τ, 0]`
/// with `t_{n+1} = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSeries {
    times: Vec<f64>,
    quotes: Vec<f64>,
}

impl ObservationSeries {
    pub fn new(times: Vec<f64>, quotes: Vec<f64>) -> Result<Self> {
        if times.len() != quotes.len() {
            return Err(Error::invalid("times and quotes must have the same length"));
        }
        if times.len() < 2 {
            return Err(Error::invalid("an observation series needs at least 2 points"));
        }
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("observation times must be strictly increasing"));
        }
        let last = *times.last().unwrap();
        if last != 0.0 {
            return Err(Error::invalid(format!(
                "the last observation must be at t = 0, got {last}"
            )));
        }
        if !quotes.iter().all(|&q| q > 0.0 && q.is_finite()) {
            return Err(Error::invalid("all quotes must be positive and finite"));
        }
        Ok(Self { times, quotes })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn quotes(&self) -> &[f64] {
        &self.quotes
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 2 by construction
    }

    /// Observation window length `τ = -t_1`.
    pub fn tau(&self) -> f64 {
        -self.times[0]
    }

    /// Writes `time,quote` rows. Lines starting with `#` are written by the
    /// CLI for provenance and skipped on read.
    pub fn to_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "quote"])?;
        for (t, q) in self.times.iter().zip(&self.quotes) {
            w.write_record([t.to_string(), q.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let mut times = Vec::new();
        let mut quotes = Vec::new();
        for rec in r.deserialize() {
            let (t, q): (f64, f64) = rec?;
            times.push(t);
            quotes.push(q);
        }
        Self::new(times, quotes)
    }
}

/// The exact jumps of a simulated Merton path over `[-τ, 0]`: the count
/// `N`, ordered jump times and the jump heights `Y_j = ΔX_{s_j}`. This is
/// the sufficient data for the Merton posterior under continuous
/// observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    tau: f64,
    jump_times: Vec<f64>,
    jump_sizes: Vec<f64>,
}

impl JumpRecord {
    pub fn new(tau: f64, jump_times: Vec<f64>, jump_sizes: Vec<f64>) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::invalid(format!("tau must be positive, got {tau}")));
        }
        if jump_times.len() != jump_sizes.len() {
            return Err(Error::invalid("jump times and sizes must have the same length"));
        }
        if !jump_times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("jump times must be strictly increasing"));
        }
        if let (Some(&first), Some(&last)) = (jump_times.first(), jump_times.last()) {
            if first < -tau || last > 0.0 {
                return Err(Error::invalid("jump times must lie in [-tau, 0]"));
            }
        }
        if !jump_sizes.iter().all(|&y| y != 0.0 && y.is_finite()) {
            return Err(Error::invalid("jump sizes must be non-zero and finite"));
        }
        Ok(Self { tau, jump_times, jump_sizes })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn jump_sizes(&self) -> &[f64] {
        &self.jump_sizes
    }

    /// Observed jump count `N`.
    pub fn n_jumps(&self) -> usize {
        self.jump_sizes.len()
    }

    /// Restricts the record to the shorter window `[-tau_sub, 0]`, keeping
    /// only the jumps inside it. Used to grow the observation window in the
    /// long-time experiments.
    pub fn window(&self, tau_sub: f64) -> Result<JumpRecord> {
        if !(tau_sub > 0.0) || tau_sub > self.tau {
            return Err(Error::invalid(format!(
                "window must satisfy 0 < tau_sub <= tau, got {tau_sub} vs tau = {}",
                self.tau
            )));
        }
        let keep: Vec<usize> = (0..self.jump_times.len())
            .filter(|&i| self.jump_times[i] >= -tau_sub)
            .collect();
        JumpRecord::new(
            tau_sub,
            keep.iter().map(|&i| self.jump_times[i]).collect(),
            keep.iter().map(|&i| self.jump_sizes[i]).collect(),
        )
    }

    pub fn to_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "jump_size"])?;
        for (t, y) in self.jump_times.iter().zip(&self.jump_sizes) {
            w.write_record([t.to_string(), y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `time,jump_size` rows; `tau` is carried by the envelope, not
    /// the CSV, so it is passed in.
    pub fn from_csv<R: Read>(input: R, tau: f64) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let mut times = Vec::new();
        let mut sizes = Vec::new();
        for rec in r.deserialize() {
            let (t, y): (f64, f64) = rec?;
            times.push(t);
            sizes.push(y);
        }
        Self::new(tau, times, sizes)
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::invalid("simulation grid needs at least 2 timestamps"));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid("simulation grid must be strictly increasing"));
    }
    if *grid.last().unwrap() != 0.0 {
        return Err(Error::invalid("simulation grid must end at t = 0"));
    }
    Ok(())
}

/// Brownian path on the grid, pinned to zero at the final point: generated
/// forward from the first timestamp, then shifted by its terminal value.
fn pinned_brownian(grid: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    let mut w = Vec::with_capacity(grid.len());
    w.push(0.0);
    for step in grid.windows(2) {
        let dt = step[1] - step[0];
        let z: f64 = rng.sample(StandardNormal);
        w.push(w.last().unwrap() + dt.sqrt() * z);
    }
    let shift = *w.last().unwrap();
    for v in &mut w {
        *v -= shift;
    }
    w
}

/// Simulates `S_{t_j} = s0·exp(ρ·t_j + σ·W_{t_j})` on the given grid with
/// `W` pinned to zero at `t = 0`. Deterministic for a fixed seed.
pub fn simulate_bs_path(params: &BsParams, grid: &[f64], seed: u64) -> Result<ObservationSeries> {
    validate_grid(grid)?;
    let mut rng = rng_from_seed(seed);
    let w = pinned_brownian(grid, &mut rng);
    let quotes = grid
        .iter()
        .zip(&w)
        .map(|(&t, &wt)| params.s0 * (params.rho * t + params.sigma * wt).exp())
        .collect();
    ObservationSeries::new(grid.to_vec(), quotes)
}

/// Simulates a Merton path on a uniform grid over `[-τ, 0]` and returns the
/// observation series together with the exact jumps used.
///
/// The jump count over the window is `Poisson(λτ)`, jump times are uniform
/// order statistics, and the path is `X_t = ρt + σW_t + J_t` with both `W`
/// and the cumulative jump sum `J` pinned to zero at `t = 0`. Draw order
/// per seed: jump count, jump times, jump sizes, Brownian increments.
pub fn simulate_merton_path(
    bs: &BsParams,
    theta: &MertonTheta,
    tau: f64,
    grid_step: f64,
    seed: u64,
) -> Result<(ObservationSeries, JumpRecord)> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("tau must be positive, got {tau}")));
    }
    if !(grid_step > 0.0) || !grid_step.is_finite() {
        return Err(Error::invalid(format!("grid_step must be positive, got {grid_step}")));
    }

    let steps = ((tau / grid_step).round() as usize).max(1);
    let grid: Vec<f64> = (0..=steps)
        .map(|i| -tau * (steps - i) as f64 / steps as f64)
        .collect();

    let mut rng = rng_from_seed(seed);

    let lambda_tau = theta.lambda * tau;
    let n_jumps = if lambda_tau > 0.0 {
        Poisson::new(lambda_tau).unwrap().sample(&mut rng) as usize
    } else {
        0
    };
    let mut jump_times: Vec<f64> = (0..n_jumps).map(|_| -tau * rng.random::<f64>()).collect();
    jump_times.sort_by(f64::total_cmp);
    let delta = theta.delta_sq.sqrt();
    let jump_sizes: Vec<f64> = (0..n_jumps)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            theta.m + delta * z
        })
        .collect();

    let w = pinned_brownian(&grid, &mut rng);

    // Cumulative jump sum pinned to zero at t = 0: at time t the pinned sum
    // is minus the heights of the jumps still ahead of t.
    let total: f64 = jump_sizes.iter().sum();
    let mut quotes = Vec::with_capacity(grid.len());
    let mut cum = 0.0f64;
    let mut next_jump = 0usize;
    for (&t, &wt) in grid.iter().zip(&w) {
        while next_jump < n_jumps && jump_times[next_jump] <= t {
            cum += jump_sizes[next_jump];
            next_jump += 1;
        }
        let x = bs.rho * t + bs.sigma * wt + (cum - total);
        quotes.push(bs.s0 * x.exp());
    }

    let series = ObservationSeries::new(grid, quotes)?;
    let record = JumpRecord::new(tau, jump_times, jump_sizes)?;
    Ok((series, record))
}

/// Keeps every `k`-th observation plus the final point at `t = 0`.
pub fn subsample(series: &ObservationSeries, every_k: usize) -> Result<ObservationSeries> {
    if every_k < 1 {
        return Err(Error::invalid("every_k must be at least 1"));
    }
    let n = series.len();
    let mut idx: Vec<usize> = (0..n).step_by(every_k).collect();
    if *idx.last().unwrap() != n - 1 {
        idx.push(n - 1);
    }
    if idx.len() < 2 {
        return Err(Error::invalid("subsampled series would have fewer than 2 points"));
    }
    ObservationSeries::new(
        idx.iter().map(|&i| series.times[i]).collect(),
        idx.iter().map(|&i| series.quotes[i]).collect(),
    )
}
