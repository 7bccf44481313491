//! Adaptive one-dimensional quadrature with certified error estimates, and a
//! stabilized posterior-expectation evaluator built on top of it.
//!
//! The adaptive scheme pairs the embedded Gauss(7)/Kronrod(15) rules with
//! bisection of the interval carrying the largest local error, the same
//! construction QUADPACK's `QAG` uses. Semi-infinite upper limits are mapped
//! onto `(0, 1)` with `x = a + u/(1-u)`.
//!
//! [`expectation_1d`] computes `∫ g·f / ∫ f` for an unnormalized density
//! given by its log. Both integrals share one adaptive partition and the
//! log-density is shifted by its maximum on a scouting grid before
//! exponentiation, so needle-shaped integrands like `exp(-n·h_n)` with `n`
//! up to `1e5` neither underflow nor slip between quadrature nodes.

use crate::error::{Error, Result};

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    /// Best estimate of the integral (or ratio, for expectations).
    pub value: f64,
    /// Certified absolute error estimate; when `converged` it is at or
    /// below the requested tolerance.
    pub abs_error_estimate: f64,
    /// Number of integrand evaluations spent.
    pub evaluations: usize,
    /// Whether the tolerance was met before the subdivision limit.
    pub converged: bool,
}

// 15-point Kronrod abscissae on [-1, 1] (positive half) with the embedded
// 7-point Gauss weights. Standard QUADPACK constants.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// QUADPACK error rescaling: sharpen the raw `|K15 - G7|` difference while
/// keeping it conservative relative to the integrand's variation.
fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

/// One G7/K15 application to a pair of integrands sharing the same nodes.
/// Returns per-component (kronrod value, scaled error estimate).
fn qk15_pair<F>(f: &F, a: f64, b: f64) -> ([f64; 2], [f64; 2])
where
    F: Fn(f64) -> [f64; 2],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);

    let mut resg = [0.0f64; 2];
    let mut resk = [0.0f64; 2];
    let mut resabs = [0.0f64; 2];
    let mut fv1 = [[0.0f64; 2]; 7];
    let mut fv2 = [[0.0f64; 2]; 7];

    for c in 0..2 {
        resk[c] = fc[c] * WGK[7];
        resabs[c] = resk[c].abs();
        resg[c] = fc[c] * WG[3];
    }

    for j in 0..7 {
        let absc = half * XGK[j];
        let v1 = f(center - absc);
        let v2 = f(center + absc);
        fv1[j] = v1;
        fv2[j] = v2;
        for c in 0..2 {
            let fsum = v1[c] + v2[c];
            if j % 2 != 0 {
                resg[c] += WG[j / 2] * fsum;
            }
            resk[c] += WGK[j] * fsum;
            resabs[c] += WGK[j] * (v1[c].abs() + v2[c].abs());
        }
    }

    let mut values = [0.0f64; 2];
    let mut errors = [0.0f64; 2];
    for c in 0..2 {
        let mean = resk[c] * 0.5;
        let mut resasc = WGK[7] * (fc[c] - mean).abs();
        for j in 0..7 {
            resasc += WGK[j] * ((fv1[j][c] - mean).abs() + (fv2[j][c] - mean).abs());
        }
        let err = (resk[c] - resg[c]) * half;
        values[c] = resk[c] * half;
        errors[c] = rescale_error(err, resabs[c] * half.abs(), resasc * half.abs());
    }
    (values, errors)
}

struct Interval {
    a: f64,
    b: f64,
    values: [f64; 2],
    errors: [f64; 2],
}

/// Shared adaptive driver. Refines until `done(sum_values, sum_errors)` says
/// the pair of running totals is good enough, or the subdivision budget runs
/// out. Initial breakpoints let callers pre-split around known needles.
fn adapt_pair<F, D>(
    f: &F,
    breakpoints: &[f64],
    max_intervals: usize,
    done: D,
) -> ([f64; 2], [f64; 2], usize, bool)
where
    F: Fn(f64) -> [f64; 2],
    D: Fn(&[f64; 2], &[f64; 2]) -> bool,
{
    let mut evals = 0usize;
    let mut heap: Vec<Interval> = Vec::with_capacity(64);
    for w in breakpoints.windows(2) {
        let (values, errors) = qk15_pair(f, w[0], w[1]);
        evals += 15;
        heap.push(Interval { a: w[0], b: w[1], values, errors });
    }

    let totals = |heap: &[Interval]| {
        let mut v = [0.0f64; 2];
        let mut e = [0.0f64; 2];
        for iv in heap {
            for c in 0..2 {
                v[c] += iv.values[c];
                e[c] += iv.errors[c];
            }
        }
        (v, e)
    };

    loop {
        let (v, e) = totals(&heap);
        if done(&v, &e) {
            return (v, e, evals, true);
        }
        if heap.len() >= max_intervals {
            return (v, e, evals, false);
        }
        // Split the interval with the largest combined error.
        let (idx, _) = heap
            .iter()
            .enumerate()
            .map(|(i, iv)| (i, iv.errors[0] + iv.errors[1]))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("non-empty interval heap");
        let iv = heap.swap_remove(idx);
        let mid = 0.5 * (iv.a + iv.b);
        if !(iv.a < mid && mid < iv.b) {
            // Interval no longer bisectable in f64; freeze it.
            let mut frozen = iv;
            frozen.errors = [0.0, 0.0];
            heap.push(frozen);
            continue;
        }
        for (a, b) in [(iv.a, mid), (mid, iv.b)] {
            let (values, errors) = qk15_pair(f, a, b);
            evals += 15;
            heap.push(Interval { a, b, values, errors });
        }
    }
}

const MAX_INTERVALS: usize = 4096;

/// Integrates `f` over `(a, b)` to `max(abs_tol, rel_tol * |value|)`.
///
/// Pass `b = f64::INFINITY` for a semi-infinite range; the integral is then
/// evaluated through the substitution `x = a + u/(1-u)` on `u ∈ (0, 1)`.
/// When the subdivision limit is reached the best estimate is returned with
/// `converged = false` rather than an error, so callers can decide whether
/// the achieved accuracy is usable.
pub fn integrate_adaptive<F>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    if !(abs_tol > 0.0) || !(rel_tol > 0.0) {
        return Err(Error::invalid("quadrature tolerances must be positive"));
    }
    if !a.is_finite() {
        return Err(Error::invalid("lower integration bound must be finite"));
    }
    if !(a < b) {
        return Err(Error::invalid(format!(
            "integration bounds must satisfy a < b, got a={a}, b={b}"
        )));
    }

    let done = move |v: &[f64; 2], e: &[f64; 2]| e[0] <= abs_tol.max(rel_tol * v[0].abs());

    let (v, e, evals, converged) = if b.is_finite() {
        let g = |x: f64| [f(x), 0.0];
        adapt_pair(&g, &[a, b], MAX_INTERVALS, done)
    } else {
        let g = |u: f64| {
            let one_minus = 1.0 - u;
            let x = a + u / one_minus;
            let jac = 1.0 / (one_minus * one_minus);
            let y = f(x) * jac;
            [if y.is_finite() { y } else { 0.0 }, 0.0]
        };
        adapt_pair(&g, &[0.0, 1.0], MAX_INTERVALS, done)
    };

    Ok(QuadResult {
        value: v[0],
        abs_error_estimate: e[0],
        evaluations: evals,
        converged,
    })
}

/// Number of scouting points used to locate the density mode.
const SCOUT_POINTS: usize = 257;

/// Relative density drop (vs. the mode) treated as negligible when seeding
/// the initial subdivision around a needle.
const NEEDLE_LOG_DROP: f64 = 25.0;

fn scout_grid(lo: f64, hi: f64) -> Vec<f64> {
    let mut pts = Vec::with_capacity(SCOUT_POINTS);
    if lo > 0.0 {
        let llo = lo.ln();
        let lhi = hi.ln();
        for i in 0..SCOUT_POINTS {
            let t = i as f64 / (SCOUT_POINTS - 1) as f64;
            pts.push((llo + t * (lhi - llo)).exp());
        }
    } else {
        for i in 0..SCOUT_POINTS {
            let t = i as f64 / (SCOUT_POINTS - 1) as f64;
            pts.push(lo + t * (hi - lo));
        }
    }
    pts[0] = lo;
    pts[SCOUT_POINTS - 1] = hi;
    pts
}

/// Scouts the log-density over the bracket: returns its maximum and initial
/// breakpoints enclosing the region within `NEEDLE_LOG_DROP` nats of the
/// mode, so needle-shaped densities are pre-split before refinement.
fn scout_breaks<L>(log_density: &L, lo: f64, hi: f64) -> Result<(f64, Vec<f64>)>
where
    L: Fn(f64) -> f64,
{
    let grid = scout_grid(lo, hi);
    let logs: Vec<f64> = grid.iter().map(|&x| log_density(x)).collect();
    let (mode_idx, &lmax) = logs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty scout grid");
    if !lmax.is_finite() {
        return Err(Error::DegenerateDensity(
            "log-density is not finite anywhere on the scouting grid".into(),
        ));
    }
    let mut above_lo = mode_idx;
    while above_lo > 0 && logs[above_lo - 1] > lmax - NEEDLE_LOG_DROP {
        above_lo -= 1;
    }
    let mut above_hi = mode_idx;
    while above_hi + 1 < grid.len() && logs[above_hi + 1] > lmax - NEEDLE_LOG_DROP {
        above_hi += 1;
    }
    let mut breaks = vec![lo];
    for idx in [above_lo.saturating_sub(1), mode_idx, (above_hi + 1).min(grid.len() - 1)] {
        let x = grid[idx];
        if x > *breaks.last().unwrap() && x < hi {
            breaks.push(x);
        }
    }
    breaks.push(hi);
    Ok((lmax, breaks))
}

/// Computes `∫ g·f / ∫ f` over `bracket` where `f = exp(log_density)` is an
/// unnormalized density.
///
/// The log-density is first evaluated on a scouting grid (log-spaced when the
/// bracket is positive) to find its maximum `L*`; integration then works with
/// `exp(L - L*)`, which makes the result invariant under constant shifts of
/// the log-density and immune to underflow. The grid also seeds the initial
/// subdivision so a narrow mode cannot fall between quadrature nodes. `tol`
/// is an absolute tolerance on the returned ratio.
pub fn expectation_1d<G, L>(g: G, log_density: L, bracket: (f64, f64), tol: f64) -> Result<QuadResult>
where
    G: Fn(f64) -> f64,
    L: Fn(f64) -> f64,
{
    let (lo, hi) = bracket;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!(
            "expectation bracket must be finite with lo < hi, got ({lo}, {hi})"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("expectation tolerance must be positive"));
    }

    let (lmax, breaks) = scout_breaks(&log_density, lo, hi)?;

    let weight = |x: f64| {
        let l = log_density(x);
        if l.is_finite() {
            (l - lmax).exp()
        } else {
            0.0
        }
    };
    let pair = |x: f64| {
        let w = weight(x);
        if w == 0.0 {
            [0.0, 0.0]
        } else {
            [w, g(x) * w]
        }
    };

    // Converged when the propagated ratio error is within tol (with a
    // machine-precision floor relative to the ratio's magnitude).
    let done = move |v: &[f64; 2], e: &[f64; 2]| {
        let den = v[0];
        if den <= 0.0 {
            return false;
        }
        let ratio = v[1] / den;
        let ratio_err = (e[1] + ratio.abs() * e[0]) / den;
        ratio_err <= tol.max(64.0 * f64::EPSILON * (1.0 + ratio.abs()))
    };

    let (v, e, evals, converged) = adapt_pair(&pair, &breaks, MAX_INTERVALS, done);

    if !(v[0] > 0.0) || !v[0].is_finite() {
        return Err(Error::DegenerateDensity(format!(
            "normalization mass is not positive (got {})",
            v[0]
        )));
    }
    let ratio = v[1] / v[0];
    let ratio_err = (e[1] + ratio.abs() * e[0]) / v[0];
    Ok(QuadResult {
        value: ratio,
        abs_error_estimate: ratio_err,
        evaluations: evals,
        converged,
    })
}

/// Integrates `exp(log_density)` over `bracket` with the same scouting and
/// max-shift stabilization as [`expectation_1d`], returning the log of the
/// integral. Used for posterior normalization constants.
pub fn log_integral_1d<L>(log_density: L, bracket: (f64, f64), rel_tol: f64) -> Result<f64>
where
    L: Fn(f64) -> f64,
{
    let (lo, hi) = bracket;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!(
            "integration bracket must be finite with lo < hi, got ({lo}, {hi})"
        )));
    }
    let (lmax, breaks) = scout_breaks(&log_density, lo, hi)?;
    let shifted = |x: f64| {
        let l = log_density(x);
        let w = if l.is_finite() { (l - lmax).exp() } else { 0.0 };
        [w, 0.0]
    };
    let done = move |v: &[f64; 2], e: &[f64; 2]| e[0] <= rel_tol * v[0].abs();
    let (v, e, evals, converged) = adapt_pair(&shifted, &breaks, MAX_INTERVALS, done);
    if !converged {
        return Err(Error::Numerical(format!(
            "normalization integral did not converge (error estimate {:.3e} after {evals} evaluations)",
            e[0]
        )));
    }
    if !(v[0] > 0.0) {
        return Err(Error::DegenerateDensity(
            "normalization integral is not positive".into(),
        ));
    }
    Ok(lmax + v[0].ln())
}
