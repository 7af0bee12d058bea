//! Seedable samplers and log-densities used by the Gibbs conditionals.
//!
//! Every sampler takes an explicit [`Rng`]. Two generators built from the same
//! seed and stream produce the same sequence of draws, so chains are
//! bit-reproducible.

use std::f64::consts::SQRT_2;

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, Open01, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Smallest simplex component kept after clamping.
pub const SIMPLEX_FLOOR: f64 = 1e-12;

/// Below this truncated mass the inverse-CDF route loses precision and the
/// rejection samplers take over.
const TAIL_MASS: f64 = 1e-10;
/// Standardized distance beyond which the exponential-rejection tail sampler is used.
const TAIL_CUTOFF: f64 = 6.0;
const MAX_REJECTIONS: usize = 100_000;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// ChaCha8 generator tagged with the seed and stream it was built from.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent stream `stream` of the generator family keyed by `seed`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.sample(Open01)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Optional lower and upper truncation points (detection limits).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TruncationBounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl TruncationBounds {
    pub fn new(lower: Option<f64>, upper: Option<f64>) -> Result<Self> {
        let bounds = TruncationBounds { lower, upper };
        bounds.validate()?;
        Ok(bounds)
    }

    pub fn unbounded() -> Self {
        Self::default()
    }

    pub fn below(upper: f64) -> Self {
        TruncationBounds {
            lower: None,
            upper: Some(upper),
        }
    }

    pub fn above(lower: f64) -> Self {
        TruncationBounds {
            lower: Some(lower),
            upper: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for v in [self.lower, self.upper].into_iter().flatten() {
            if v.is_nan() {
                return Err(Error::invalid("truncation bound is NaN"));
            }
        }
        if let (Some(lo), Some(hi)) = (self.lower, self.upper) {
            if lo >= hi {
                return Err(Error::invalid(format!(
                    "degenerate truncation bounds: lower {lo} >= upper {hi}"
                )));
            }
        }
        Ok(())
    }

    /// True when `x` lies strictly inside the bounds.
    pub fn contains(&self, x: f64) -> bool {
        self.lower.is_none_or(|lo| x > lo) && self.upper.is_none_or(|hi| x < hi)
    }
}

fn check_sd(sd: f64) -> Result<()> {
    if sd > 0.0 && sd.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("standard deviation must be positive, got {sd}")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal upper-tail probability `1 - Φ(z)`, accurate for large `z`.
pub fn std_normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// Inverse of the standard normal CDF for `p` in (0, 1).
pub fn std_normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

#[inline]
pub(crate) fn normal_log_pdf_unchecked(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

pub fn normal_log_pdf(x: f64, mean: f64, sd: f64) -> Result<f64> {
    check_sd(sd)?;
    Ok(normal_log_pdf_unchecked(x, mean, sd))
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> Result<f64> {
    check_sd(sd)?;
    Ok(std_normal_cdf((x - mean) / sd))
}

pub fn sample_normal(rng: &mut Rng, mean: f64, sd: f64) -> Result<f64> {
    check_sd(sd)?;
    Ok(mean + sd * rng.standard_normal())
}

/// Draw from Normal(mean, sd²) restricted to `bounds`.
///
/// Uses the inverse CDF on whichever side of the mode keeps precision, and
/// switches to rejection samplers when the truncated mass falls under 1e-10
/// or the interval starts more than 6 sd into a tail.
pub fn sample_truncated_normal(
    rng: &mut Rng,
    mean: f64,
    sd: f64,
    bounds: TruncationBounds,
) -> Result<f64> {
    check_sd(sd)?;
    if !mean.is_finite() {
        return Err(Error::invalid(format!("mean must be finite, got {mean}")));
    }
    bounds.validate()?;
    let a = bounds.lower.map_or(f64::NEG_INFINITY, |lo| (lo - mean) / sd);
    let b = bounds.upper.map_or(f64::INFINITY, |hi| (hi - mean) / sd);

    // Rounding in `mean + sd * z` can land exactly on a bound; redraw then.
    for _ in 0..64 {
        let z = standard_truncated(rng, a, b)?;
        let x = mean + sd * z;
        if x.is_finite() && bounds.contains(x) {
            return Ok(x);
        }
    }
    Err(Error::SamplingFailure(format!(
        "truncated normal (mean {mean}, sd {sd}) has no representable mass inside {bounds:?}"
    )))
}

fn standard_truncated(rng: &mut Rng, a: f64, b: f64) -> Result<f64> {
    if a == f64::NEG_INFINITY && b == f64::INFINITY {
        return Ok(rng.standard_normal());
    }
    if b <= 0.0 {
        return standard_truncated(rng, -b, -a).map(|z| -z);
    }
    if a >= 0.0 {
        // Upper side: work with survival probabilities.
        let (sa, sb) = (std_normal_sf(a), std_normal_sf(b));
        let mass = sa - sb;
        if a > TAIL_CUTOFF || mass < TAIL_MASS {
            return upper_tail(rng, a, b);
        }
        let q = sb + rng.uniform() * mass;
        return Ok(-std_normal_quantile(q));
    }
    // a < 0 < b
    let (pa, pb) = (std_normal_cdf(a), std_normal_cdf(b));
    let mass = pb - pa;
    if mass < TAIL_MASS {
        return uniform_rejection(rng, a, b, 0.0);
    }
    Ok(std_normal_quantile(pa + rng.uniform() * mass))
}

/// Standard normal on [a, b] with 0 <= a, deep in the tail.
fn upper_tail(rng: &mut Rng, a: f64, b: f64) -> Result<f64> {
    if b.is_finite() && (b - a) * (b + a) < 2.0 {
        return uniform_rejection(rng, a, b, a);
    }
    // Exponential proposal with the optimal rate for a one-sided tail.
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    for _ in 0..MAX_REJECTIONS {
        let z = a - rng.uniform().ln() / rate;
        if z >= b {
            continue;
        }
        let accept = (-0.5 * (z - rate) * (z - rate)).exp();
        if rng.uniform() <= accept {
            return Ok(z);
        }
    }
    Err(Error::SamplingFailure(format!(
        "tail rejection sampler exhausted on [{a}, {b}]"
    )))
}

/// Uniform proposals on [a, b]; `mode` is the point of the interval closest to zero.
fn uniform_rejection(rng: &mut Rng, a: f64, b: f64, mode: f64) -> Result<f64> {
    let width = b - a;
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::SamplingFailure(format!(
            "truncated mass is numerically zero on [{a}, {b}]"
        )));
    }
    for _ in 0..MAX_REJECTIONS {
        let z = a + rng.uniform() * width;
        let accept = (0.5 * (mode * mode - z * z)).exp();
        if rng.uniform() <= accept {
            return Ok(z);
        }
    }
    Err(Error::SamplingFailure(format!(
        "uniform rejection sampler exhausted on [{a}, {b}]"
    )))
}

/// Gamma draw parameterized by shape and rate.
pub fn sample_gamma(rng: &mut Rng, shape: f64, rate: f64) -> Result<f64> {
    check_positive("gamma shape", shape)?;
    check_positive("gamma rate", rate)?;
    let dist = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(dist.sample(rng))
}

/// Inverse-gamma draw: reciprocal of a Gamma(shape, rate = scale) draw.
pub fn sample_inverse_gamma(rng: &mut Rng, shape: f64, scale: f64) -> Result<f64> {
    check_positive("inverse-gamma scale", scale)?;
    let g = sample_gamma(rng, shape, scale)?;
    if g > 0.0 {
        Ok(1.0 / g)
    } else {
        Err(Error::SamplingFailure(format!(
            "inverse-gamma({shape}, {scale}) draw overflowed"
        )))
    }
}

pub fn sample_beta(rng: &mut Rng, a: f64, b: f64) -> Result<f64> {
    check_positive("beta a", a)?;
    check_positive("beta b", b)?;
    let dist = Beta::new(a, b).map_err(|e| Error::invalid(e.to_string()))?;
    let x: f64 = dist.sample(rng);
    Ok(x.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
}

pub fn sample_bernoulli(rng: &mut Rng, p: f64) -> Result<bool> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("bernoulli probability {p} outside [0, 1]")));
    }
    Ok(rng.uniform() < p)
}

/// Bernoulli draw from the log-odds of success.
pub fn sample_bernoulli_logit(rng: &mut Rng, log_odds: f64) -> Result<bool> {
    if log_odds.is_nan() {
        return Err(Error::invalid("bernoulli log-odds is NaN"));
    }
    sample_bernoulli(rng, logistic(log_odds))
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Index drawn with probability proportional to `probs`.
pub fn sample_categorical(rng: &mut Rng, probs: &[f64]) -> Result<usize> {
    if probs.is_empty() {
        return Err(Error::invalid("categorical with no categories"));
    }
    if probs.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
        return Err(Error::invalid(format!("categorical probabilities {probs:?} invalid")));
    }
    let total: f64 = probs.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("categorical probabilities sum to zero"));
    }
    let mut target = rng.uniform() * total;
    for (k, &p) in probs.iter().enumerate() {
        if target < p {
            return Ok(k);
        }
        target -= p;
    }
    // Rounding residue: last category with positive weight.
    Ok(probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1))
}

/// Dirichlet draw, clamped to `[1e-12, 1 - 1e-12]` and renormalized.
///
/// Gammas are generated in log space (`G(a) = G(a + 1) U^(1/a)`) so small
/// shapes cannot underflow every component to zero.
pub fn sample_dirichlet(rng: &mut Rng, alphas: &[f64]) -> Result<Vec<f64>> {
    if alphas.len() < 2 {
        return Err(Error::invalid("dirichlet needs at least two components"));
    }
    let mut logs = Vec::with_capacity(alphas.len());
    for &a in alphas {
        check_positive("dirichlet alpha", a)?;
        let lg = if a < 1.0 {
            sample_gamma(rng, a + 1.0, 1.0)?.ln() + rng.uniform().ln() / a
        } else {
            sample_gamma(rng, a, 1.0)?.ln()
        };
        logs.push(lg);
    }
    let mx = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|l| (l - mx).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    clamp_simplex(&mut out);
    Ok(out)
}

/// Clamp to `[1e-12, 1 - 1e-12]` and renormalize in place.
pub fn clamp_simplex(x: &mut [f64]) {
    for v in x.iter_mut() {
        *v = v.clamp(SIMPLEX_FLOOR, 1.0 - SIMPLEX_FLOOR);
    }
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
}

/// Exact Dirichlet log-density, including the log-gamma normalizer.
pub fn log_dirichlet_density(theta: &[f64], alphas: &[f64]) -> Result<f64> {
    if theta.len() != alphas.len() || theta.len() < 2 {
        return Err(Error::invalid(format!(
            "dirichlet density: {} components vs {} alphas",
            theta.len(),
            alphas.len()
        )));
    }
    let mut sum = 0.0;
    for &t in theta {
        if !(t > 1e-300) || t >= 1.0 {
            return Err(Error::BoundaryDensity(format!("theta {theta:?}")));
        }
        sum += t;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("theta sums to {sum}, not 1")));
    }
    for &a in alphas {
        check_positive("dirichlet alpha", a)?;
    }
    Ok(log_dirichlet_unchecked(theta, alphas))
}

pub(crate) fn log_dirichlet_unchecked(theta: &[f64], alphas: &[f64]) -> f64 {
    let alpha0: f64 = alphas.iter().sum();
    let mut lp = ln_gamma(alpha0);
    for (&t, &a) in theta.iter().zip(alphas) {
        lp += (a - 1.0) * t.ln() - ln_gamma(a);
    }
    lp
}

/// log(exp(a) + exp(b)) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Normalize log-weights into probabilities (log-sum-exp), written into `out`.
pub fn softmax_into(log_weights: &[f64], out: &mut [f64]) {
    let mx = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &l) in out.iter_mut().zip(log_weights) {
        *o = (l - mx).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}
