//! Negative-binomial duration model.
//!
//! Each token's duration is `d_i = d_min + y_i` where the excess `y_i` is
//! negative-binomial with mean `mu_free_i` and a dispersion `alpha` shared by
//! all tokens (`r = 1/alpha`, variance `mu + alpha * mu^2`). Decoding either
//! rounds the free means directly or rescales them to a known frame budget
//! and apportions the integer frames by largest remainder.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::model::DurationVector;

pub const DEFAULT_LAMBDA: f64 = 0.05;
pub const DEFAULT_EPSILON: f64 = 1e-8;
/// Lower bound applied to the dispersion when the data are not over-dispersed.
pub const MIN_ALPHA: f64 = 1e-4;

/// Free means, shared dispersion and the decoding/regularization constants.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationParams {
    pub mu_free: Vec<f64>,
    pub alpha: f64,
    pub d_min: u32,
    pub lambda: f64,
    pub epsilon: f64,
}

impl DurationParams {
    /// Defaults: `d_min = 1`, `lambda = 0.05`, `epsilon = 1e-8`.
    pub fn new(mu_free: Vec<f64>, alpha: f64) -> Result<Self> {
        let params = Self {
            mu_free,
            alpha,
            d_min: 1,
            lambda: DEFAULT_LAMBDA,
            epsilon: DEFAULT_EPSILON,
        };
        params.validate()?;
        Ok(params)
    }

    /// Maps raw predictor outputs to free means through softplus.
    pub fn from_raw(raw: &[f64], alpha: f64) -> Result<Self> {
        Self::new(raw.iter().map(|&x| crate::hazard::softplus(x)).collect(), alpha)
    }

    pub fn with_d_min(mut self, d_min: u32) -> Result<Self> {
        self.d_min = d_min;
        self.validate()?;
        Ok(self)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidInput(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.d_min == 0 {
            return Err(Error::InvalidInput("d_min must be at least 1".into()));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if let Some(i) = self.mu_free.iter().position(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "free mean {i} must be finite and non-negative, got {}",
                self.mu_free[i]
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.mu_free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu_free.is_empty()
    }

    /// Token means including the minimum duration.
    pub fn means(&self) -> Vec<f64> {
        self.mu_free.iter().map(|m| self.d_min as f64 + m).collect()
    }
}

fn check_nb_args(mu: f64, alpha: f64) -> Result<()> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::InvalidInput(format!("mean must be finite and >= 0, got {mu}")));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidInput(format!(
            "alpha must be finite and > 0, got {alpha}"
        )));
    }
    Ok(())
}

/// Log-pmf of the mean/dispersion negative binomial at count `y`.
///
/// `mu = 0` is the point mass at zero.
pub fn nb_log_pmf(y: i64, mu: f64, alpha: f64) -> Result<f64> {
    if y < 0 {
        return Err(Error::InvalidInput(format!("count must be non-negative, got {y}")));
    }
    check_nb_args(mu, alpha)?;
    Ok(nb_log_pmf_unchecked(y as f64, mu, alpha))
}

fn nb_log_pmf_unchecked(y: f64, mu: f64, alpha: f64) -> f64 {
    if mu == 0.0 {
        return if y == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let r = 1.0 / alpha;
    // log p and log(1-p) for p = r / (r + mu), kept separate for accuracy
    let log_p = -(mu / r).ln_1p();
    let log_q = (mu / (r + mu)).ln();
    let mut lp = ln_gamma(y + r) - ln_gamma(r) - ln_gamma(y + 1.0) + r * log_p;
    if y > 0.0 {
        lp += y * log_q;
    }
    lp
}

/// Partial derivatives of the log-pmf with respect to `mu` and `alpha`.
fn nb_log_pmf_grad(y: f64, mu: f64, alpha: f64) -> (f64, f64) {
    let r = 1.0 / alpha;
    if mu == 0.0 {
        // one-sided derivative at the point mass; only y = 0 is finite
        return (-1.0, 0.0);
    }
    let d_mu = y / mu - (r + y) / (r + mu);
    let d_r = digamma(y + r) - digamma(r) - (mu / r).ln_1p() + (mu - y) / (r + mu);
    (d_mu, -d_r / (alpha * alpha))
}

/// Loss value with gradients for every free mean and the dispersion.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationLoss {
    pub value: f64,
    pub grad_mu_free: Vec<f64>,
    pub grad_alpha: f64,
}

/// NB negative log-likelihood of the excess durations plus the normalized
/// length penalty `lambda * ((sum mu_free - T_free) / (T_free + eps))^2`,
/// where `T_free = T - N * d_min`.
pub fn duration_nll(params: &DurationParams, durations: &[u32], total_frames: u64) -> Result<DurationLoss> {
    params.validate()?;
    let n = params.len();
    if durations.len() != n {
        return Err(Error::InvalidDurations(format!(
            "{} durations for {n} free means",
            durations.len()
        )));
    }
    if let Some(i) = durations.iter().position(|&d| d < params.d_min) {
        return Err(Error::InvalidDurations(format!(
            "duration {i} is {}, below d_min {}",
            durations[i], params.d_min
        )));
    }
    let t_free = free_budget(total_frames, n, params.d_min)?;

    let mut value = 0.0;
    let mut grad_mu_free = Vec::with_capacity(n);
    let mut grad_alpha = 0.0;
    for (&d, &mu) in durations.iter().zip(&params.mu_free) {
        let y = (d - params.d_min) as f64;
        value -= nb_log_pmf_unchecked(y, mu, params.alpha);
        let (g_mu, g_alpha) = nb_log_pmf_grad(y, mu, params.alpha);
        grad_mu_free.push(-g_mu);
        grad_alpha -= g_alpha;
    }

    let t_free = t_free as f64;
    let denom = t_free + params.epsilon;
    let excess = params.mu_free.iter().sum::<f64>() - t_free;
    value += params.lambda * (excess / denom).powi(2);
    let g_reg = 2.0 * params.lambda * excess / (denom * denom);
    for g in &mut grad_mu_free {
        *g += g_reg;
    }
    Ok(DurationLoss {
        value,
        grad_mu_free,
        grad_alpha,
    })
}

fn free_budget(total_frames: u64, tokens: usize, d_min: u32) -> Result<u64> {
    let reserved = tokens as u64 * d_min as u64;
    total_frames.checked_sub(reserved).ok_or(Error::BudgetInfeasible {
        total: total_frames,
        tokens,
        d_min,
    })
}

/// `d_min + round(mu_free)` per token, rounding halves to even.
pub fn decode_free(params: &DurationParams) -> Result<DurationVector> {
    params.validate()?;
    let durations = params
        .mu_free
        .iter()
        .map(|&m| params.d_min + m.round_ties_even() as u32)
        .collect();
    DurationVector::new(durations)
}

/// Fractional parts closer than this are treated as ties, and values this
/// close below an integer floor to that integer.
const APPORTION_TOLERANCE: f64 = 1e-9;

/// Durations that sum to exactly `total_frames`.
///
/// The free means are rescaled to `T_free = T - N * d_min` (uniformly when
/// they are all zero), floored, and the leftover frames go to the largest
/// fractional parts with ties broken toward the lower index.
pub fn decode_budget(params: &DurationParams, total_frames: u64) -> Result<DurationVector> {
    params.validate()?;
    let n = params.len();
    if n == 0 {
        return Err(Error::InvalidInput("no tokens to allocate".into()));
    }
    let t_free = free_budget(total_frames, n, params.d_min)?;
    let sum: f64 = params.mu_free.iter().sum();
    let scaled: Vec<f64> = if sum > 0.0 {
        params.mu_free.iter().map(|&m| m / sum * t_free as f64).collect()
    } else {
        vec![t_free as f64 / n as f64; n]
    };

    let allocation = largest_remainder(&scaled, t_free);
    let durations = allocation.into_iter().map(|a| params.d_min + a as u32).collect();
    DurationVector::new(durations)
}

/// Integer parts of `shares` plus one extra unit for each of the largest
/// remainders, so that the result sums to `total`.
fn largest_remainder(shares: &[f64], total: u64) -> Vec<u64> {
    let mut floors: Vec<u64> = Vec::with_capacity(shares.len());
    // remainders quantized so that near-equal values compare as ties
    let mut keyed: Vec<(i64, usize)> = Vec::with_capacity(shares.len());
    for (i, &s) in shares.iter().enumerate() {
        let f = (s + APPORTION_TOLERANCE).floor().max(0.0);
        let rem = (s - f).max(0.0);
        floors.push(f as u64);
        keyed.push(((rem / APPORTION_TOLERANCE).round() as i64, i));
    }
    let assigned: u64 = floors.iter().sum();
    let leftover = total.saturating_sub(assigned) as usize;
    keyed.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in keyed.iter().cycle().take(leftover) {
        floors[i] += 1;
    }
    // rounding noise can only overshoot by a unit, taken back from the smallest remainders
    let mut excess = assigned.saturating_sub(total);
    for &(_, i) in keyed.iter().rev() {
        if excess == 0 {
            break;
        }
        if floors[i] > 0 {
            floors[i] -= 1;
            excess -= 1;
        }
    }
    floors
}

/// Negative-binomial sampler via the gamma-Poisson mixture.
#[derive(Debug, Clone, Copy)]
pub struct NegativeBinomial {
    mu: f64,
    alpha: f64,
}

impl NegativeBinomial {
    pub fn new(mu: f64, alpha: f64) -> Result<Self> {
        check_nb_args(mu, alpha)?;
        Ok(Self { mu, alpha })
    }

    pub fn mean(&self) -> f64 {
        self.mu
    }

    pub fn variance(&self) -> f64 {
        self.mu + self.alpha * self.mu * self.mu
    }

    pub fn log_pmf(&self, y: u64) -> f64 {
        nb_log_pmf_unchecked(y as f64, self.mu, self.alpha)
    }
}

impl Distribution<u64> for NegativeBinomial {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.mu == 0.0 {
            return 0;
        }
        let r = 1.0 / self.alpha;
        let rate = Gamma::new(r, self.mu / r)
            .expect("validated gamma parameters")
            .sample(rng);
        if rate <= 0.0 {
            return 0;
        }
        Poisson::new(rate).expect("positive poisson rate").sample(rng) as u64
    }
}

/// Result of [`fit_duration_params`]: one free mean per token class.
#[derive(Debug, Clone)]
pub struct DurationFit {
    pub params: DurationParams,
    /// Set when the data showed no over-dispersion and alpha was clamped.
    pub alpha_clamped: bool,
    pub final_nll: f64,
}

/// Fits per-class free means (sample means of the excess durations) and the
/// shared dispersion by gradient descent on `log(alpha)` with `lambda = 0`.
///
/// The descent starts from the method-of-moments estimate. Samples with zero
/// excess variance, or variance not above the mean, clamp alpha to
/// [`MIN_ALPHA`] and set `alpha_clamped`.
pub fn fit_duration_params(samples: &[Vec<u32>], d_min: u32, steps: usize, lr: f64) -> Result<DurationFit> {
    if d_min == 0 {
        return Err(Error::InvalidInput("d_min must be at least 1".into()));
    }
    if samples.is_empty() || samples.iter().any(|s| s.is_empty()) {
        return Err(Error::InvalidInput(
            "every token class needs at least one sample".into(),
        ));
    }
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    for (c, class) in samples.iter().enumerate() {
        if let Some(&d) = class.iter().find(|&&d| d < d_min) {
            return Err(Error::InvalidDurations(format!(
                "class {c} has duration {d} below d_min {d_min}"
            )));
        }
    }

    let mu_free: Vec<f64> = samples
        .iter()
        .map(|class| class.iter().map(|&d| (d - d_min) as f64).sum::<f64>() / class.len() as f64)
        .collect();

    // pooled moment estimate: sum (y - mu)^2 - y over sum mu^2
    let mut num = 0.0;
    let mut den = 0.0;
    for (class, &mu) in samples.iter().zip(&mu_free) {
        for &d in class {
            let y = (d - d_min) as f64;
            num += (y - mu).powi(2) - y;
            den += mu * mu;
        }
    }
    let moment = if den > 0.0 { num / den } else { 0.0 };
    let count: usize = samples.iter().map(Vec::len).sum();

    let mean_nll = |alpha: f64| -> (f64, f64) {
        let mut v = 0.0;
        let mut g = 0.0;
        for (class, &mu) in samples.iter().zip(&mu_free) {
            for &d in class {
                let y = (d - d_min) as f64;
                v -= nb_log_pmf_unchecked(y, mu, alpha);
                g -= nb_log_pmf_grad(y, mu, alpha).1;
            }
        }
        (v / count as f64, g / count as f64)
    };

    let mut alpha_clamped = false;
    let mut alpha = if moment > MIN_ALPHA {
        moment
    } else {
        alpha_clamped = true;
        MIN_ALPHA
    };
    let mut nll = mean_nll(alpha).0;
    if !alpha_clamped {
        let mut log_alpha = alpha.ln();
        for _ in 0..steps {
            let (value, grad) = mean_nll(alpha);
            nll = value;
            // chain rule through alpha = exp(log_alpha)
            let step = lr * grad * alpha;
            if !step.is_finite() {
                break;
            }
            log_alpha -= step;
            let next = log_alpha.exp();
            if next < MIN_ALPHA {
                alpha = MIN_ALPHA;
                alpha_clamped = true;
                break;
            }
            if (next - alpha).abs() < 1e-12 * alpha {
                alpha = next;
                break;
            }
            alpha = next;
        }
        nll = mean_nll(alpha).0.min(nll);
    }

    let params = DurationParams {
        mu_free,
        alpha,
        d_min,
        lambda: 0.0,
        epsilon: DEFAULT_EPSILON,
    };
    Ok(DurationFit {
        params,
        alpha_clamped,
        final_nll: nll,
    })
}
