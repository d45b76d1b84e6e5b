//! Scalar spherical quantization.
//!
//! A latent of dimension `L` is projected onto the unit sphere and every
//! coordinate is snapped to one of `K` evenly spaced levels spanning
//! `[-1/sqrt(L), 1/sqrt(L)]`, endpoints included. Tokens are the per-dimension
//! level indices, so the implicit codebook has `K^L` entries without ever
//! being materialized. Dequantization maps indices back to levels and
//! renormalizes. With `K = 2` this is binary spherical quantization.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub const DEFAULT_ENTROPY_WEIGHT: f64 = 0.1;
pub const DEFAULT_TEMPERATURE: f64 = 0.1;
/// Largest codebook [`enumerate_codebook`] will materialize.
pub const MAX_ENUMERATION: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsqConfig {
    pub dim: usize,
    pub levels: usize,
    pub entropy_weight: f64,
    pub temperature: f64,
}

impl SsqConfig {
    pub fn new(dim: usize, levels: usize) -> Result<Self> {
        let cfg = Self {
            dim,
            levels,
            entropy_weight: DEFAULT_ENTROPY_WEIGHT,
            temperature: DEFAULT_TEMPERATURE,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("latent dimension must be positive".into()));
        }
        if !(2..=256).contains(&self.levels) {
            return Err(Error::InvalidConfig(format!(
                "levels must be in 2..=256, got {}",
                self.levels
            )));
        }
        if !(self.entropy_weight.is_finite() && self.entropy_weight >= 0.0) {
            return Err(Error::InvalidConfig("entropy weight must be non-negative".into()));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidConfig("temperature must be positive".into()));
        }
        Ok(())
    }

    /// Half-width of the level grid, `1/sqrt(L)`.
    pub fn scale(&self) -> f64 {
        1.0 / (self.dim as f64).sqrt()
    }

    /// Level value for index `k`.
    pub fn level(&self, k: usize) -> f64 {
        // (2k - (K-1)) / (K-1) keeps mirrored levels exactly symmetric
        let km1 = (self.levels - 1) as f64;
        self.scale() * (2.0 * k as f64 - km1) / km1
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.levels).map(|k| self.level(k)).collect()
    }

    /// Distance between adjacent levels.
    pub fn spacing(&self) -> f64 {
        2.0 * self.scale() / (self.levels - 1) as f64
    }

    pub fn bits_per_token(&self) -> f64 {
        self.dim as f64 * (self.levels as f64).log2()
    }

    /// Nearest level index for one normalized coordinate, ties to the lower index.
    pub fn snap(&self, value: f64) -> usize {
        let km1 = (self.levels - 1) as f64;
        let pos = ((value / self.scale() + 1.0) * km1 / 2.0).clamp(0.0, km1);
        (pos - 0.5).ceil().max(0.0) as usize
    }
}

/// Scales `values` to unit L2 norm.
pub fn normalize(values: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput(format!("non-finite coordinate {i}")));
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateInput("cannot normalize the zero vector".into()));
    }
    Ok(values.iter().map(|v| v / norm).collect())
}

pub fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_dim(values: &[f64], cfg: &SsqConfig) -> Result<()> {
    if values.len() != cfg.dim {
        return Err(Error::InvalidInput(format!(
            "latent has {} values, quantizer expects {}",
            values.len(),
            cfg.dim
        )));
    }
    Ok(())
}

/// Normalizes `latent` and snaps each coordinate to its nearest level.
pub fn quantize(latent: &[f64], cfg: &SsqConfig) -> Result<Vec<u8>> {
    cfg.validate()?;
    check_dim(latent, cfg)?;
    let unit = normalize(latent)?;
    Ok(unit.iter().map(|&v| cfg.snap(v) as u8).collect())
}

/// Grid values of `indices` before renormalization.
pub fn levels_of(indices: &[u8], cfg: &SsqConfig) -> Result<Vec<f64>> {
    if indices.len() != cfg.dim {
        return Err(Error::InvalidInput(format!(
            "token has {} indices, quantizer expects {}",
            indices.len(),
            cfg.dim
        )));
    }
    indices
        .iter()
        .map(|&i| {
            if (i as usize) < cfg.levels {
                Ok(cfg.level(i as usize))
            } else {
                Err(Error::InvalidToken {
                    index: i as usize,
                    levels: cfg.levels,
                })
            }
        })
        .collect()
}

/// Unit-norm embedding of a token.
pub fn dequantize(indices: &[u8], cfg: &SsqConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let raw = levels_of(indices, cfg)?;
    if raw.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateCode);
    }
    normalize(&raw)
}

/// Per-dimension softmax over levels of `-(z_d - level_k)^2 / temperature`.
pub fn soft_quantize(latent: &[f64], cfg: &SsqConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    check_dim(latent, cfg)?;
    let grid = cfg.grid();
    Ok(latent.iter().map(|&z| soft_assign(z, &grid, cfg.temperature)).collect())
}

fn soft_assign(z: f64, grid: &[f64], temperature: f64) -> Vec<f64> {
    let logits: Vec<f64> = grid.iter().map(|&l| -(z - l).powi(2) / temperature).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|a| (a - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Loss and gradient of the factorized entropy regularizer.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyLoss {
    pub value: f64,
    /// Same shape as the input batch.
    pub grad: Vec<Vec<Vec<f64>>>,
}

/// `weight * sum_d [ mean_b H(p_d^b) - H(mean_b p_d^b) ]` over a batch of
/// per-dimension soft assignments `batch[b][d][k]`.
///
/// The first term rewards confident per-sample assignments, the second
/// rewards spreading the batch across all levels. The gradient is with
/// respect to the probabilities; entries that are exactly zero get the
/// finite limit of the batch term only.
pub fn entropy_loss(batch: &[Vec<Vec<f64>>], cfg: &SsqConfig) -> Result<EntropyLoss> {
    cfg.validate()?;
    let b = batch.len();
    if b == 0 {
        return Err(Error::InvalidInput("entropy loss needs a non-empty batch".into()));
    }
    for sample in batch {
        if sample.len() != cfg.dim || sample.iter().any(|p| p.len() != cfg.levels) {
            return Err(Error::InvalidInput(
                "soft assignment shape does not match the quantizer".into(),
            ));
        }
    }
    let bf = b as f64;
    let mut value = 0.0;
    let mut grad = vec![vec![vec![0.0; cfg.levels]; cfg.dim]; b];
    for d in 0..cfg.dim {
        let mut mean = vec![0.0; cfg.levels];
        let mut per_sample = 0.0;
        for sample in batch {
            per_sample += entropy(&sample[d]);
            for (m, p) in mean.iter_mut().zip(&sample[d]) {
                *m += p / bf;
            }
        }
        value += per_sample / bf - entropy(&mean);
        for (bi, sample) in batch.iter().enumerate() {
            for k in 0..cfg.levels {
                let p = sample[d][k];
                let log_p = if p > 0.0 { p.ln() } else { 0.0 };
                let log_m = if mean[k] > 0.0 { mean[k].ln() } else { 0.0 };
                grad[bi][d][k] = cfg.entropy_weight * (log_m - log_p) / bf;
            }
        }
    }
    Ok(EntropyLoss {
        value: cfg.entropy_weight * value,
        grad,
    })
}

/// Entropy loss of the soft assignments of a batch of latents, with the
/// gradient carried back through the soft relaxation to the latent values.
pub fn entropy_loss_from_latents(latents: &[Vec<f64>], cfg: &SsqConfig) -> Result<(f64, Vec<Vec<f64>>)> {
    let grid = cfg.grid();
    let soft: Vec<Vec<Vec<f64>>> = latents.iter().map(|z| soft_quantize(z, cfg)).collect::<Result<_>>()?;
    let loss = entropy_loss(&soft, cfg)?;
    let grad = latents
        .iter()
        .enumerate()
        .map(|(bi, z)| {
            z.iter()
                .enumerate()
                .map(|(d, &zd)| {
                    let p = &soft[bi][d];
                    let g = &loss.grad[bi][d];
                    let expected: f64 = p.iter().zip(g).map(|(pk, gk)| pk * gk).sum();
                    // softmax Jacobian times d(logit_k)/dz = -2 (z - level_k) / temperature
                    p.iter()
                        .zip(g)
                        .zip(&grid)
                        .map(|((pk, gk), lk)| pk * (gk - expected) * (-2.0 * (zd - lk) / cfg.temperature))
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok((loss.value, grad))
}

/// Every index tuple of a small codebook with its embedding.
#[derive(Debug, Clone)]
pub struct Codebook {
    pub tuples: Vec<Vec<u8>>,
    /// `None` for the all-zero code, which has no direction.
    pub embeddings: Vec<Option<Vec<f64>>>,
    /// Tuples whose embedding equals that of an earlier tuple.
    pub collisions: usize,
    /// Tuples with no embedding.
    pub degenerate: usize,
    /// For each tuple, the first tuple sharing its embedding.
    pub representative: Vec<usize>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn distinct_embeddings(&self) -> usize {
        self.len() - self.collisions - self.degenerate
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Lists all `K^L` index tuples in lexicographic order and counts those
/// whose embeddings coincide after renormalization.
pub fn enumerate_codebook(cfg: &SsqConfig) -> Result<Codebook> {
    cfg.validate()?;
    let size = (cfg.levels as u64)
        .checked_pow(cfg.dim as u32)
        .filter(|&s| s <= MAX_ENUMERATION)
        .ok_or(Error::TooLarge {
            dim: cfg.dim,
            levels: cfg.levels,
        })? as usize;

    let km1 = (cfg.levels - 1) as i64;
    let mut tuples = Vec::with_capacity(size);
    let mut embeddings = Vec::with_capacity(size);
    let mut representative = Vec::with_capacity(size);
    let mut seen: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut collisions = 0;
    let mut degenerate = 0;
    let mut current = vec![0u8; cfg.dim];
    for n in 0..size {
        // levels are proportional to the integers 2k - (K-1); dividing out
        // their gcd identifies tuples that are positive multiples
        let ints: Vec<i64> = current.iter().map(|&k| 2 * k as i64 - km1).collect();
        let g = ints.iter().fold(0, |acc, &v| gcd(acc, v));
        if g == 0 {
            degenerate += 1;
            embeddings.push(None);
            representative.push(n);
        } else {
            let key: Vec<i64> = ints.iter().map(|v| v / g).collect();
            match seen.get(&key) {
                Some(&first) => {
                    collisions += 1;
                    representative.push(first);
                }
                None => {
                    seen.insert(key, n);
                    representative.push(n);
                }
            }
            embeddings.push(Some(dequantize(&current, cfg)?));
        }
        tuples.push(current.clone());
        // odometer increment, last dimension fastest
        for slot in current.iter_mut().rev() {
            *slot += 1;
            if (*slot as usize) < cfg.levels {
                break;
            }
            *slot = 0;
        }
    }
    Ok(Codebook {
        tuples,
        embeddings,
        collisions,
        degenerate,
        representative,
    })
}
