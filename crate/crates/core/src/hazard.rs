//! Discrete-time hazard model over per-frame boundary probabilities.
//!
//! A frame's hazard `h_t` is the probability that the current chunk ends at
//! `t` given that it has not ended before. The offset `k` of the next
//! boundary seen from frame `t` therefore has probability
//! `prod_{i<k} (1 - h_{t+i}) * h_{t+k}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::BoundarySet;

/// Probabilities supplied directly are clamped into this band.
pub const PROB_CLAMP: f64 = 1e-7;

/// Per-frame boundary probabilities, stored with their logits.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardSequence {
    logits: Vec<f64>,
    probs: Vec<f64>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl HazardSequence {
    pub fn from_logits(logits: Vec<f64>) -> Result<Self> {
        if logits.is_empty() {
            return Err(Error::InvalidInput("hazard sequence must be non-empty".into()));
        }
        if let Some(i) = logits.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite logit at frame {i}")));
        }
        let probs = logits.iter().map(|&z| sigmoid(z)).collect();
        Ok(Self { logits, probs })
    }

    /// Clamps each probability to `[1e-7, 1 - 1e-7]` and derives its logit.
    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidInput("hazard sequence must be non-empty".into()));
        }
        if let Some(i) = probs.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite probability at frame {i}")));
        }
        let logits = probs
            .iter()
            .map(|&p| {
                let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                (p / (1.0 - p)).ln()
            })
            .collect();
        Self::from_logits(logits)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }
}

/// Distribution of the next-boundary offset over a finite horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct NextBoundary {
    /// `probs[k]` is the probability that the next boundary is `k` frames ahead.
    pub probs: Vec<f64>,
    /// Mass of "no boundary within the horizon".
    pub survival: f64,
}

impl NextBoundary {
    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.survival
    }
}

pub fn next_boundary_distribution(hazard: &HazardSequence, t: usize, horizon: usize) -> Result<NextBoundary> {
    let len = hazard.len();
    if t >= len {
        return Err(Error::Index(format!("frame {t} outside a sequence of {len} frames")));
    }
    if t + horizon > len {
        return Err(Error::Index(format!(
            "horizon {horizon} from frame {t} runs past {len} frames"
        )));
    }
    let mut survival = 1.0;
    let probs = hazard.probs[t..t + horizon]
        .iter()
        .map(|&h| {
            let p = survival * h;
            survival *= 1.0 - h;
            p
        })
        .collect();
    Ok(NextBoundary { probs, survival })
}

/// Ground-truth chunks as `(start, offset)` pairs; the boundary of each chunk
/// sits at `start + offset`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryTargets {
    chunks: Vec<(usize, usize)>,
}

impl BoundaryTargets {
    /// Checks that the chunks tile `[0, num_frames)` in order.
    pub fn new(chunks: Vec<(usize, usize)>, num_frames: usize) -> Result<Self> {
        let mut next = 0;
        for (i, &(start, offset)) in chunks.iter().enumerate() {
            if start != next {
                return Err(Error::InvalidTargets(format!(
                    "chunk {i} starts at {start}, expected {next}"
                )));
            }
            next = start + offset + 1;
        }
        if chunks.is_empty() || next != num_frames {
            return Err(Error::InvalidTargets(format!(
                "chunks cover [0, {next}), expected [0, {num_frames})"
            )));
        }
        Ok(Self { chunks })
    }

    pub fn from_boundaries(boundaries: &BoundarySet) -> Self {
        Self {
            chunks: boundaries.chunks().map(|(s, e)| (s, e - s)).collect(),
        }
    }

    pub fn chunks(&self) -> &[(usize, usize)] {
        &self.chunks
    }

    pub fn num_frames(&self) -> usize {
        self.chunks.last().map_or(0, |&(s, k)| s + k + 1)
    }

    pub fn to_boundaries(&self) -> BoundarySet {
        BoundarySet::from_ends_unchecked(self.chunks.iter().map(|&(s, k)| s + k).collect())
    }
}

/// Negative log-likelihood of the target offsets and its gradient with
/// respect to every logit.
pub fn hazard_nll(hazard: &HazardSequence, targets: &BoundaryTargets) -> Result<(f64, Vec<f64>)> {
    if targets.num_frames() != hazard.len() {
        return Err(Error::InvalidTargets(format!(
            "targets cover {} frames, hazard has {}",
            targets.num_frames(),
            hazard.len()
        )));
    }
    let mut nll = 0.0;
    let mut grad = vec![0.0; hazard.len()];
    for &(start, offset) in &targets.chunks {
        // survive frames start..start+offset, then emit at start+offset
        let survive = start..start + offset;
        for (i, g) in survive.clone().zip(&mut grad[survive]) {
            nll += softplus(hazard.logits[i]); // -log(1 - sigmoid(z))
            *g = hazard.probs[i];
        }
        let b = start + offset;
        let z = hazard.logits[b];
        nll += softplus(-z); // -log sigmoid(z)
        grad[b] = hazard.probs[b] - 1.0;
    }
    Ok((nll, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    /// Emit wherever `h_t >= tau_h`.
    Greedy,
    /// Emit with probability `h_t`, drawing from a ChaCha8 stream seeded with `seed`.
    Sample { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryDecodeConfig {
    pub tau_h: f64,
    /// Minimum chunk length; 1 makes every frame eligible.
    pub min_gap: usize,
    /// Chunk length at which a boundary is forced.
    pub max_gap: Option<usize>,
    pub mode: DecodeMode,
}

impl Default for BoundaryDecodeConfig {
    fn default() -> Self {
        Self {
            tau_h: 0.5,
            min_gap: 1,
            max_gap: None,
            mode: DecodeMode::Greedy,
        }
    }
}

impl BoundaryDecodeConfig {
    pub fn greedy(tau_h: f64, min_gap: usize, max_gap: Option<usize>) -> Self {
        Self {
            tau_h,
            min_gap,
            max_gap,
            mode: DecodeMode::Greedy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_h > 0.0 && self.tau_h < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "tau_h must lie in (0, 1), got {}",
                self.tau_h
            )));
        }
        if self.min_gap == 0 {
            return Err(Error::InvalidConfig("min_gap must be at least 1".into()));
        }
        if let Some(max) = self.max_gap {
            if max < self.min_gap {
                return Err(Error::InvalidConfig(format!(
                    "max_gap {max} is smaller than min_gap {}",
                    self.min_gap
                )));
            }
        }
        Ok(())
    }
}

/// Scans the hazards left to right and emits chunk ends.
///
/// A frame is eligible once the current chunk holds at least `min_gap`
/// frames. Any emission, thresholded or forced by `max_gap`, restarts the
/// chunk. The final frame always closes the last chunk. In sample mode one
/// uniform draw is consumed per frame, eligible or not, so the decision at
/// frame `t` always uses the `t`-th draw of the seeded stream.
pub fn decode_boundaries(hazard: &HazardSequence, cfg: &BoundaryDecodeConfig) -> Result<BoundarySet> {
    cfg.validate()?;
    let len = hazard.len();
    if len == 0 {
        return Err(Error::InvalidInput("hazard sequence must be non-empty".into()));
    }
    let mut rng = match cfg.mode {
        DecodeMode::Sample { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        DecodeMode::Greedy => None,
    };
    let mut ends = Vec::new();
    let mut chunk_len = 0usize;
    for (t, &h) in hazard.probs.iter().enumerate() {
        chunk_len += 1;
        let draw = rng.as_mut().map(|r| r.random::<f64>());
        if t == len - 1 {
            ends.push(t);
            break;
        }
        let eligible = chunk_len >= cfg.min_gap;
        let emit = eligible
            && match draw {
                Some(u) => u < h,
                None => h >= cfg.tau_h,
            };
        let forced = cfg.max_gap.is_some_and(|g| chunk_len >= g);
        if emit || forced {
            ends.push(t);
            chunk_len = 0;
        }
    }
    Ok(BoundarySet::from_ends_unchecked(ends))
}

/// Flags a loss that is non-finite or has risen for
/// [`DivergenceMonitor::PATIENCE`] consecutive steps.
#[derive(Debug, Clone, Copy)]
pub struct DivergenceMonitor {
    prev: f64,
    rising: usize,
}

impl Default for DivergenceMonitor {
    fn default() -> Self {
        Self {
            prev: f64::INFINITY,
            rising: 0,
        }
    }
}

impl DivergenceMonitor {
    pub const PATIENCE: usize = 10;

    /// Records `loss`; returns false once the fit should be abandoned.
    pub fn observe(&mut self, loss: f64) -> bool {
        if !loss.is_finite() {
            return false;
        }
        if loss > self.prev {
            self.rising += 1;
        } else {
            self.rising = 0;
        }
        self.prev = loss;
        self.rising < Self::PATIENCE
    }
}

/// Result of fitting free per-frame logits to a target chunking.
#[derive(Debug, Clone)]
pub struct HazardFit {
    pub hazard: HazardSequence,
    pub final_nll: f64,
    pub steps: usize,
}

/// Fits one free logit per frame by gradient descent on [`hazard_nll`],
/// starting from zero logits.
///
/// Fails with [`Error::FitDiverged`] if the loss rises for 10 consecutive steps.
pub fn fit_hazard_logits(targets: &BoundaryTargets, num_frames: usize, steps: usize, lr: f64) -> Result<HazardFit> {
    if targets.num_frames() != num_frames {
        return Err(Error::InvalidTargets(format!(
            "targets cover {} frames, expected {num_frames}",
            targets.num_frames()
        )));
    }
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    let mut logits = vec![0.0; num_frames];
    let mut monitor = DivergenceMonitor::default();
    let mut hazard = HazardSequence::from_logits(logits.clone())?;
    for step in 0..steps {
        let (loss, grad) = hazard_nll(&hazard, targets)?;
        if !monitor.observe(loss) {
            return Err(Error::FitDiverged { step, loss });
        }
        for (z, g) in logits.iter_mut().zip(&grad) {
            *z -= lr * g;
        }
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::FitDiverged { step, loss });
        }
        hazard = HazardSequence::from_logits(logits.clone())?;
    }
    let nll = hazard_nll(&hazard, targets)?.0;
    Ok(HazardFit {
        hazard,
        final_nll: nll,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hz(p: &[f64]) -> HazardSequence {
        HazardSequence::from_probs(p).unwrap()
    }

    #[test]
    fn next_boundary_three_frames() {
        let d = next_boundary_distribution(&hz(&[0.1, 0.9, 0.3]), 0, 3).unwrap();
        let expected = [0.1, 0.81, 0.027];
        for (p, e) in d.probs.iter().zip(expected) {
            assert!((p - e).abs() < 1e-12, "{p} vs {e}");
        }
        assert!((d.survival - 0.063).abs() < 1e-12);
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn next_boundary_halves() {
        let d = next_boundary_distribution(&hz(&[0.5, 0.5]), 0, 2).unwrap();
        assert!((d.probs[0] - 0.5).abs() < 1e-12);
        assert!((d.probs[1] - 0.25).abs() < 1e-12);
        assert!((d.survival - 0.25).abs() < 1e-12);
    }

    #[test]
    fn near_certain_boundary() {
        let d = next_boundary_distribution(&hz(&[1.0 - 1e-12, 0.3, 0.2]), 0, 3).unwrap();
        assert!(d.probs[0] > 1.0 - 1e-6);
    }

    #[test]
    fn next_boundary_out_of_range() {
        let h = hz(&[0.5, 0.5]);
        assert!(matches!(next_boundary_distribution(&h, 2, 0), Err(Error::Index(_))));
        assert!(matches!(next_boundary_distribution(&h, 1, 2), Err(Error::Index(_))));
    }

    #[test]
    fn nll_single_chunk_two_halves() {
        let targets = BoundaryTargets::new(vec![(0, 1)], 2).unwrap();
        let (nll, _) = hazard_nll(&hz(&[0.5, 0.5]), &targets).unwrap();
        assert!((nll - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn nll_all_boundaries() {
        let p = 0.3;
        let t = 7;
        let targets = BoundaryTargets::from_boundaries(&BoundarySet::every_frame(t).unwrap());
        let (nll, _) = hazard_nll(&hz(&vec![p; t]), &targets).unwrap();
        assert!((nll + t as f64 * p.ln()).abs() < 1e-9);
    }

    #[test]
    fn non_tiling_targets_rejected() {
        assert!(matches!(
            BoundaryTargets::new(vec![(0, 1), (3, 0)], 4),
            Err(Error::InvalidTargets(_))
        ));
        assert!(matches!(
            BoundaryTargets::new(vec![(0, 1)], 4),
            Err(Error::InvalidTargets(_))
        ));
        assert!(matches!(BoundaryTargets::new(vec![], 0), Err(Error::InvalidTargets(_))));
        let t = BoundaryTargets::new(vec![(0, 1)], 2).unwrap();
        assert!(matches!(hazard_nll(&hz(&[0.5; 3]), &t), Err(Error::InvalidTargets(_))));
    }

    #[test]
    fn greedy_examples() {
        let h = hz(&[0.2, 0.6, 0.1, 0.7]);
        let b = decode_boundaries(&h, &BoundaryDecodeConfig::greedy(0.5, 1, None)).unwrap();
        assert_eq!(b.ends(), &[1, 3]);
        let b = decode_boundaries(&h, &BoundaryDecodeConfig::greedy(0.5, 3, None)).unwrap();
        assert_eq!(b.ends(), &[3]);
        let b = decode_boundaries(&hz(&[0.9; 6]), &BoundaryDecodeConfig::greedy(0.5, 1, None)).unwrap();
        assert_eq!(b.ends(), &[0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn max_gap_forces_boundaries() {
        let b = decode_boundaries(&hz(&[0.01; 10]), &BoundaryDecodeConfig::greedy(0.5, 1, Some(3))).unwrap();
        assert_eq!(b.ends(), &[2, 5, 8, 9]);
        // fixed-rate case
        let b = decode_boundaries(&hz(&[0.99; 10]), &BoundaryDecodeConfig::greedy(0.5, 4, Some(4))).unwrap();
        assert_eq!(b.ends(), &[3, 7, 9]);
    }

    #[test]
    fn sample_mode_is_seeded() {
        let h = hz(&[0.3, 0.5, 0.7, 0.2, 0.6, 0.4, 0.5, 0.5, 0.9, 0.1]);
        let cfg = |seed| BoundaryDecodeConfig {
            mode: DecodeMode::Sample { seed },
            ..BoundaryDecodeConfig::default()
        };
        let a = decode_boundaries(&h, &cfg(7)).unwrap();
        assert_eq!(a, decode_boundaries(&h, &cfg(7)).unwrap());
        let distinct = (0..20)
            .map(|s| decode_boundaries(&h, &cfg(s)).unwrap())
            .collect::<std::collections::HashSet<_>>();
        assert!(distinct.len() > 1);
    }

    #[test]
    fn invalid_config() {
        let h = hz(&[0.5]);
        for cfg in [
            BoundaryDecodeConfig::greedy(0.0, 1, None),
            BoundaryDecodeConfig::greedy(1.0, 1, None),
            BoundaryDecodeConfig::greedy(0.5, 0, None),
            BoundaryDecodeConfig::greedy(0.5, 3, Some(2)),
        ] {
            assert!(matches!(decode_boundaries(&h, &cfg), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn fit_single_chunk_drives_interior_down() {
        let t = 12;
        let targets = BoundaryTargets::new(vec![(0, t - 1)], t).unwrap();
        let fit = fit_hazard_logits(&targets, t, 300, 1.0).unwrap();
        assert!(fit.hazard.probs()[..t - 1].iter().all(|&p| p <= 0.1));
    }

    #[test]
    fn fit_unit_chunks_drives_all_up() {
        let t = 8;
        let targets = BoundaryTargets::from_boundaries(&BoundarySet::every_frame(t).unwrap());
        let fit = fit_hazard_logits(&targets, t, 300, 1.0).unwrap();
        assert!(fit.hazard.probs().iter().all(|&p| p >= 0.9));
    }

    #[test]
    fn divergence_monitor_patience() {
        let mut m = DivergenceMonitor::default();
        assert!(m.observe(5.0));
        for i in 1..DivergenceMonitor::PATIENCE {
            assert!(m.observe(5.0 + i as f64));
        }
        assert!(!m.observe(100.0));
        let mut m = DivergenceMonitor::default();
        for i in 0..30 {
            // a dip resets the count
            let loss = if i % 9 == 8 { 0.0 } else { i as f64 };
            assert!(m.observe(loss));
        }
        assert!(!DivergenceMonitor::default().observe(f64::NAN));
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        let targets = BoundaryTargets::new(vec![(0, 3)], 4).unwrap();
        assert!(matches!(
            fit_hazard_logits(&targets, 5, 10, 0.1),
            Err(Error::InvalidTargets(_))
        ));
        assert!(matches!(
            fit_hazard_logits(&targets, 4, 10, -1.0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn softplus_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
    }
}
