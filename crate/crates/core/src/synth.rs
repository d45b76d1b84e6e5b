//! Seeded synthetic corpora for examples and acceptance runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::chunking::AlignmentSpan;
use crate::duration::NegativeBinomial;
use crate::error::{Error, Result};
use crate::model::{BoundarySet, FrameSequence};
use crate::rad::LatentPool;

pub const BASE_FRAME_RATE_HZ: f32 = 50.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard-normal frames at the base frame rate.
pub fn gaussian_frames(num_frames: usize, dim: usize, seed: u64) -> Result<FrameSequence> {
    let mut rng = rng(seed);
    let data = (0..num_frames * dim)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect::<Vec<f32>>();
    FrameSequence::new(num_frames, dim, BASE_FRAME_RATE_HZ, data)
}

/// Frames with chunks planted every `period` frames.
#[derive(Debug, Clone)]
pub struct PeriodicCorpus {
    pub frames: FrameSequence,
    pub boundaries: BoundarySet,
    pub alignment: Vec<AlignmentSpan>,
}

pub fn periodic(num_frames: usize, period: usize, dim: usize, seed: u64) -> Result<PeriodicCorpus> {
    if period == 0 {
        return Err(Error::InvalidInput("period must be positive".into()));
    }
    let frames = gaussian_frames(num_frames, dim, seed)?;
    let mut ends: Vec<usize> = (period - 1..num_frames).step_by(period).collect();
    if ends.last() != Some(&(num_frames - 1)) {
        ends.push(num_frames - 1);
    }
    let boundaries = BoundarySet::new(ends, num_frames)?;
    let alignment = boundaries
        .chunks()
        .enumerate()
        .map(|(i, (s, e))| {
            let label = char::from(b'a' + (i % 26) as u8).to_string();
            AlignmentSpan::new(label.as_str(), s, e)
        })
        .collect();
    Ok(PeriodicCorpus {
        frames,
        boundaries,
        alignment,
    })
}

/// `count` draws from a negative binomial with mean `mu` and dispersion `alpha`.
pub fn nb_durations(mu: f64, alpha: f64, count: usize, seed: u64) -> Result<Vec<u64>> {
    let nb = NegativeBinomial::new(mu, alpha)?;
    let mut rng = rng(seed);
    Ok((0..count).map(|_| nb.sample(&mut rng)).collect())
}

/// Unit-norm latents scattered around random unit centers.
#[derive(Debug, Clone)]
pub struct ClusteredLatents {
    pub pool: LatentPool,
    /// Cluster of each pool row; rows are dealt round-robin.
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
}

pub fn clustered_latents(
    clusters: usize,
    count: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<ClusteredLatents> {
    if clusters == 0 || count < clusters || dim == 0 {
        return Err(Error::InvalidInput(format!(
            "need 1 <= clusters <= count and dim >= 1, got {clusters} clusters, {count} vectors, dim {dim}"
        )));
    }
    let mut rng = rng(seed);
    let centers: Vec<Vec<f64>> = (0..clusters)
        .map(|_| random_unit(dim, &mut rng))
        .collect::<Result<_>>()?;
    let labels: Vec<usize> = (0..count).map(|i| i % clusters).collect();
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&c| {
            centers[c]
                .iter()
                .map(|&v| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    v + spread * noise
                })
                .collect()
        })
        .collect();
    Ok(ClusteredLatents {
        pool: LatentPool::from_rows(&rows, None)?,
        labels,
        centers,
    })
}

pub fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Vec<f64>> {
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    crate::ssq::normalize(&v)
}

/// Hazards uniform in `(0, 1)`.
pub fn random_hazards<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(0.001..0.999)).collect()
}
