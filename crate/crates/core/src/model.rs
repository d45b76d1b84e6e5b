//! Shared domain types, boundary/duration conversions and bitrate accounting.
//!
//! Boundaries are stored as inclusive chunk-end frame indices. Chunk `i`
//! covers frames `ends[i-1]+1 ..= ends[i]` (with `ends[-1] = -1`) and the last
//! end is always `T - 1`, so every frame belongs to exactly one chunk.

use crate::error::{Error, Result};

/// A `T x D` matrix of frame-level features at a fixed base frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    num_frames: usize,
    dim: usize,
    frame_rate_hz: f32,
    data: Vec<f32>,
}

impl FrameSequence {
    /// Builds a sequence from row-major data.
    pub fn new(num_frames: usize, dim: usize, frame_rate_hz: f32, data: Vec<f32>) -> Result<Self> {
        if num_frames == 0 || dim == 0 {
            return Err(Error::InvalidInput(format!(
                "frame sequence needs T >= 1 and D >= 1, got {num_frames}x{dim}"
            )));
        }
        if data.len() != num_frames * dim {
            return Err(Error::InvalidInput(format!(
                "expected {} values for {num_frames}x{dim}, got {}",
                num_frames * dim,
                data.len()
            )));
        }
        if !(frame_rate_hz.is_finite() && frame_rate_hz > 0.0) {
            return Err(Error::InvalidInput(format!(
                "frame rate must be positive, got {frame_rate_hz}"
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at flat index {pos}")));
        }
        Ok(Self {
            num_frames,
            dim,
            frame_rate_hz,
            data,
        })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R], frame_rate_hz: f32) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != dim) {
            return Err(Error::InvalidInput("rows have differing lengths".into()));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(rows.len(), dim, frame_rate_hz, data)
    }

    /// A single-column sequence, the layout used for hazards and free means.
    pub fn from_column(values: &[f32], frame_rate_hz: f32) -> Result<Self> {
        Self::new(values.len(), 1, frame_rate_hz, values.to_vec())
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_rate_hz(&self) -> f32 {
        self.frame_rate_hz
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Duration in seconds at the base frame rate.
    pub fn seconds(&self) -> f64 {
        self.num_frames as f64 / self.frame_rate_hz as f64
    }
}

/// Strictly increasing inclusive chunk-end indices whose last entry is `T - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoundarySet {
    ends: Vec<usize>,
}

impl BoundarySet {
    /// Validates `ends` against a sequence of `num_frames` frames.
    pub fn new(ends: Vec<usize>, num_frames: usize) -> Result<Self> {
        validate_ends(&ends, num_frames)?;
        Ok(Self { ends })
    }

    /// One chunk per frame.
    pub fn every_frame(num_frames: usize) -> Result<Self> {
        Self::new((0..num_frames).collect(), num_frames)
    }

    pub(crate) fn from_ends_unchecked(ends: Vec<usize>) -> Self {
        debug_assert!(validate_ends(&ends, ends.last().map_or(0, |e| e + 1)).is_ok());
        Self { ends }
    }

    pub fn ends(&self) -> &[usize] {
        &self.ends
    }

    /// Number of chunks `N`.
    pub fn len(&self) -> usize {
        self.ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ends.is_empty()
    }

    /// Sequence length `T` implied by the final end.
    pub fn num_frames(&self) -> usize {
        self.ends[self.ends.len() - 1] + 1
    }

    /// Iterates inclusive `(start, end)` frame ranges.
    pub fn chunks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut start = 0;
        self.ends.iter().map(move |&end| {
            let span = (start, end);
            start = end + 1;
            span
        })
    }
}

fn validate_ends(ends: &[usize], num_frames: usize) -> Result<()> {
    if num_frames == 0 {
        return Err(Error::InvalidBoundaries("sequence length must be positive".into()));
    }
    let Some(&last) = ends.last() else {
        return Err(Error::InvalidBoundaries("at least one boundary is required".into()));
    };
    if let Some(w) = ends.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::InvalidBoundaries(format!(
            "ends must be strictly increasing, found {} then {}",
            w[0], w[1]
        )));
    }
    if last >= num_frames {
        return Err(Error::InvalidBoundaries(format!(
            "boundary {last} outside a sequence of {num_frames} frames"
        )));
    }
    if last != num_frames - 1 {
        return Err(Error::InvalidBoundaries(format!(
            "final boundary {last} does not close the sequence at {}",
            num_frames - 1
        )));
    }
    Ok(())
}

/// Per-token frame counts, each at least one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DurationVector(Vec<u32>);

impl DurationVector {
    pub fn new(durations: Vec<u32>) -> Result<Self> {
        if durations.is_empty() {
            return Err(Error::InvalidDurations("at least one duration is required".into()));
        }
        if let Some(i) = durations.iter().position(|&d| d == 0) {
            return Err(Error::InvalidDurations(format!("duration {i} is zero")));
        }
        Ok(Self(durations))
    }

    /// Accepts signed input, rejecting any non-positive entry.
    pub fn from_signed(durations: &[i64]) -> Result<Self> {
        let converted = durations
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                u32::try_from(d)
                    .ok()
                    .filter(|&d| d > 0)
                    .ok_or_else(|| Error::InvalidDurations(format!("duration {i} is {d}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(converted)
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&d| d as u64).sum()
    }

    pub fn max(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn into_inner(self) -> Vec<u32> {
        self.0
    }
}

/// `N` tokens of `L` per-stream level indices in `0..K`, with optional side info.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    num_streams: u16,
    levels: u16,
    indices: Vec<u8>,
    durations: Option<DurationVector>,
    total_frames: Option<u32>,
}

impl TokenSequence {
    pub fn new(num_streams: u16, levels: u16, indices: Vec<u8>) -> Result<Self> {
        if num_streams == 0 {
            return Err(Error::InvalidInput("token sequence needs at least one stream".into()));
        }
        if !(2..=256).contains(&levels) {
            return Err(Error::InvalidInput(format!(
                "levels per stream must be in 2..=256, got {levels}"
            )));
        }
        if indices.is_empty() {
            return Err(Error::InvalidInput("token sequence needs at least one token".into()));
        }
        if !indices.len().is_multiple_of(num_streams as usize) {
            return Err(Error::InvalidInput(format!(
                "{} indices do not divide into {num_streams} streams",
                indices.len()
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i as u16 >= levels) {
            return Err(Error::InvalidToken {
                index: bad as usize,
                levels: levels as usize,
            });
        }
        Ok(Self {
            num_streams,
            levels,
            indices,
            durations: None,
            total_frames: None,
        })
    }

    pub fn with_durations(mut self, durations: DurationVector) -> Result<Self> {
        if durations.len() != self.num_tokens() {
            return Err(Error::InvalidDurations(format!(
                "{} durations for {} tokens",
                durations.len(),
                self.num_tokens()
            )));
        }
        self.durations = Some(durations);
        Ok(self)
    }

    pub fn with_total_frames(mut self, total_frames: u32) -> Self {
        self.total_frames = Some(total_frames);
        self
    }

    pub fn without_side_info(mut self) -> Self {
        self.durations = None;
        self.total_frames = None;
        self
    }

    pub fn num_tokens(&self) -> usize {
        self.indices.len() / self.num_streams as usize
    }

    pub fn num_streams(&self) -> usize {
        self.num_streams as usize
    }

    pub fn levels(&self) -> usize {
        self.levels as usize
    }

    pub fn indices(&self) -> &[u8] {
        &self.indices
    }

    pub fn token(&self, i: usize) -> &[u8] {
        let l = self.num_streams as usize;
        &self.indices[i * l..(i + 1) * l]
    }

    pub fn tokens(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.indices.chunks_exact(self.num_streams as usize)
    }

    pub fn durations(&self) -> Option<&DurationVector> {
        self.durations.as_ref()
    }

    pub fn total_frames(&self) -> Option<u32> {
        self.total_frames
    }
}

/// Token rate and bitrate figures for one codec configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecRates {
    pub frame_rate_hz: f64,
    pub bits_per_token: f64,
    pub bitrate_bps: f64,
    /// Extra rate for sending one fixed-width duration per token.
    pub duration_overhead_bps: f64,
}

impl CodecRates {
    pub fn bitrate_kbps(&self) -> f64 {
        self.bitrate_bps / 1000.0
    }

    pub fn bitrate_with_durations_bps(&self) -> f64 {
        self.bitrate_bps + self.duration_overhead_bps
    }
}

/// Differences consecutive ends into per-chunk durations.
pub fn boundaries_to_durations(boundaries: &BoundarySet, num_frames: usize) -> Result<DurationVector> {
    validate_ends(boundaries.ends(), num_frames)?;
    let mut prev: i64 = -1;
    let durations = boundaries
        .ends()
        .iter()
        .map(|&e| {
            let d = (e as i64 - prev) as u32;
            prev = e as i64;
            d
        })
        .collect();
    Ok(DurationVector(durations))
}

/// Cumulative sum minus one; the inverse of [`boundaries_to_durations`].
pub fn durations_to_boundaries(durations: &DurationVector) -> BoundarySet {
    let mut acc = 0usize;
    let ends = durations
        .as_slice()
        .iter()
        .map(|&d| {
            acc += d as usize;
            acc - 1
        })
        .collect();
    BoundarySet::from_ends_unchecked(ends)
}

/// Bits needed for one fixed-width duration code covering `1..=max_duration`.
pub fn duration_code_bits(max_duration: u32) -> u32 {
    // ceil(log2(n)) for n >= 1
    if max_duration <= 1 {
        0
    } else {
        u32::BITS - (max_duration - 1).leading_zeros()
    }
}

/// Bitrate of `tokens_per_second` tokens of `num_streams` streams with
/// `levels` levels each, plus the fixed-width duration side channel.
pub fn compute_rates(tokens_per_second: f64, num_streams: u32, levels: u32, max_duration: u32) -> Result<CodecRates> {
    if !(tokens_per_second.is_finite() && tokens_per_second > 0.0) {
        return Err(Error::InvalidRateInputs(format!(
            "tokens per second must be positive, got {tokens_per_second}"
        )));
    }
    if num_streams == 0 {
        return Err(Error::InvalidRateInputs("at least one stream is required".into()));
    }
    if levels < 2 {
        return Err(Error::InvalidRateInputs(format!("levels must be >= 2, got {levels}")));
    }
    if max_duration == 0 {
        return Err(Error::InvalidRateInputs("max duration must be >= 1".into()));
    }
    let bits_per_token = num_streams as f64 * (levels as f64).log2();
    Ok(CodecRates {
        frame_rate_hz: tokens_per_second,
        bits_per_token,
        bitrate_bps: tokens_per_second * bits_per_token,
        duration_overhead_bps: tokens_per_second * duration_code_bits(max_duration) as f64,
    })
}
