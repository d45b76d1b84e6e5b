//! Toy end-to-end codec: frames -> boundaries -> last-frame pooling ->
//! projection -> SSQ tokens, and back through durations, optional retrieval,
//! back-projection and repetition upsampling.
//!
//! The projection is a fixed seeded matrix with orthonormal columns standing
//! in for a learned compressor.

use rand_distr::{Distribution, StandardNormal};

use crate::chunking::{alignment_to_targets, downsample, upsample, AlignmentSpan};
use crate::duration::{decode_budget, decode_free, DurationParams};
use crate::error::{Error, Result};
use crate::hazard::{decode_boundaries, BoundaryDecodeConfig, HazardSequence};
use crate::model::{
    boundaries_to_durations, compute_rates, BoundarySet, CodecRates, DurationVector, FrameSequence, TokenSequence,
};
use crate::rad::{rad_apply, IvfIndex, LatentPool, RadConfig};
use crate::ssq::{dequantize, normalize, quantize, SsqConfig};

/// Bits spent on the utterance length in [`SideInfo::UtteranceLength`] mode.
pub const UTTERANCE_LENGTH_BITS: u32 = 32;

/// Seeded linear map from `D` features to `L` latents and back.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyCompressor {
    input_dim: usize,
    latent_dim: usize,
    /// `D x L`, row-major, orthonormal columns.
    basis: Vec<f64>,
}

impl ToyCompressor {
    pub fn new(input_dim: usize, latent_dim: usize, seed: u64) -> Result<Self> {
        if latent_dim == 0 || latent_dim > input_dim {
            return Err(Error::InvalidConfig(format!(
                "latent dim {latent_dim} must lie in 1..={input_dim}"
            )));
        }
        let mut rng = crate::synth::rng(seed);
        // modified Gram-Schmidt on Gaussian columns
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(latent_dim);
        while cols.len() < latent_dim {
            let mut v: Vec<f64> = (0..input_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            for c in &cols {
                let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= dot * ci;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                cols.push(v.iter().map(|x| x / norm).collect());
            }
        }
        let mut basis = vec![0.0; input_dim * latent_dim];
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                basis[i * latent_dim + j] = v;
            }
        }
        Ok(Self {
            input_dim,
            latent_dim,
            basis,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    /// Projects a frame and normalizes it onto the unit sphere.
    pub fn compress(&self, frame: &[f32]) -> Result<Vec<f64>> {
        if frame.len() != self.input_dim {
            return Err(Error::InvalidInput(format!(
                "frame has {} features, compressor expects {}",
                frame.len(),
                self.input_dim
            )));
        }
        let mut y = vec![0.0; self.latent_dim];
        for (i, &x) in frame.iter().enumerate() {
            let row = &self.basis[i * self.latent_dim..(i + 1) * self.latent_dim];
            for (yj, w) in y.iter_mut().zip(row) {
                *yj += x as f64 * w;
            }
        }
        normalize(&y)
    }

    pub fn decompress(&self, latent: &[f64]) -> Result<Vec<f32>> {
        if latent.len() != self.latent_dim {
            return Err(Error::InvalidInput(format!(
                "latent has {} values, compressor expects {}",
                latent.len(),
                self.latent_dim
            )));
        }
        Ok(self
            .basis
            .chunks_exact(self.latent_dim)
            .map(|row| row.iter().zip(latent).map(|(w, z)| w * z).sum::<f64>() as f32)
            .collect())
    }
}

/// Where encoding takes its chunk boundaries from.
#[derive(Debug, Clone)]
pub enum BoundarySource {
    Provided(BoundarySet),
    Hazard {
        hazard: HazardSequence,
        decode: BoundaryDecodeConfig,
    },
    Alignment(Vec<AlignmentSpan>),
}

/// Side information transmitted with the tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideInfo {
    /// Every token's duration.
    Durations,
    /// Only the total frame count; durations come from budget decoding.
    UtteranceLength,
    /// Nothing; durations come from free decoding.
    TokensOnly,
}

impl std::str::FromStr for SideInfo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "durations" | "tokens+durations" | "1" => Ok(SideInfo::Durations),
            "length" | "tokens+length" | "utterance-length" | "2" => Ok(SideInfo::UtteranceLength),
            "tokens" | "tokens-only" | "3" => Ok(SideInfo::TokensOnly),
            other => Err(Error::InvalidConfig(format!("unknown decode mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub ssq: SsqConfig,
    pub side_info: SideInfo,
    pub compressor_seed: u64,
    /// Decode from the continuous latents instead of the tokens. Test-only switch.
    pub identity_quantizer: bool,
}

impl PipelineConfig {
    pub fn new(ssq: SsqConfig, side_info: SideInfo) -> Self {
        Self {
            ssq,
            side_info,
            compressor_seed: 0,
            identity_quantizer: false,
        }
    }
}

/// Output of [`Codec::encode`].
#[derive(Debug, Clone)]
pub struct Encoded {
    pub tokens: TokenSequence,
    pub boundaries: BoundarySet,
    /// Unit-norm token latents before quantization.
    pub latents: Vec<Vec<f64>>,
    pub num_frames: usize,
    pub base_rate_hz: f32,
    /// Longest duration the fixed-width duration code must represent.
    pub max_duration: u32,
}

impl Encoded {
    /// Tokens per second at the base frame rate.
    pub fn token_rate_hz(&self) -> f64 {
        self.tokens.num_tokens() as f64 / (self.num_frames as f64 / self.base_rate_hz as f64)
    }

    pub fn rates(&self) -> Result<CodecRates> {
        compute_rates(
            self.token_rate_hz(),
            self.tokens.num_streams() as u32,
            self.tokens.levels() as u32,
            self.max_duration,
        )
    }

    pub fn mode_rates(&self) -> Result<ModeRates> {
        let rates = self.rates()?;
        let seconds = self.num_frames as f64 / self.base_rate_hz as f64;
        Ok(ModeRates {
            rates,
            tokens_only_bps: rates.bitrate_bps,
            utterance_length_bps: rates.bitrate_bps + UTTERANCE_LENGTH_BITS as f64 / seconds,
            durations_bps: rates.bitrate_with_durations_bps(),
        })
    }
}

/// Effective bitrate under each side-information mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeRates {
    pub rates: CodecRates,
    pub tokens_only_bps: f64,
    pub utterance_length_bps: f64,
    pub durations_bps: f64,
}

/// Source of free mean durations at decode time.
#[derive(Debug, Clone, PartialEq)]
pub enum DurationSource {
    /// One free mean per token.
    Params(DurationParams),
    /// The same free mean for every token.
    Uniform { mu_free: f64, alpha: f64, d_min: u32 },
}

impl DurationSource {
    fn params_for(&self, num_tokens: usize) -> Result<DurationParams> {
        match self {
            DurationSource::Params(p) => {
                if p.len() != num_tokens {
                    return Err(Error::InvalidDurations(format!(
                        "{} free means for {num_tokens} tokens",
                        p.len()
                    )));
                }
                Ok(p.clone())
            }
            DurationSource::Uniform { mu_free, alpha, d_min } => {
                DurationParams::new(vec![*mu_free; num_tokens], *alpha)?.with_d_min(*d_min)
            }
        }
    }
}

/// Decode-time inputs beyond the tokens themselves.
#[derive(Debug, Clone, Copy)]
pub struct DecodeOptions<'a> {
    pub durations: Option<&'a DurationSource>,
    /// Overrides the transmitted utterance length in length mode.
    pub target_len: Option<u64>,
    pub retrieval: Option<(&'a IvfIndex, &'a LatentPool, RadConfig)>,
    /// Continuous latents for the identity-quantizer path.
    pub continuous: Option<&'a [Vec<f64>]>,
    pub base_rate_hz: f32,
}

impl Default for DecodeOptions<'_> {
    fn default() -> Self {
        Self {
            durations: None,
            target_len: None,
            retrieval: None,
            continuous: None,
            base_rate_hz: crate::synth::BASE_FRAME_RATE_HZ,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Decoded {
    pub frames: FrameSequence,
    pub durations: DurationVector,
    /// Rows replaced by retrieval, when retrieval ran.
    pub replaced: Option<Vec<bool>>,
}

/// A configured toy codec.
#[derive(Debug, Clone)]
pub struct Codec {
    config: PipelineConfig,
    compressor: ToyCompressor,
}

impl Codec {
    pub fn new(input_dim: usize, config: PipelineConfig) -> Result<Self> {
        config.ssq.validate()?;
        let compressor = ToyCompressor::new(input_dim, config.ssq.dim, config.compressor_seed)?;
        Ok(Self { config, compressor })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn compressor(&self) -> &ToyCompressor {
        &self.compressor
    }

    pub fn encode(&self, frames: &FrameSequence, source: &BoundarySource) -> Result<Encoded> {
        let num_frames = frames.num_frames();
        let (boundaries, max_gap) = match source {
            BoundarySource::Provided(b) => (b.clone(), None),
            BoundarySource::Hazard { hazard, decode } => {
                if hazard.len() != num_frames {
                    return Err(Error::InvalidInput(format!(
                        "{} hazards for {num_frames} frames",
                        hazard.len()
                    )));
                }
                (decode_boundaries(hazard, decode)?, decode.max_gap)
            }
            BoundarySource::Alignment(spans) => (alignment_to_targets(spans)?.boundaries, None),
        };
        let durations = boundaries_to_durations(&boundaries, num_frames)?;
        let pooled = downsample(frames, &boundaries)?;
        let latents = pooled
            .rows()
            .map(|row| self.compressor.compress(row))
            .collect::<Result<Vec<_>>>()?;
        let mut indices = Vec::with_capacity(latents.len() * self.config.ssq.dim);
        for z in &latents {
            indices.extend(quantize(z, &self.config.ssq)?);
        }
        let mut tokens = TokenSequence::new(self.config.ssq.dim as u16, self.config.ssq.levels as u16, indices)?;
        let max_duration = max_gap.map_or(durations.max(), |g| g as u32);
        match self.config.side_info {
            SideInfo::Durations => tokens = tokens.with_durations(durations)?,
            SideInfo::UtteranceLength => tokens = tokens.with_total_frames(num_frames as u32),
            SideInfo::TokensOnly => {}
        }
        Ok(Encoded {
            tokens,
            boundaries,
            latents,
            num_frames,
            base_rate_hz: frames.frame_rate_hz(),
            max_duration,
        })
    }

    fn durations_for(&self, tokens: &TokenSequence, opts: &DecodeOptions<'_>) -> Result<DurationVector> {
        let n = tokens.num_tokens();
        match self.config.side_info {
            SideInfo::Durations => tokens
                .durations()
                .cloned()
                .ok_or_else(|| Error::ModeMismatch("token stream carries no durations".into())),
            SideInfo::UtteranceLength => {
                let total = opts
                    .target_len
                    .or(tokens.total_frames().map(u64::from))
                    .ok_or_else(|| Error::ModeMismatch("token stream carries no utterance length".into()))?;
                let source = opts
                    .durations
                    .ok_or_else(|| Error::ModeMismatch("length mode needs a duration model".into()))?;
                decode_budget(&source.params_for(n)?, total)
            }
            SideInfo::TokensOnly => {
                let source = opts
                    .durations
                    .ok_or_else(|| Error::ModeMismatch("tokens-only mode needs a duration model".into()))?;
                decode_free(&source.params_for(n)?)
            }
        }
    }

    pub fn decode(&self, tokens: &TokenSequence, opts: &DecodeOptions<'_>) -> Result<Decoded> {
        if tokens.num_streams() != self.config.ssq.dim || tokens.levels() != self.config.ssq.levels {
            return Err(Error::InvalidConfig(format!(
                "tokens have {} streams of {} levels, codec expects {} of {}",
                tokens.num_streams(),
                tokens.levels(),
                self.config.ssq.dim,
                self.config.ssq.levels
            )));
        }
        let durations = self.durations_for(tokens, opts)?;
        let mut latents: Vec<Vec<f64>> = if self.config.identity_quantizer {
            let cont = opts
                .continuous
                .ok_or_else(|| Error::ModeMismatch("identity quantizer needs continuous latents".into()))?;
            if cont.len() != tokens.num_tokens() {
                return Err(Error::InvalidInput(
                    "continuous latents do not match the token count".into(),
                ));
            }
            cont.to_vec()
        } else {
            tokens
                .tokens()
                .map(|t| dequantize(t, &self.config.ssq))
                .collect::<Result<_>>()?
        };
        let mut replaced = None;
        if let Some((index, pool, cfg)) = opts.retrieval {
            let out = rad_apply(&latents, index, pool, &cfg)?;
            latents = out.latents;
            replaced = Some(out.replaced);
        }
        let rows = latents
            .iter()
            .map(|z| self.compressor.decompress(z))
            .collect::<Result<Vec<_>>>()?;
        let token_frames = FrameSequence::from_rows(&rows, opts.base_rate_hz)?;
        let frames = upsample(&token_frames, &durations)?;
        Ok(Decoded {
            frames,
            durations,
            replaced,
        })
    }
}
