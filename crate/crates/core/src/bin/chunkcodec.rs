//! Command-line front end over the `DYCF`/`DYCT`/`DYCI` file formats.
//!
//! Exit codes: 0 on success, 2 on validation errors, 3 on format or I/O errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use chunkcodec::chunking::parse_alignment;
use chunkcodec::duration::{decode_budget, decode_free, duration_nll, DurationParams};
use chunkcodec::format::{read_frames, read_tokens, write_frames, write_tokens};
use chunkcodec::hazard::{decode_boundaries, BoundaryDecodeConfig, DecodeMode, HazardSequence};
use chunkcodec::model::{boundaries_to_durations, compute_rates, BoundarySet, FrameSequence};
use chunkcodec::pipeline::{BoundarySource, Codec, DecodeOptions, DurationSource, PipelineConfig, SideInfo};
use chunkcodec::rad::{build_index, parse_ids, rad_apply, IvfIndex, IvfParams, LatentPool, RadConfig};
use chunkcodec::ssq::SsqConfig;
use chunkcodec::{synth, Error, Result};

#[derive(Parser)]
#[command(name = "chunkcodec", version, about = "Variable-frame-rate speech token toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chunk, pool and quantize a frame file into a token file.
    Encode(EncodeArgs),
    /// Expand a token file back into frames.
    Decode(DecodeArgs),
    /// Decode chunk boundaries from a hazard file (D = 1).
    Boundaries(BoundaryArgs),
    /// Decode durations from free means (D = 1) and attach them to a token file.
    Durations(DurationArgs),
    /// Build an IVF index over a latent pool.
    RadBuild(RadBuildArgs),
    /// Replace latents by retrieved pool vectors above a similarity threshold.
    RadApply(RadApplyArgs),
    /// Report token bitrate and duration side-channel overhead.
    Bitrate(BitrateArgs),
    /// Write seeded synthetic corpora.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
struct GapArgs {
    #[arg(long, default_value_t = 0.5)]
    tau_h: f64,
    #[arg(long, default_value_t = 1)]
    min_gap: usize,
    #[arg(long)]
    max_gap: Option<usize>,
    /// Sample boundaries with this seed instead of thresholding.
    #[arg(long)]
    sample_seed: Option<u64>,
}

impl GapArgs {
    fn config(&self) -> BoundaryDecodeConfig {
        BoundaryDecodeConfig {
            tau_h: self.tau_h,
            min_gap: self.min_gap,
            max_gap: self.max_gap,
            mode: match self.sample_seed {
                Some(seed) => DecodeMode::Sample { seed },
                None => DecodeMode::Greedy,
            },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Durations,
    Length,
    Tokens,
}

impl From<ModeArg> for SideInfo {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Durations => SideInfo::Durations,
            ModeArg::Length => SideInfo::UtteranceLength,
            ModeArg::Tokens => SideInfo::TokensOnly,
        }
    }
}

#[derive(Args)]
struct QuantArgs {
    /// Latent dimension (number of token streams).
    #[arg(long, default_value_t = 32)]
    streams: usize,
    /// Levels per stream.
    #[arg(long, default_value_t = 4)]
    levels: usize,
    /// Seed of the toy projection.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl QuantArgs {
    fn codec(&self, input_dim: usize, mode: ModeArg) -> Result<Codec> {
        let mut cfg = PipelineConfig::new(SsqConfig::new(self.streams, self.levels)?, mode.into());
        cfg.compressor_seed = self.seed;
        Codec::new(input_dim, cfg)
    }
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "length")]
    mode: ModeArg,
    /// Boundary hazards, one per frame.
    #[arg(long, conflicts_with_all = ["alignment", "period"])]
    hazard: Option<PathBuf>,
    /// Alignment spans, `label<TAB>start<TAB>end` per line.
    #[arg(long, conflicts_with = "period")]
    alignment: Option<PathBuf>,
    /// Fixed chunk length.
    #[arg(long)]
    period: Option<usize>,
    #[command(flatten)]
    gaps: GapArgs,
    #[command(flatten)]
    quant: QuantArgs,
}

#[derive(Args)]
struct DurationModelArgs {
    /// Free means, one per token (D = 1 frame file).
    #[arg(long)]
    mu_free: Option<PathBuf>,
    /// Free mean shared by every token when no file is given.
    #[arg(long, default_value_t = 2.0)]
    mu_free_const: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    d_min: u32,
    #[arg(long, default_value_t = chunkcodec::duration::DEFAULT_LAMBDA)]
    lambda: f64,
}

impl DurationModelArgs {
    fn source(&self, num_tokens: usize) -> Result<DurationSource> {
        match &self.mu_free {
            Some(path) => {
                let frames = read_frames(path)?;
                if frames.dim() != 1 {
                    return Err(Error::InvalidInput(format!(
                        "free-mean file has D = {}, expected 1",
                        frames.dim()
                    )));
                }
                if frames.num_frames() != num_tokens {
                    return Err(Error::InvalidInput(format!(
                        "{} free means for {num_tokens} tokens",
                        frames.num_frames()
                    )));
                }
                let mu = frames.data().iter().map(|&v| v as f64).collect();
                Ok(DurationSource::Params(
                    DurationParams::new(mu, self.alpha)?
                        .with_d_min(self.d_min)?
                        .with_lambda(self.lambda)?,
                ))
            }
            None => Ok(DurationSource::Uniform {
                mu_free: self.mu_free_const,
                alpha: self.alpha,
                d_min: self.d_min,
            }),
        }
    }
}

#[derive(Args)]
struct RetrievalArgs {
    #[arg(long, requires = "index")]
    pool: Option<PathBuf>,
    #[arg(long, requires = "pool")]
    index: Option<PathBuf>,
    /// Replacement threshold in percent cosine similarity.
    #[arg(long, default_value_t = 95.0)]
    tau: f64,
    #[arg(long, default_value_t = 16)]
    n_probe: usize,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "length")]
    mode: ModeArg,
    /// Feature dimension of the output frames.
    #[arg(long)]
    feature_dim: usize,
    /// Overrides the transmitted utterance length.
    #[arg(long)]
    target_len: Option<u64>,
    #[arg(long, default_value_t = synth::BASE_FRAME_RATE_HZ)]
    base_rate: f32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    durations: DurationModelArgs,
    #[command(flatten)]
    retrieval: RetrievalArgs,
}

#[derive(Args)]
struct BoundaryArgs {
    #[arg(long)]
    hazard: PathBuf,
    #[command(flatten)]
    gaps: GapArgs,
    /// Write chunk ends, one per line.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DurationArgs {
    #[arg(long)]
    tokens: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "length")]
    mode: ModeArg,
    #[arg(long)]
    target_len: Option<u64>,
    #[command(flatten)]
    model: DurationModelArgs,
}

#[derive(Args)]
struct RadBuildArgs {
    #[arg(long)]
    pool: PathBuf,
    /// Sidecar id list, one id per line.
    #[arg(long)]
    ids: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    n_list: usize,
    /// Lists probed per query by default; capped at `--n-list`.
    #[arg(long, default_value_t = 16)]
    n_probe: usize,
    /// Subsample size for centroid training; defaults to the whole pool.
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long, default_value_t = chunkcodec::rad::DEFAULT_KMEANS_ITERATIONS)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RadApplyArgs {
    #[arg(long)]
    latents: PathBuf,
    #[arg(long)]
    pool: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 95.0)]
    tau: f64,
    #[arg(long)]
    n_probe: Option<usize>,
}

#[derive(Args)]
struct BitrateArgs {
    /// Tokens per second.
    #[arg(long, required_unless_present = "tokens")]
    rate: Option<f64>,
    /// Derive the rate from a token file carrying its frame count.
    #[arg(long, conflicts_with = "rate")]
    tokens: Option<PathBuf>,
    #[arg(long, default_value_t = synth::BASE_FRAME_RATE_HZ as f64)]
    base_rate: f64,
    #[arg(long, default_value_t = 32)]
    streams: u32,
    #[arg(long, default_value_t = 4)]
    levels: u32,
    #[arg(long, default_value_t = 1)]
    max_duration: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Periodic,
    NbDurations,
    ClusteredLatents,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(value_enum)]
    kind: SynthKind,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frame count (periodic).
    #[arg(long, default_value_t = 64)]
    frames: usize,
    /// Chunk period (periodic).
    #[arg(long, default_value_t = 4)]
    period: usize,
    /// Feature or latent dimension.
    #[arg(long, default_value_t = 32)]
    dim: usize,
    /// Sample or vector count.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 5.0)]
    mu: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 4)]
    clusters: usize,
    #[arg(long, default_value_t = 0.05)]
    spread: f64,
}

fn hazard_from_file(path: &PathBuf) -> Result<HazardSequence> {
    let frames = read_frames(path)?;
    if frames.dim() != 1 {
        return Err(Error::InvalidInput(format!(
            "hazard file has D = {}, expected 1",
            frames.dim()
        )));
    }
    HazardSequence::from_probs(&frames.data().iter().map(|&v| v as f64).collect::<Vec<_>>())
}

fn latents_of(frames: &FrameSequence) -> Vec<Vec<f64>> {
    frames.rows().map(|r| r.iter().map(|&v| v as f64).collect()).collect()
}

fn load_pool(pool: &PathBuf, ids: Option<&PathBuf>) -> Result<LatentPool> {
    let ids = match ids {
        Some(p) => Some(parse_ids(&fs::read_to_string(p)?)),
        None => None,
    };
    LatentPool::from_frames(&read_frames(pool)?, ids)
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

fn encode(args: EncodeArgs) -> Result<()> {
    let frames = read_frames(&args.input)?;
    let n = frames.num_frames();
    let source = if let Some(path) = &args.hazard {
        BoundarySource::Hazard {
            hazard: hazard_from_file(path)?,
            decode: args.gaps.config(),
        }
    } else if let Some(path) = &args.alignment {
        BoundarySource::Alignment(parse_alignment(&fs::read_to_string(path)?)?)
    } else if let Some(period) = args.period {
        if period == 0 {
            return Err(Error::InvalidInput("period must be positive".into()));
        }
        let mut ends: Vec<usize> = (period - 1..n).step_by(period).collect();
        if ends.last() != Some(&(n - 1)) {
            ends.push(n - 1);
        }
        BoundarySource::Provided(BoundarySet::new(ends, n)?)
    } else {
        return Err(Error::InvalidInput(
            "one of --hazard, --alignment or --period is required".into(),
        ));
    };
    let codec = args.quant.codec(frames.dim(), args.mode)?;
    let encoded = codec.encode(&frames, &source)?;
    write_tokens(&args.out, &encoded.tokens)?;
    let rates = encoded.mode_rates()?;
    println!("tokens {}", encoded.tokens.num_tokens());
    println!("frames {}", encoded.num_frames);
    println!("token_rate_hz {:.4}", encoded.token_rate_hz());
    println!("bitrate_bps {:.4}", rates.tokens_only_bps);
    println!("bitrate_with_length_bps {:.4}", rates.utterance_length_bps);
    println!("bitrate_with_durations_bps {:.4}", rates.durations_bps);
    Ok(())
}

fn decode(args: DecodeArgs) -> Result<()> {
    let tokens = read_tokens(&args.input)?;
    let mut cfg = PipelineConfig::new(SsqConfig::new(tokens.num_streams(), tokens.levels())?, args.mode.into());
    cfg.compressor_seed = args.seed;
    let codec = Codec::new(args.feature_dim, cfg)?;
    let source = args.durations.source(tokens.num_tokens())?;
    let retrieval = match (&args.retrieval.pool, &args.retrieval.index) {
        (Some(pool), Some(index)) => Some((
            IvfIndex::read(index)?,
            load_pool(pool, None)?,
            RadConfig::new(args.retrieval.tau, args.retrieval.n_probe)?,
        )),
        _ => None,
    };
    let opts = DecodeOptions {
        durations: Some(&source),
        target_len: args.target_len,
        retrieval: retrieval.as_ref().map(|(i, p, c)| (i, p, *c)),
        continuous: None,
        base_rate_hz: args.base_rate,
    };
    let decoded = codec.decode(&tokens, &opts)?;
    write_frames(&args.out, &decoded.frames)?;
    println!("frames {}", decoded.frames.num_frames());
    println!("durations {}", join(decoded.durations.as_slice()));
    if let Some(mask) = decoded.replaced {
        println!("replaced {}", mask.iter().filter(|&&r| r).count());
    }
    Ok(())
}

fn boundaries(args: BoundaryArgs) -> Result<()> {
    let hazard = hazard_from_file(&args.hazard)?;
    let b = decode_boundaries(&hazard, &args.gaps.config())?;
    let d = boundaries_to_durations(&b, hazard.len())?;
    println!("ends {}", join(b.ends()));
    println!("durations {}", join(d.as_slice()));
    if let Some(out) = args.out {
        fs::write(out, b.ends().iter().map(|e| format!("{e}\n")).collect::<String>())?;
    }
    Ok(())
}

fn durations(args: DurationArgs) -> Result<()> {
    let tokens = read_tokens(&args.tokens)?;
    let n = tokens.num_tokens();
    let params = match args.model.source(n)? {
        DurationSource::Params(p) => p,
        DurationSource::Uniform { mu_free, alpha, d_min } => DurationParams::new(vec![mu_free; n], alpha)?
            .with_d_min(d_min)?
            .with_lambda(args.model.lambda)?,
    };
    if let Some(observed) = tokens.durations() {
        let total = tokens.total_frames().map_or(observed.total(), u64::from);
        let loss = duration_nll(&params, observed.as_slice(), total)?;
        println!("observed_nll {:.6}", loss.value);
    }
    let decoded = match args.mode {
        ModeArg::Tokens => decode_free(&params)?,
        ModeArg::Length | ModeArg::Durations => {
            let total = args
                .target_len
                .or(tokens.total_frames().map(u64::from))
                .ok_or_else(|| Error::ModeMismatch("budget decoding needs --target-len or a stored length".into()))?;
            decode_budget(&params, total)?
        }
    };
    let total = decoded.total();
    println!("durations {}", join(decoded.as_slice()));
    println!("total {total}");
    let total = u32::try_from(total).map_err(|_| Error::InvalidInput("total frame count exceeds u32".into()))?;
    write_tokens(&args.out, &tokens.with_durations(decoded)?.with_total_frames(total))?;
    Ok(())
}

fn rad_build(args: RadBuildArgs) -> Result<()> {
    let pool = load_pool(&args.pool, args.ids.as_ref())?;
    let params = IvfParams {
        n_list: args.n_list,
        train_size: args.train_size.unwrap_or(pool.len()),
        seed: args.seed,
        iterations: args.iterations,
        n_probe: args.n_probe.min(args.n_list),
    };
    let index = build_index(&pool, params)?;
    index.write(&args.out)?;
    let sizes: Vec<usize> = (0..index.n_list()).map(|c| index.list(c).len()).collect();
    println!("vectors {}", pool.len());
    println!("lists {}", index.n_list());
    println!("largest_list {}", sizes.iter().max().unwrap_or(&0));
    Ok(())
}

fn rad_apply_cmd(args: RadApplyArgs) -> Result<()> {
    let latents = read_frames(&args.latents)?;
    let pool = load_pool(&args.pool, None)?;
    let index = IvfIndex::read(&args.index)?;
    let cfg = RadConfig::new(args.tau, args.n_probe.unwrap_or(index.params().n_probe))?;
    let out = rad_apply(&latents_of(&latents), &index, &pool, &cfg)?;
    let rows: Vec<Vec<f32>> = out
        .latents
        .iter()
        .map(|r| r.iter().map(|&v| v as f32).collect())
        .collect();
    write_frames(&args.out, &FrameSequence::from_rows(&rows, latents.frame_rate_hz())?)?;
    println!("replaced {} of {}", out.replacements(), out.replaced.len());
    println!(
        "mask {}",
        out.replaced
            .iter()
            .map(|&r| if r { '1' } else { '0' })
            .collect::<String>()
    );
    Ok(())
}

fn bitrate(args: BitrateArgs) -> Result<()> {
    let rate = match (&args.tokens, args.rate) {
        (Some(path), _) => {
            let tokens = read_tokens(path)?;
            let frames = tokens
                .total_frames()
                .map(u64::from)
                .or(tokens.durations().map(|d| d.total()))
                .ok_or_else(|| Error::ModeMismatch("token file carries no frame count".into()))?;
            tokens.num_tokens() as f64 / (frames as f64 / args.base_rate)
        }
        (None, Some(rate)) => rate,
        (None, None) => unreachable!("clap requires one of --rate or --tokens"),
    };
    let r = compute_rates(rate, args.streams, args.levels, args.max_duration)?;
    println!("token_rate_hz {:.4}", r.frame_rate_hz);
    println!("bits_per_token {}", r.bits_per_token);
    println!("bitrate_bps {:.4}", r.bitrate_bps);
    println!("bitrate_kbps {:.4}", r.bitrate_kbps());
    println!("duration_overhead_bps {:.4}", r.duration_overhead_bps);
    Ok(())
}

fn synth_cmd(args: SynthArgs) -> Result<()> {
    match args.kind {
        SynthKind::Periodic => {
            let c = synth::periodic(args.frames, args.period, args.dim, args.seed)?;
            write_frames(&args.out, &c.frames)?;
            let align = args.out.with_extension("tsv");
            fs::write(&align, chunkcodec::chunking::format_alignment(&c.alignment))?;
            println!("chunks {}", c.boundaries.len());
            println!("alignment {}", align.display());
        }
        SynthKind::NbDurations => {
            let xs = synth::nb_durations(args.mu, args.alpha, args.count, args.seed)?;
            let col: Vec<f32> = xs.iter().map(|&x| x as f32).collect();
            write_frames(&args.out, &FrameSequence::from_column(&col, synth::BASE_FRAME_RATE_HZ)?)?;
            let mean = xs.iter().sum::<u64>() as f64 / xs.len().max(1) as f64;
            println!("samples {}", xs.len());
            println!("mean {mean:.4}");
        }
        SynthKind::ClusteredLatents => {
            let c = synth::clustered_latents(args.clusters, args.count, args.dim, args.spread, args.seed)?;
            write_frames(&args.out, &c.pool.to_frames(synth::BASE_FRAME_RATE_HZ)?)?;
            println!("vectors {}", c.pool.len());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Boundaries(a) => boundaries(a),
        Command::Durations(a) => durations(a),
        Command::RadBuild(a) => rad_build(a),
        Command::RadApply(a) => rad_apply_cmd(a),
        Command::Bitrate(a) => bitrate(a),
        Command::Synth(a) => synth_cmd(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_format() { 3 } else { 2 })
        }
    }
}
