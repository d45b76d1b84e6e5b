//! Encode synthetic frames with hazard-driven chunking and decode them under
//! each side-information mode.

use chunkcodec::duration::DurationParams;
use chunkcodec::hazard::{BoundaryDecodeConfig, HazardSequence};
use chunkcodec::pipeline::{BoundarySource, Codec, DecodeOptions, DurationSource, PipelineConfig, SideInfo};
use chunkcodec::ssq::SsqConfig;
use chunkcodec::synth;

fn main() -> chunkcodec::Result<()> {
    let frames = synth::gaussian_frames(250, 24, 3)?;
    let mut rng = synth::rng(4);
    let source = BoundarySource::Hazard {
        hazard: HazardSequence::from_probs(&synth::random_hazards(250, &mut rng))?,
        decode: BoundaryDecodeConfig::greedy(0.7, 2, Some(8)),
    };

    for side in [SideInfo::Durations, SideInfo::UtteranceLength, SideInfo::TokensOnly] {
        let codec = Codec::new(24, PipelineConfig::new(SsqConfig::new(16, 4)?, side))?;
        let enc = codec.encode(&frames, &source)?;
        let n = enc.tokens.num_tokens();
        let rates = enc.mode_rates()?;
        let model = DurationSource::Params(DurationParams::new(vec![2.0; n], 0.5)?.with_d_min(2)?);
        let dec = codec.decode(
            &enc.tokens,
            &DecodeOptions {
                durations: Some(&model),
                ..Default::default()
            },
        )?;
        let bps = match side {
            SideInfo::Durations => rates.durations_bps,
            SideInfo::UtteranceLength => rates.utterance_length_bps,
            SideInfo::TokensOnly => rates.tokens_only_bps,
        };
        println!(
            "{side:?}: {n} tokens at {:.1} Hz, {bps:.0} bps, decoded {} of {} frames",
            enc.token_rate_hz(),
            dec.frames.num_frames(),
            frames.num_frames()
        );
    }
    Ok(())
}
