//! Fit per-frame hazards to planted chunks, then decode boundaries under
//! different gap constraints.

use chunkcodec::hazard::{
    decode_boundaries, fit_hazard_logits, next_boundary_distribution, BoundaryDecodeConfig, BoundaryTargets, DecodeMode,
};
use chunkcodec::synth;

fn main() -> chunkcodec::Result<()> {
    let planted = synth::periodic(32, 4, 1, 0)?.boundaries;
    let fit = fit_hazard_logits(&BoundaryTargets::from_boundaries(&planted), 32, 200, 1.0)?;
    println!("fitted in {} steps, nll {:.4}", fit.steps, fit.final_nll);

    let next = next_boundary_distribution(&fit.hazard, 0, 8)?;
    let shown: Vec<String> = next.probs.iter().map(|p| format!("{p:.3}")).collect();
    println!("P(next boundary in k frames | t=0): {}", shown.join(" "));

    let configs = [
        ("greedy", BoundaryDecodeConfig::default()),
        ("min_gap 6", BoundaryDecodeConfig::greedy(0.5, 6, None)),
        ("max_gap 3", BoundaryDecodeConfig::greedy(0.5, 1, Some(3))),
        (
            "sampled",
            BoundaryDecodeConfig {
                mode: DecodeMode::Sample { seed: 7 },
                ..Default::default()
            },
        ),
    ];
    for (name, cfg) in configs {
        let b = decode_boundaries(&fit.hazard, &cfg)?;
        println!("{name:>10}: {:?}", b.ends());
    }
    Ok(())
}
