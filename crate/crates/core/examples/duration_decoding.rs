//! Fit negative-binomial durations and decode them with and without a
//! known utterance length.

use chunkcodec::duration::{decode_budget, decode_free, duration_nll, fit_duration_params, DurationParams};
use chunkcodec::synth;

fn main() -> chunkcodec::Result<()> {
    // two token classes with different typical lengths, d_min = 2
    let short: Vec<u32> = synth::nb_durations(1.5, 0.3, 5000, 1)?
        .iter()
        .map(|&y| y as u32 + 2)
        .collect();
    let long: Vec<u32> = synth::nb_durations(6.0, 0.3, 5000, 2)?
        .iter()
        .map(|&y| y as u32 + 2)
        .collect();
    let fit = fit_duration_params(&[short, long], 2, 300, 0.5)?;
    println!(
        "free means {:.3?}, alpha {:.3} (true 0.3), nll {:.4}",
        fit.params.mu_free, fit.params.alpha, fit.final_nll
    );

    let params = DurationParams::new(vec![1.5, 6.0, 1.5, 6.0, 2.5], fit.params.alpha)?.with_d_min(2)?;
    println!("free decode:        {:?}", decode_free(&params)?.as_slice());
    for total in [20, 27, 40] {
        let d = decode_budget(&params, total)?;
        println!("budget {total:>3} frames: {:?}", d.as_slice());
    }

    let loss = duration_nll(&params.clone().with_lambda(0.05)?, &[3, 8, 4, 9, 4], 28)?;
    println!("nll of [3 8 4 9 4] in 28 frames: {:.4}", loss.value);
    Ok(())
}
