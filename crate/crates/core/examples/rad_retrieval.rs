//! Build an IVF index over continuous latents and snap quantized latents back
//! onto the pool.

use chunkcodec::rad::{build_index, rad_apply, IvfParams, RadConfig};
use chunkcodec::ssq::{dequantize, quantize, SsqConfig};
use chunkcodec::synth;

fn main() -> chunkcodec::Result<()> {
    let data = synth::clustered_latents(8, 2000, 16, 0.15, 1)?;
    let index = build_index(&data.pool, IvfParams::new(32, 1000, 1))?;
    let sizes: Vec<usize> = (0..index.n_list()).map(|c| index.list(c).len()).collect();
    println!(
        "{} vectors in {} lists (largest {})",
        index.num_vectors(),
        index.n_list(),
        sizes.iter().max().unwrap()
    );

    let cfg = SsqConfig::new(16, 4)?;
    let queries: Vec<Vec<f64>> = (0..200)
        .map(|i| dequantize(&quantize(&data.pool.vector_f64(i), &cfg)?, &cfg))
        .collect::<chunkcodec::Result<_>>()?;
    for tau in [90.0, 95.0, 99.0, 99.9] {
        let out = rad_apply(&queries, &index, &data.pool, &RadConfig::new(tau, 4)?)?;
        let exact = out
            .hits
            .iter()
            .enumerate()
            .filter(|(i, h)| out.replaced[*i] && h.is_some_and(|h| h.index == *i))
            .count();
        println!(
            "tau {tau:>5}: {:>3} replaced, {exact:>3} by their own source latent",
            out.replacements()
        );
    }
    Ok(())
}
