//! Scalar spherical quantization: codes, the implicit codebook and the
//! entropy regularizer.

use chunkcodec::ssq::{dequantize, entropy_loss, enumerate_codebook, quantize, soft_quantize, SsqConfig};
use chunkcodec::synth;

fn main() -> chunkcodec::Result<()> {
    let cfg = SsqConfig::new(4, 4)?;
    println!("levels {:.3?}, {} bits per token", cfg.grid(), cfg.bits_per_token());

    let mut rng = synth::rng(5);
    let z = synth::random_unit(4, &mut rng)?;
    let idx = quantize(&z, &cfg)?;
    let e = dequantize(&idx, &cfg)?;
    println!("z {z:.3?} -> {idx:?} -> {e:.3?}");

    // K = 2 is sign quantization
    let bsq = SsqConfig::new(4, 2)?;
    println!("binary code {:?}", quantize(&z, &bsq)?);

    for (dim, levels) in [(2, 4), (3, 3), (3, 4)] {
        let book = enumerate_codebook(&SsqConfig::new(dim, levels)?)?;
        println!(
            "L={dim} K={levels}: {} tuples, {} distinct directions, {} collisions, {} degenerate",
            book.len(),
            book.distinct_embeddings(),
            book.collisions,
            book.degenerate
        );
    }

    let batch: Vec<_> = (0..64)
        .map(|_| soft_quantize(&synth::random_unit(4, &mut rng).unwrap(), &cfg))
        .collect::<chunkcodec::Result<_>>()?;
    println!(
        "entropy regularizer on 64 random latents: {:.4}",
        entropy_loss(&batch, &cfg)?.value
    );
    Ok(())
}
