//! Token bitrates for 32 streams of 4 levels at a few average token rates.

use chunkcodec::model::compute_rates;

fn main() -> chunkcodec::Result<()> {
    println!("{:>8} {:>10} {:>10} {:>14}", "rate", "bps", "kbps", "+durations");
    for rate in [14.4, 17.5, 9.0, 6.2, 50.0] {
        // durations up to 16 frames need a 4-bit code per token
        let r = compute_rates(rate, 32, 4, 16)?;
        println!(
            "{:>8.1} {:>10.1} {:>10.4} {:>14.1}",
            rate,
            r.bitrate_bps,
            r.bitrate_kbps(),
            r.bitrate_with_durations_bps()
        );
    }
    Ok(())
}
