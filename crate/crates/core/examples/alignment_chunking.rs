//! Turn a character alignment into chunk boundaries and pool frames.

use chunkcodec::chunking::{alignment_to_targets, downsample, parse_alignment, upsample};
use chunkcodec::model::boundaries_to_durations;
use chunkcodec::FrameSequence;

const ALIGNMENT: &str = "SIL\t0\t4
h\t5\t7
e\t8\t9
SIL\t10\t11
y\t12\t15
SIL\t16\t19
";

fn main() -> chunkcodec::Result<()> {
    let spans = parse_alignment(ALIGNMENT)?;
    let targets = alignment_to_targets(&spans)?;
    let labels: Vec<String> = targets.labels.iter().map(ToString::to_string).collect();
    println!("chunks {:?} labelled {labels:?}", targets.boundaries.ends());

    let rows: Vec<Vec<f32>> = (0..20).map(|t| vec![t as f32, (t * t) as f32]).collect();
    let frames = FrameSequence::from_rows(&rows, 50.0)?;
    let tokens = downsample(&frames, &targets.boundaries)?;
    let durations = boundaries_to_durations(&targets.boundaries, frames.num_frames())?;
    println!(
        "{} frames -> {} tokens, durations {:?}",
        frames.num_frames(),
        tokens.num_frames(),
        durations.as_slice()
    );

    let back = upsample(&tokens, &durations)?;
    for (t, row) in back.rows().enumerate().step_by(3) {
        println!("frame {t:>2}: {row:?}");
    }
    Ok(())
}
