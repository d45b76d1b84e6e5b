//! Dynamic downsampling, repetition upsampling and alignment-derived targets.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{BoundarySet, DurationVector, FrameSequence};

/// Keeps the last frame of every chunk. The result carries the source's base
/// frame rate.
pub fn downsample(frames: &FrameSequence, boundaries: &BoundarySet) -> Result<FrameSequence> {
    if boundaries.num_frames() != frames.num_frames() {
        return Err(Error::InvalidBoundaries(format!(
            "boundaries cover {} frames, sequence has {}",
            boundaries.num_frames(),
            frames.num_frames()
        )));
    }
    let mut data = Vec::with_capacity(boundaries.len() * frames.dim());
    for &e in boundaries.ends() {
        data.extend_from_slice(frames.row(e));
    }
    FrameSequence::new(boundaries.len(), frames.dim(), frames.frame_rate_hz(), data)
}

/// Repeats row `i` of `tokens` `durations[i]` times.
pub fn upsample(tokens: &FrameSequence, durations: &DurationVector) -> Result<FrameSequence> {
    if durations.len() != tokens.num_frames() {
        return Err(Error::InvalidDurations(format!(
            "{} durations for {} token rows",
            durations.len(),
            tokens.num_frames()
        )));
    }
    let total = durations.total() as usize;
    let mut data = Vec::with_capacity(total * tokens.dim());
    for (row, &d) in tokens.rows().zip(durations.as_slice()) {
        for _ in 0..d {
            data.extend_from_slice(row);
        }
    }
    FrameSequence::new(total, tokens.dim(), tokens.frame_rate_hz(), data)
}

/// Label attached to an aligned span.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SpanLabel {
    Silence,
    Char(String),
}

impl SpanLabel {
    /// Text spelling of the silence marker.
    pub const SILENCE: &'static str = "SIL";

    pub fn is_silence(&self) -> bool {
        matches!(self, SpanLabel::Silence)
    }
}

impl fmt::Display for SpanLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpanLabel::Silence => f.write_str(Self::SILENCE),
            SpanLabel::Char(s) => f.write_str(s),
        }
    }
}

impl From<&str> for SpanLabel {
    fn from(s: &str) -> Self {
        if s == Self::SILENCE {
            SpanLabel::Silence
        } else {
            SpanLabel::Char(s.to_string())
        }
    }
}

/// One aligned span with inclusive frame bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentSpan {
    pub label: SpanLabel,
    pub start: usize,
    pub end: usize,
}

impl AlignmentSpan {
    pub fn new(label: impl Into<SpanLabel>, start: usize, end: usize) -> Self {
        Self {
            label: label.into(),
            start,
            end,
        }
    }

    pub fn silence(start: usize, end: usize) -> Self {
        Self::new(SpanLabel::Silence, start, end)
    }
}

/// Chunk boundaries and labels derived from an alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentTargets {
    pub boundaries: BoundarySet,
    pub labels: Vec<SpanLabel>,
    /// The alignment held only silence and collapsed into one silent chunk.
    pub all_silence: bool,
}

/// Merges silence into the following non-silence span; utterance-final
/// silence joins the preceding chunk instead.
pub fn alignment_to_targets(spans: &[AlignmentSpan]) -> Result<AlignmentTargets> {
    let mut next = 0;
    for (i, span) in spans.iter().enumerate() {
        if span.start != next || span.end < span.start {
            return Err(Error::InvalidAlignment(format!(
                "span {i} covers [{}, {}], expected it to start at {next}",
                span.start, span.end
            )));
        }
        next = span.end + 1;
    }
    if spans.is_empty() {
        return Err(Error::InvalidAlignment("no spans".into()));
    }
    let num_frames = next;

    let mut ends = Vec::new();
    let mut labels = Vec::new();
    for span in spans {
        match &span.label {
            // the pending silence is absorbed by whichever chunk closes next
            SpanLabel::Silence => {}
            label => {
                ends.push(span.end);
                labels.push(label.clone());
            }
        }
    }
    if ends.is_empty() {
        return Ok(AlignmentTargets {
            boundaries: BoundarySet::new(vec![num_frames - 1], num_frames)?,
            labels: vec![SpanLabel::Silence],
            all_silence: true,
        });
    }
    // trailing silence extends the last chunk
    *ends.last_mut().unwrap() = num_frames - 1;
    Ok(AlignmentTargets {
        boundaries: BoundarySet::new(ends, num_frames)?,
        labels,
        all_silence: false,
    })
}

/// Parses `label<TAB>start<TAB>end` lines. Blank lines are skipped.
pub fn parse_alignment(text: &str) -> Result<Vec<AlignmentSpan>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::InvalidAlignment(format!(
                    "line {}: expected 3 tab-separated fields, got {}",
                    n + 1,
                    fields.len()
                )));
            }
            let num = |s: &str| {
                usize::from_str(s.trim())
                    .map_err(|e| Error::InvalidAlignment(format!("line {}: bad frame index {s:?}: {e}", n + 1)))
            };
            Ok(AlignmentSpan::new(fields[0], num(fields[1])?, num(fields[2])?))
        })
        .collect()
}

pub fn format_alignment(spans: &[AlignmentSpan]) -> String {
    spans
        .iter()
        .map(|s| format!("{}\t{}\t{}\n", s.label, s.start, s.end))
        .collect()
}
