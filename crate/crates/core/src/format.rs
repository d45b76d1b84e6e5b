//! Binary file formats for frame and token sequences.
//!
//! All integers and floats are little-endian with no padding.
//!
//! ```text
//! DYCF: "DYCF" | u32 T | u32 D | f32 frame_rate | T*D f32 (row-major)
//! DYCT: "DYCT" | u32 N | u16 L | u16 K | u8 flags | N*L u8 indices
//!       | [N u32 durations if flags&1] | [u32 total_frames if flags&2]
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{DurationVector, FrameSequence, TokenSequence};

pub const FRAME_MAGIC: &[u8; 4] = b"DYCF";
pub const TOKEN_MAGIC: &[u8; 4] = b"DYCT";

const FLAG_DURATIONS: u8 = 0b01;
const FLAG_TOTAL_FRAMES: u8 = 0b10;

/// Little-endian cursor that reports the byte offset of every failure.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn offset(&self) -> usize {
        self.pos
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::format(
                self.pos,
                format!(
                    "truncated {what}: need {n} bytes, {} remain",
                    self.bytes.len() - self.pos
                ),
            )),
        }
    }

    pub(crate) fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got != magic {
            return Err(Error::format(
                0,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(magic)
                ),
            ));
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub(crate) fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn f32_vec(&mut self, count: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = self.take(count.saturating_mul(4), what)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn u32_vec(&mut self, count: usize, what: &str) -> Result<Vec<u32>> {
        let bytes = self.take(count.saturating_mul(4), what)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(
                self.pos,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize, what: &str) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::InvalidInput(format!("{what} {v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn encode_frames(frames: &FrameSequence) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + frames.data().len() * 4);
    out.extend_from_slice(FRAME_MAGIC);
    put_u32(&mut out, frames.num_frames(), "frame count")?;
    put_u32(&mut out, frames.dim(), "dimension")?;
    out.extend_from_slice(&frames.frame_rate_hz().to_le_bytes());
    for v in frames.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_frames(bytes: &[u8]) -> Result<FrameSequence> {
    if bytes.is_empty() {
        return Err(Error::format(0, "empty frame file"));
    }
    let mut r = Reader::new(bytes);
    r.magic(FRAME_MAGIC)?;
    let num_frames = r.u32("frame count")? as usize;
    let dim = r.u32("dimension")? as usize;
    let rate_at = r.offset();
    let rate = r.f32("frame rate")?;
    if num_frames == 0 || dim == 0 {
        return Err(Error::format(4, format!("empty payload ({num_frames}x{dim})")));
    }
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::format(rate_at, format!("frame rate {rate} is not positive")));
    }
    let data_at = r.offset();
    let count = num_frames
        .checked_mul(dim)
        .ok_or_else(|| Error::format(4, "frame payload size overflows"))?;
    let data = r.f32_vec(count, "frame payload")?;
    r.finish()?;
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(data_at + 4 * i, "non-finite frame value"));
    }
    FrameSequence::new(num_frames, dim, rate, data).map_err(|e| Error::format(0, e.to_string()))
}

pub fn encode_tokens(tokens: &TokenSequence) -> Result<Vec<u8>> {
    let n = tokens.num_tokens();
    let mut out = Vec::with_capacity(13 + tokens.indices().len() + 4 * n + 4);
    out.extend_from_slice(TOKEN_MAGIC);
    put_u32(&mut out, n, "token count")?;
    out.extend_from_slice(&(tokens.num_streams() as u16).to_le_bytes());
    out.extend_from_slice(&(tokens.levels() as u16).to_le_bytes());
    let mut flags = 0u8;
    if tokens.durations().is_some() {
        flags |= FLAG_DURATIONS;
    }
    if tokens.total_frames().is_some() {
        flags |= FLAG_TOTAL_FRAMES;
    }
    out.push(flags);
    out.extend_from_slice(tokens.indices());
    if let Some(d) = tokens.durations() {
        for v in d.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(t) = tokens.total_frames() {
        out.extend_from_slice(&t.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_tokens(bytes: &[u8]) -> Result<TokenSequence> {
    if bytes.is_empty() {
        return Err(Error::format(0, "empty token file"));
    }
    let mut r = Reader::new(bytes);
    r.magic(TOKEN_MAGIC)?;
    let n = r.u32("token count")? as usize;
    let streams = r.u16("stream count")?;
    let levels_at = r.offset();
    let levels = r.u16("levels per stream")?;
    let flags_at = r.offset();
    let flags = r.u8("flags")?;
    if n == 0 || streams == 0 {
        return Err(Error::format(
            4,
            format!("empty payload ({n} tokens x {streams} streams)"),
        ));
    }
    if !(2..=256).contains(&levels) {
        return Err(Error::format(
            levels_at,
            format!("levels per stream {levels} outside 2..=256"),
        ));
    }
    if flags & !(FLAG_DURATIONS | FLAG_TOTAL_FRAMES) != 0 {
        return Err(Error::format(flags_at, format!("unknown flag bits {flags:#04x}")));
    }
    let indices_at = r.offset();
    let count = n
        .checked_mul(streams as usize)
        .ok_or_else(|| Error::format(4, "token payload size overflows"))?;
    let indices = r.take(count, "token indices")?.to_vec();
    if let Some(i) = indices.iter().position(|&v| v as u16 >= levels) {
        return Err(Error::format(
            indices_at + i,
            format!("token index {} out of range for {levels} levels", indices[i]),
        ));
    }
    let mut tokens =
        TokenSequence::new(streams, levels, indices).map_err(|e| Error::format(indices_at, e.to_string()))?;
    if flags & FLAG_DURATIONS != 0 {
        let at = r.offset();
        let durations = r.u32_vec(n, "durations")?;
        if let Some(i) = durations.iter().position(|&d| d == 0) {
            return Err(Error::format(at + 4 * i, "zero duration"));
        }
        let durations = DurationVector::new(durations).map_err(|e| Error::format(at, e.to_string()))?;
        tokens = tokens
            .with_durations(durations)
            .map_err(|e| Error::format(at, e.to_string()))?;
    }
    if flags & FLAG_TOTAL_FRAMES != 0 {
        tokens = tokens.with_total_frames(r.u32("total frames")?);
    }
    r.finish()?;
    Ok(tokens)
}

pub fn write_frames(path: impl AsRef<Path>, frames: &FrameSequence) -> Result<()> {
    fs::write(path, encode_frames(frames)?)?;
    Ok(())
}

pub fn read_frames(path: impl AsRef<Path>) -> Result<FrameSequence> {
    decode_frames(&fs::read(path)?)
}

pub fn write_tokens(path: impl AsRef<Path>, tokens: &TokenSequence) -> Result<()> {
    fs::write(path, encode_tokens(tokens)?)?;
    Ok(())
}

pub fn read_tokens(path: impl AsRef<Path>) -> Result<TokenSequence> {
    decode_tokens(&fs::read(path)?)
}
