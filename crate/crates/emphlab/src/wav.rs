//! Minimal strict WAV I/O: RIFF/WAVE, PCM format tag 1, 16-bit mono,
//! little-endian.
//!
//! The decoder treats its input as untrusted: every offset is bounds
//! checked and inconsistent headers are rejected rather than repaired, so
//! it never panics regardless of input bytes.

use crate::error::{Error, Result};

/// Full-scale divisor mapping 16-bit PCM to amplitudes in [-1, 1).
const PCM_SCALE: f64 = 32768.0;

/// Mono audio: sample rate plus amplitudes in [-1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct WavAudio {
    pub sample_rate_hz: u32,
    pub samples: Vec<f64>,
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedWav(msg.into())
}

fn read_u16(bytes: &[u8], offset: usize) -> Result<u16> {
    offset
        .checked_add(2)
        .and_then(|end| bytes.get(offset..end))
        .map(|s| u16::from_le_bytes([s[0], s[1]]))
        .ok_or_else(|| malformed("truncated field"))
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    offset
        .checked_add(4)
        .and_then(|end| bytes.get(offset..end))
        .map(|s| u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
        .ok_or_else(|| malformed("truncated field"))
}

/// Parse WAV bytes into mono samples.
///
/// Accepts exactly one `fmt ` chunk (PCM, 16-bit, mono, consistent
/// derived fields) followed by exactly one `data` chunk; other chunks are
/// skipped. Trailing bytes beyond the declared RIFF size are rejected
/// only when the declared size overruns the buffer.
pub fn decode_wav(bytes: &[u8]) -> Result<WavAudio> {
    if bytes.len() < 12 {
        return Err(malformed("shorter than a RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(malformed("missing RIFF tag"));
    }
    let riff_size = read_u32(bytes, 4)? as usize;
    let end = riff_size
        .checked_add(8)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| malformed("declared RIFF size overruns the data"))?;
    if end < 12 {
        return Err(malformed("declared RIFF size too small for a WAVE tag"));
    }
    let bytes = &bytes[..end];
    if &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing WAVE tag"));
    }

    let mut offset = 12usize;
    let mut format: Option<(u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while offset < bytes.len() {
        if offset.checked_add(8).is_none_or(|e| e > bytes.len()) {
            return Err(malformed("truncated chunk header"));
        }
        let chunk_id = &bytes[offset..offset + 4];
        let chunk_size = read_u32(bytes, offset + 4)? as usize;
        let body_start = offset + 8;
        let body_end = body_start
            .checked_add(chunk_size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| malformed("chunk size overruns the data"))?;
        let body = &bytes[body_start..body_end];
        match chunk_id {
            b"fmt " => {
                if format.is_some() {
                    return Err(malformed("multiple fmt chunks"));
                }
                if chunk_size < 16 {
                    return Err(malformed("fmt chunk shorter than 16 bytes"));
                }
                let audio_format = read_u16(body, 0)?;
                let channels = read_u16(body, 2)?;
                let sample_rate = read_u32(body, 4)?;
                let byte_rate = read_u32(body, 8)?;
                let block_align = read_u16(body, 12)?;
                let bits_per_sample = read_u16(body, 14)?;
                if audio_format != 1 {
                    return Err(malformed(format!(
                        "unsupported format tag {audio_format} (only PCM)"
                    )));
                }
                if channels != 1 {
                    return Err(malformed(format!(
                        "unsupported channel count {channels} (only mono)"
                    )));
                }
                if bits_per_sample != 16 {
                    return Err(malformed(format!(
                        "unsupported bit depth {bits_per_sample} (only 16)"
                    )));
                }
                if sample_rate == 0 {
                    return Err(malformed("zero sample rate"));
                }
                if block_align != 2 || byte_rate != sample_rate.saturating_mul(2) {
                    return Err(malformed("inconsistent fmt derived fields"));
                }
                format = Some((sample_rate, bits_per_sample));
            }
            b"data" => {
                if data.is_some() {
                    return Err(malformed("multiple data chunks"));
                }
                if format.is_none() {
                    return Err(malformed("data chunk before fmt chunk"));
                }
                data = Some(body);
            }
            _ => {}
        }
        // Chunks are word aligned; odd sizes carry one pad byte.
        offset = body_end
            .checked_add(chunk_size % 2)
            .ok_or_else(|| malformed("chunk padding overflows"))?;
    }

    let (sample_rate_hz, _) = format.ok_or_else(|| malformed("missing fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("missing data chunk"))?;
    if data.len() % 2 != 0 {
        return Err(malformed("data chunk has a partial sample"));
    }
    let samples = data
        .chunks_exact(2)
        .map(|b| f64::from(i16::from_le_bytes([b[0], b[1]])) / PCM_SCALE)
        .collect();
    Ok(WavAudio {
        sample_rate_hz,
        samples,
    })
}

/// Serialize mono audio as canonical 16-bit PCM WAV bytes. Amplitudes are
/// rounded half away from zero and saturated at full scale.
pub fn encode_wav(audio: &WavAudio) -> Result<Vec<u8>> {
    if audio.sample_rate_hz == 0 {
        return Err(Error::invalid("sample_rate_hz must be positive"));
    }
    let byte_rate = audio
        .sample_rate_hz
        .checked_mul(2)
        .ok_or_else(|| Error::invalid("sample rate too large"))?;
    let n = audio.samples.len();
    let data_size = u32::try_from(n * 2)
        .map_err(|_| Error::invalid("too many samples for a WAV file"))?;
    let riff_size = data_size
        .checked_add(36)
        .ok_or_else(|| Error::invalid("too many samples for a WAV file"))?;

    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&riff_size.to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&audio.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_size.to_le_bytes());
    for &x in &audio.samples {
        if !x.is_finite() {
            return Err(Error::invalid("non-finite sample"));
        }
        let level = (x * PCM_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&level.to_le_bytes());
    }
    Ok(out)
}
