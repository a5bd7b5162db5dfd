//! Single-channel signal files: a small CSV form and 16-bit PCM WAV.
//!
//! The CSV form is one header line followed by one sample per line:
//!
//! ```text
//! # sirec-signal version=1 sample_rate_hz=10000
//! 0.00000000e0
//! 1.23456789e-1
//! ```

use std::io::{BufRead, BufReader, Read, Write};

use crate::dsp::SampledSignal;
use crate::error::{Error, Result};

const MAGIC: &str = "# sirec-signal";

pub fn write_signal_csv<W: Write>(signal: &SampledSignal, mut out: W) -> Result<()> {
    writeln!(out, "{MAGIC} version=1 sample_rate_hz={}", signal.sample_rate_hz)?;
    for v in &signal.samples {
        writeln!(out, "{v:.8e}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads the CSV form. Files without the header line are accepted when
/// `default_rate` is given.
pub fn read_signal_csv<R: Read>(input: R, default_rate: Option<f64>) -> Result<SampledSignal> {
    let mut rate = default_rate;
    let mut samples = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let lineno = i as u64 + 1;
        let trimmed = line.trim();
        if i == 0 {
            if let Some(rest) = trimmed.strip_prefix(MAGIC) {
                for token in rest.split_whitespace() {
                    match token.split_once('=') {
                        Some(("version", "1")) => {}
                        Some(("version", v)) => {
                            return Err(Error::Version {
                                found: v.to_string(),
                                supported: 1,
                            })
                        }
                        Some(("sample_rate_hz", v)) => {
                            rate = Some(v.parse().map_err(|_| Error::Schema {
                                line: 1,
                                column: 1,
                                message: format!("bad sample rate `{v}`"),
                            })?)
                        }
                        _ => {
                            return Err(Error::Schema {
                                line: 1,
                                column: 1,
                                message: format!("unexpected header token `{token}`"),
                            })
                        }
                    }
                }
                continue;
            }
        }
        if trimmed.is_empty() {
            continue;
        }
        // Accept a single-column CSV with an optional trailing comma.
        let field = trimmed.trim_end_matches(',');
        samples.push(field.parse::<f64>().map_err(|_| Error::Schema {
            line: lineno,
            column: 1,
            message: format!("`{field}` is not a number"),
        })?);
    }
    let rate = rate.ok_or_else(|| Error::Schema {
        line: 1,
        column: 1,
        message: "no sample rate: expected a `# sirec-signal` header".into(),
    })?;
    SampledSignal::new(samples, rate)
}

/// 16-bit PCM mono. Samples are clipped to [-1, 1] and scaled by 32767.
pub fn write_wav_pcm16<W: Write>(signal: &SampledSignal, mut out: W) -> Result<()> {
    let rate = signal.sample_rate_hz;
    if rate.fract() != 0.0 || rate <= 0.0 || rate > u32::MAX as f64 {
        return Err(Error::Config(format!(
            "WAV needs a whole-number sample rate, got {rate}"
        )));
    }
    let rate = rate as u32;
    let data_len =
        u32::try_from(signal.samples.len() * 2).map_err(|_| Error::Config("signal too long for WAV".into()))?;
    out.write_all(b"RIFF")?;
    out.write_all(&(36 + data_len).to_le_bytes())?;
    out.write_all(b"WAVEfmt ")?;
    out.write_all(&16u32.to_le_bytes())?;
    out.write_all(&1u16.to_le_bytes())?; // PCM
    out.write_all(&1u16.to_le_bytes())?; // mono
    out.write_all(&rate.to_le_bytes())?;
    out.write_all(&(rate * 2).to_le_bytes())?;
    out.write_all(&2u16.to_le_bytes())?;
    out.write_all(&16u16.to_le_bytes())?;
    out.write_all(b"data")?;
    out.write_all(&data_len.to_le_bytes())?;
    let mut buf = Vec::with_capacity(data_len as usize);
    for &v in &signal.samples {
        let q = (v.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        buf.extend_from_slice(&q.to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

/// Reads 16-bit PCM mono WAV, scaling samples by 1/32767.
pub fn read_wav_pcm16<R: Read>(mut input: R) -> Result<SampledSignal> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let bad = |m: &str| Error::Config(format!("WAV: {m}"));
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("not a RIFF/WAVE file"));
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let u32_at = |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
    let mut pos = 12;
    let mut rate = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32_at(pos + 4) as usize;
        let body = pos + 8;
        if body + len > bytes.len() {
            return Err(bad("truncated chunk"));
        }
        if id == b"fmt " {
            if len < 16 {
                return Err(bad("short fmt chunk"));
            }
            if u16_at(body) != 1 || u16_at(body + 2) != 1 || u16_at(body + 14) != 16 {
                return Err(bad("only 16-bit PCM mono is supported"));
            }
            rate = Some(u32_at(body + 4));
        } else if id == b"data" {
            let rate = rate.ok_or_else(|| bad("data chunk before fmt chunk"))?;
            let samples = bytes[body..body + len]
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32767.0)
                .collect();
            return SampledSignal::new(samples, rate as f64);
        }
        pos = body + len + (len & 1);
    }
    Err(bad("no data chunk"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip() {
        let s = SampledSignal::new(vec![0.0, 0.5, -1.0 / 3.0, 1e-12], 10_000.0).unwrap();
        let mut buf = Vec::new();
        write_signal_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# sirec-signal version=1 sample_rate_hz=10000\n0.00000000e0\n"));
        let back = read_signal_csv(&buf[..], None).unwrap();
        assert_eq!(back.sample_rate_hz, 10_000.0);
        for (a, b) in back.samples.iter().zip(&s.samples) {
            assert!((a - b).abs() <= 5e-9 * b.abs());
        }
    }

    #[test]
    fn csv_without_header_needs_rate() {
        assert!(read_signal_csv(&b"1\n2\n"[..], None).is_err());
        let s = read_signal_csv(&b"1\n2,\n\n3\n"[..], Some(8000.0)).unwrap();
        assert_eq!(s.samples, vec![1.0, 2.0, 3.0]);
        let err = read_signal_csv(&b"1\nx\n"[..], Some(8000.0)).unwrap_err();
        assert!(matches!(err, Error::Schema { line: 2, .. }));
    }

    #[test]
    fn wav_header_and_roundtrip() {
        let s = SampledSignal::new(vec![0.0, 1.0, -1.0, 0.25, 2.0], 10_000.0).unwrap();
        let mut buf = Vec::new();
        write_wav_pcm16(&s, &mut buf).unwrap();
        assert_eq!(buf.len(), 44 + 10);
        assert_eq!(&buf[0..4], b"RIFF");
        assert_eq!(u32::from_le_bytes(buf[24..28].try_into().unwrap()), 10_000);
        assert_eq!(i16::from_le_bytes([buf[46], buf[47]]), 32767);
        assert_eq!(i16::from_le_bytes([buf[48], buf[49]]), -32767);
        let back = read_wav_pcm16(&buf[..]).unwrap();
        assert_eq!(back.sample_rate_hz, 10_000.0);
        assert_eq!(back.samples.len(), 5);
        assert!((back.samples[3] - 0.25).abs() < 1.0 / 32767.0);
        assert_eq!(back.samples[4], 1.0);
        assert!(read_wav_pcm16(&buf[..30]).is_err());
    }
}
