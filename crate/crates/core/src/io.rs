//! Frame and field serialization.
//!
//! Frames are exchanged as 8-bit PNG or binary PNM (`P6` color, `P5` gray).
//! Fields use the `GDCF` container: a 16-byte little-endian header
//! (`b"GDCF"`, height, width, depth as `u32`) followed by
//! `height * width * depth` little-endian `f32` values.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::frame::{Field, Frame};

pub const GDCF_MAGIC: &[u8; 4] = b"GDCF";

/// Reads an 8-bit PNG. Alpha channels are dropped; palettes are expanded.
pub fn read_png(path: impl AsRef<Path>) -> Result<Frame> {
    let file = BufReader::new(File::open(path)?);
    let mut decoder = png::Decoder::new(file);
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format("png: image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    let (h, w) = (info.height as usize, info.width as usize);
    let src_channels = info.color_type.samples();
    let keep = match info.color_type {
        png::ColorType::Grayscale | png::ColorType::GrayscaleAlpha => 1,
        _ => 3,
    };
    let mut bytes = Vec::with_capacity(h * w * keep);
    for row in buf.chunks(info.line_size).take(h) {
        for px in row[..w * src_channels].chunks(src_channels) {
            bytes.extend_from_slice(&px[..keep]);
        }
    }
    Frame::from_bytes(h, w, keep, &bytes)
}

/// Writes a 1-channel (gray) or 3-channel (RGB) frame as an 8-bit PNG.
pub fn write_png(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    let color = match frame.channels() {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        c => return Err(Error::Format(format!("png: cannot write {c}-channel frame"))),
    };
    let bytes = frame.to_bytes();
    let file = BufWriter::new(File::create(path)?);
    let mut encoder = png::Encoder::new(file, frame.width() as u32, frame.height() as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    writer
        .write_image_data(&bytes)
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    writer
        .finish()
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    Ok(())
}

fn pnm_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            break;
        }
        let c = byte[0];
        if c == b'#' && tok.is_empty() {
            let mut skip = Vec::new();
            r.read_until(b'\n', &mut skip)?;
            continue;
        }
        if c.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(c as char);
    }
    if tok.is_empty() {
        return Err(Error::Format("pnm: truncated header".into()));
    }
    Ok(tok)
}

/// Reads a binary PNM: `P6` (RGB) or `P5` (gray), maxval 255.
pub fn read_ppm(path: impl AsRef<Path>) -> Result<Frame> {
    let mut r = BufReader::new(File::open(path)?);
    let magic = pnm_token(&mut r)?;
    let channels = match magic.as_str() {
        "P6" => 3,
        "P5" => 1,
        m => return Err(Error::Format(format!("pnm: unsupported magic {m}"))),
    };
    let parse = |s: String| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("pnm: bad header field {s:?}")))
    };
    let w = parse(pnm_token(&mut r)?)?;
    let h = parse(pnm_token(&mut r)?)?;
    let maxval = parse(pnm_token(&mut r)?)?;
    if maxval != 255 {
        return Err(Error::Format(format!("pnm: maxval {maxval} unsupported")));
    }
    let mut bytes = vec![0u8; w * h * channels];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format("pnm: truncated pixel data".into()))?;
    Frame::from_bytes(h, w, channels, &bytes)
}

/// Writes `P6` for 3-channel frames and `P5` for 1-channel frames.
pub fn write_ppm(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    let magic = match frame.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::Format(format!("pnm: cannot write {c}-channel frame"))),
    };
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "{magic}\n{} {}\n255\n", frame.width(), frame.height())?;
    w.write_all(&frame.to_bytes())?;
    w.flush()?;
    Ok(())
}

/// Reads a frame, choosing the decoder from the file extension.
pub fn read_frame(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("ppm") | Some("pgm") | Some("pnm") => read_ppm(path),
        _ => read_png(path),
    }
}

pub fn write_frame(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("ppm") | Some("pgm") | Some("pnm") => write_ppm(path, frame),
        _ => write_png(path, frame),
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

pub fn encode_field(field: &Field) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * field.data().len());
    out.extend_from_slice(GDCF_MAGIC);
    for dim in [field.height(), field.width(), field.depth()] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for &v in field.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<Field> {
    let (height, width, depth, payload) = decode_header(bytes)?;
    let data = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    Field::new(height, width, depth, data)
}

fn decode_header(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    if bytes.len() < 16 || &bytes[..4] != GDCF_MAGIC {
        return Err(Error::Format("missing GDCF header".into()));
    }
    let dim = |o: usize| u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize;
    let (h, w, d) = (dim(4), dim(8), dim(12));
    let payload = &bytes[16..];
    let expected = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(d))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("GDCF dimensions overflow".into()))?;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "GDCF payload has {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    Ok((h, w, d, payload))
}

pub fn write_field(path: impl AsRef<Path>, field: &Field) -> Result<()> {
    std::fs::write(path, encode_field(field))?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<Field> {
    decode_field(&std::fs::read(path)?)
}

/// Writes a flat vector as a `1 x 1 x len` GDCF file.
pub fn write_vector(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    let field = Field::new(1, 1, values.len().max(1), if values.is_empty() { vec![0.0] } else { values.to_vec() })?;
    write_field(path, &field)
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    Ok(read_field(path)?.data().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize, c: usize) -> Frame {
        let bytes: Vec<u8> = (0..h * w * c).map(|i| (i * 37 % 256) as u8).collect();
        Frame::from_bytes(h, w, c, &bytes).unwrap()
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for c in [1, 3] {
            let f = ramp(5, 7, c);
            let p = dir.path().join(format!("f{c}.png"));
            write_png(&p, &f).unwrap();
            assert_eq!(read_png(&p).unwrap(), f);
        }
    }

    #[test]
    fn ppm_round_trip_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let f = ramp(3, 4, 3);
        let p = dir.path().join("f.ppm");
        write_ppm(&p, &f).unwrap();
        let raw = std::fs::read(&p).unwrap();
        assert!(raw.starts_with(b"P6\n4 3\n255\n"));
        assert_eq!(raw.len(), 11 + 36);
        assert_eq!(read_ppm(&p).unwrap(), f);
        assert_eq!(read_frame(&p).unwrap(), f);
    }

    #[test]
    fn ppm_header_comments() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ppm");
        let mut raw = b"P5\n# comment\n2 1\n255\n".to_vec();
        raw.extend_from_slice(&[0, 255]);
        std::fs::write(&p, raw).unwrap();
        let f = read_ppm(&p).unwrap();
        assert_eq!(f.data(), &[0.0, 1.0]);
    }

    #[test]
    fn gdcf_layout_is_bit_exact() {
        let field = Field::new(1, 2, 1, vec![1.0, -0.5]).unwrap();
        let bytes = encode_field(&field);
        let mut expected = b"GDCF".to_vec();
        expected.extend_from_slice(&[1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0]);
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&(-0.5f32).to_le_bytes());
        assert_eq!(bytes, expected);
        assert_eq!(decode_field(&bytes).unwrap(), field);
    }

    #[test]
    fn gdcf_rejects_truncation() {
        let field = Field::filled(2, 2, 3, 0.25);
        let bytes = encode_field(&field);
        assert!(decode_field(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_field(b"GDC").is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_field(&bad).is_err());
    }
}
