//! Image file formats: Netpbm PGM (P2/P5, 8- and 16-bit) and the raw float
//! container `BIF1`.
//!
//! PGM carries no coordinate information, so reading one assigns the default
//! centered origin and values are scaled by the file's maxval into `[0, 1]`.
//! `BIF1` stores the samples losslessly together with the origin: an ASCII
//! header `BIF1 W H ox oy\n` followed by `W*H` row-major little-endian f64
//! samples.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

/// Reads an image, detecting the container from its leading magic bytes
/// (`P2`, `P5` or `BIF1`) rather than the file name.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io { path: path.into(), source })?;
    if bytes.starts_with(b"BIF1") {
        decode_bif(&bytes)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(&bytes)
    } else {
        Err(Error::Format("unsupported magic (expected P2, P5 or BIF1)".into()))
    }
}

/// Writes an image, choosing the container from the file extension: `.pgm`
/// becomes 16-bit binary PGM (clamped to `[0, 1]`), anything else `BIF1`.
pub fn write_image(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => write_pgm(path, image, 65535),
        _ => write_bif(path, image),
    }
}

/// Writes lossless `BIF1`.
pub fn write_bif(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    let path = path.as_ref();
    let (ox, oy) = image.origin();
    let mut out = Vec::with_capacity(32 + 8 * image.samples().len());
    // `{}` prints the shortest representation that round-trips, so origins
    // survive the header exactly.
    write!(out, "BIF1 {} {} {} {}\n", image.width(), image.height(), ox, oy)
        .expect("writing to a Vec cannot fail");
    for v in image.samples() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|source| Error::Io { path: path.into(), source })
}

fn decode_bif(bytes: &[u8]) -> Result<Image> {
    let header_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("malformed header: missing newline".into()))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::Format("malformed header: not ASCII".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "BIF1" {
        return Err(Error::Format(format!("malformed header: {header:?}")));
    }
    let width: usize = fields[1].parse().map_err(|_| Error::Format("malformed header: width".into()))?;
    let height: usize =
        fields[2].parse().map_err(|_| Error::Format("malformed header: height".into()))?;
    let ox: f64 = fields[3].parse().map_err(|_| Error::Format("malformed header: origin".into()))?;
    let oy: f64 = fields[4].parse().map_err(|_| Error::Format("malformed header: origin".into()))?;
    let payload = &bytes[header_end + 1..];
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(8))
        .ok_or(Error::SizeOverflow(width, height))?;
    if payload.len() < expected {
        return Err(Error::Format("truncated payload".into()));
    }
    let samples = payload[..expected]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Image::with_origin(width, height, samples, (ox, oy))
}

/// Writes binary PGM (P5) with the given maxval (255 for 8-bit, larger for
/// 16-bit). Samples are clamped to `[0, 1]` and scaled by maxval.
pub fn write_pgm(path: impl AsRef<Path>, image: &Image, maxval: u16) -> Result<()> {
    let path = path.as_ref();
    if maxval == 0 {
        return Err(Error::InvalidParam("pgm maxval must be positive".into()));
    }
    let mut out = Vec::with_capacity(32 + 2 * image.samples().len());
    write!(out, "P5\n{} {}\n{}\n", image.width(), image.height(), maxval)
        .expect("writing to a Vec cannot fail");
    for &v in image.samples() {
        let q = (v.clamp(0.0, 1.0) * maxval as f64).round() as u16;
        if maxval < 256 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    fs::write(path, out).map_err(|source| Error::Io { path: path.into(), source })
}

fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    let binary = bytes.starts_with(b"P5");
    let mut cursor = 2usize;
    let mut header = [0usize; 3]; // width, height, maxval

    // Netpbm token scanner: whitespace-separated integers, `#` comments run
    // to end of line.
    let next_token = |cursor: &mut usize| -> Result<usize> {
        loop {
            while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
                *cursor += 1;
            }
            if *cursor < bytes.len() && bytes[*cursor] == b'#' {
                while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                    *cursor += 1;
                }
                continue;
            }
            break;
        }
        let start = *cursor;
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_digit() {
            *cursor += 1;
        }
        if start == *cursor {
            return Err(Error::Format("malformed header: expected integer".into()));
        }
        std::str::from_utf8(&bytes[start..*cursor])
            .expect("digits are ASCII")
            .parse()
            .map_err(|_| Error::Format("malformed header: integer out of range".into()))
    };

    for slot in &mut header {
        *slot = next_token(&mut cursor)?;
    }
    let [width, height, maxval] = header;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("malformed header: maxval {maxval}")));
    }
    let count = width.checked_mul(height).ok_or(Error::SizeOverflow(width, height))?;
    let scale = 1.0 / maxval as f64;

    let samples = if binary {
        // Exactly one whitespace byte separates the header from the payload.
        cursor += 1;
        let wide = maxval > 255;
        let bytes_per = if wide { 2 } else { 1 };
        let payload = bytes.get(cursor..).unwrap_or(&[]);
        if payload.len() < count * bytes_per {
            return Err(Error::Format("truncated payload".into()));
        }
        payload[..count * bytes_per]
            .chunks_exact(bytes_per)
            .map(|c| {
                let raw = if wide { u16::from_be_bytes([c[0], c[1]]) as f64 } else { c[0] as f64 };
                raw * scale
            })
            .collect()
    } else {
        let mut samples = Vec::with_capacity(count);
        for _ in 0..count {
            let v = next_token(&mut cursor)
                .map_err(|_| Error::Format("truncated payload".into()))?;
            samples.push(v as f64 * scale);
        }
        samples
    };
    Image::new(width, height, samples)
}
