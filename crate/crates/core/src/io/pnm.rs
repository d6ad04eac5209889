//! Binary 8-bit PGM (P5) and PPM (P6) images as `C×H×W` tensors in `[0, 1]`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::RealTensor;

fn bad(reason: impl Into<String>) -> Error {
    Error::format("PNM", reason)
}

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    maxval: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(bad("expected magic P5 or P6")),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // Whitespace and `#` comments may separate header fields.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated or non-numeric header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| bad("header value out of range"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad("missing whitespace after header"));
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(bad("zero image extent"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(bad(format!("only 8-bit images are supported (maxval {maxval})")));
    }
    Ok(Header {
        channels,
        width,
        height,
        maxval,
        data_start: pos + 1,
    })
}

pub fn decode_pnm(bytes: &[u8]) -> Result<RealTensor> {
    let h = parse_header(bytes)?;
    let count = h
        .channels
        .checked_mul(h.width)
        .and_then(|v| v.checked_mul(h.height))
        .ok_or_else(|| bad("image too large"))?;
    let raster = bytes
        .get(h.data_start..h.data_start + count)
        .ok_or_else(|| bad(format!("raster truncated: expected {count} bytes")))?;
    let (c, plane) = (h.channels, h.width * h.height);
    let scale = h.maxval as f64;
    let mut data = vec![0.0; count];
    // Interleaved RGB on disk, planar in memory.
    for (i, &b) in raster.iter().enumerate() {
        let v = (b as usize).min(h.maxval) as f64 / scale;
        data[(i % c) * plane + i / c] = v;
    }
    RealTensor::new(vec![c, h.height, h.width], data)
}

/// Encodes a 1- or 3-channel image; values are clamped to `[0, 1]` and
/// rounded to the nearest of 256 levels.
pub fn encode_pnm(img: &RealTensor) -> Result<Vec<u8>> {
    let (c, h, w) = match *img.shape() {
        [c @ (1 | 3), h, w] => (c, h, w),
        [h, w] => (1, h, w),
        _ => return Err(Error::shape("encode_pnm", img.shape(), "expected 1×H×W, 3×H×W or H×W")),
    };
    let magic = if c == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    let plane = h * w;
    let data = img.data();
    out.reserve(c * plane);
    for i in 0..plane {
        for ch in 0..c {
            out.push(quantize(data[ch * plane + i]));
        }
    }
    Ok(out)
}

pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn read_pnm(path: impl AsRef<Path>) -> Result<RealTensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
    decode_pnm(&bytes).map_err(|e| e.in_file(path))
}

pub fn write_pnm(path: impl AsRef<Path>, img: &RealTensor) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pnm(img)?;
    fs::write(path, bytes).map_err(|e| Error::from(e).in_file(path))
}

/// `pgm` or `ppm` to match the channel count.
pub fn extension_for(img: &RealTensor) -> &'static str {
    if img.shape().first() == Some(&3) {
        "ppm"
    } else {
        "pgm"
    }
}
