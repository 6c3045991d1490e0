//! Netpbm encoders for debugging dumps (binary PPM, 16-bit PGM, PBM) and a
//! PPM decoder for round-tripping colour images.

use std::io;

use crate::Rgb;

/// Binary `P6` colour image.
pub fn encode_ppm(width: usize, height: usize, pixels: &[Rgb]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.reserve(pixels.len() * 3);
    for p in pixels {
        out.extend_from_slice(p);
    }
    out
}

/// Binary `P5` 16-bit depth image in whole millimetres (big-endian), with
/// invalid pixels as 0.
pub fn encode_pgm16(width: usize, height: usize, depth_mm: &[f64]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for &d in depth_mm {
        let v = if d > 0.0 {
            d.round().clamp(1.0, 65535.0) as u16
        } else {
            0
        };
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

/// Binary `P4` bitmap; set bits are 1 (black).
pub fn encode_pbm(width: usize, height: usize, bits: &[bool]) -> Vec<u8> {
    let mut out = format!("P4\n{width} {height}\n").into_bytes();
    for row in bits.chunks(width) {
        for byte in row.chunks(8) {
            let mut b = 0u8;
            for (k, &on) in byte.iter().enumerate() {
                if on {
                    b |= 0x80 >> k;
                }
            }
            out.push(b);
        }
    }
    out
}

fn header_fields(data: &[u8], count: usize) -> io::Result<(Vec<String>, usize)> {
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < count {
        while i < data.len() && data[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < data.len() && data[i] == b'#' {
            while i < data.len() && data[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < data.len() && !data[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "truncated header"));
        }
        fields.push(String::from_utf8_lossy(&data[start..i]).into_owned());
    }
    Ok((fields, i + 1))
}

/// Decode a binary `P6` image with maxval 255.
pub fn decode_ppm(data: &[u8]) -> io::Result<(usize, usize, Vec<Rgb>)> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let (f, offset) = header_fields(data, 4)?;
    if f[0] != "P6" {
        return Err(bad("not a binary PPM"));
    }
    let w: usize = f[1].parse().map_err(|_| bad("bad width"))?;
    let h: usize = f[2].parse().map_err(|_| bad("bad height"))?;
    if f[3] != "255" {
        return Err(bad("only maxval 255 is supported"));
    }
    let body = data
        .get(offset..offset + w * h * 3)
        .ok_or_else(|| bad("truncated pixel data"))?;
    Ok((w, h, body.chunks(3).map(|c| [c[0], c[1], c[2]]).collect()))
}

/// Decode a binary `P4` bitmap.
pub fn decode_pbm(data: &[u8]) -> io::Result<(usize, usize, Vec<bool>)> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let (f, offset) = header_fields(data, 3)?;
    if f[0] != "P4" {
        return Err(bad("not a binary PBM"));
    }
    let w: usize = f[1].parse().map_err(|_| bad("bad width"))?;
    let h: usize = f[2].parse().map_err(|_| bad("bad height"))?;
    let row_bytes = w.div_ceil(8);
    let body = data
        .get(offset..offset + row_bytes * h)
        .ok_or_else(|| bad("truncated bitmap"))?;
    let mut bits = Vec::with_capacity(w * h);
    for row in body.chunks(row_bytes) {
        for u in 0..w {
            bits.push(row[u / 8] & (0x80 >> (u % 8)) != 0);
        }
    }
    Ok((w, h, bits))
}
