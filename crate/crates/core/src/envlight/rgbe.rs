//! Radiance RGBE (`.hdr`) codec.
//!
//! Decoding is exact: a texel `(r, g, b, e)` maps to `(c / 256) · 2^(e − 128)`
//! per channel, and `e = 0` is black. Only the standard `-Y h +X w`
//! orientation is accepted. Both flat and new-style run-length scanlines are
//! read; the writer emits run-length scanlines with literal spans only.

use glam::DVec3;

use crate::error::{Error, Result};

pub fn decode_texel(rgbe: [u8; 4]) -> DVec3 {
    if rgbe[3] == 0 {
        return DVec3::ZERO;
    }
    let scale = 2f64.powi(rgbe[3] as i32 - 128) / 256.0;
    DVec3::new(rgbe[0] as f64, rgbe[1] as f64, rgbe[2] as f64) * scale
}

pub fn encode_texel(c: DVec3) -> [u8; 4] {
    let v = c.max_element();
    if !(v > 1e-32) || !v.is_finite() {
        return [0, 0, 0, 0];
    }
    // v = m · 2^e with m in [0.5, 1)
    let e = v.log2().floor() as i32 + 1;
    let mut e = e;
    let mut scale = 256.0 / 2f64.powi(e);
    if v * scale >= 256.0 {
        e += 1;
        scale *= 0.5;
    }
    if !(-128..=127).contains(&e) {
        return [0, 0, 0, 0];
    }
    let q = |x: f64| (x.max(0.0) * scale).floor().min(255.0) as u8;
    [q(c.x), q(c.y), q(c.z), (e + 128) as u8]
}

fn magic_string(bytes: &[u8]) -> String {
    bytes
        .iter()
        .take(4)
        .map(|b| {
            if b.is_ascii_graphic() {
                (*b as char).to_string()
            } else {
                format!("\\x{b:02x}")
            }
        })
        .collect()
}

/// Decodes an RGBE file into `(width, height, row-major linear texels)`.
pub fn decode(bytes: &[u8], origin: &str) -> Result<(u32, u32, Vec<DVec3>)> {
    if !bytes.starts_with(b"#?") {
        return Err(Error::UnsupportedFormat {
            magic: magic_string(bytes),
        });
    }
    let parse_err = |msg: &str| Error::Parse {
        path: origin.to_string(),
        line: 0,
        msg: msg.to_string(),
    };
    // header lines end at the first empty line
    let mut pos = 0;
    let mut lines = Vec::new();
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| parse_err("unterminated header"))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end]).unwrap_or("").trim().to_string();
        pos += end + 1;
        if line.is_empty() {
            break;
        }
        lines.push(line);
    }
    if let Some(fmt) = lines.iter().find(|l| l.starts_with("FORMAT=")) {
        if fmt != "FORMAT=32-bit_rle_rgbe" {
            return Err(parse_err(&format!("unsupported {fmt}")));
        }
    }
    let end = bytes[pos..]
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| parse_err("missing resolution line"))?;
    let res = std::str::from_utf8(&bytes[pos..pos + end]).unwrap_or("").trim().to_string();
    pos += end + 1;
    let toks: Vec<&str> = res.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "-Y" || toks[2] != "+X" {
        return Err(parse_err(&format!("unsupported resolution line {res:?}")));
    }
    let height: u32 = toks[1].parse().map_err(|_| parse_err("bad height"))?;
    let width: u32 = toks[3].parse().map_err(|_| parse_err("bad width"))?;
    let w = width as usize;
    let mut texels = Vec::with_capacity(w * height as usize);
    let mut scan = vec![[0u8; 4]; w];
    let data = &bytes[pos..];
    let mut p = 0usize;
    let need = |p: usize, n: usize| -> Result<()> {
        if p + n > data.len() {
            Err(parse_err("truncated pixel data"))
        } else {
            Ok(())
        }
    };
    for _ in 0..height {
        need(p, 4)?;
        let is_rle = (8..=32767).contains(&w)
            && data[p] == 2
            && data[p + 1] == 2
            && data[p + 2] & 0x80 == 0
            && ((data[p + 2] as usize) << 8 | data[p + 3] as usize) == w;
        if is_rle {
            p += 4;
            for ch in 0..4 {
                let mut x = 0;
                while x < w {
                    need(p, 1)?;
                    let count = data[p] as usize;
                    p += 1;
                    if count > 128 {
                        let run = count - 128;
                        need(p, 1)?;
                        if x + run > w {
                            return Err(parse_err("run overflows scanline"));
                        }
                        for t in &mut scan[x..x + run] {
                            t[ch] = data[p];
                        }
                        p += 1;
                        x += run;
                    } else {
                        if count == 0 || x + count > w {
                            return Err(parse_err("bad literal span"));
                        }
                        need(p, count)?;
                        for (k, t) in scan[x..x + count].iter_mut().enumerate() {
                            t[ch] = data[p + k];
                        }
                        p += count;
                        x += count;
                    }
                }
            }
        } else {
            need(p, 4 * w)?;
            for (x, t) in scan.iter_mut().enumerate() {
                t.copy_from_slice(&data[p + 4 * x..p + 4 * x + 4]);
            }
            p += 4 * w;
        }
        texels.extend(scan.iter().map(|&t| decode_texel(t)));
    }
    Ok((width, height, texels))
}

pub fn encode(width: u32, height: u32, texels: &[DVec3]) -> Vec<u8> {
    let w = width as usize;
    let mut out = format!("#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y {height} +X {width}\n").into_bytes();
    for row in texels.chunks(w) {
        let enc: Vec<[u8; 4]> = row.iter().map(|&c| encode_texel(c)).collect();
        if (8..=32767).contains(&w) {
            out.extend_from_slice(&[2, 2, (w >> 8) as u8, (w & 0xff) as u8]);
            for ch in 0..4 {
                for span in enc.chunks(128) {
                    out.push(span.len() as u8);
                    out.extend(span.iter().map(|t| t[ch]));
                }
            }
        } else {
            for t in &enc {
                out.extend_from_slice(t);
            }
        }
    }
    out
}
