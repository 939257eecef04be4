//! Field checkpoint blob, all little-endian:
//!
//! ```text
//! magic "MRFIELD\0" | version u32 | levels u32 | log2_table_size u32 | features u32
//! | base_resolution u32 | max_resolution u32 | hidden_layers u32 | hidden_width u32
//! | seed u64 | domain min 3×f64 | domain scale f64 | per-level resolution u32×levels
//! | parameter count u64 | parameters f32×count
//! ```

use std::path::Path;

use glam::DVec3;

use super::{Domain, FieldConfig, MaterialField};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MRFIELD\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(field: &MaterialField) -> Vec<u8> {
    let c = field.config();
    let mut out = Vec::with_capacity(128 + 4 * field.num_params());
    out.extend_from_slice(MAGIC);
    for v in [
        CHECKPOINT_VERSION,
        c.levels,
        c.log2_table_size,
        c.features,
        c.base_resolution,
        c.max_resolution,
        c.hidden_layers,
        c.hidden_width,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&c.seed.to_le_bytes());
    let d = field.domain();
    for v in [d.min.x, d.min.y, d.min.z, d.scale] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for r in field.resolutions() {
        out.extend_from_slice(&r.to_le_bytes());
    }
    out.extend_from_slice(&(field.num_params() as u64).to_le_bytes());
    for p in field.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: &'a str,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(self.err("truncated checkpoint"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            path: self.origin.to_string(),
            line: 0,
            msg: msg.to_string(),
        }
    }
}

pub fn decode_checkpoint(bytes: &[u8], origin: &str) -> Result<MaterialField> {
    if !bytes.starts_with(MAGIC) {
        return Err(Error::UnsupportedFormat {
            magic: String::from_utf8_lossy(&bytes[..bytes.len().min(8)]).into_owned(),
        });
    }
    let mut r = Reader { bytes, pos: 8, origin };
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(r.err(&format!("unsupported checkpoint version {version}")));
    }
    let config = FieldConfig {
        levels: r.u32()?,
        log2_table_size: r.u32()?,
        features: r.u32()?,
        base_resolution: r.u32()?,
        max_resolution: r.u32()?,
        hidden_layers: r.u32()?,
        hidden_width: r.u32()?,
        seed: r.u64()?,
    };
    config.validate().map_err(|e| r.err(&e.to_string()))?;
    let min = DVec3::new(r.f64()?, r.f64()?, r.f64()?);
    let scale = r.f64()?;
    let resolutions: Vec<u32> = (0..config.levels).map(|_| r.u32()).collect::<Result<_>>()?;
    if resolutions != config.resolutions() {
        return Err(r.err("level resolutions disagree with the stored config"));
    }
    let mut field = MaterialField::new(config, Domain { min, scale })?;
    let n = r.u64()? as usize;
    if n != field.num_params() {
        return Err(r.err(&format!("expected {} parameters, found {n}", field.num_params())));
    }
    let raw = r.take(4 * n)?;
    for (p, b) in field.params_mut().iter_mut().zip(raw.chunks_exact(4)) {
        *p = f32::from_le_bytes(b.try_into().unwrap());
    }
    if r.pos != bytes.len() {
        return Err(r.err("trailing bytes after parameters"));
    }
    Ok(field)
}

pub fn save_checkpoint(path: impl AsRef<Path>, field: &MaterialField) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, encode_checkpoint(field)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MaterialField> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut cfg = FieldConfig::small();
        cfg.seed = 11;
        let f = MaterialField::new(cfg, Domain { min: DVec3::new(-1.0, -2.0, 0.5), scale: 0.25 }).unwrap();
        let bytes = encode_checkpoint(&f);
        let g = decode_checkpoint(&bytes, "mem").unwrap();
        assert_eq!(f.params(), g.params());
        assert_eq!(f.domain(), g.domain());
        assert_eq!(f.config(), g.config());
        assert_eq!(encode_checkpoint(&g), bytes);
    }

    #[test]
    fn corrupt_blobs_are_rejected() {
        let f = MaterialField::new(FieldConfig::small(), Domain { min: DVec3::ZERO, scale: 1.0 }).unwrap();
        let bytes = encode_checkpoint(&f);
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1], "x").is_err());
        assert!(decode_checkpoint(b"PNG.....", "x").is_err());
        let mut v = bytes.clone();
        v[8] = 9;
        assert!(decode_checkpoint(&v, "x").is_err());
    }
}
