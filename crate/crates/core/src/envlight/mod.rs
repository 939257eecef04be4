//! Equirectangular HDR environment lighting.
//!
//! Orientation: +Y is up; texel column `u ∈ [0, 1)` maps to azimuth `2πu`
//! measured from +X toward +Z, row `v ∈ [0, 1]` maps to polar angle `πv`
//! from +Y. A probe can additionally be rotated about +Y.
//!
//! Sampling picks a texel with probability proportional to
//! `luminance × solid angle` and then a direction uniformly in solid angle
//! inside it, so the density is piecewise constant:
//! `pdf(ω) = P(texel) / Ω(texel)`.

mod rgbe;

pub use rgbe::{decode as decode_rgbe, decode_texel, encode as encode_rgbe, encode_texel};

use std::f64::consts::{PI, TAU};
use std::path::Path;

use glam::{DVec2, DVec3};

use crate::error::{Error, Result};
use crate::math::luminance;

/// Radiance reconstruction used by [`EnvironmentProbe::eval`] and returned
/// with samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeFilter {
    #[default]
    Bilinear,
    Nearest,
}

#[derive(Clone, Copy, Debug)]
pub struct ProbeSample {
    pub dir: DVec3,
    pub radiance: DVec3,
    pub pdf: f64,
}

#[derive(Clone, Debug)]
pub struct EnvironmentProbe {
    width: u32,
    height: u32,
    texels: Vec<DVec3>,
    /// Normalized cumulative row probabilities, `height + 1` entries.
    marginal_cdf: Vec<f64>,
    /// Per-row normalized cumulative column probabilities, `width + 1` each.
    conditional_cdf: Vec<f64>,
    /// Probability of each texel.
    texel_prob: Vec<f64>,
    /// Solid angle of a texel in each row.
    row_solid_angle: Vec<f64>,
    rotation: f64,
    filter: ProbeFilter,
    clamped_texels: usize,
}

impl EnvironmentProbe {
    /// Builds the sampling tables. Non-finite and negative texel components
    /// are clamped to zero and counted.
    pub fn from_texels(width: u32, height: u32, mut texels: Vec<DVec3>) -> Result<Self> {
        if width == 0 || height == 0 || texels.len() != (width * height) as usize {
            return Err(Error::invalid(format!(
                "probe of {width}x{height} needs {} texels, got {}",
                width as u64 * height as u64,
                texels.len()
            )));
        }
        let mut clamped = 0;
        for t in &mut texels {
            let fixed = DVec3::new(fix(t.x), fix(t.y), fix(t.z));
            if fixed != *t {
                clamped += 1;
                *t = fixed;
            }
        }
        if clamped > 0 {
            log::warn!("probe: clamped {clamped} non-finite or negative texels to zero");
        }
        let (w, h) = (width as usize, height as usize);
        let dphi = TAU / w as f64;
        let row_solid_angle: Vec<f64> = (0..h)
            .map(|r| {
                let c0 = (PI * r as f64 / h as f64).cos();
                let c1 = (PI * (r + 1) as f64 / h as f64).cos();
                dphi * (c0 - c1)
            })
            .collect();
        let weights: Vec<f64> = (0..w * h)
            .map(|i| luminance(texels[i]) * row_solid_angle[i / w])
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::ZeroEnergyProbe);
        }

        let mut conditional_cdf = vec![0.0; h * (w + 1)];
        let mut marginal_cdf = vec![0.0; h + 1];
        let mut row_sums = vec![0.0; h];
        for r in 0..h {
            let cdf = &mut conditional_cdf[r * (w + 1)..(r + 1) * (w + 1)];
            let mut acc = 0.0;
            for c in 0..w {
                acc += weights[r * w + c];
                cdf[c + 1] = acc;
            }
            row_sums[r] = acc;
            if acc > 0.0 {
                for v in cdf.iter_mut() {
                    *v /= acc;
                }
            } else {
                for (c, v) in cdf.iter_mut().enumerate() {
                    *v = c as f64 / w as f64;
                }
            }
            cdf[w] = 1.0;
        }
        let mut acc = 0.0;
        for r in 0..h {
            acc += row_sums[r];
            marginal_cdf[r + 1] = acc / total;
        }
        marginal_cdf[h] = 1.0;
        let texel_prob = weights.iter().map(|v| v / total).collect();

        Ok(EnvironmentProbe {
            width,
            height,
            texels,
            marginal_cdf,
            conditional_cdf,
            texel_prob,
            row_solid_angle,
            rotation: 0.0,
            filter: ProbeFilter::Bilinear,
            clamped_texels: clamped,
        })
    }

    pub fn constant(value: DVec3) -> Result<Self> {
        Self::from_texels(2, 1, vec![value; 2])
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(DVec3) -> DVec3) -> Result<Self> {
        let mut texels = Vec::with_capacity((width * height) as usize);
        for r in 0..height {
            for c in 0..width {
                let u = (c as f64 + 0.5) / width as f64;
                let v = (r as f64 + 0.5) / height as f64;
                texels.push(f(uv_to_dir(u, v)));
            }
        }
        Self::from_texels(width, height, texels)
    }

    /// Rotation about +Y in radians applied to the probe.
    pub fn with_rotation(mut self, radians: f64) -> Self {
        self.rotation = radians;
        self
    }

    pub fn with_filter(mut self, filter: ProbeFilter) -> Self {
        self.filter = filter;
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn texels(&self) -> &[DVec3] {
        &self.texels
    }

    pub fn texel(&self, col: u32, row: u32) -> DVec3 {
        self.texels[(row * self.width + col) as usize]
    }

    pub fn clamped_texels(&self) -> usize {
        self.clamped_texels
    }

    pub fn marginal_cdf(&self) -> &[f64] {
        &self.marginal_cdf
    }

    pub fn conditional_cdf(&self, row: u32) -> &[f64] {
        let w1 = self.width as usize + 1;
        &self.conditional_cdf[row as usize * w1..(row as usize + 1) * w1]
    }

    pub fn max_radiance(&self) -> f64 {
        self.texels.iter().map(|t| t.max_element()).fold(0.0, f64::max)
    }

    /// `Σ texel radiance × texel solid angle`.
    pub fn energy(&self) -> DVec3 {
        let w = self.width as usize;
        self.texels
            .iter()
            .enumerate()
            .map(|(i, &t)| t * self.row_solid_angle[i / w])
            .sum()
    }

    fn to_local(&self, d: DVec3) -> DVec3 {
        if self.rotation == 0.0 {
            return d;
        }
        let (s, c) = (-self.rotation).sin_cos();
        DVec3::new(c * d.x - s * d.z, d.y, s * d.x + c * d.z)
    }

    fn to_world(&self, d: DVec3) -> DVec3 {
        if self.rotation == 0.0 {
            return d;
        }
        let (s, c) = self.rotation.sin_cos();
        DVec3::new(c * d.x - s * d.z, d.y, s * d.x + c * d.z)
    }

    /// Column and row of the texel containing a world direction.
    pub fn texel_of(&self, dir: DVec3) -> (u32, u32) {
        let (u, v) = dir_to_uv(self.to_local(dir));
        let col = ((u * self.width as f64) as u32).min(self.width - 1);
        let row = ((v * self.height as f64) as u32).min(self.height - 1);
        (col, row)
    }

    pub fn radiance(&self, dir: DVec3) -> DVec3 {
        match self.filter {
            ProbeFilter::Nearest => {
                let (c, r) = self.texel_of(dir);
                self.texel(c, r)
            }
            ProbeFilter::Bilinear => {
                let (u, v) = dir_to_uv(self.to_local(dir));
                let x = u * self.width as f64 - 0.5;
                let y = (v * self.height as f64 - 0.5).clamp(0.0, (self.height - 1) as f64);
                let x0 = x.floor();
                let y0 = y.floor();
                let fx = x - x0;
                let fy = y - y0;
                let w = self.width as i64;
                let c0 = (x0 as i64).rem_euclid(w) as u32;
                let c1 = (x0 as i64 + 1).rem_euclid(w) as u32;
                let r0 = y0 as u32;
                let r1 = (r0 + 1).min(self.height - 1);
                let top = self.texel(c0, r0) * (1.0 - fx) + self.texel(c1, r0) * fx;
                let bot = self.texel(c0, r1) * (1.0 - fx) + self.texel(c1, r1) * fx;
                top * (1.0 - fy) + bot * fy
            }
        }
    }

    /// Solid-angle density with which [`sample`](Self::sample) produces `dir`.
    pub fn pdf(&self, dir: DVec3) -> f64 {
        let (c, r) = self.texel_of(dir);
        let p = self.texel_prob[(r * self.width + c) as usize];
        p / self.row_solid_angle[r as usize]
    }

    pub fn eval(&self, dir: DVec3) -> (DVec3, f64) {
        (self.radiance(dir), self.pdf(dir))
    }

    pub fn sample(&self, u: DVec2) -> ProbeSample {
        let (row, fv) = sample_cdf(&self.marginal_cdf, u.x);
        let (col, fu) = sample_cdf(self.conditional_cdf(row as u32), u.y);
        let h = self.height as f64;
        let c0 = (PI * row as f64 / h).cos();
        let c1 = (PI * (row + 1) as f64 / h).cos();
        let cos_theta = (c0 - fv * (c0 - c1)).clamp(-1.0, 1.0);
        let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
        let phi = TAU * (col as f64 + fu) / self.width as f64;
        let local = DVec3::new(sin_theta * phi.cos(), cos_theta, sin_theta * phi.sin());
        let dir = self.to_world(local);
        let p = self.texel_prob[row * self.width as usize + col];
        ProbeSample {
            dir,
            radiance: self.radiance(dir),
            pdf: p / self.row_solid_angle[row],
        }
    }
}

fn fix(v: f64) -> f64 {
    if v.is_finite() && v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Index of the interval containing `u` and the position within it. Zero-width
/// intervals are never returned.
fn sample_cdf(cdf: &[f64], u: f64) -> (usize, f64) {
    let n = cdf.len() - 1;
    // first i with cdf[i + 1] > u
    let mut lo = 0;
    let mut hi = n - 1;
    while lo < hi {
        let mid = (lo + hi) / 2;
        if cdf[mid + 1] > u {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let width = cdf[lo + 1] - cdf[lo];
    let f = if width > 0.0 { ((u - cdf[lo]) / width).clamp(0.0, 1.0 - f64::EPSILON) } else { 0.5 };
    (lo, f)
}

pub fn dir_to_uv(d: DVec3) -> (f64, f64) {
    let theta = d.y.clamp(-1.0, 1.0).acos();
    let mut phi = d.z.atan2(d.x);
    if phi < 0.0 {
        phi += TAU;
    }
    let u = phi / TAU;
    (if u >= 1.0 { 0.0 } else { u }, theta / PI)
}

pub fn uv_to_dir(u: f64, v: f64) -> DVec3 {
    let phi = TAU * u;
    let (st, ct) = (PI * v).sin_cos();
    DVec3::new(st * phi.cos(), ct, st * phi.sin())
}

pub fn load_probe(path: impl AsRef<Path>) -> Result<EnvironmentProbe> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (w, h, texels) = rgbe::decode(&bytes, &path.display().to_string())?;
    EnvironmentProbe::from_texels(w, h, texels)
}

pub fn save_probe(path: impl AsRef<Path>, probe: &EnvironmentProbe) -> Result<()> {
    let path = path.as_ref();
    let bytes = rgbe::encode(probe.width, probe.height, &probe.texels);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_dir(rng: &mut ChaCha8Rng) -> DVec3 {
        loop {
            let v = DVec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if v.length_squared() > 1e-4 && v.length_squared() <= 1.0 {
                return v.normalize();
            }
        }
    }

    fn hot_texel_probe() -> EnvironmentProbe {
        let mut texels = vec![DVec3::ZERO; 16 * 8];
        texels[3 * 16 + 5] = DVec3::new(10.0, 8.0, 6.0);
        EnvironmentProbe::from_texels(16, 8, texels).unwrap()
    }

    fn gradient_probe() -> EnvironmentProbe {
        EnvironmentProbe::from_fn(64, 32, |d| DVec3::new(1.0 + d.y, 0.5 + 0.5 * d.x.abs(), 0.2 + (d.z + 1.0))).unwrap()
    }

    #[test]
    fn constant_probe_is_uniform() {
        let probe = EnvironmentProbe::constant(DVec3::ONE).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let d = unit_dir(&mut rng);
            let (l, pdf) = probe.eval(d);
            assert!((l - DVec3::ONE).abs().max_element() < 1e-12);
            assert!((pdf - 1.0 / (4.0 * PI)).abs() < 1e-12);
        }
    }

    #[test]
    fn pole_pdf_is_finite() {
        let probe = gradient_probe();
        for d in [DVec3::Y, -DVec3::Y, DVec3::Z, -DVec3::Z] {
            let pdf = probe.pdf(d);
            assert!(pdf.is_finite() && pdf > 0.0);
        }
    }

    #[test]
    fn cdf_tables_are_monotone_and_normalized() {
        for probe in [gradient_probe(), hot_texel_probe()] {
            let m = probe.marginal_cdf();
            assert!(m.windows(2).all(|w| w[0] <= w[1]));
            assert!((m[m.len() - 1] - 1.0).abs() < 1e-6);
            for r in 0..probe.height() {
                let c = probe.conditional_cdf(r);
                assert!(c.windows(2).all(|w| w[0] <= w[1]));
                assert!((c[c.len() - 1] - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn hot_texel_samples_stay_inside_texel() {
        let probe = hot_texel_probe();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let s = probe.sample(DVec2::new(rng.gen(), rng.gen()));
            assert_eq!(probe.texel_of(s.dir), (5, 3));
            assert!(s.pdf > 0.0);
        }
    }

    #[test]
    fn sampled_pdf_matches_eval_pdf() {
        for probe in [gradient_probe(), hot_texel_probe(), gradient_probe().with_rotation(0.7)] {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for _ in 0..10_000 {
                let s = probe.sample(DVec2::new(rng.gen(), rng.gen()));
                let pdf = probe.pdf(s.dir);
                assert!((pdf - s.pdf).abs() <= 1e-5 * s.pdf, "{pdf} vs {}", s.pdf);
                assert!((probe.radiance(s.dir) - s.radiance).length() < 1e-12);
            }
        }
    }

    #[test]
    fn pdf_integrates_to_one() {
        let probe = gradient_probe().with_rotation(0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| probe.pdf(unit_dir(&mut rng))).sum::<f64>() / n as f64;
        assert!((mean * 4.0 * PI - 1.0).abs() < 0.01);
    }

    #[test]
    fn estimator_matches_texel_sum() {
        // the texel-sum oracle is exact for the piecewise-constant reconstruction
        let probes = [
            EnvironmentProbe::constant(DVec3::ONE).unwrap(),
            hot_texel_probe().with_filter(ProbeFilter::Nearest),
            gradient_probe(),
            gradient_probe().with_filter(ProbeFilter::Nearest),
        ];
        for probe in probes {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let n = 100_000;
            let mut acc = DVec3::ZERO;
            for _ in 0..n {
                let s = probe.sample(DVec2::new(rng.gen(), rng.gen()));
                acc += s.radiance / s.pdf;
            }
            let est = acc / n as f64;
            let truth = probe.energy();
            assert!(((est - truth) / truth).abs().max_element() < 0.01, "{est} vs {truth}");
        }
    }

    #[test]
    fn rotation_moves_radiance() {
        let probe = hot_texel_probe().with_filter(ProbeFilter::Nearest);
        let rotated = probe.clone().with_rotation(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = rotated.sample(DVec2::new(rng.gen(), rng.gen()));
        // undo the rotation and look up in the unrotated probe
        let (sn, cs) = (-1.0f64).sin_cos();
        let d = s.dir;
        let back = DVec3::new(cs * d.x - sn * d.z, d.y, sn * d.x + cs * d.z);
        assert_eq!(probe.radiance(back), s.radiance);
    }

    #[test]
    fn bad_texels_are_clamped() {
        let probe = EnvironmentProbe::from_texels(2, 1, vec![DVec3::new(f64::NAN, -1.0, 1.0), DVec3::ONE]).unwrap();
        assert_eq!(probe.clamped_texels(), 1);
        assert_eq!(probe.texel(0, 0), DVec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn zero_probe_is_rejected() {
        assert!(matches!(EnvironmentProbe::constant(DVec3::ZERO), Err(Error::ZeroEnergyProbe)));
    }

    #[test]
    fn two_texel_file_is_constant() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.hdr");
        let bytes = rgbe::encode(2, 1, &[DVec3::ONE, DVec3::ONE]);
        std::fs::write(&p, bytes).unwrap();
        let probe = load_probe(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            assert!((probe.radiance(unit_dir(&mut rng)) - DVec3::ONE).length() < 1e-12);
        }
    }

    #[test]
    fn non_hdr_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.hdr");
        std::fs::write(&p, b"GIF89a").unwrap();
        let err = load_probe(&p).unwrap_err();
        assert!(err.to_string().contains("GIF8"));
    }
}
