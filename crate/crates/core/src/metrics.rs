//! PSNR and relighting evaluation.

use std::fmt::Write as _;

use crate::envlight::EnvironmentProbe;
use crate::error::Result;
use crate::image::{check_shape, GrayImage, RgbImage};
use crate::material::MaterialSource;
use crate::recon::masked;
use crate::scene::{Camera, Scene};
use crate::tracer::{render, RenderConfig};

/// PSNR in dB for peak 1 over masked pixels with channels pooled. Identical
/// images give `f64::INFINITY`; an empty mask gives `NaN`.
pub fn psnr(a: &RgbImage, b: &RgbImage, mask: Option<&GrayImage>) -> Result<f64> {
    check_shape(a, b, "psnr")?;
    if let Some(m) = mask {
        check_shape(a, m, "psnr mask")?;
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..a.len() {
        if mask.is_some_and(|m| !masked(m.pixels[i])) {
            continue;
        }
        let d = a.pixels[i] - b.pixels[i];
        sum += d.length_squared();
        n += 3;
    }
    if n == 0 {
        return Ok(f64::NAN);
    }
    let mse = sum / n as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

pub fn psnr_gray(a: &GrayImage, b: &GrayImage, mask: Option<&GrayImage>) -> Result<f64> {
    let lift = |g: &GrayImage| g.map(|v| glam::DVec3::splat(*v));
    psnr(&lift(a), &lift(b), mask)
}

/// Formats a PSNR for tables; infinity prints as `inf`.
pub fn format_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelightRow {
    pub probe: String,
    /// Mean PSNR over views.
    pub psnr: f64,
    pub per_view: Vec<f64>,
}

/// Renders `material` under each probe from each camera and compares the
/// tonemapped result with `truth[probe][view]` over `masks[view]`.
pub fn relight_eval(
    scene: &Scene,
    material: &dyn MaterialSource,
    probes: &[(String, EnvironmentProbe)],
    cameras: &[Camera],
    truth: &[Vec<RgbImage>],
    masks: Option<&[GrayImage]>,
    config: &RenderConfig,
) -> Result<Vec<RelightRow>> {
    let mut rows = Vec::with_capacity(probes.len());
    for (p, (name, probe)) in probes.iter().enumerate() {
        let mut per_view = Vec::with_capacity(cameras.len());
        for (v, cam) in cameras.iter().enumerate() {
            let img = render(scene, probe, material, cam, config).tonemapped();
            per_view.push(psnr(&img, &truth[p][v], masks.map(|m| &m[v]))?);
        }
        let psnr = per_view.iter().sum::<f64>() / per_view.len().max(1) as f64;
        rows.push(RelightRow {
            probe: name.clone(),
            psnr,
            per_view,
        });
    }
    Ok(rows)
}

pub const RELIGHT_CSV_HEADER: &str = "probe,view,psnr_db";

/// One row per probe and view plus a `mean` row per probe.
pub fn relight_csv(rows: &[RelightRow]) -> String {
    let mut s = format!("{RELIGHT_CSV_HEADER}\n");
    for r in rows {
        for (v, db) in r.per_view.iter().enumerate() {
            let _ = writeln!(s, "{},{v},{}", r.probe, format_db(*db));
        }
        let _ = writeln!(s, "{},mean,{}", r.probe, format_db(r.psnr));
    }
    s
}
