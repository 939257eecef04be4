// One versus three bounces. On a convex sphere extra bounces change
// nothing; inside a two-plane corner they add interreflected light.
//
// `cargo run --release --example bounce_depth -- [resolution] [spp]`

use glam::DVec3;
use matrecon::brdf::PbrSample;
use matrecon::image::RgbImage;
use matrecon::scene::{Camera, Scene};
use matrecon::synthetic;
use matrecon::tracer::{primary_hits, render, RenderConfig};

pub struct BounceReport {
    /// Mean |d1 - d3| over covered sphere pixels.
    pub sphere_diff: f64,
    /// Mean |a - b| between two d1 renders with different seeds.
    pub sphere_noise: f64,
    pub corner_d1: f64,
    pub corner_d3: f64,
}

fn mean_abs_diff(a: &RgbImage, b: &RgbImage, mask: &[bool]) -> f64 {
    let (s, n) = a.pixels.iter().zip(&b.pixels).zip(mask).filter(|(_, m)| **m).fold((0.0, 0), |(s, n), ((x, y), _)| {
        (s + (*x - *y).abs().element_sum() / 3.0, n + 1)
    });
    s / n as f64
}

fn mean(img: &RgbImage, mask: &[bool]) -> f64 {
    let (s, n) = img.pixels.iter().zip(mask).filter(|(_, m)| **m).fold((0.0, 0), |(s, n), (c, _)| (s + c.element_sum() / 3.0, n + 1));
    s / n as f64
}

pub fn run(resolution: u32, spp: u32) -> matrecon::Result<BounceReport> {
    let probe = synthetic::constant_probe(1.0)?;
    let material = PbrSample::new(DVec3::splat(0.7), 1.0, 0.0);
    let cfg = |d: u32, seed: u64| RenderConfig { spp, max_bounces: d, seed, diffuse_only: true, ..Default::default() };

    let sphere = Scene::new(synthetic::uv_sphere(64, 32, 1.0));
    let cam = Camera::look_at(DVec3::new(0.0, 0.0, 3.5), DVec3::ZERO, DVec3::Y, 0.65, resolution, resolution)?;
    let d1 = render(&sphere, &probe, &material, &cam, &cfg(1, 1));
    let d1b = render(&sphere, &probe, &material, &cam, &cfg(1, 2));
    let d3 = render(&sphere, &probe, &material, &cam, &cfg(3, 3));
    let covered: Vec<bool> = d1.coverage.pixels.iter().map(|c| *c == 1.0).collect();

    let corner = Scene::new(synthetic::corner(2.0));
    let ccam = Camera::look_at(DVec3::new(0.3, 1.3, 1.8), DVec3::new(0.0, 0.3, -0.6), DVec3::Y, 0.9, resolution, resolution)?;
    let c1 = render(&corner, &probe, &material, &ccam, &cfg(1, 4));
    let c3 = render(&corner, &probe, &material, &ccam, &cfg(3, 5));
    // pixels whose surface point lies within 0.5 of the crease
    let ccov: Vec<bool> = primary_hits(&corner, &ccam)
        .iter()
        .zip(&c1.coverage.pixels)
        .map(|(h, c)| *c == 1.0 && h.is_some_and(|(p, _)| p.y < 0.5 && p.z < -0.5))
        .collect();
    Ok(BounceReport {
        sphere_diff: mean_abs_diff(&d1.radiance, &d3.radiance, &covered),
        sphere_noise: mean_abs_diff(&d1.radiance, &d1b.radiance, &covered),
        corner_d1: mean(&c1.radiance, &ccov),
        corner_d3: mean(&c3.radiance, &ccov),
    })
}

#[allow(dead_code)]
fn main() -> matrecon::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u32>().ok());
    let res = args.next().flatten().unwrap_or(128);
    let spp = args.next().flatten().unwrap_or(256);
    let r = run(res, spp)?;
    println!("sphere: mean |d1-d3| {:.5}, noise floor {:.5}", r.sphere_diff, r.sphere_noise);
    println!("corner region: d1 {:.4}, d3 {:.4} ({:+.1}%)", r.corner_d1, r.corner_d3, 100.0 * (r.corner_d3 / r.corner_d1 - 1.0));
    Ok(())
}
