// White furnace: a diffuse sphere under a constant unit probe reflects
// exactly its albedo.
//
// `cargo run --release --example furnace -- [resolution] [spp]`

use std::time::Instant;

use glam::DVec3;
use matrecon::brdf::PbrSample;
use matrecon::scene::{Camera, Scene};
use matrecon::synthetic;
use matrecon::tracer::{render, RenderConfig};

pub struct FurnaceReport {
    pub albedo: f64,
    pub covered_pixels: usize,
    /// Largest per-channel relative deviation from the albedo over fully covered pixels.
    pub worst_relative_error: f64,
    pub seconds: f64,
}

pub fn run(resolution: u32, spp: u32, albedo: f64) -> matrecon::Result<FurnaceReport> {
    let scene = Scene::new(synthetic::uv_sphere(64, 32, 1.0));
    let probe = synthetic::constant_probe(1.0)?;
    let cam = Camera::look_at(DVec3::new(0.0, 0.0, 3.5), DVec3::ZERO, DVec3::Y, 0.65, resolution, resolution)?;
    let t = Instant::now();
    let cfg = RenderConfig { spp, max_bounces: 1, diffuse_only: true, ..Default::default() };
    let img = render(&scene, &probe, &PbrSample::new(DVec3::splat(albedo), 1.0, 0.0), &cam, &cfg);
    let seconds = t.elapsed().as_secs_f64();
    let (mut worst, mut n) = (0.0f64, 0);
    for (c, cov) in img.radiance.pixels.iter().zip(&img.coverage.pixels) {
        if *cov == 1.0 {
            worst = worst.max(((*c - DVec3::splat(albedo)) / albedo).abs().max_element());
            n += 1;
        }
    }
    Ok(FurnaceReport { albedo, covered_pixels: n, worst_relative_error: worst, seconds })
}

#[allow(dead_code)]
fn main() -> matrecon::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u32>().ok());
    let res = args.next().flatten().unwrap_or(256);
    let spp = args.next().flatten().unwrap_or(1024);
    for albedo in [0.2, 0.7] {
        let r = run(res, spp, albedo)?;
        println!(
            "albedo {albedo}: {} covered pixels, worst relative error {:.3}%, {:.1}s on {} worker(s)",
            r.covered_pixels,
            100.0 * r.worst_relative_error,
            r.seconds,
            rayon::current_num_threads()
        );
    }
    Ok(())
}
