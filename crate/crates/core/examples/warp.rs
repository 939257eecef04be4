// Depth-based reprojection of one rendered view along an orbit, compared
// with direct renders of the destination views.
//
// `cargo run --release --example warp -- [resolution] [targets]`

use glam::DVec3;
use matrecon::image::GrayImage;
use matrecon::material::Procedural;
use matrecon::metrics::{format_db, psnr};
use matrecon::scene::{generate_orbit, Scene};
use matrecon::synthetic;
use matrecon::tracer::{primary_hits, render, RenderConfig};
use matrecon::warp::{render_depth, warp_image};

pub struct WarpRow {
    pub target: usize,
    /// Fraction of covered destination pixels with no warped source.
    pub disoccluded: f64,
    /// PSNR against the direct render over warped, covered pixels.
    pub psnr: f64,
}

pub fn run(resolution: u32, targets: usize) -> matrecon::Result<Vec<WarpRow>> {
    let scene = Scene::new(synthetic::atlas_cube(1.0));
    let probe = synthetic::sky_probe(128, 64, DVec3::new(0.5, 0.8, 0.3), 40.0)?;
    let material = Procedural(synthetic::oracle_cube_material(1.0));
    // 48 frames per turn: neighbours are 7.5 degrees apart
    let cams = generate_orbit(48, 0.35, 2.6, scene.bounds().center(), 0.75, resolution, resolution)?;
    let cfg = RenderConfig { spp: 32, max_bounces: 2, seed: 6, ..Default::default() };
    let src = render(&scene, &probe, &material, &cams[0], &cfg).tonemapped();
    let depth = render_depth(&scene, &cams[0]);
    let mut rows = Vec::new();
    for t in 0..=targets.min(cams.len() - 1) {
        let warped = warp_image(&src, &depth, &cams[0], &cams[t])?;
        let direct = render(&scene, &probe, &material, &cams[t], &cfg).tonemapped();
        let hits = primary_hits(&scene, &cams[t]);
        let covered = hits.iter().filter(|h| h.is_some()).count();
        let holes = hits.iter().zip(&warped.mask.pixels).filter(|(h, m)| h.is_some() && **m == 0.0).count();
        let valid = GrayImage {
            width: resolution,
            height: resolution,
            pixels: hits.iter().zip(&warped.mask.pixels).map(|(h, m)| if h.is_some() && *m > 0.5 { 1.0 } else { 0.0 }).collect(),
        };
        rows.push(WarpRow {
            target: t,
            disoccluded: holes as f64 / covered.max(1) as f64,
            psnr: psnr(&warped.image, &direct, Some(&valid))?,
        });
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> matrecon::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().ok());
    let res = args.next().flatten().unwrap_or(128) as u32;
    let targets = args.next().flatten().unwrap_or(4);
    for r in run(res, targets)? {
        println!("target {}: {:.1}% disoccluded, {} dB vs direct render", r.target, 100.0 * r.disoccluded, format_db(r.psnr));
    }
    Ok(())
}
