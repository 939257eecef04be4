// Bakes a material source into UV maps and checks that rendering with the
// maps reproduces rendering with the source.
//
// `cargo run --release --example bake -- [texture_resolution] [checkpoint.bin] [out_dir]`
//
// Without a checkpoint the oracle cube material is baked.

use std::path::{Path, PathBuf};

use glam::DVec3;
use matrecon::material::{MaterialSource, Procedural};
use matrecon::matfield::{bake_textures, load_checkpoint, save_maps};
use matrecon::metrics::{format_db, psnr};
use matrecon::scene::Scene;
use matrecon::synthetic;
use matrecon::tracer::{primary_hits, render, RenderConfig};
use matrecon::image::GrayImage;

/// Mean masked PSNR over the oracle views between renders with `source`
/// and with its bake.
pub fn run(source: &dyn MaterialSource, texture_resolution: u32, view_resolution: u32, spp: u32, out: Option<&Path>) -> matrecon::Result<f64> {
    let scene = Scene::new(synthetic::atlas_cube(1.0));
    let probe = synthetic::sky_probe(128, 64, DVec3::new(0.5, 0.8, 0.3), 40.0)?;
    let maps = bake_textures(source, &scene.mesh, texture_resolution)?;
    if let Some(dir) = out {
        save_maps(dir, &maps)?;
    }
    let baked = maps.to_material();
    let cams = synthetic::oracle_cameras(scene.bounds().center().as_dvec3(), view_resolution)?;
    let cfg = RenderConfig { spp, max_bounces: 2, seed: 9, ..Default::default() };
    let mut total = 0.0;
    for cam in cams.iter().step_by(4) {
        // identical seeds: the two renders share every sample
        let a = render(&scene, &probe, source, cam, &cfg).tonemapped();
        let b = render(&scene, &probe, &baked, cam, &cfg).tonemapped();
        let mask = GrayImage {
            width: cam.width,
            height: cam.height,
            pixels: primary_hits(&scene, cam).iter().map(|h| if h.is_some() { 1.0 } else { 0.0 }).collect(),
        };
        total += psnr(&a, &b, Some(&mask))?;
    }
    Ok(total / cams.iter().step_by(4).count() as f64)
}

#[allow(dead_code)]
fn main() -> matrecon::Result<()> {
    let mut args = std::env::args().skip(1);
    let tex = args.next().and_then(|a| a.parse().ok()).unwrap_or(1024);
    let source: Box<dyn MaterialSource> = match args.next() {
        Some(p) if p != "-" => Box::new(load_checkpoint(p)?),
        _ => Box::new(Procedural(synthetic::oracle_cube_material(1.0))),
    };
    let out = args.next().map_or_else(|| PathBuf::from("out/bake"), PathBuf::from);
    let db = run(source.as_ref(), tex, 128, 16, Some(&out))?;
    println!("maps in {}; source vs baked PSNR {} dB", out.display(), format_db(db));
    Ok(())
}
