// Renders the oracle cube along a fixed-elevation orbit into a FrameSet
// directory (frames, masks, ground-truth guides, cameras.txt).
//
// `cargo run --release --example orbit_render -- [out_dir] [frames] [resolution] [spp]`

use std::path::{Path, PathBuf};

use glam::DVec3;
use matrecon::material::Procedural;
use matrecon::pipeline::synthesize_frameset;
use matrecon::recon::FrameSet;
use matrecon::scene::{generate_orbit, Scene};
use matrecon::synthetic;
use matrecon::tracer::RenderConfig;

pub fn run(out: &Path, frames: usize, resolution: u32, spp: u32) -> matrecon::Result<FrameSet> {
    let scene = Scene::new(synthetic::atlas_cube(1.0));
    let probe = synthetic::sky_probe(128, 64, DVec3::new(0.5, 0.8, 0.3), 40.0)?;
    let material = Procedural(synthetic::oracle_cube_material(1.0));
    let cams = generate_orbit(frames, 0.35, 2.6, scene.bounds().center(), 0.75, resolution, resolution)?;
    let cfg = RenderConfig { spp, max_bounces: 3, seed: 1, ..Default::default() };
    let set = synthesize_frameset(&scene, &probe, &material, &cams, &cfg, true)?;
    set.save(out)?;
    Ok(set)
}

#[allow(dead_code)]
fn main() -> matrecon::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map_or_else(|| PathBuf::from("out/orbit_render"), PathBuf::from);
    let frames = args.next().and_then(|a| a.parse().ok()).unwrap_or(8);
    let res = args.next().and_then(|a| a.parse().ok()).unwrap_or(128);
    let spp = args.next().and_then(|a| a.parse().ok()).unwrap_or(64);
    let set = run(&out, frames, res, spp)?;
    println!("wrote {} frames to {}", set.len(), out.display());
    Ok(())
}
