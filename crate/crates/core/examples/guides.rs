// Normal and shading guides for a few orbit frames of a bumpy sphere.
//
// `cargo run --release --example guides -- [out_dir] [frames] [resolution]`

use std::path::{Path, PathBuf};

use matrecon::guides::write_frame_guides;
use matrecon::scene::{generate_orbit, Scene};
use matrecon::synthetic;
use matrecon::tracer::{derive_seed, RenderConfig};

pub fn run(out: &Path, frames: usize, resolution: u32) -> matrecon::Result<Vec<PathBuf>> {
    let scene = Scene::new(synthetic::noisy_sphere(96, 48, 0.08, 5));
    let probe = synthetic::gradient_probe(64, 32)?;
    let cams = generate_orbit(frames, 0.3, 3.2, scene.bounds().center(), 0.7, resolution, resolution)?;
    let cfg = RenderConfig { spp: 32, max_bounces: 3, seed: 2, ..Default::default() };
    let mut written = Vec::new();
    for (i, cam) in cams.iter().enumerate() {
        write_frame_guides(out, i, &scene, &probe, cam, &cfg.with_seed(derive_seed(cfg.seed, &[i as u64])))?;
        written.push(matrecon::guides::normal_guide_path(out, i));
        written.push(matrecon::guides::shading_guide_path(out, i));
    }
    Ok(written)
}

#[allow(dead_code)]
fn main() -> matrecon::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map_or_else(|| PathBuf::from("out/guides"), PathBuf::from);
    let frames = args.next().and_then(|a| a.parse().ok()).unwrap_or(4);
    let res = args.next().and_then(|a| a.parse().ok()).unwrap_or(128);
    for p in run(&out, frames, res)? {
        println!("{}", p.display());
    }
    Ok(())
}
