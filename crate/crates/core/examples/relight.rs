// Relighting table: a baked material against the ground truth under
// several probes.
//
// `cargo run --release --example relight -- [texture_resolution]`

use glam::DVec3;
use matrecon::envlight::EnvironmentProbe;
use matrecon::material::{MaterialSource, Procedural};
use matrecon::matfield::bake_textures;
use matrecon::metrics::{format_db, relight_csv, relight_eval, RelightRow};
use matrecon::scene::Scene;
use matrecon::synthetic;
use matrecon::tracer::{render, RenderConfig};

pub fn run(texture_resolution: u32, view_resolution: u32, spp: u32) -> matrecon::Result<Vec<RelightRow>> {
    let scene = Scene::new(synthetic::atlas_cube(1.0));
    let truth = Procedural(synthetic::oracle_cube_material(1.0));
    let estimate = bake_textures(&truth as &dyn MaterialSource, &scene.mesh, texture_resolution)?.to_material();
    let probes: Vec<(String, EnvironmentProbe)> = vec![
        ("sky".into(), synthetic::sky_probe(128, 64, DVec3::new(0.5, 0.8, 0.3), 40.0)?),
        ("low_sun".into(), synthetic::sky_probe(128, 64, DVec3::new(-0.8, 0.2, 0.4), 60.0)?),
        ("gradient".into(), synthetic::gradient_probe(64, 32)?),
    ];
    let cams: Vec<_> = synthetic::oracle_cameras(scene.bounds().center().as_dvec3(), view_resolution)?.into_iter().step_by(4).collect();
    let cfg = RenderConfig { spp, max_bounces: 2, seed: 4, ..Default::default() };
    let truth_imgs = probes
        .iter()
        .map(|(_, p)| cams.iter().map(|c| render(&scene, p, &truth, c, &cfg).tonemapped()).collect())
        .collect::<Vec<_>>();
    relight_eval(&scene, &estimate, &probes, &cams, &truth_imgs, None, &cfg)
}

#[allow(dead_code)]
fn main() -> matrecon::Result<()> {
    let tex = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(512);
    let rows = run(tex, 96, 16)?;
    print!("{}", relight_csv(&rows));
    for r in &rows {
        println!("{}: {} dB", r.probe, format_db(r.psnr));
    }
    Ok(())
}
