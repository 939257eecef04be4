// Regularizer ablation: the reference frames carry a hard shadow painted
// into the albedo, the guides carry the true constant albedo. Without the
// regularizer the shadow is baked into the base colour; with it the
// recovered base colour is flatter.
//
// `cargo run --release --example shadow_ablation -- [iterations]`

use glam::{DVec2, DVec3};
use matrecon::brdf::PbrSample;
use matrecon::material::Procedural;
use matrecon::matfield::{bake_textures, FieldConfig, MaterialField};
use matrecon::math::luminance;
use matrecon::pipeline::synthesize_frameset;
use matrecon::recon::{reconstruct, OptimSettings};
use matrecon::scene::{generate_orbit, Scene};
use matrecon::synthetic;
use matrecon::tracer::{render_intrinsics, srgb_encode, RenderConfig};

const ALBEDO: f64 = 0.6;

fn in_shadow(p: DVec3) -> bool {
    p.x < 0.0
}

pub struct AblationOptions {
    pub iterations: usize,
    pub resolution: u32,
    pub batch_size: usize,
    pub spp: u32,
    /// Albedo factor under the painted shadow.
    pub shadow: f64,
}

impl Default for AblationOptions {
    fn default() -> Self {
        AblationOptions { iterations: 300, resolution: 64, batch_size: 2, spp: 4, shadow: 0.35 }
    }
}

pub struct AblationRun {
    pub lambda: f64,
    pub mean: f64,
    /// Standard deviation of baked base-colour luminance over covered texels.
    pub std: f64,
    pub final_loss: f64,
}

pub fn run(opts: &AblationOptions) -> matrecon::Result<Vec<AblationRun>> {
    let res = opts.resolution;
    let scene = Scene::new(synthetic::floor(2.0, 2.0));
    let probe = synthetic::sky_probe(64, 32, DVec3::new(0.4, 0.8, 0.3), 30.0)?;
    let cams = generate_orbit(12, 1.0, 2.5, scene.bounds().center(), 0.9, res, res)?;
    let shadow = opts.shadow;
    // albedo darkened under the painted shadow
    let painted = Procedural(move |p: DVec3, _: DVec2| {
        let a = if in_shadow(p) { ALBEDO * shadow } else { ALBEDO };
        PbrSample::new(DVec3::splat(a), 0.7, 0.0)
    });
    let truth = PbrSample::new(DVec3::splat(ALBEDO), 0.7, 0.0);
    let rc = RenderConfig { spp: 64, max_bounces: 2, seed: 3, ..Default::default() };
    let mut frames = synthesize_frameset(&scene, &probe, &painted, &cams, &rc, true)?;
    for (f, cam) in frames.frames.iter_mut().zip(&cams) {
        let intr = render_intrinsics(&scene, &truth, cam);
        let g = f.guides.as_mut().expect("synthesized with guides");
        g.base_color = intr.base_color.map(|c| DVec3::new(srgb_encode(c.x), srgb_encode(c.y), srgb_encode(c.z)));
    }
    let mut runs = Vec::new();
    for lambda in [0.0, 0.2] {
        let settings = OptimSettings {
            iterations: opts.iterations,
            batch_size: opts.batch_size,
            lambda,
            seed: 5,
            render: RenderConfig { spp: opts.spp, spp_backward: 1, max_bounces: 2, ..Default::default() },
            ..Default::default()
        };
        let field = MaterialField::for_bounds(FieldConfig::small(), &scene.bounds())?;
        let rec = reconstruct(&frames, &scene, &probe, field, &settings)?;
        let maps = bake_textures(&rec.field, &scene.mesh, 64)?;
        let vals: Vec<f64> = (0..maps.mask.len())
            .filter(|i| maps.mask.pixels[*i] > 0.5)
            .map(|i| luminance(maps.base_color.pixels[i]))
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let std = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64).sqrt();
        runs.push(AblationRun { lambda, mean, std, final_loss: rec.history.last().map_or(0.0, |r| r.total) });
    }
    Ok(runs)
}

#[allow(dead_code)]
fn main() -> matrecon::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let iterations = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(300);
    let runs = run(&AblationOptions { iterations, ..Default::default() })?;
    for r in &runs {
        println!("lambda {}: base colour mean {:.4} std {:.4}  final loss {:.4}", r.lambda, r.mean, r.std, r.final_loss);
    }
    println!("std reduction {:.1}%", 100.0 * (1.0 - runs[1].std / runs[0].std));
    Ok(())
}
