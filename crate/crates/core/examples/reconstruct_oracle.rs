// Self-rendered oracle: render a textured cube from 16 views, reconstruct
// its materials from scratch and compare the bake against the truth.
//
// `cargo run --release --example reconstruct_oracle -- [iterations]`
//
// ORACLE_RES, ORACLE_REF_SPP, ORACLE_BATCH, ORACLE_SPP, ORACLE_SPP_BWD,
// ORACLE_BOUNCES and ORACLE_TEX override the defaults.

use std::time::Instant;

use glam::DVec3;
use matrecon::material::{MaterialSource, Procedural};
use matrecon::matfield::{bake_textures, FieldConfig, MaterialField};
use matrecon::pipeline::synthesize_frameset;
use matrecon::recon::{reconstruct_with, LossRecord, OptimSettings};
use matrecon::scene::Scene;
use matrecon::synthetic;
use matrecon::tracer::RenderConfig;

pub struct OracleOptions {
    pub iterations: usize,
    pub resolution: u32,
    pub reference_spp: u32,
    pub batch_size: usize,
    pub spp: u32,
    pub spp_backward: u32,
    pub max_bounces: u32,
    pub texture_resolution: u32,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            iterations: 300,
            resolution: 128,
            reference_spp: 64,
            batch_size: 2,
            spp: 4,
            spp_backward: 1,
            max_bounces: 2,
            texture_resolution: 256,
        }
    }
}

pub struct OracleReport {
    pub field: MaterialField,
    pub history: Vec<LossRecord>,
    pub mae_base_color: f64,
    pub mae_roughness: f64,
    pub mae_metallic: f64,
    pub reference_seconds: f64,
    pub optimize_seconds: f64,
}

pub fn run(opts: &OracleOptions, progress: bool) -> matrecon::Result<OracleReport> {
    let scene = Scene::new(synthetic::atlas_cube(1.0));
    let probe = synthetic::sky_probe(128, 64, DVec3::new(0.5, 0.8, 0.3), 40.0)?;
    let truth = Procedural(synthetic::oracle_cube_material(1.0));
    let cams = synthetic::oracle_cameras(scene.bounds().center().as_dvec3(), opts.resolution)?;
    let t0 = Instant::now();
    let reference_cfg = RenderConfig { spp: opts.reference_spp, max_bounces: 2, seed: 1, ..Default::default() };
    let frames = synthesize_frameset(&scene, &probe, &truth, &cams, &reference_cfg, true)?;
    let reference_seconds = t0.elapsed().as_secs_f64();

    let settings = OptimSettings {
        iterations: opts.iterations,
        batch_size: opts.batch_size,
        lambda: 0.2,
        seed: 7,
        render: RenderConfig {
            spp: opts.spp,
            spp_backward: opts.spp_backward,
            max_bounces: opts.max_bounces,
            ..Default::default()
        },
        ..Default::default()
    };
    let field = MaterialField::for_bounds(FieldConfig::small(), &scene.bounds())?;
    let t1 = Instant::now();
    let rec = reconstruct_with(&frames, &scene, &probe, field, &settings, &mut |r, _| {
        if progress && r.iteration % 25 == 0 {
            println!("iter {:4}  total {:.4}  image {:.4}  ({:.1}s)", r.iteration, r.total, r.parts.image, t1.elapsed().as_secs_f64());
        }
        Ok(())
    })?;
    let optimize_seconds = t1.elapsed().as_secs_f64();

    let baked = bake_textures(&rec.field, &scene.mesh, opts.texture_resolution)?;
    let want = bake_textures(&truth as &dyn MaterialSource, &scene.mesh, opts.texture_resolution)?;
    let (mut eb, mut er, mut em, mut n) = (0.0, 0.0, 0.0, 0usize);
    for i in 0..baked.mask.len() {
        if baked.mask.pixels[i] > 0.5 {
            eb += (baked.base_color.pixels[i] - want.base_color.pixels[i]).abs().element_sum() / 3.0;
            er += (baked.roughness.pixels[i] - want.roughness.pixels[i]).abs();
            em += (baked.metallic.pixels[i] - want.metallic.pixels[i]).abs();
            n += 1;
        }
    }
    let n = n as f64;
    Ok(OracleReport {
        field: rec.field,
        history: rec.history,
        mae_base_color: eb / n,
        mae_roughness: er / n,
        mae_metallic: em / n,
        reference_seconds,
        optimize_seconds,
    })
}

#[allow(dead_code)]
fn env<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

#[allow(dead_code)]
fn main() -> matrecon::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let d = OracleOptions::default();
    let opts = OracleOptions {
        iterations: std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(d.iterations),
        resolution: env("ORACLE_RES", d.resolution),
        reference_spp: env("ORACLE_REF_SPP", d.reference_spp),
        batch_size: env("ORACLE_BATCH", d.batch_size),
        spp: env("ORACLE_SPP", d.spp),
        spp_backward: env("ORACLE_SPP_BWD", d.spp_backward),
        max_bounces: env("ORACLE_BOUNCES", d.max_bounces),
        texture_resolution: env("ORACLE_TEX", d.texture_resolution),
    };
    let r = run(&opts, true)?;
    println!("references: {:.1}s, optimization: {:.1}s", r.reference_seconds, r.optimize_seconds);
    println!("MAE base {:.4}  roughness {:.4}  metallic {:.4}", r.mae_base_color, r.mae_roughness, r.mae_metallic);
    Ok(())
}
