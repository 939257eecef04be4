//! Subcommand drivers shared by the binary, the examples and the tests.
//! Each reads a validated [`Config`], writes under an output directory and
//! echoes the resolved config there.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::{Config, RESOLVED_CONFIG};
use crate::envlight::load_probe;
use crate::error::{Error, Result};
use crate::guides::write_frame_guides;
use crate::image::{load_gray, load_rgb, save_gray8, save_rgb16, save_rgb8, write_rgb_dump, GrayImage, RgbImage};
use crate::matfield::{bake_textures, load_checkpoint, save_checkpoint, save_maps, MaterialField};
use crate::metrics::{format_db, psnr, relight_csv, relight_eval};
use crate::recon::{frame_name, loss_csv, reconstruct_with, Frame, FrameSet, Guides};
use crate::scene::write_cameras;
use crate::tracer::{derive_seed, primary_hits, render, render_intrinsics, tonemap};
use crate::warp::{render_depth, save_depth, warp_image};

pub const LOSS_CSV: &str = "loss.csv";
pub const FIELD_CHECKPOINT: &str = "field.bin";
pub const MAPS_DIR: &str = "maps";
pub const RELIGHT_CSV: &str = "relight.csv";
pub const METRICS_CSV: &str = "metrics.csv";

fn prepare(cfg: &Config, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_text(&out.join(RESOLVED_CONFIG), &cfg.to_toml())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn require(opt: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
    opt.clone().ok_or_else(|| Error::Config(format!("{key} is required for this subcommand")))
}

/// Renders every camera with `[material]`, producing a FrameSet directory
/// (plus optional HDR dumps and ground-truth guides).
pub fn run_render(cfg: &Config, out: &Path) -> Result<()> {
    prepare(cfg, out)?;
    let scene = cfg.load_scene()?;
    let probe = cfg.load_probe()?;
    let material = cfg.material.load()?;
    let cams = cfg.cameras(&scene)?;
    write_text(&out.join("cameras.txt"), &write_cameras(&cams))?;
    for (i, cam) in cams.iter().enumerate() {
        let name = frame_name(i);
        let img = render(&scene, &probe, material.as_ref(), cam, &cfg.render.with_seed(derive_seed(cfg.render.seed, &[i as u64])));
        let display = img.tonemapped();
        if cfg.export.bit_depth == 16 {
            save_rgb16(out.join("frames").join(&name), &display)?;
        } else {
            save_rgb8(out.join("frames").join(&name), &display)?;
        }
        if cfg.export.hdr {
            write_rgb_dump(out.join("hdr").join(format!("{i:05}.bin")), &img.radiance)?;
        }
        let intr = render_intrinsics(&scene, material.as_ref(), cam);
        save_gray8(out.join("masks").join(&name), &intr.hit_mask())?;
        if cfg.export.intrinsics {
            save_rgb8(out.join("guides/basecolor").join(&name), &intr.base_color.map(|c| tonemap(*c)))?;
            save_gray8(out.join("guides/roughness").join(&name), &intr.roughness)?;
            save_gray8(out.join("guides/metallic").join(&name), &intr.metallic)?;
        }
        log::info!("rendered frame {i}");
    }
    Ok(())
}

/// Normal and shading guides for every camera, in `<out>/guides`.
pub fn run_guides(cfg: &Config, out: &Path) -> Result<()> {
    prepare(cfg, out)?;
    let scene = cfg.load_scene()?;
    let probe = cfg.load_probe()?;
    let cams = cfg.cameras(&scene)?;
    let dir = out.join("guides");
    for (i, cam) in cams.iter().enumerate() {
        let rc = cfg.render.with_seed(derive_seed(cfg.render.seed, &[i as u64]));
        write_frame_guides(&dir, i, &scene, &probe, cam, &rc)?;
    }
    Ok(())
}

/// Optimizes a field against `[reconstruct].frameset`; writes the loss
/// history, the final checkpoint, periodic checkpoints and the baked maps.
pub fn run_reconstruct(cfg: &Config, out: &Path) -> Result<MaterialField> {
    prepare(cfg, out)?;
    let frames = FrameSet::load(require(&cfg.reconstruct.frameset, "reconstruct.frameset")?)?;
    let scene = cfg.load_scene()?;
    let probe = cfg.load_probe()?;
    let settings = cfg.optim_settings();
    let field = MaterialField::for_bounds(cfg.field.clone(), &scene.bounds())?;
    let every = settings.checkpoint_every;
    let ckpt_dir = out.join("checkpoints");
    let mut history = Vec::new();
    let result = reconstruct_with(&frames, &scene, &probe, field, &settings, &mut |rec, field| {
        history.push(*rec);
        if every > 0 && (rec.iteration + 1) % every == 0 {
            save_checkpoint(ckpt_dir.join(format!("{:05}.bin", rec.iteration + 1)), field)?;
        }
        Ok(())
    });
    // the history up to a divergence is still worth keeping
    write_text(&out.join(LOSS_CSV), &loss_csv(&history))?;
    let rec = result?;
    save_checkpoint(out.join(FIELD_CHECKPOINT), &rec.field)?;
    if cfg.reconstruct.bake {
        let maps = bake_textures(&rec.field, &scene.mesh, cfg.bake.resolution)?;
        save_maps(out.join(MAPS_DIR), &maps)?;
    }
    Ok(rec.field)
}

/// Bakes `[bake].checkpoint` into `<out>/maps`.
pub fn run_bake(cfg: &Config, out: &Path) -> Result<()> {
    prepare(cfg, out)?;
    let field = load_checkpoint(require(&cfg.bake.checkpoint, "bake.checkpoint")?)?;
    let scene = cfg.load_scene()?;
    let maps = bake_textures(&field, &scene.mesh, cfg.bake.resolution)?;
    if maps.overlaps > 0 {
        log::warn!("bake: {} texels claimed by more than one triangle", maps.overlaps);
    }
    save_maps(out.join(MAPS_DIR), &maps)
}

/// Relights `[material]` under every probe and writes a PSNR table against
/// pre-rendered truth or a reference material.
pub fn run_relight(cfg: &Config, out: &Path) -> Result<()> {
    prepare(cfg, out)?;
    let scene = cfg.load_scene()?;
    let material = cfg.material.load()?;
    let cams = cfg.cameras(&scene)?;
    let r = &cfg.relight;
    let probes = r
        .probes
        .iter()
        .map(|p| {
            let probe = load_probe(p)?.with_rotation(cfg.scene.probe_rotation).with_filter(cfg.scene.probe_filter);
            let name = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
            Ok((name, probe))
        })
        .collect::<Result<Vec<_>>>()?;
    // truth renders use an independent seed so noise does not cancel
    let truth_cfg = cfg.render.with_seed(derive_seed(cfg.render.seed, &[u64::MAX]));
    let truth: Vec<Vec<RgbImage>> = match (&r.truth_dir, &r.reference) {
        (Some(dir), _) => (0..probes.len())
            .map(|p| cams.iter().enumerate().map(|(v, _)| load_rgb(dir.join(format!("{p:02}")).join(frame_name(v)))).collect())
            .collect::<Result<_>>()?,
        (None, Some(spec)) => {
            let reference = spec.load()?;
            probes
                .iter()
                .map(|(_, probe)| cams.iter().map(|c| render(&scene, probe, reference.as_ref(), c, &truth_cfg).tonemapped()).collect())
                .collect()
        }
        (None, None) => return Err(Error::Config("relight needs truth_dir or reference".into())),
    };
    let masks: Vec<GrayImage> = cams
        .iter()
        .map(|c| {
            let hits = primary_hits(&scene, c);
            GrayImage {
                width: c.width,
                height: c.height,
                pixels: hits.iter().map(|h| if h.is_some() { 1.0 } else { 0.0 }).collect(),
            }
        })
        .collect();
    let rows = relight_eval(&scene, material.as_ref(), &probes, &cams, &truth, Some(&masks), &cfg.render)?;
    if r.save_images {
        for (p, (_, probe)) in probes.iter().enumerate() {
            for (v, c) in cams.iter().enumerate() {
                let img = render(&scene, probe, material.as_ref(), c, &cfg.render).tonemapped();
                save_rgb8(out.join("relight").join(format!("{p:02}")).join(frame_name(v)), &img)?;
            }
        }
    }
    write_text(&out.join(RELIGHT_CSV), &relight_csv(&rows))
}

/// Per-frame PSNR between two directories of frames.
pub fn run_metrics(cfg: &Config, out: &Path) -> Result<()> {
    prepare(cfg, out)?;
    let m = &cfg.metrics;
    let a_dir = require(&m.a, "metrics.a")?;
    let b_dir = require(&m.b, "metrics.b")?;
    let mut csv = String::from("frame,psnr_db\n");
    let mut finite = Vec::new();
    for i in 0.. {
        let name = frame_name(i);
        if !a_dir.join(&name).exists() {
            break;
        }
        let a = load_rgb(a_dir.join(&name))?;
        let b = load_rgb(b_dir.join(&name))?;
        let mask = m.masks.as_ref().map(|d| load_gray(d.join(&name))).transpose()?;
        let db = psnr(&a, &b, mask.as_ref())?;
        if db.is_finite() {
            finite.push(db);
        }
        let _ = writeln!(csv, "{i},{}", format_db(db));
    }
    if !finite.is_empty() {
        let _ = writeln!(csv, "mean_finite,{}", format_db(finite.iter().sum::<f64>() / finite.len() as f64));
    }
    write_text(&out.join(METRICS_CSV), &csv)
}

/// Warps the source view to every target camera.
pub fn run_warp(cfg: &Config, out: &Path) -> Result<()> {
    prepare(cfg, out)?;
    let scene = cfg.load_scene()?;
    let cams = cfg.cameras(&scene)?;
    let w = &cfg.warp;
    let src_cam = *cams
        .get(w.source)
        .ok_or_else(|| Error::Config(format!("warp.source {} out of range ({} cameras)", w.source, cams.len())))?;
    let src = match &w.image {
        Some(p) => load_rgb(p)?,
        None => {
            let probe = cfg.load_probe()?;
            let material = cfg.material.load()?;
            render(&scene, &probe, material.as_ref(), &src_cam, &cfg.render).tonemapped()
        }
    };
    let depth = render_depth(&scene, &src_cam);
    let dir = out.join("warp");
    save_depth(dir.join("depth.bin"), &depth)?;
    save_rgb8(dir.join("source.png"), &src)?;
    let targets: Vec<usize> = if w.targets.is_empty() { (0..cams.len()).collect() } else { w.targets.clone() };
    for t in targets {
        let dst = cams
            .get(t)
            .ok_or_else(|| Error::Config(format!("warp target {t} out of range ({} cameras)", cams.len())))?;
        let warped = warp_image(&src, &depth, &src_cam, dst)?;
        save_rgb8(dir.join("frames").join(frame_name(t)), &warped.image)?;
        save_gray8(dir.join("masks").join(frame_name(t)), &warped.mask)?;
    }
    Ok(())
}

/// Builds an in-memory FrameSet by rendering `material` from `cameras`;
/// guides hold the material's own intrinsics.
pub fn synthesize_frameset(
    scene: &crate::scene::Scene,
    probe: &crate::envlight::EnvironmentProbe,
    material: &dyn crate::material::MaterialSource,
    cameras: &[crate::scene::Camera],
    config: &crate::tracer::RenderConfig,
    with_guides: bool,
) -> Result<FrameSet> {
    let frames = cameras
        .iter()
        .enumerate()
        .map(|(i, cam)| {
            let img = render(scene, probe, material, cam, &config.with_seed(derive_seed(config.seed, &[i as u64])));
            let intr = render_intrinsics(scene, material, cam);
            Frame {
                camera: *cam,
                reference: img.tonemapped(),
                mask: intr.hit_mask(),
                guides: with_guides.then(|| Guides {
                    base_color: intr.base_color.map(|c| tonemap(*c)),
                    roughness: intr.roughness.clone(),
                    metallic: intr.metallic.clone(),
                }),
            }
        })
        .collect();
    FrameSet::new(frames)
}
