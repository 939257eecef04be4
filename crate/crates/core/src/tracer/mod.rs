//! Forward path tracing and the detached adjoint pass.
//!
//! Every path vertex does next-event estimation with one probe sample and
//! continues with one BSDF sample; both are combined with the power
//! heuristic. Paths stop after `max_bounces` vertices. The adjoint pass
//! replays the same paths and differentiates only the BSDF evaluations, so
//! gradients reach the material field but never the sampling decisions.

mod sampler;
mod tonemap;

pub use sampler::{derive_seed, dims_for, mix64, PixelSamples};
pub use tonemap::{srgb_decode, srgb_decode_rgb, srgb_encode, srgb_encode_grad, tonemap, tonemap_grad};

use std::sync::atomic::{AtomicU64, Ordering};

use glam::{DVec2, DVec3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brdf::{mis_weight, Bsdf, PbrSample};
use crate::envlight::EnvironmentProbe;
use crate::error::{Error, Result};
use crate::image::{GrayImage, Image, RgbImage};
use crate::material::MaterialSource;
use crate::matfield::MaterialField;
use crate::scene::{Camera, Ray, Scene, ShadePoint};

/// Rows per work unit in the adjoint pass; gradient records are merged band
/// by band in image order.
const BACKWARD_BAND_ROWS: u32 = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    pub spp: u32,
    pub spp_backward: u32,
    pub max_bounces: u32,
    pub seed: u64,
    pub diffuse_only: bool,
    /// Overrides the camera resolution when set.
    pub width: Option<u32>,
    pub height: Option<u32>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            spp: 128,
            spp_backward: 4,
            max_bounces: 3,
            seed: 0,
            diffuse_only: false,
            width: None,
            height: None,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spp == 0 || self.spp_backward == 0 {
            return Err(Error::Config("render: spp must be at least 1".into()));
        }
        if self.max_bounces == 0 {
            return Err(Error::Config("render: max_bounces must be at least 1".into()));
        }
        if self.width == Some(0) || self.height == Some(0) {
            return Err(Error::Config("render: width and height must be at least 1".into()));
        }
        Ok(())
    }

    pub fn camera(&self, camera: &Camera) -> Camera {
        camera.with_resolution(self.width.unwrap_or(camera.width), self.height.unwrap_or(camera.height))
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        RenderConfig { seed, ..self.clone() }
    }
}

#[derive(Clone, Debug)]
pub struct RenderedImage {
    /// Linear HDR radiance.
    pub radiance: RgbImage,
    /// Fraction of primary samples that hit the mesh.
    pub coverage: GrayImage,
    /// Non-finite samples that were discarded.
    pub dropped_samples: u64,
}

impl RenderedImage {
    pub fn tonemapped(&self) -> RgbImage {
        self.radiance.map(|c| tonemap(*c))
    }
}

/// Per-vertex quantities the adjoint pass needs.
#[derive(Clone, Copy, Debug)]
struct Vertex {
    position: DVec3,
    wo: DVec3,
    n: DVec3,
    bsdf: Bsdf,
    /// Throughput before this vertex.
    throughput: DVec3,
    /// Light-sample direction, cosine and `L·w/pdf`.
    light: Option<(DVec3, f64, DVec3)>,
    /// Continuation direction and `cos/pdf`.
    cont: Option<(DVec3, f64)>,
    /// NEE term without throughput.
    nee: DVec3,
    /// `f·cos/pdf` of the continuation.
    cont_weight: DVec3,
    /// Radiance brought back by an escaping continuation.
    escaped: DVec3,
    /// Whether the continuation reached the next recorded vertex.
    continues: bool,
}

struct PathTracer<'a> {
    scene: &'a Scene,
    probe: &'a EnvironmentProbe,
    eval: &'a dyn MaterialSource,
    sampling: Option<&'a dyn MaterialSource>,
    max_bounces: u32,
    diffuse_only: bool,
}

impl PathTracer<'_> {
    fn bsdf(&self, src: &dyn MaterialSource, sp: &ShadePoint) -> Bsdf {
        Bsdf::new(src.eval(sp.position, sp.uv)).with_diffuse_only(self.diffuse_only)
    }

    /// Radiance along a primary ray and whether it hit the mesh. `dims` holds
    /// two jitter values followed by five per bounce.
    fn trace(&self, primary: Ray, dims: &[f64], mut record: Option<&mut Vec<Vertex>>) -> (DVec3, bool) {
        let Some(mut hit) = self.scene.intersect(&primary) else {
            return (self.probe.radiance(crate::math::to_f64(primary.dir)), false);
        };
        let mut ray = primary;
        let mut radiance = DVec3::ZERO;
        let mut throughput = DVec3::ONE;
        for bounce in 0..self.max_bounces as usize {
            let sp = self.scene.shade_point(&hit, &ray);
            let be = self.bsdf(self.eval, &sp);
            let bs = match self.sampling {
                Some(src) => self.bsdf(src, &sp),
                None => be,
            };
            let u = &dims[2 + 5 * bounce..7 + 5 * bounce];
            let (n, wo) = (sp.normal, sp.wo);
            let mut v = Vertex {
                position: sp.position,
                wo,
                n,
                bsdf: be,
                throughput,
                light: None,
                cont: None,
                nee: DVec3::ZERO,
                cont_weight: DVec3::ZERO,
                escaped: DVec3::ZERO,
                continues: false,
            };

            let ls = self.probe.sample(DVec2::new(u[0], u[1]));
            let cos_l = ls.dir.dot(n);
            if cos_l > 0.0 && ls.dir.dot(sp.geo_normal) > 0.0 && ls.pdf > 0.0 {
                let f = be.eval(ls.dir, wo, n);
                if f != DVec3::ZERO && !self.scene.occluded(&self.scene.spawn_ray(&sp, ls.dir)) {
                    let w = mis_weight(ls.pdf, bs.pdf(ls.dir, wo, n));
                    let lw = ls.radiance * (w / ls.pdf);
                    v.light = Some((ls.dir, cos_l, lw));
                    v.nee = f * lw * cos_l;
                    radiance += throughput * v.nee;
                }
            }

            let sample = bs.sample(wo, n, [u[2], u[3], u[4]]).filter(|s| s.wi.dot(sp.geo_normal) > 0.0);
            let mut next = None;
            if let Some(s) = sample {
                let cos_c = s.wi.dot(n);
                let cw = be.eval(s.wi, wo, n) * (cos_c / s.pdf);
                v.cont = Some((s.wi, cos_c / s.pdf));
                v.cont_weight = cw;
                let out = self.scene.spawn_ray(&sp, s.wi);
                match self.scene.intersect(&out) {
                    None => {
                        let w = mis_weight(s.pdf, self.probe.pdf(s.wi));
                        v.escaped = self.probe.radiance(s.wi) * w;
                        radiance += throughput * cw * v.escaped;
                    }
                    Some(h) if bounce + 1 < self.max_bounces as usize => {
                        v.continues = true;
                        next = Some((h, out, throughput * cw));
                    }
                    Some(_) => {}
                }
            }
            if let Some(rec) = record.as_deref_mut() {
                rec.push(v);
            }
            match next {
                Some((h, r, t)) => {
                    hit = h;
                    ray = r;
                    throughput = t;
                }
                None => break,
            }
        }
        (radiance, true)
    }
}

/// Renders with `eval` for shading and `sampling` for every sampling decision
/// and MIS weight. With `sampling = None` the two coincide.
pub fn render_detached(
    scene: &Scene,
    probe: &EnvironmentProbe,
    eval: &dyn MaterialSource,
    sampling: Option<&dyn MaterialSource>,
    camera: &Camera,
    config: &RenderConfig,
) -> RenderedImage {
    let cam = config.camera(camera);
    let tracer = PathTracer {
        scene,
        probe,
        eval,
        sampling,
        max_bounces: config.max_bounces.max(1),
        diffuse_only: config.diffuse_only,
    };
    let spp = config.spp.max(1) as usize;
    let dims = dims_for(tracer.max_bounces);
    let dropped = AtomicU64::new(0);
    let (w, h) = (cam.width, cam.height);
    let pixels: Vec<(DVec3, f64)> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let samples = PixelSamples::new(config.seed, i as u64, spp, dims);
            let mut acc = DVec3::ZERO;
            let mut hits = 0usize;
            for s in 0..spp {
                let u = samples.get(s);
                let ray = cam.generate_ray(x as f64 + u[0], y as f64 + u[1]);
                let (l, hit) = tracer.trace(ray, u, None);
                hits += hit as usize;
                if l.is_finite() {
                    acc += l;
                } else {
                    dropped.fetch_add(1, Ordering::Relaxed);
                }
            }
            (acc / spp as f64, hits as f64 / spp as f64)
        })
        .collect();
    let dropped_samples = dropped.into_inner();
    if dropped_samples > 0 {
        log::warn!("render: dropped {dropped_samples} non-finite samples");
    }
    RenderedImage {
        radiance: Image {
            width: w,
            height: h,
            pixels: pixels.iter().map(|p| p.0).collect(),
        },
        coverage: Image {
            width: w,
            height: h,
            pixels: pixels.iter().map(|p| p.1).collect(),
        },
        dropped_samples,
    }
}

pub fn render(
    scene: &Scene,
    probe: &EnvironmentProbe,
    material: &dyn MaterialSource,
    camera: &Camera,
    config: &RenderConfig,
) -> RenderedImage {
    render_detached(scene, probe, material, None, camera, config)
}

/// Replays `config.spp_backward` paths per pixel and accumulates
/// `Σ adjoint · ∂radiance/∂field` into the field's gradient buffer.
pub fn render_backward(
    scene: &Scene,
    probe: &EnvironmentProbe,
    field: &mut MaterialField,
    camera: &Camera,
    config: &RenderConfig,
    adjoint: &RgbImage,
) -> Result<()> {
    let cam = config.camera(camera);
    if adjoint.width != cam.width || adjoint.height != cam.height {
        return Err(Error::ShapeMismatch(format!(
            "adjoint {}x{} vs render {}x{}",
            adjoint.width, adjoint.height, cam.width, cam.height
        )));
    }
    let spp = config.spp_backward.max(1) as usize;
    let max_bounces = config.max_bounces.max(1);
    let dims = dims_for(max_bounces);
    let (w, h) = (cam.width, cam.height);
    let mut y0 = 0;
    while y0 < h {
        let y1 = (y0 + BACKWARD_BAND_ROWS).min(h);
        let records: Vec<(DVec3, [f64; 5])> = {
            let tracer = PathTracer {
                scene,
                probe,
                eval: &*field,
                sampling: None,
                max_bounces,
                diffuse_only: config.diffuse_only,
            };
            let per_pixel: Vec<Vec<(DVec3, [f64; 5])>> = (y0 * w..y1 * w)
                .into_par_iter()
                .map(|i| {
                    let a = *adjoint.get(i % w, i / w);
                    if a == DVec3::ZERO {
                        return Vec::new();
                    }
                    let (x, y) = (i % w, i / w);
                    let samples = PixelSamples::new(config.seed, i as u64, spp, dims);
                    let mut out = Vec::new();
                    let mut verts = Vec::with_capacity(max_bounces as usize);
                    for s in 0..spp {
                        let u = samples.get(s);
                        let ray = cam.generate_ray(x as f64 + u[0], y as f64 + u[1]);
                        verts.clear();
                        let (l, _) = tracer.trace(ray, u, Some(&mut verts));
                        if !l.is_finite() {
                            continue;
                        }
                        vertex_gradients(&verts, a / spp as f64, &mut out);
                    }
                    out
                })
                .collect();
            per_pixel.into_iter().flatten().collect()
        };
        field.accumulate(&records);
        y0 = y1;
    }
    Ok(())
}

/// Gradient records `(position, ∂loss/∂material)` for one recorded path.
fn vertex_gradients(verts: &[Vertex], adjoint: DVec3, out: &mut Vec<(DVec3, [f64; 5])>) {
    // radiance arriving along each continuation, from the path's end backward
    let mut incoming = vec![DVec3::ZERO; verts.len()];
    let mut suffix = DVec3::ZERO;
    for (j, v) in verts.iter().enumerate().rev() {
        let r = if v.continues { suffix } else { v.escaped };
        incoming[j] = r;
        suffix = v.nee + v.cont_weight * r;
    }
    for (v, r) in verts.iter().zip(&incoming) {
        let a = adjoint * v.throughput;
        let mut g = [0.0; 5];
        let mut add = |dir: DVec3, weight: DVec3| {
            let jac = v.bsdf.eval_grad(dir, v.wo, v.n);
            let aw = a * weight;
            g[0] += aw.x * jac.d_base.x;
            g[1] += aw.y * jac.d_base.y;
            g[2] += aw.z * jac.d_base.z;
            g[3] += aw.dot(jac.d_roughness);
            g[4] += aw.dot(jac.d_metallic);
        };
        if let Some((dir, cos, lw)) = v.light {
            add(dir, lw * cos);
        }
        if let Some((dir, cos_over_pdf)) = v.cont {
            if *r != DVec3::ZERO {
                add(dir, *r * cos_over_pdf);
            }
        }
        if g.iter().any(|x| *x != 0.0) && g.iter().all(|x| x.is_finite()) {
            out.push((v.position, g));
        }
    }
}

/// Material channels and surface positions at pixel centers (primary hits only).
#[derive(Clone, Debug)]
pub struct Intrinsics {
    /// Linear base color.
    pub base_color: RgbImage,
    pub roughness: GrayImage,
    pub metallic: GrayImage,
    pub positions: Vec<Option<DVec3>>,
}

impl Intrinsics {
    pub fn hit_mask(&self) -> GrayImage {
        Image {
            width: self.roughness.width,
            height: self.roughness.height,
            pixels: self.positions.iter().map(|p| if p.is_some() { 1.0 } else { 0.0 }).collect(),
        }
    }
}

/// Primary hit positions and UVs through pixel centers.
pub fn primary_hits(scene: &Scene, camera: &Camera) -> Vec<Option<(DVec3, DVec2)>> {
    let w = camera.width;
    (0..camera.width * camera.height)
        .into_par_iter()
        .map(|i| {
            let ray = camera.generate_ray((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
            scene.intersect(&ray).map(|h| {
                let sp = scene.shade_point(&h, &ray);
                (sp.position, sp.uv)
            })
        })
        .collect()
}

pub fn render_intrinsics(scene: &Scene, material: &dyn MaterialSource, camera: &Camera) -> Intrinsics {
    intrinsics_from_hits(&primary_hits(scene, camera), material, camera.width, camera.height)
}

pub fn intrinsics_from_hits(
    hits: &[Option<(DVec3, DVec2)>],
    material: &dyn MaterialSource,
    width: u32,
    height: u32,
) -> Intrinsics {
    let samples: Vec<Option<PbrSample>> = hits.par_iter().map(|h| h.map(|(p, uv)| material.eval(p, uv))).collect();
    let get = |f: &dyn Fn(&PbrSample) -> f64| -> GrayImage {
        Image {
            width,
            height,
            pixels: samples.iter().map(|s| s.as_ref().map_or(0.0, f)).collect(),
        }
    };
    Intrinsics {
        base_color: Image {
            width,
            height,
            pixels: samples.iter().map(|s| s.map_or(DVec3::ZERO, |s| s.base_color)).collect(),
        },
        roughness: get(&|s| s.roughness),
        metallic: get(&|s| s.metallic),
        positions: hits.iter().map(|h| h.map(|(p, _)| p)).collect(),
    }
}
