//! Multi-view material reconstruction.
//!
//! Each iteration draws a batch of distinct frames, renders them with the
//! current field, and back-propagates the image loss through the path tracer
//! and the guide regularizers through the primary-hit intrinsics. One Adam
//! step follows the batch.

mod adam;
mod frameset;
mod loss;

pub use adam::{adam_step, adam_step_groups, AdamConfig, AdamState};
pub use frameset::{frame_name, Frame, FrameSet, Guides, CAMERAS_FILE};
pub use loss::{
    image_loss, masked, scale_invariant_l1, scale_invariant_loss_gray, scale_invariant_loss_rgb, total_loss, ImageLoss,
    LossParts, RegTerm, MEAN_EPSILON,
};

use std::fmt::Write as _;

use glam::{DVec2, DVec3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envlight::EnvironmentProbe;
use crate::error::{Error, Result};
use crate::image::{GrayImage, Image};
use crate::material::MaterialSource;
use crate::matfield::MaterialField;
use crate::scene::Scene;
use crate::tracer::{
    derive_seed, intrinsics_from_hits, primary_hits, Intrinsics, render_backward, render_detached, srgb_decode_rgb, srgb_encode,
    srgb_encode_grad, RenderConfig,
};

/// Colour space in which the base-colour guide is compared.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuideSpace {
    /// Field output is sRGB-encoded and compared to the guide as stored.
    #[default]
    Srgb,
    /// The guide is sRGB-decoded and compared to the linear field output.
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimSettings {
    pub iterations: usize,
    pub batch_size: usize,
    pub lambda: f64,
    pub seed: u64,
    pub base_color_space: GuideSpace,
    /// Checkpoint period in iterations; 0 disables checkpoints.
    pub checkpoint_every: usize,
    pub adam: AdamConfig,
    /// Filled from the `[render]` section.
    #[serde(skip)]
    pub render: RenderConfig,
}

impl Default for OptimSettings {
    fn default() -> Self {
        OptimSettings {
            iterations: 1000,
            batch_size: 8,
            lambda: 0.2,
            seed: 0,
            base_color_space: GuideSpace::Srgb,
            checkpoint_every: 0,
            adam: AdamConfig::default(),
            render: RenderConfig::default(),
        }
    }
}

impl OptimSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("optim: lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("optim: batch_size must be at least 1".into()));
        }
        self.adam.validate()?;
        self.render.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    pub iteration: usize,
    pub parts: LossParts,
    pub total: f64,
}

pub const LOSS_CSV_HEADER: &str = "iteration,L_image,L_reg_base,L_reg_rough,L_reg_metal,total";

pub fn loss_csv(history: &[LossRecord]) -> String {
    let mut s = String::from(LOSS_CSV_HEADER);
    s.push('\n');
    for r in history {
        let p = &r.parts;
        let _ = writeln!(
            s,
            "{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
            r.iteration, p.image, p.reg_base, p.reg_rough, p.reg_metal, r.total
        );
    }
    s
}

pub struct Reconstruction {
    pub field: MaterialField,
    pub history: Vec<LossRecord>,
}

/// Seeds of the forward and adjoint renders of `frame` in `iteration`.
pub fn render_seeds(seed: u64, iteration: usize, frame: usize) -> (u64, u64) {
    (
        derive_seed(seed, &[iteration as u64, frame as u64, 0]),
        derive_seed(seed, &[iteration as u64, frame as u64, 1]),
    )
}

struct RegTerms {
    hits: Vec<Option<(DVec3, DVec2)>>,
    mask: GrayImage,
    intr: Intrinsics,
    base: Option<RegTerm<DVec3>>,
    rough: Option<RegTerm<f64>>,
    metal: Option<RegTerm<f64>>,
}

fn regularizer_terms(
    scene: &Scene,
    material: &dyn MaterialSource,
    frame: &Frame,
    guides: &Guides,
    space: GuideSpace,
) -> Result<RegTerms> {
    let cam = &frame.camera;
    let hits = primary_hits(scene, cam);
    let intr = intrinsics_from_hits(&hits, material, cam.width, cam.height);
    let mask = Image {
        width: cam.width,
        height: cam.height,
        pixels: frame
            .mask
            .pixels
            .iter()
            .zip(&hits)
            .map(|(m, h)| if masked(*m) && h.is_some() { 1.0 } else { 0.0 })
            .collect(),
    };
    let (pred_base, guide_base) = match space {
        GuideSpace::Srgb => (
            intr.base_color.map(|c| DVec3::new(srgb_encode(c.x), srgb_encode(c.y), srgb_encode(c.z))),
            guides.base_color.clone(),
        ),
        GuideSpace::Linear => (intr.base_color.clone(), guides.base_color.map(|c| srgb_decode_rgb(*c))),
    };
    let base = scale_invariant_loss_rgb(&pred_base, &guide_base, &mask)?;
    let rough = scale_invariant_loss_gray(&intr.roughness, &guides.roughness, &mask)?;
    let metal = scale_invariant_loss_gray(&intr.metallic, &guides.metallic, &mask)?;
    for (name, t) in [("base colour", base.is_none()), ("roughness", rough.is_none()), ("metallic", metal.is_none())] {
        if t {
            log::debug!("{name} regularizer skipped: degenerate masked mean");
        }
    }
    Ok(RegTerms { hits, mask, intr, base, rough, metal })
}

/// Loss parts of one frame without gradients. `sampling` drives the path
/// sampling as in [`render_detached`]; with `sampling` equal to the field and
/// the same seed and sample count this is the quantity [`frame_loss_grad`]
/// differentiates.
pub fn frame_loss(
    material: &dyn MaterialSource,
    sampling: Option<&dyn MaterialSource>,
    scene: &Scene,
    probe: &EnvironmentProbe,
    frame: &Frame,
    settings: &OptimSettings,
    seed: u64,
) -> Result<LossParts> {
    let base = RenderConfig {
        width: None,
        height: None,
        ..settings.render.clone()
    };
    let fwd = render_detached(scene, probe, material, sampling, &frame.camera, &base.with_seed(seed));
    let mut parts = LossParts {
        image: image_loss(&fwd.radiance, &frame.reference, &frame.mask)?.value,
        ..Default::default()
    };
    if let (Some(guides), true) = (&frame.guides, settings.lambda > 0.0) {
        let t = regularizer_terms(scene, material, frame, guides, settings.base_color_space)?;
        parts.reg_base = t.base.map_or(0.0, |t| t.value);
        parts.reg_rough = t.rough.map_or(0.0, |t| t.value);
        parts.reg_metal = t.metal.map_or(0.0, |t| t.value);
    }
    Ok(parts)
}

/// Losses of one frame, adding `weight · ∂total/∂params` to the field's
/// gradient buffer. The forward render uses `forward_seed` at `render.spp`,
/// the adjoint render `backward_seed` at `render.spp_backward`; with equal
/// seeds and sample counts the gradient is exact for the rendered estimate.
#[allow(clippy::too_many_arguments)]
pub fn frame_loss_grad(
    field: &mut MaterialField,
    scene: &Scene,
    probe: &EnvironmentProbe,
    frame: &Frame,
    settings: &OptimSettings,
    forward_seed: u64,
    backward_seed: u64,
    weight: f64,
) -> Result<LossParts> {
    let base = RenderConfig {
        width: None,
        height: None,
        ..settings.render.clone()
    };
    let cam = &frame.camera;
    let fwd = render_detached(scene, probe, &*field, None, cam, &base.with_seed(forward_seed));
    let il = image_loss(&fwd.radiance, &frame.reference, &frame.mask)?;
    let mut parts = LossParts {
        image: il.value,
        ..Default::default()
    };
    if il.count > 0 && weight != 0.0 {
        let adjoint = il.adjoint.map(|a| *a * weight);
        render_backward(scene, probe, field, cam, &base.with_seed(backward_seed), &adjoint)?;
    }

    let (Some(guides), true) = (&frame.guides, settings.lambda > 0.0) else {
        return Ok(parts);
    };
    let RegTerms { hits, mask, intr, base: rb, rough: rr, metal: rm } =
        regularizer_terms(scene, &*field, frame, guides, settings.base_color_space)?;
    parts.reg_base = rb.as_ref().map_or(0.0, |t| t.value);
    parts.reg_rough = rr.as_ref().map_or(0.0, |t| t.value);
    parts.reg_metal = rm.as_ref().map_or(0.0, |t| t.value);

    let s = weight * settings.lambda;
    let mut records = Vec::new();
    for (i, hit) in hits.iter().enumerate() {
        let Some((pos, _)) = hit else { continue };
        if !masked(mask.pixels[i]) {
            continue;
        }
        let mut g = [0.0; 5];
        if let Some(t) = &rb {
            let d = t.grad.pixels[i];
            let c = intr.base_color.pixels[i];
            let chain = match settings.base_color_space {
                GuideSpace::Srgb => DVec3::new(srgb_encode_grad(c.x), srgb_encode_grad(c.y), srgb_encode_grad(c.z)),
                GuideSpace::Linear => DVec3::ONE,
            };
            let d = d * chain * s;
            g[0] = d.x;
            g[1] = d.y;
            g[2] = d.z;
        }
        if let Some(t) = &rr {
            g[3] = t.grad.pixels[i] * s;
        }
        if let Some(t) = &rm {
            g[4] = t.grad.pixels[i] * s;
        }
        records.push((*pos, g));
    }
    field.accumulate(&records);
    Ok(parts)
}

pub fn reconstruct(
    frames: &FrameSet,
    scene: &Scene,
    probe: &EnvironmentProbe,
    field: MaterialField,
    settings: &OptimSettings,
) -> Result<Reconstruction> {
    reconstruct_with(frames, scene, probe, field, settings, &mut |_, _| Ok(()))
}

/// Runs the optimization, calling `on_iteration` after every Adam step.
pub fn reconstruct_with(
    frames: &FrameSet,
    scene: &Scene,
    probe: &EnvironmentProbe,
    mut field: MaterialField,
    settings: &OptimSettings,
    on_iteration: &mut dyn FnMut(&LossRecord, &MaterialField) -> Result<()>,
) -> Result<Reconstruction> {
    settings.validate()?;
    frames.validate()?;
    if settings.batch_size > frames.len() {
        return Err(Error::Config(format!(
            "optim: batch_size {} exceeds the {} available frames",
            settings.batch_size,
            frames.len()
        )));
    }
    if settings.lambda > 0.0 && !frames.has_guides() && settings.iterations > 0 {
        log::warn!("no guide frames: regularizers are disabled");
    }
    let mut adam = AdamState::new(field.num_params());
    let groups = [
        (field.table_range(), settings.adam.lr_tables),
        (field.mlp_range(), settings.adam.lr_mlp),
    ];
    let mut history = Vec::with_capacity(settings.iterations);
    let batch = settings.batch_size;
    let weight = 1.0 / batch as f64;
    for it in 0..settings.iterations {
        field.zero_grad();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(settings.seed, &[it as u64, u64::MAX]));
        let picks = rand::seq::index::sample(&mut rng, frames.len(), batch).into_vec();
        let mut parts = LossParts::default();
        for &f in &picks {
            let (fs, bs) = render_seeds(settings.seed, it, f);
            let p = frame_loss_grad(&mut field, scene, probe, &frames.frames[f], settings, fs, bs, weight)?;
            parts.image += p.image * weight;
            parts.reg_base += p.reg_base * weight;
            parts.reg_rough += p.reg_rough * weight;
            parts.reg_metal += p.reg_metal * weight;
        }
        let total = parts.total(settings.lambda);
        if !total.is_finite() || field.grad().iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { iteration: it });
        }
        let (params, grad) = field.params_and_grad();
        adam_step_groups(params, grad, &mut adam, &groups, &settings.adam);
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence { iteration: it });
        }
        let record = LossRecord {
            iteration: it,
            parts,
            total,
        };
        log::info!(
            "iter {it}: total {total:.5} image {:.5} reg {:.4}/{:.4}/{:.4}",
            parts.image,
            parts.reg_base,
            parts.reg_rough,
            parts.reg_metal
        );
        history.push(record);
        on_iteration(&record, &field)?;
    }
    Ok(Reconstruction { field, history })
}
