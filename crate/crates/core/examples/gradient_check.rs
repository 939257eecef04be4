// End-to-end gradient check: an 8×8 render of a single quad, the full loss
// (image term plus guide regularizers) and central finite differences along
// random parameter directions. Both sides share the render seed and the
// sampling field, so the difference quotient converges to the adjoint.
//
// `cargo run --release --example gradient_check -- [directions]`

use glam::DVec3;
use matrecon::brdf::PbrSample;
use matrecon::material::MaterialSource;
use matrecon::matfield::{FieldConfig, MaterialField};
use matrecon::recon::{frame_loss, frame_loss_grad, Frame, Guides, OptimSettings};
use matrecon::scene::{Camera, Scene};
use matrecon::synthetic;
use matrecon::tracer::{render, render_intrinsics, srgb_encode, RenderConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct DirectionCheck {
    pub analytic: f64,
    pub finite_difference: f64,
}

impl DirectionCheck {
    pub fn relative_error(&self) -> f64 {
        (self.analytic - self.finite_difference).abs() / self.analytic.abs().max(self.finite_difference.abs()).max(1e-12)
    }
}

pub fn run(directions: usize, spp: u32) -> matrecon::Result<Vec<DirectionCheck>> {
    let scene = Scene::new(synthetic::quad(1.0, 1.0));
    let probe = synthetic::sky_probe(64, 32, DVec3::new(0.2, 0.6, 0.8), 8.0)?;
    let cam = Camera::look_at(DVec3::new(0.1, 0.2, 1.6), DVec3::ZERO, DVec3::Y, 0.5, 8, 8)?;
    let target = PbrSample::new(DVec3::new(0.6, 0.3, 0.2), 0.4, 0.3);
    let reference = render(&scene, &probe, &target, &cam, &RenderConfig { spp: 64, max_bounces: 2, seed: 1, ..Default::default() });
    let intr = render_intrinsics(&scene, &PbrSample::new(DVec3::new(0.3, 0.5, 0.4), 0.7, 0.6), &cam);
    let frame = Frame {
        camera: cam,
        reference: reference.tonemapped(),
        mask: intr.hit_mask(),
        guides: Some(Guides {
            base_color: intr.base_color.map(|c| DVec3::new(srgb_encode(c.x), srgb_encode(c.y), srgb_encode(c.z))),
            roughness: intr.roughness.clone(),
            metallic: intr.metallic.clone(),
        }),
    };
    let settings = OptimSettings {
        lambda: 0.2,
        render: RenderConfig { spp, spp_backward: spp, max_bounces: 2, ..Default::default() },
        ..Default::default()
    };
    let seed = 17;
    let mut field = MaterialField::for_bounds(FieldConfig::small(), &scene.bounds())?;
    // a fresh field has all first-layer pre-activations within ~1e-4 of the
    // leaky-ReLU kink; move it to a generic point first
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let moved: Vec<f32> = field.params().iter().map(|p| p + rng.gen_range(-0.5f32..0.5)).collect();
    field.set_params(&moved)?;
    field.zero_grad();
    frame_loss_grad(&mut field, &scene, &probe, &frame, &settings, seed, seed, 1.0)?;
    let grad = field.grad().to_vec();
    let base = field.params().to_vec();

    let eps = 1e-5f32;
    let mut checks = Vec::with_capacity(directions);
    for _ in 0..directions {
        let dir: Vec<f32> = (0..base.len()).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        let hi: Vec<f32> = base.iter().zip(&dir).map(|(p, d)| p + eps * d).collect();
        let lo: Vec<f32> = base.iter().zip(&dir).map(|(p, d)| p - eps * d).collect();
        let loss_at = |p: &[f32]| -> matrecon::Result<f64> {
            let mut f = field.clone();
            f.set_params(p)?;
            let parts = frame_loss(&f, Some(&field as &dyn MaterialSource), &scene, &probe, &frame, &settings, seed)?;
            Ok(parts.total(settings.lambda))
        };
        // both sides use the step actually applied after f32 rounding
        let step = 2.0 * eps as f64;
        let fd = (loss_at(&hi)? - loss_at(&lo)?) / step;
        let analytic = grad.iter().zip(hi.iter().zip(&lo)).map(|(g, (h, l))| g * (*h as f64 - *l as f64)).sum::<f64>() / step;
        checks.push(DirectionCheck { analytic, finite_difference: fd });
    }
    Ok(checks)
}

#[allow(dead_code)]
fn main() -> matrecon::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(16);
    let checks = run(n, 16)?;
    for (i, c) in checks.iter().enumerate() {
        println!("dir {i:2}: analytic {:+.6e}  fd {:+.6e}  rel err {:.2e}", c.analytic, c.finite_difference, c.relative_error());
    }
    let worst = checks.iter().map(DirectionCheck::relative_error).fold(0.0, f64::max);
    println!("worst relative error {worst:.2e}");
    Ok(())
}
