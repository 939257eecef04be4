// Numerical properties of the reflectance model: GGX normalization,
// reciprocity, sample/pdf agreement and directional albedo.
//
// `cargo run --release --example brdf_checks`

use std::f64::consts::PI;

use glam::DVec3;
use matrecon::brdf::{ggx_ndf, Bsdf, PbrSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `∫ D(h) cosθ_h dω_h` by midpoint quadrature on `n_theta × n_phi` nodes
/// (the integrand is isotropic so the azimuth contributes a factor 2π).
pub fn ndf_projected_integral(alpha: f64, nodes: usize) -> f64 {
    let h = 0.5 * PI / nodes as f64;
    (0..nodes)
        .map(|i| {
            let t = (i as f64 + 0.5) * h;
            ggx_ndf(t.cos(), alpha) * t.cos() * t.sin() * h
        })
        .sum::<f64>()
        * 2.0
        * PI
}

fn random_dir(rng: &mut ChaCha8Rng) -> DVec3 {
    let z: f64 = rng.gen_range(0.02..1.0);
    let phi = rng.gen_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).sqrt();
    DVec3::new(r * phi.cos(), r * phi.sin(), z)
}

fn random_material(rng: &mut ChaCha8Rng) -> PbrSample {
    PbrSample::new(DVec3::new(rng.gen(), rng.gen(), rng.gen()), rng.gen_range(0.05..1.0), rng.gen())
}

/// Worst relative reciprocity violation `|f(a,b) - f(b,a)| / max` over
/// random configurations.
pub fn worst_reciprocity(configs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..configs)
        .map(|_| {
            let b = Bsdf::new(random_material(&mut rng));
            let (wi, wo) = (random_dir(&mut rng), random_dir(&mut rng));
            let (f1, f2) = (b.eval(wi, wo, DVec3::Z), b.eval(wo, wi, DVec3::Z));
            ((f1 - f2).abs() / f1.max(f2).max(DVec3::splat(1e-300))).max_element()
        })
        .fold(0.0, f64::max)
}

/// Worst relative difference between the pdf returned with a sample and the
/// pdf re-evaluated for that direction.
pub fn worst_pdf_round_trip(configs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < configs {
        let b = Bsdf::new(random_material(&mut rng));
        let wo = random_dir(&mut rng);
        if let Some(s) = b.sample(wo, DVec3::Z, [rng.gen(), rng.gen(), rng.gen()]) {
            let p = b.pdf(s.wi, wo, DVec3::Z);
            worst = worst.max((p - s.pdf).abs() / s.pdf);
            done += 1;
        }
    }
    worst
}

/// Directional albedo `∫ f cos dω` by importance sampling.
pub fn albedo(material: PbrSample, cos_o: f64, samples: usize, seed: u64) -> DVec3 {
    let b = Bsdf::new(material);
    let wo = DVec3::new((1.0 - cos_o * cos_o).sqrt(), 0.0, cos_o);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = DVec3::ZERO;
    for _ in 0..samples {
        if let Some(s) = b.sample(wo, DVec3::Z, [rng.gen(), rng.gen(), rng.gen()]) {
            acc += b.eval(s.wi, wo, DVec3::Z) * s.wi.z / s.pdf;
        }
    }
    acc / samples as f64
}

#[allow(dead_code)]
fn main() {
    for alpha in [0.1, 0.5, 1.0] {
        println!("alpha {alpha}: projected NDF integral {:.6}", ndf_projected_integral(alpha, 1_000_000));
    }
    println!("reciprocity: worst relative error {:.2e}", worst_reciprocity(100, 1));
    println!("sample/pdf round trip: worst relative error {:.2e}", worst_pdf_round_trip(100, 2));
    for (name, m) in [
        ("white metal r=0.2", PbrSample::new(DVec3::ONE, 0.2, 1.0)),
        ("white metal r=1.0", PbrSample::new(DVec3::ONE, 1.0, 1.0)),
        ("white dielectric r=0.5", PbrSample::new(DVec3::ONE, 0.5, 0.0)),
    ] {
        let a: Vec<String> = [1.0, 0.5, 0.1].iter().map(|c| format!("{:.3}", albedo(m, *c, 200_000, 3).x)).collect();
        println!("{name}: albedo at cos 1/0.5/0.1 = {}", a.join(" / "));
    }
}
