// Environment importance sampling: `E[1/pdf] = 4π` under a constant probe
// and sample concentration on a single hot texel.
//
// `cargo run --release --example probe_sampling -- [samples]`

use std::f64::consts::PI;

use glam::{DVec2, DVec3};
use matrecon::envlight::EnvironmentProbe;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Monte Carlo estimate of `E[1/pdf]` for a constant probe.
pub fn inverse_pdf_mean(samples: usize, seed: u64) -> matrecon::Result<f64> {
    let probe = EnvironmentProbe::constant(DVec3::ONE)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..samples).map(|_| 1.0 / probe.sample(DVec2::new(rng.gen(), rng.gen())).pdf).sum::<f64>() / samples as f64)
}

/// Fraction of samples that land in the only non-zero texel of a probe.
pub fn hot_texel_fraction(samples: usize, seed: u64) -> matrecon::Result<f64> {
    let (w, h, hot) = (64u32, 32u32, (40u32, 11u32));
    let mut texels = vec![DVec3::ZERO; (w * h) as usize];
    texels[(hot.1 * w + hot.0) as usize] = DVec3::new(5.0, 4.0, 3.0);
    let probe = EnvironmentProbe::from_texels(w, h, texels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inside = (0..samples)
        .filter(|_| probe.texel_of(probe.sample(DVec2::new(rng.gen(), rng.gen())).dir) == hot)
        .count();
    Ok(inside as f64 / samples as f64)
}

#[allow(dead_code)]
fn main() -> matrecon::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100_000);
    let m = inverse_pdf_mean(n, 1)?;
    println!("E[1/pdf] = {m:.5} (4π = {:.5}, rel err {:.3}%)", 4.0 * PI, 100.0 * (m / (4.0 * PI) - 1.0).abs());
    println!("hot texel captured {:.4} of samples", hot_texel_fraction(n, 2)?);
    Ok(())
}
