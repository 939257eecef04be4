//! Per-pixel stratified sample tables.
//!
//! Every pixel owns a ChaCha8 stream (seed from the render seed, stream id
//! from the pixel index), so images do not depend on how pixels are
//! distributed over workers. Dimensions come in groups (2D pixel jitter, then
//! per bounce: 2D light, 1D lobe, 2D BSDF); each group is stratified across
//! the pixel's samples: a jittered grid when the sample count is a perfect
//! square, Latin hypercube otherwise.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DIMS_PER_BOUNCE: usize = 5;
const ONE_MINUS_EPS: f64 = 1.0 - f64::EPSILON / 2.0;

pub fn dims_for(max_bounces: u32) -> usize {
    2 + DIMS_PER_BOUNCE * max_bounces as usize
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed from a base seed and a list of keys.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(mix64(seed), |acc, k| mix64(acc ^ mix64(*k)))
}

pub struct PixelSamples {
    values: Vec<f64>,
    dims: usize,
}

impl PixelSamples {
    pub fn new(seed: u64, pixel: u64, spp: usize, dims: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(pixel);
        let mut values = vec![0.0; spp * dims];
        let side = (spp as f64).sqrt().round() as usize;
        let square = side * side == spp;
        let mut perm: Vec<usize> = (0..spp).collect();
        let mut perm2: Vec<usize> = (0..spp).collect();
        let mut d = 0;
        let mut group = 0;
        while d < dims {
            // group layout: pixel(2) | light(2) lobe(1) bsdf(2) | ...
            let width = if group == 0 {
                2
            } else {
                match (group - 1) % 3 {
                    1 => 1,
                    _ => 2,
                }
            }
            .min(dims - d);
            perm.shuffle(&mut rng);
            if width == 1 {
                for s in 0..spp {
                    values[s * dims + d] = ((perm[s] as f64 + rng.gen::<f64>()) / spp as f64).min(ONE_MINUS_EPS);
                }
            } else if square {
                for s in 0..spp {
                    let cell = perm[s];
                    let (cx, cy) = (cell % side, cell / side);
                    values[s * dims + d] = ((cx as f64 + rng.gen::<f64>()) / side as f64).min(ONE_MINUS_EPS);
                    values[s * dims + d + 1] = ((cy as f64 + rng.gen::<f64>()) / side as f64).min(ONE_MINUS_EPS);
                }
            } else {
                perm2.shuffle(&mut rng);
                for s in 0..spp {
                    values[s * dims + d] = ((perm[s] as f64 + rng.gen::<f64>()) / spp as f64).min(ONE_MINUS_EPS);
                    values[s * dims + d + 1] = ((perm2[s] as f64 + rng.gen::<f64>()) / spp as f64).min(ONE_MINUS_EPS);
                }
            }
            d += width;
            group += 1;
        }
        PixelSamples { values, dims }
    }

    pub fn get(&self, sample: usize) -> &[f64] {
        &self.values[sample * self.dims..(sample + 1) * self.dims]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_are_in_unit_interval_and_stratified() {
        for spp in [1usize, 7, 16] {
            let ps = PixelSamples::new(1, 5, spp, 12);
            for d in 0..12 {
                let mut cells: Vec<usize> = (0..spp)
                    .map(|s| {
                        let v = ps.get(s)[d];
                        assert!((0.0..1.0).contains(&v));
                        (v * spp as f64) as usize
                    })
                    .collect();
                cells.sort_unstable();
                if spp != 16 || d == 4 || d == 9 {
                    // 1D and Latin-hypercube dimensions hit every stratum once
                    assert_eq!(cells, (0..spp).collect::<Vec<_>>());
                }
            }
            if spp == 16 {
                let mut grid: Vec<(usize, usize)> =
                    (0..16).map(|s| ((ps.get(s)[0] * 4.0) as usize, (ps.get(s)[1] * 4.0) as usize)).collect();
                grid.sort_unstable();
                grid.dedup();
                assert_eq!(grid.len(), 16);
            }
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = PixelSamples::new(9, 3, 4, 7);
        let b = PixelSamples::new(9, 3, 4, 7);
        let c = PixelSamples::new(9, 4, 4, 7);
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, c.values);
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
    }
}
