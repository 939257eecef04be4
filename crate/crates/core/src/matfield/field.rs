use std::ops::Range;

use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brdf::PbrSample;
use crate::error::{Error, Result};
use crate::scene::Aabb;

pub const MAX_LEVELS: usize = 32;
pub const MAX_FEATURES: usize = 8;
const MAX_ACTIVATIONS: usize = 1024;
const LEAKY_SLOPE: f64 = 0.01;
const PRIMES: [u32; 3] = [1, 2_654_435_761, 805_459_861];
/// Records per parallel work item in [`MaterialField::accumulate`]; fixed so
/// the reduction order never depends on the worker count.
const BACKWARD_CHUNK: usize = 2048;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    pub levels: u32,
    pub log2_table_size: u32,
    pub features: u32,
    pub base_resolution: u32,
    pub max_resolution: u32,
    pub hidden_layers: u32,
    pub hidden_width: u32,
    pub seed: u64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            levels: 12,
            log2_table_size: 19,
            features: 2,
            base_resolution: 16,
            max_resolution: 2048,
            hidden_layers: 2,
            hidden_width: 32,
            seed: 0,
        }
    }
}

impl FieldConfig {
    /// A reduced grid for quick experiments and tests.
    pub fn small() -> Self {
        FieldConfig {
            levels: 8,
            log2_table_size: 15,
            max_resolution: 256,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("field: {m}")));
        if self.levels == 0 || self.levels as usize > MAX_LEVELS {
            return bad(&format!("levels must be in 1..={MAX_LEVELS}"));
        }
        if self.features == 0 || self.features as usize > MAX_FEATURES {
            return bad(&format!("features must be in 1..={MAX_FEATURES}"));
        }
        if !(4..=26).contains(&self.log2_table_size) {
            return bad("log2_table_size must be in 4..=26");
        }
        if self.base_resolution == 0 || self.max_resolution < self.base_resolution {
            return bad("need 1 <= base_resolution <= max_resolution");
        }
        if self.hidden_width == 0 {
            return bad("hidden_width must be positive");
        }
        let acts = (self.hidden_layers * self.hidden_width + 5) as usize;
        if acts > MAX_ACTIVATIONS || (self.levels * self.features) as usize > MAX_ACTIVATIONS {
            return bad("MLP too large");
        }
        Ok(())
    }

    /// `N_l = floor(N_min · b^l)` with `b` chosen so the last level reaches `N_max`.
    pub fn resolutions(&self) -> Vec<u32> {
        let l = self.levels as usize;
        if l == 1 {
            return vec![self.base_resolution];
        }
        let nmin = self.base_resolution as f64;
        let growth = ((self.max_resolution as f64).ln() - nmin.ln()) / (l - 1) as f64;
        (0..l)
            .map(|i| (nmin * (growth * i as f64).exp() + 1e-6).floor() as u32)
            .collect()
    }
}

/// Maps world positions into the unit cube. The scale is isotropic so grid
/// cells stay cubic; the scene box is centered with a 1% margin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub min: DVec3,
    pub scale: f64,
}

impl Domain {
    pub fn from_bounds(b: &Aabb) -> Self {
        let lo = crate::math::to_f64(b.min);
        let hi = crate::math::to_f64(b.max);
        let ext = (hi - lo).max_element();
        let ext = if ext.is_finite() && ext > 0.0 { ext * 1.02 } else { 1.0 };
        let center = if b.is_empty() { DVec3::ZERO } else { 0.5 * (lo + hi) };
        Domain {
            min: center - DVec3::splat(0.5 * ext),
            scale: 1.0 / ext,
        }
    }

    #[inline]
    pub fn normalize(&self, p: DVec3) -> DVec3 {
        ((p - self.min) * self.scale).clamp(DVec3::ZERO, DVec3::ONE)
    }
}

#[derive(Clone, Copy, Debug)]
struct Layer {
    n_in: usize,
    n_out: usize,
    w: usize,
    b: usize,
}

/// Multiresolution hash grid decoded by a small MLP into
/// `(base color, roughness, metallic)`.
///
/// All parameters live in one flat `f32` vector: hash tables first
/// (`level, entry, feature` order), then per layer the row-major weights
/// followed by the biases. The gradient buffer has the same layout.
#[derive(Clone, Debug)]
pub struct MaterialField {
    config: FieldConfig,
    resolutions: Vec<u32>,
    domain: Domain,
    table_size: usize,
    layers: Vec<Layer>,
    params: Vec<f32>,
    grad: Vec<f64>,
}

#[inline]
fn hash(c: [u32; 3]) -> u32 {
    c[0].wrapping_mul(PRIMES[0]) ^ c[1].wrapping_mul(PRIMES[1]) ^ c[2].wrapping_mul(PRIMES[2])
}

#[inline]
fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl MaterialField {
    pub fn new(config: FieldConfig, domain: Domain) -> Result<Self> {
        config.validate()?;
        let resolutions = config.resolutions();
        let table_size = 1usize << config.log2_table_size;
        let f = config.features as usize;
        let table_len = config.levels as usize * table_size * f;
        let mut layers = Vec::new();
        let mut offset = table_len;
        let mut n_in = config.levels as usize * f;
        let widths = (0..config.hidden_layers).map(|_| config.hidden_width as usize).chain([5]);
        for n_out in widths {
            layers.push(Layer {
                n_in,
                n_out,
                w: offset,
                b: offset + n_in * n_out,
            });
            offset += n_in * n_out + n_out;
            n_in = n_out;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = Vec::with_capacity(offset);
        params.extend((0..table_len).map(|_| rng.gen_range(-1e-4f32..1e-4)));
        for l in &layers {
            let bound = 1.0 / (l.n_in as f32).sqrt();
            params.extend((0..l.n_in * l.n_out).map(|_| rng.gen_range(-bound..bound)));
            params.extend(std::iter::repeat(0.0).take(l.n_out));
        }
        Ok(MaterialField {
            config,
            resolutions,
            domain,
            table_size,
            layers,
            grad: vec![0.0; params.len()],
            params,
        })
    }

    pub fn for_bounds(config: FieldConfig, bounds: &Aabb) -> Result<Self> {
        MaterialField::new(config, Domain::from_bounds(bounds))
    }

    pub fn config(&self) -> &FieldConfig {
        &self.config
    }

    pub fn resolutions(&self) -> &[u32] {
        &self.resolutions
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn table_size(&self) -> usize {
        self.table_size
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f32] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f32]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "field expects {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn params_and_grad(&mut self) -> (&mut [f32], &[f64]) {
        (&mut self.params, &self.grad)
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn table_range(&self) -> Range<usize> {
        0..self.layers[0].w
    }

    pub fn mlp_range(&self) -> Range<usize> {
        self.layers[0].w..self.params.len()
    }

    pub fn level_range(&self, level: usize) -> Range<usize> {
        let n = self.table_size * self.config.features as usize;
        level * n..(level + 1) * n
    }

    /// Index of the first feature of the hashed entry for an integer lattice
    /// point at `level`.
    pub fn entry_index(&self, level: usize, corner: [u32; 3]) -> usize {
        let h = hash(corner) as usize & (self.table_size - 1);
        (level * self.table_size + h) * self.config.features as usize
    }

    /// Interpolated features. When `corners` is given it receives, per level
    /// and corner, the entry's first parameter index and its trilinear weight.
    fn encode(&self, x: DVec3, feat: &mut [f64], mut corners: Option<&mut [(usize, f64)]>) {
        let f = self.config.features as usize;
        feat.iter_mut().for_each(|v| *v = 0.0);
        for (l, &n) in self.resolutions.iter().enumerate() {
            let p = x * n as f64;
            let i0 = p.floor();
            let fr = p - i0;
            let base = [i0.x as u32, i0.y as u32, i0.z as u32];
            for c in 0..8u32 {
                let bit = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
                let w = (if bit[0] == 1 { fr.x } else { 1.0 - fr.x })
                    * (if bit[1] == 1 { fr.y } else { 1.0 - fr.y })
                    * (if bit[2] == 1 { fr.z } else { 1.0 - fr.z });
                let idx = self.entry_index(l, [base[0] + bit[0], base[1] + bit[1], base[2] + bit[2]]);
                if let Some(cs) = corners.as_deref_mut() {
                    cs[l * 8 + c as usize] = (idx, w);
                }
                if w == 0.0 {
                    continue;
                }
                for k in 0..f {
                    feat[l * f + k] += w * self.params[idx + k] as f64;
                }
            }
        }
    }

    /// Runs the MLP; `acts` receives every layer's pre-activation values.
    fn mlp_forward(&self, input: &[f64], acts: &mut [f64]) -> [f64; 5] {
        let mut off = 0;
        let mut prev_off = usize::MAX;
        for (li, layer) in self.layers.iter().enumerate() {
            for o in 0..layer.n_out {
                let row = &self.params[layer.w + o * layer.n_in..layer.w + (o + 1) * layer.n_in];
                let mut z = self.params[layer.b + o] as f64;
                if li == 0 {
                    for (wv, xv) in row.iter().zip(input) {
                        z += *wv as f64 * xv;
                    }
                } else {
                    for (i, wv) in row.iter().enumerate() {
                        z += *wv as f64 * leaky(acts[prev_off + i]);
                    }
                }
                acts[off + o] = z;
            }
            prev_off = off;
            off += layer.n_out;
        }
        let mut out = [0.0; 5];
        for (k, o) in out.iter_mut().enumerate() {
            *o = sigmoid(acts[prev_off + k]);
        }
        out
    }

    /// The five sigmoid outputs `(r, g, b, roughness, metallic)` at a world position.
    pub fn query_raw(&self, position: DVec3) -> [f64; 5] {
        let mut feat = [0.0; MAX_LEVELS * MAX_FEATURES];
        let nf = self.resolutions.len() * self.config.features as usize;
        self.encode(self.domain.normalize(position), &mut feat[..nf], None);
        let mut acts = [0.0; MAX_ACTIVATIONS];
        self.mlp_forward(&feat[..nf], &mut acts)
    }

    pub fn query(&self, position: DVec3) -> PbrSample {
        PbrSample::from_array(self.query_raw(position))
    }

    pub fn query_backward(&mut self, position: DVec3, upstream: [f64; 5]) {
        self.accumulate(&[(position, upstream)]);
    }

    /// Adds `Σ upstream · ∂output/∂params` over all records to the gradient
    /// buffer. Chunks are processed in parallel and merged in record order.
    pub fn accumulate(&mut self, records: &[(DVec3, [f64; 5])]) {
        let partials: Vec<(Vec<f64>, Vec<(usize, f64)>)> = records
            .par_chunks(BACKWARD_CHUNK)
            .map(|chunk| self.backward_chunk(chunk))
            .collect();
        let mlp_start = self.layers[0].w;
        for (mlp, table) in partials {
            for (g, v) in self.grad[mlp_start..].iter_mut().zip(&mlp) {
                *g += v;
            }
            for (i, v) in table {
                self.grad[i] += v;
            }
        }
    }

    fn backward_chunk(&self, records: &[(DVec3, [f64; 5])]) -> (Vec<f64>, Vec<(usize, f64)>) {
        let mlp_start = self.layers[0].w;
        let mut mlp_grad = vec![0.0; self.params.len() - mlp_start];
        let f = self.config.features as usize;
        let nl = self.resolutions.len();
        let nf = nl * f;
        let mut table = Vec::with_capacity(records.len() * nl * 8 * f);
        let mut feat = vec![0.0; nf];
        let mut corners = vec![(0usize, 0.0); nl * 8];
        let mut acts = vec![0.0; MAX_ACTIVATIONS];
        let mut delta = vec![0.0; MAX_ACTIVATIONS];
        let mut dinput = vec![0.0; nf];
        for (pos, up) in records {
            if up.iter().all(|u| *u == 0.0) {
                continue;
            }
            self.encode(self.domain.normalize(*pos), &mut feat, Some(&mut corners));
            let out = self.mlp_forward(&feat, &mut acts);
            // layer offsets into acts
            let mut offs = Vec::with_capacity(self.layers.len());
            let mut o = 0;
            for l in &self.layers {
                offs.push(o);
                o += l.n_out;
            }
            let last = self.layers.len() - 1;
            for k in 0..5 {
                delta[offs[last] + k] = up[k] * out[k] * (1.0 - out[k]);
            }
            for li in (0..self.layers.len()).rev() {
                let layer = self.layers[li];
                let d_off = offs[li];
                for o in 0..layer.n_out {
                    let d = delta[d_off + o];
                    mlp_grad[layer.b + o - mlp_start] += d;
                    if d == 0.0 {
                        continue;
                    }
                    let wrow = layer.w + o * layer.n_in - mlp_start;
                    if li == 0 {
                        for i in 0..layer.n_in {
                            mlp_grad[wrow + i] += d * feat[i];
                        }
                    } else {
                        let p_off = offs[li - 1];
                        for i in 0..layer.n_in {
                            mlp_grad[wrow + i] += d * leaky(acts[p_off + i]);
                        }
                    }
                }
                // propagate to the previous layer's pre-activations (or the input)
                if li == 0 {
                    for i in 0..layer.n_in {
                        let mut s = 0.0;
                        for o in 0..layer.n_out {
                            s += self.params[layer.w + o * layer.n_in + i] as f64 * delta[d_off + o];
                        }
                        dinput[i] = s;
                    }
                } else {
                    let p_off = offs[li - 1];
                    for i in 0..layer.n_in {
                        let mut s = 0.0;
                        for o in 0..layer.n_out {
                            s += self.params[layer.w + o * layer.n_in + i] as f64 * delta[d_off + o];
                        }
                        let slope = if acts[p_off + i] > 0.0 { 1.0 } else { LEAKY_SLOPE };
                        delta[p_off + i] = s * slope;
                    }
                }
            }
            for l in 0..nl {
                for c in 0..8 {
                    let (idx, w) = corners[l * 8 + c];
                    if w == 0.0 {
                        continue;
                    }
                    for k in 0..f {
                        let g = w * dinput[l * f + k];
                        if g != 0.0 {
                            table.push((idx + k, g));
                        }
                    }
                }
            }
        }
        (mlp_grad, table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> FieldConfig {
        FieldConfig {
            levels: 4,
            log2_table_size: 10,
            features: 2,
            base_resolution: 4,
            max_resolution: 32,
            hidden_layers: 2,
            hidden_width: 16,
            seed: 3,
        }
    }

    fn unit_domain() -> Domain {
        Domain {
            min: DVec3::ZERO,
            scale: 1.0,
        }
    }

    fn randomized(seed: u64) -> MaterialField {
        let mut f = MaterialField::new(tiny(), unit_domain()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in f.params_mut() {
            *p += rng.gen_range(-0.5f32..0.5);
        }
        f
    }

    #[test]
    fn default_schedule() {
        let r = FieldConfig::default().resolutions();
        assert_eq!(r.len(), 12);
        assert_eq!(r[0], 16);
        assert_eq!(r[11], 2048);
        assert!(r.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn zero_parameters_give_one_half() {
        let mut f = MaterialField::new(tiny(), unit_domain()).unwrap();
        let tr = f.table_range();
        f.params_mut()[tr].iter_mut().for_each(|p| *p = 0.0);
        for p in [DVec3::ZERO, DVec3::splat(0.37), DVec3::ONE] {
            assert_eq!(f.query_raw(p), [0.5; 5]);
        }
    }

    #[test]
    fn fresh_field_is_near_one_half_and_deterministic() {
        let f = MaterialField::new(FieldConfig::small(), unit_domain()).unwrap();
        let p = DVec3::new(0.3, 0.6, 0.1);
        let a = f.query_raw(p);
        assert!(a.iter().all(|v| (v - 0.5).abs() < 1e-3));
        assert_eq!(a, f.query_raw(p));
        let g = MaterialField::new(FieldConfig::small(), unit_domain()).unwrap();
        assert_eq!(f.params(), g.params());
    }

    #[test]
    fn coarse_lattice_point_uses_one_entry() {
        let f = randomized(1);
        // (1/4, 2/4, 3/4) is a lattice point of the 4³ level
        let p = DVec3::new(0.25, 0.5, 0.75);
        let base = f.query_raw(p);
        let idx = f.entry_index(0, [1, 2, 3]);
        let lr = f.level_range(0);
        let mut g = f.clone();
        for i in lr.clone() {
            if i != idx && i != idx + 1 {
                g.params_mut()[i] += 0.3;
            }
        }
        assert_eq!(g.query_raw(p), base);
        g.params_mut()[idx] += 0.3;
        assert_ne!(g.query_raw(p), base);
    }

    #[test]
    fn zero_upstream_leaves_gradient_untouched() {
        let mut f = randomized(2);
        f.query_backward(DVec3::splat(0.4), [0.0; 5]);
        assert!(f.grad().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn opposite_upstreams_cancel() {
        let mut f = randomized(3);
        let p = DVec3::new(0.1, 0.7, 0.4);
        let up = [0.3, -1.0, 0.2, 0.7, -0.4];
        f.query_backward(p, up);
        assert!(f.grad().iter().any(|g| *g != 0.0));
        f.query_backward(p, up.map(|v| -v));
        assert!(f.grad().iter().all(|g| g.abs() < 1e-6));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = randomized(5);
        let n = base.num_params();
        let table = base.table_range();
        let mut checked = 0;
        let mut tries = 0;
        while checked < 64 {
            tries += 1;
            assert!(tries < 10_000);
            let p = DVec3::new(rng.gen(), rng.gen(), rng.gen());
            let up: [f64; 5] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let mut f = base.clone();
            f.query_backward(p, up);
            // alternate between table entries actually touched and MLP weights
            let idx = if checked % 2 == 0 {
                let l = rng.gen_range(0..f.resolutions().len());
                let x = f.domain().normalize(p) * f.resolutions()[l] as f64;
                let c = [x.x.floor() as u32, x.y.floor() as u32 + 1, x.z.floor() as u32];
                f.entry_index(l, c) + rng.gen_range(0..2)
            } else {
                rng.gen_range(table.end..n)
            };
            let analytic = f.grad()[idx];
            let eps = 1e-3f32;
            let mut hi = base.clone();
            let mut lo = base.clone();
            hi.params_mut()[idx] += eps;
            lo.params_mut()[idx] -= eps;
            let delta = hi.params()[idx] as f64 - lo.params()[idx] as f64;
            let dot = |o: [f64; 5]| o.iter().zip(&up).map(|(a, b)| a * b).sum::<f64>();
            let fd = (dot(hi.query_raw(p)) - dot(lo.query_raw(p))) / delta;
            if analytic.abs() < 1e-5 && fd.abs() < 1e-5 {
                continue;
            }
            let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs());
            assert!(rel <= 1e-2, "param {idx}: analytic {analytic} fd {fd}");
            checked += 1;
        }
    }

    #[test]
    fn accumulation_is_independent_of_thread_count() {
        let base = randomized(6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let recs: Vec<(DVec3, [f64; 5])> = (0..5000)
            .map(|_| (DVec3::new(rng.gen(), rng.gen(), rng.gen()), std::array::from_fn(|_| rng.gen_range(-1.0..1.0))))
            .collect();
        let run = |threads: usize| {
            let mut f = base.clone();
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| f.accumulate(&recs));
            f.grad().to_vec()
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn coarse_only_field_is_smoother() {
        // energy of output differences between nearby points drops as fine
        // levels are disabled
        let full = randomized(8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<DVec3> = (0..2000).map(|_| DVec3::new(rng.gen(), rng.gen(), rng.gen())).collect();
        let energy = |f: &MaterialField| {
            pts.iter()
                .map(|p| {
                    let a = f.query_raw(*p);
                    let b = f.query_raw(*p + DVec3::splat(0.01));
                    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()
                })
                .sum::<f64>()
        };
        let mut last = energy(&full);
        let mut f = full.clone();
        for l in (1..f.resolutions().len()).rev() {
            let r = f.level_range(l);
            f.params_mut()[r].iter_mut().for_each(|p| *p = 0.0);
            let e = energy(&f);
            assert!(e < last, "level {l}: {e} >= {last}");
            last = e;
        }
    }

    #[test]
    fn bad_config_is_rejected() {
        let mut c = tiny();
        c.levels = 0;
        assert!(MaterialField::new(c, unit_domain()).is_err());
        let mut c = tiny();
        c.max_resolution = 2;
        assert!(MaterialField::new(c, unit_domain()).is_err());
    }
}
