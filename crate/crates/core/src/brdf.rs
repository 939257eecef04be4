//! Lambertian diffuse plus GGX microfacet specular.
//!
//! `f = k_d / π + D·G·F / (4 cos_o cos_i)` with `k_d = c(1 − m)`,
//! `k_s = 0.04(1 − m) + c·m`, Schlick Fresnel at `F0 = k_s`, height-correlated
//! Smith `G` and `α = max(r², 1e-3)`. The two lobes are not energy
//! renormalized against each other.
//!
//! Which GGX sampling routine and Smith form the reference renderer used is
//! not known; visible-normal sampling and the height-correlated form are
//! implementation choices here.

use glam::{DVec2, DVec3};

use crate::math::{reflect, Frame, INV_PI, PI};

pub const ALPHA_MIN: f64 = 1e-3;

/// Material parameters at a shading point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PbrSample {
    pub base_color: DVec3,
    pub roughness: f64,
    pub metallic: f64,
}

impl PbrSample {
    /// Clamps every component to [0, 1].
    pub fn new(base_color: DVec3, roughness: f64, metallic: f64) -> Self {
        PbrSample {
            base_color: base_color.clamp(DVec3::ZERO, DVec3::ONE),
            roughness: roughness.clamp(0.0, 1.0),
            metallic: metallic.clamp(0.0, 1.0),
        }
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        PbrSample::new(DVec3::new(v[0], v[1], v[2]), v[3], v[4])
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.base_color.x, self.base_color.y, self.base_color.z, self.roughness, self.metallic]
    }

    pub fn alpha(&self) -> f64 {
        (self.roughness * self.roughness).max(ALPHA_MIN)
    }

    pub fn lobes(&self) -> LobeWeights {
        derive_lobes(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LobeWeights {
    pub kd: DVec3,
    pub ks: DVec3,
}

pub fn derive_lobes(s: &PbrSample) -> LobeWeights {
    let m = s.metallic;
    LobeWeights {
        kd: s.base_color * (1.0 - m),
        ks: DVec3::splat(0.04 * (1.0 - m)) + s.base_color * m,
    }
}

pub fn ggx_ndf(cos_nh: f64, alpha: f64) -> f64 {
    if cos_nh <= 0.0 {
        return 0.0;
    }
    let a2 = alpha * alpha;
    let d = cos_nh * cos_nh * (a2 - 1.0) + 1.0;
    a2 / (PI * d * d)
}

/// `sqrt(cos²(1 − α²) + α²)`, i.e. `cos · sqrt(1 + α² tan²)`.
#[inline]
fn lambda_root(cos: f64, a2: f64) -> f64 {
    (cos * cos * (1.0 - a2) + a2).sqrt()
}

/// Single-direction Smith masking.
pub fn smith_g1(cos: f64, alpha: f64) -> f64 {
    if cos <= 0.0 {
        return 0.0;
    }
    2.0 * cos / (cos + lambda_root(cos, alpha * alpha))
}

/// Height-correlated Smith masking-shadowing.
pub fn smith_g(cos_ni: f64, cos_no: f64, alpha: f64) -> f64 {
    if cos_ni <= 0.0 || cos_no <= 0.0 {
        return 0.0;
    }
    let a2 = alpha * alpha;
    2.0 * cos_ni * cos_no / (cos_no * lambda_root(cos_ni, a2) + cos_ni * lambda_root(cos_no, a2))
}

/// Uncorrelated product `G1(i)·G1(o)`.
pub fn smith_g_separable(cos_ni: f64, cos_no: f64, alpha: f64) -> f64 {
    smith_g1(cos_ni, alpha) * smith_g1(cos_no, alpha)
}

/// `G / (4 cos_i cos_o)` without the cancellation at grazing angles.
#[inline]
fn visibility(cos_i: f64, cos_o: f64, a2: f64) -> f64 {
    0.5 / (cos_i * lambda_root(cos_o, a2) + cos_o * lambda_root(cos_i, a2))
}

pub fn fresnel_schlick(f0: DVec3, cos_vh: f64) -> DVec3 {
    let s = (1.0 - cos_vh.clamp(0.0, 1.0)).powi(5);
    f0 + (DVec3::ONE - f0) * s
}

/// Power heuristic with β = 2.
pub fn mis_weight(pdf_a: f64, pdf_b: f64) -> f64 {
    let a = pdf_a * pdf_a;
    let b = pdf_b * pdf_b;
    if a + b == 0.0 {
        return 0.0;
    }
    if a.is_infinite() {
        return 1.0;
    }
    a / (a + b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lobe {
    Diffuse,
    Specular,
}

#[derive(Clone, Copy, Debug)]
pub struct BsdfSample {
    pub wi: DVec3,
    /// Mixture density over both lobes.
    pub pdf: f64,
    pub lobe: Lobe,
}

/// Derivatives of each output channel with respect to the five material
/// parameters. Channel `k` depends on base color channel `k` only.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BsdfGrad {
    pub d_base: DVec3,
    pub d_roughness: DVec3,
    pub d_metallic: DVec3,
}

/// The reflectance model bound to one material sample.
#[derive(Clone, Copy, Debug)]
pub struct Bsdf {
    pub params: PbrSample,
    pub lobes: LobeWeights,
    pub alpha: f64,
    /// Drops the specular lobe (testing aid).
    pub diffuse_only: bool,
}

pub fn cosine_hemisphere(u: DVec2) -> DVec3 {
    let r = u.x.sqrt();
    let phi = 2.0 * PI * u.y;
    DVec3::new(r * phi.cos(), r * phi.sin(), (1.0 - u.x).max(0.0).sqrt())
}

/// Visible-normal GGX sampling in the local frame (normal = +Z).
pub fn sample_ggx_vndf(wo: DVec3, alpha: f64, u: DVec2) -> DVec3 {
    let vh = DVec3::new(alpha * wo.x, alpha * wo.y, wo.z).normalize();
    let lensq = vh.x * vh.x + vh.y * vh.y;
    let t1 = if lensq > 0.0 {
        DVec3::new(-vh.y, vh.x, 0.0) / lensq.sqrt()
    } else {
        DVec3::X
    };
    let t2 = vh.cross(t1);
    let r = u.x.sqrt();
    let phi = 2.0 * PI * u.y;
    let p1 = r * phi.cos();
    let mut p2 = r * phi.sin();
    let s = 0.5 * (1.0 + vh.z);
    p2 = (1.0 - s) * (1.0 - p1 * p1).max(0.0).sqrt() + s * p2;
    let nh = p1 * t1 + p2 * t2 + (1.0 - p1 * p1 - p2 * p2).max(0.0).sqrt() * vh;
    DVec3::new(alpha * nh.x, alpha * nh.y, nh.z.max(0.0)).normalize()
}

impl Bsdf {
    pub fn new(params: PbrSample) -> Self {
        Bsdf {
            params,
            lobes: derive_lobes(&params),
            alpha: params.alpha(),
            diffuse_only: false,
        }
    }

    pub fn with_diffuse_only(mut self, on: bool) -> Self {
        self.diffuse_only = on;
        self
    }

    /// Probability of picking the specular lobe.
    pub fn specular_probability(&self) -> f64 {
        if self.diffuse_only {
            return 0.0;
        }
        let d = self.lobes.kd.element_sum() / 3.0;
        let s = self.lobes.ks.element_sum() / 3.0;
        if d + s <= 0.0 {
            0.5
        } else {
            s / (d + s)
        }
    }

    pub fn eval(&self, wi: DVec3, wo: DVec3, n: DVec3) -> DVec3 {
        let ci = wi.dot(n);
        let co = wo.dot(n);
        if ci <= 0.0 || co <= 0.0 {
            return DVec3::ZERO;
        }
        let diffuse = self.lobes.kd * INV_PI;
        if self.diffuse_only {
            return diffuse;
        }
        let h = (wi + wo).normalize();
        let a2 = self.alpha * self.alpha;
        let dv = ggx_ndf(h.dot(n), self.alpha) * visibility(ci, co, a2);
        diffuse + fresnel_schlick(self.lobes.ks, wo.dot(h)) * dv
    }

    /// Specular-lobe density of `wi` (solid angle).
    fn pdf_specular(&self, wi: DVec3, wo: DVec3, n: DVec3) -> f64 {
        let co = wo.dot(n);
        let h = (wi + wo).normalize();
        smith_g1(co, self.alpha) * ggx_ndf(h.dot(n), self.alpha) / (4.0 * co)
    }

    pub fn pdf(&self, wi: DVec3, wo: DVec3, n: DVec3) -> f64 {
        let ci = wi.dot(n);
        let co = wo.dot(n);
        if ci <= 0.0 || co <= 0.0 {
            return 0.0;
        }
        let ps = self.specular_probability();
        let mut pdf = (1.0 - ps) * ci * INV_PI;
        if ps > 0.0 {
            pdf += ps * self.pdf_specular(wi, wo, n);
        }
        pdf
    }

    /// `u[0]` picks the lobe, `u[1..3]` the direction. Returns `None` when
    /// the sampled direction falls below the surface.
    pub fn sample(&self, wo: DVec3, n: DVec3, u: [f64; 3]) -> Option<BsdfSample> {
        if wo.dot(n) <= 0.0 {
            return None;
        }
        let frame = Frame::from_normal(n);
        let ps = self.specular_probability();
        let u2 = DVec2::new(u[1], u[2]);
        let (wi, lobe) = if u[0] < ps {
            let wo_l = frame.to_local(wo);
            let m = sample_ggx_vndf(wo_l, self.alpha, u2);
            (frame.to_world(reflect(wo_l, m)), Lobe::Specular)
        } else {
            (frame.to_world(cosine_hemisphere(u2)), Lobe::Diffuse)
        };
        let pdf = self.pdf(wi, wo, n);
        if !(pdf > 0.0) || !pdf.is_finite() {
            return None;
        }
        Some(BsdfSample { wi, pdf, lobe })
    }

    /// Jacobian of [`eval`](Self::eval) with respect to base color,
    /// roughness and metallic.
    pub fn eval_grad(&self, wi: DVec3, wo: DVec3, n: DVec3) -> BsdfGrad {
        let ci = wi.dot(n);
        let co = wo.dot(n);
        if ci <= 0.0 || co <= 0.0 {
            return BsdfGrad::default();
        }
        let c = self.params.base_color;
        let m = self.params.metallic;
        let mut g = BsdfGrad {
            d_base: DVec3::splat((1.0 - m) * INV_PI),
            d_roughness: DVec3::ZERO,
            d_metallic: -c * INV_PI,
        };
        if self.diffuse_only {
            return g;
        }
        let h = (wi + wo).normalize();
        let cos_nh = h.dot(n);
        let a2 = self.alpha * self.alpha;
        let d = ggx_ndf(cos_nh, self.alpha);
        let v = visibility(ci, co, a2);
        let s5 = (1.0 - wo.dot(h).clamp(0.0, 1.0)).powi(5);
        let f = self.lobes.ks + (DVec3::ONE - self.lobes.ks) * s5;
        let dv = d * v;
        g.d_base += DVec3::splat(dv * (1.0 - s5) * m);
        g.d_metallic += (c - DVec3::splat(0.04)) * (dv * (1.0 - s5));

        let r = self.params.roughness;
        if r * r > ALPHA_MIN {
            // D and V as functions of a2 = r⁴
            let c2 = cos_nh.max(0.0).powi(2);
            let den = c2 * (a2 - 1.0) + 1.0;
            let dd = if cos_nh > 0.0 { (den - 2.0 * a2 * c2) / (PI * den * den * den) } else { 0.0 };
            let ro = lambda_root(co, a2);
            let ri = lambda_root(ci, a2);
            let sum = ci * ro + co * ri;
            let dsum = ci * (1.0 - co * co) / (2.0 * ro) + co * (1.0 - ci * ci) / (2.0 * ri);
            let dvis = -0.5 * dsum / (sum * sum);
            let da2_dr = 4.0 * r * r * r;
            g.d_roughness = f * ((dd * v + d * dvis) * da2_dr);
        }
        g
    }
}
