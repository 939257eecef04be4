//! Image and regularizer losses with their adjoints.

use glam::DVec3;

use crate::error::Result;
use crate::image::{check_shape, GrayImage, Image, RgbImage};
use crate::tracer::{tonemap, tonemap_grad};

/// Masked means below this are treated as degenerate.
pub const MEAN_EPSILON: f64 = 1e-4;

/// A masked pixel has mask value above one half.
#[inline]
pub fn masked(m: f64) -> bool {
    m > 0.5
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageLoss {
    pub value: f64,
    /// `∂loss/∂radiance` per pixel.
    pub adjoint: RgbImage,
    pub count: usize,
}

/// Mean absolute difference between the tonemapped render and the display
/// reference over masked pixels and the three channels.
pub fn image_loss(radiance: &RgbImage, reference: &RgbImage, mask: &GrayImage) -> Result<ImageLoss> {
    check_shape(radiance, reference, "image loss reference")?;
    check_shape(radiance, mask, "image loss mask")?;
    let count = mask.pixels.iter().filter(|m| masked(**m)).count();
    let mut adjoint = Image::filled(radiance.width, radiance.height, DVec3::ZERO);
    if count == 0 {
        log::warn!("image loss: empty mask");
        return Ok(ImageLoss { value: 0.0, adjoint, count });
    }
    let norm = 1.0 / (3 * count) as f64;
    let mut sum = 0.0;
    for i in 0..radiance.pixels.len() {
        if !masked(mask.pixels[i]) {
            continue;
        }
        let x = radiance.pixels[i];
        let d = tonemap(x) - reference.pixels[i];
        sum += d.x.abs() + d.y.abs() + d.z.abs();
        let sign = DVec3::new(sign(d.x), sign(d.y), sign(d.z));
        adjoint.pixels[i] = sign * tonemap_grad(x) * norm;
    }
    Ok(ImageLoss { value: sum * norm, adjoint, count })
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `mean |p/mean(p) − g/mean(g)|` over two equal-length element lists, with
/// the gradient with respect to `p` (including the dependence of `mean(p)`).
/// Returns `None` when either mean is at most [`MEAN_EPSILON`].
pub fn scale_invariant_l1(pred: &[f64], guide: &[f64]) -> Option<(f64, Vec<f64>)> {
    assert_eq!(pred.len(), guide.len());
    let n = pred.len();
    if n == 0 {
        return None;
    }
    let nf = n as f64;
    let mp = pred.iter().sum::<f64>() / nf;
    let mg = guide.iter().sum::<f64>() / nf;
    if !(mp > MEAN_EPSILON && mg > MEAN_EPSILON) {
        return None;
    }
    let mut value = 0.0;
    let mut signs = Vec::with_capacity(n);
    let mut coupled = 0.0;
    for (p, g) in pred.iter().zip(guide) {
        let d = p / mp - g / mg;
        value += d.abs();
        let s = sign(d);
        signs.push(s);
        coupled += s * p;
    }
    // ∂/∂p_k (p_i/mp) = δ_ik/mp − p_i/(n·mp²)
    let shared = coupled / (nf * mp * mp);
    let grad = signs.iter().map(|s| (s / mp - shared) / nf).collect();
    Some((value / nf, grad))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegTerm<T> {
    pub value: f64,
    pub grad: Image<T>,
}

/// Scale-invariant L1 between a gray prediction and guide over masked pixels.
pub fn scale_invariant_loss_gray(pred: &GrayImage, guide: &GrayImage, mask: &GrayImage) -> Result<Option<RegTerm<f64>>> {
    check_shape(pred, guide, "regularizer guide")?;
    check_shape(pred, mask, "regularizer mask")?;
    let idx: Vec<usize> = (0..pred.len()).filter(|i| masked(mask.pixels[*i])).collect();
    let p: Vec<f64> = idx.iter().map(|i| pred.pixels[*i]).collect();
    let g: Vec<f64> = idx.iter().map(|i| guide.pixels[*i]).collect();
    Ok(scale_invariant_l1(&p, &g).map(|(value, gp)| {
        let mut grad = Image::filled(pred.width, pred.height, 0.0);
        for (i, d) in idx.iter().zip(gp) {
            grad.pixels[*i] = d;
        }
        RegTerm { value, grad }
    }))
}

/// Colour variant: channels are pooled, so one mean normalizes the whole image.
pub fn scale_invariant_loss_rgb(pred: &RgbImage, guide: &RgbImage, mask: &GrayImage) -> Result<Option<RegTerm<DVec3>>> {
    check_shape(pred, guide, "regularizer guide")?;
    check_shape(pred, mask, "regularizer mask")?;
    let idx: Vec<usize> = (0..pred.len()).filter(|i| masked(mask.pixels[*i])).collect();
    let p: Vec<f64> = idx.iter().flat_map(|i| pred.pixels[*i].to_array()).collect();
    let g: Vec<f64> = idx.iter().flat_map(|i| guide.pixels[*i].to_array()).collect();
    Ok(scale_invariant_l1(&p, &g).map(|(value, gp)| {
        let mut grad = Image::filled(pred.width, pred.height, DVec3::ZERO);
        for (k, i) in idx.iter().enumerate() {
            grad.pixels[*i] = DVec3::new(gp[3 * k], gp[3 * k + 1], gp[3 * k + 2]);
        }
        RegTerm { value, grad }
    }))
}

/// Per-frame loss components; `total = image + λ·(base + rough + metal)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub image: f64,
    pub reg_base: f64,
    pub reg_rough: f64,
    pub reg_metal: f64,
}

impl LossParts {
    pub fn total(&self, lambda: f64) -> f64 {
        self.image + lambda * (self.reg_base + self.reg_rough + self.reg_metal)
    }
}

pub fn total_loss(parts: &LossParts, lambda: f64) -> f64 {
    parts.total(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(px: &[f64]) -> GrayImage {
        Image { width: px.len() as u32, height: 1, pixels: px.to_vec() }
    }

    #[test]
    fn image_loss_examples() {
        let r = Image::from_fn(4, 2, |x, y| DVec3::splat(0.05 * (x + y) as f64 + 0.1));
        let full = Image::filled(4, 2, 1.0);
        let same = image_loss(&r, &r.map(|c| tonemap(*c)), &full).unwrap();
        assert_eq!(same.value, 0.0);
        let shifted = r.map(|c| tonemap(*c) + DVec3::splat(0.1));
        let l = image_loss(&r, &shifted, &full).unwrap();
        assert!((l.value - 0.1).abs() < 1e-12);

        // changes outside the mask do nothing
        let half = Image::from_fn(4, 2, |x, _| if x < 2 { 1.0 } else { 0.0 });
        let mut other = shifted.clone();
        for y in 0..2 {
            *other.get_mut(3, y) = DVec3::splat(0.9);
        }
        let a = image_loss(&r, &shifted, &half).unwrap();
        let b = image_loss(&r, &other, &half).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.count, 4);
        assert_eq!(*a.adjoint.get(3, 0), DVec3::ZERO);

        let empty = image_loss(&r, &shifted, &Image::filled(4, 2, 0.0)).unwrap();
        assert_eq!(empty.value, 0.0);
        assert!(empty.adjoint.pixels.iter().all(|a| *a == DVec3::ZERO));
    }

    #[test]
    fn image_loss_adjoint_matches_finite_differences() {
        let r = Image::from_fn(3, 3, |x, y| DVec3::new(0.1 + 0.1 * x as f64, 0.3, 0.05 + 0.07 * y as f64));
        let reference = Image::from_fn(3, 3, |x, y| DVec3::new(0.5, 0.2 + 0.1 * x as f64, 0.4 - 0.05 * y as f64));
        let mask = Image::from_fn(3, 3, |x, y| if (x + y) % 4 == 0 { 0.0 } else { 1.0 });
        let l = image_loss(&r, &reference, &mask).unwrap();
        let h = 1e-7;
        for i in 0..9 {
            for c in 0..3 {
                let mut rp = r.clone();
                rp.pixels[i][c] += h;
                let mut rm = r.clone();
                rm.pixels[i][c] -= h;
                let fd = (image_loss(&rp, &reference, &mask).unwrap().value
                    - image_loss(&rm, &reference, &mask).unwrap().value)
                    / (2.0 * h);
                assert!((fd - l.adjoint.pixels[i][c]).abs() < 1e-6, "{i} {c}: {fd} vs {}", l.adjoint.pixels[i][c]);
            }
        }
    }

    #[test]
    fn scale_invariant_examples() {
        let (v, _) = scale_invariant_l1(&[1.0, 3.0], &[1.0, 1.0]).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let p = [0.2, 0.5, 0.9, 0.1];
        for c in [0.5, 1.0, 3.7] {
            let g: Vec<f64> = p.iter().map(|x| x * c).collect();
            assert!(scale_invariant_l1(&p, &g).unwrap().0 <= 1e-6);
        }
        assert!(scale_invariant_l1(&[0.0, 0.0], &[1.0, 1.0]).is_none());
        assert!(scale_invariant_l1(&[1.0, 1.0], &[0.0, 0.0]).is_none());
    }

    #[test]
    fn scale_invariant_gradient_matches_finite_differences() {
        let p = [0.2, 0.55, 0.9, 0.12, 0.4];
        let g = [0.3, 0.3, 0.8, 0.05, 0.6];
        let (_, grad) = scale_invariant_l1(&p, &g).unwrap();
        let h = 1e-7;
        for k in 0..p.len() {
            let mut a = p;
            a[k] += h;
            let mut b = p;
            b[k] -= h;
            let fd = (scale_invariant_l1(&a, &g).unwrap().0 - scale_invariant_l1(&b, &g).unwrap().0) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-6, "{k}: {fd} vs {}", grad[k]);
        }
    }

    #[test]
    fn image_wrappers_respect_mask() {
        let pred = gray(&[1.0, 3.0, 100.0]);
        let guide = gray(&[1.0, 1.0, 0.0]);
        let mask = gray(&[1.0, 1.0, 0.0]);
        let t = scale_invariant_loss_gray(&pred, &guide, &mask).unwrap().unwrap();
        assert!((t.value - 0.5).abs() < 1e-15);
        assert_eq!(t.grad.pixels[2], 0.0);

        let rgb = Image { width: 2, height: 1, pixels: vec![DVec3::new(0.1, 0.2, 0.3), DVec3::new(0.6, 0.5, 0.4)] };
        let scaled = rgb.map(|c| *c * 3.7);
        let full = gray(&[1.0, 1.0]);
        assert!(scale_invariant_loss_rgb(&rgb, &scaled, &full).unwrap().unwrap().value <= 1e-6);
        assert!(scale_invariant_loss_rgb(&rgb, &scaled, &gray(&[0.0, 0.0])).unwrap().is_none());
    }

    #[test]
    fn total_is_weighted_sum() {
        let p = LossParts { image: 1.0, reg_base: 2.0, reg_rough: 3.0, reg_metal: 4.0 };
        assert!((total_loss(&p, 0.2) - 2.8).abs() < 1e-12);
        assert_eq!(total_loss(&p, 0.0), 1.0);
    }
}
