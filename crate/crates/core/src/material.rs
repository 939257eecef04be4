//! Sources of per-shading-point material parameters.

use glam::{DVec2, DVec3};

use crate::brdf::PbrSample;
use crate::image::{GrayImage, RgbImage};
use crate::matfield::MaterialField;

pub trait MaterialSource: Sync {
    fn eval(&self, position: DVec3, uv: DVec2) -> PbrSample;
}

impl MaterialSource for PbrSample {
    fn eval(&self, _: DVec3, _: DVec2) -> PbrSample {
        *self
    }
}

impl MaterialSource for MaterialField {
    fn eval(&self, position: DVec3, _: DVec2) -> PbrSample {
        self.query(position)
    }
}

/// Any `Fn(position, uv) -> PbrSample`.
pub struct Procedural<F>(pub F);

impl<F: Fn(DVec3, DVec2) -> PbrSample + Sync> MaterialSource for Procedural<F> {
    fn eval(&self, position: DVec3, uv: DVec2) -> PbrSample {
        (self.0)(position, uv)
    }
}

/// Baked UV maps. Base color is linear; lookups are bilinear with clamped
/// edges. UV `(0, 0)` is the bottom-left texel corner.
#[derive(Clone, Debug)]
pub struct TextureMaterial {
    pub base_color: RgbImage,
    pub roughness: GrayImage,
    pub metallic: GrayImage,
}

fn bilinear<T>(img: &crate::image::Image<T>, uv: DVec2, zero: T) -> T
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let x = uv.x * img.width as f64 - 0.5;
    let y = (1.0 - uv.y) * img.height as f64 - 0.5;
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let cx = |v: f64| v.clamp(0.0, (img.width - 1) as f64) as u32;
    let cy = |v: f64| v.clamp(0.0, (img.height - 1) as f64) as u32;
    let (x0i, x1i, y0i, y1i) = (cx(x0), cx(x0 + 1.0), cy(y0), cy(y0 + 1.0));
    let mut acc = zero;
    acc = acc + *img.get(x0i, y0i) * ((1.0 - fx) * (1.0 - fy));
    acc = acc + *img.get(x1i, y0i) * (fx * (1.0 - fy));
    acc = acc + *img.get(x0i, y1i) * ((1.0 - fx) * fy);
    acc + *img.get(x1i, y1i) * (fx * fy)
}

impl MaterialSource for TextureMaterial {
    fn eval(&self, _: DVec3, uv: DVec2) -> PbrSample {
        PbrSample::new(
            bilinear(&self.base_color, uv, DVec3::ZERO),
            bilinear(&self.roughness, uv, 0.0),
            bilinear(&self.metallic, uv, 0.0),
        )
    }
}
