//! Display transform: exposure 1, clamp to [0, 1], sRGB transfer.

use glam::DVec3;

pub fn srgb_encode(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    if x <= 0.0031308 {
        12.92 * x
    } else {
        1.055 * x.powf(1.0 / 2.4) - 0.055
    }
}

pub fn srgb_decode(y: f64) -> f64 {
    let y = y.clamp(0.0, 1.0);
    if y <= 0.04045 {
        y / 12.92
    } else {
        ((y + 0.055) / 1.055).powf(2.4)
    }
}

/// Derivative of [`srgb_encode`]; zero outside the open clamp interval.
pub fn srgb_encode_grad(x: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        0.0
    } else if x <= 0.0031308 {
        12.92
    } else {
        1.055 / 2.4 * x.powf(1.0 / 2.4 - 1.0)
    }
}

pub fn tonemap(c: DVec3) -> DVec3 {
    DVec3::new(srgb_encode(c.x), srgb_encode(c.y), srgb_encode(c.z))
}

pub fn tonemap_grad(c: DVec3) -> DVec3 {
    DVec3::new(srgb_encode_grad(c.x), srgb_encode_grad(c.y), srgb_encode_grad(c.z))
}

pub fn srgb_decode_rgb(c: DVec3) -> DVec3 {
    DVec3::new(srgb_decode(c.x), srgb_decode(c.y), srgb_decode(c.z))
}
