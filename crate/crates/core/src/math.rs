//! Small vector helpers shared by the shading code.

use glam::{DVec3, Vec3A};

pub use std::f64::consts::PI;
pub const INV_PI: f64 = std::f64::consts::FRAC_1_PI;

/// Rec.709 luminance weights.
pub const LUMA: DVec3 = DVec3::new(0.2126, 0.7152, 0.0722);

#[inline]
pub fn luminance(c: DVec3) -> f64 {
    c.dot(LUMA)
}

#[inline]
pub fn to_f64(v: Vec3A) -> DVec3 {
    DVec3::new(v.x as f64, v.y as f64, v.z as f64)
}

#[inline]
pub fn to_f32(v: DVec3) -> Vec3A {
    Vec3A::new(v.x as f32, v.y as f32, v.z as f32)
}

/// Orthonormal basis around a unit normal (Duff et al. branchless construction).
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    pub t: DVec3,
    pub b: DVec3,
    pub n: DVec3,
}

impl Frame {
    pub fn from_normal(n: DVec3) -> Self {
        let sign = 1f64.copysign(n.z);
        let a = -1.0 / (sign + n.z);
        let b = n.x * n.y * a;
        let t = DVec3::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x);
        let bt = DVec3::new(b, sign + n.y * n.y * a, -n.y);
        Frame { t, b: bt, n }
    }

    #[inline]
    pub fn to_local(&self, v: DVec3) -> DVec3 {
        DVec3::new(v.dot(self.t), v.dot(self.b), v.dot(self.n))
    }

    #[inline]
    pub fn to_world(&self, v: DVec3) -> DVec3 {
        self.t * v.x + self.b * v.y + self.n * v.z
    }
}

#[inline]
pub fn reflect(v: DVec3, n: DVec3) -> DVec3 {
    2.0 * v.dot(n) * n - v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_orthonormal() {
        for n in [
            DVec3::Z,
            -DVec3::Z,
            DVec3::X,
            DVec3::new(0.3, -0.5, 0.8).normalize(),
            DVec3::new(-1e-7, 1e-7, -1.0).normalize(),
        ] {
            let f = Frame::from_normal(n);
            assert!((f.t.length() - 1.0).abs() < 1e-12);
            assert!((f.b.length() - 1.0).abs() < 1e-12);
            assert!(f.t.dot(f.b).abs() < 1e-12);
            assert!(f.t.dot(n).abs() < 1e-12);
            let v = DVec3::new(0.1, 0.2, 0.3);
            assert!((f.to_world(f.to_local(v)) - v).length() < 1e-12);
        }
    }
}
