use std::fmt::Write as _;
use std::path::Path;

use glam::{DAffine3, DMat3, DMat4, DVec3, Vec3A};

use super::bvh::Ray;
use crate::error::{Error, Result};
use crate::math::to_f32;

/// Pinhole camera looking down its local −Z axis with +Y up.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub world_from_camera: DAffine3,
    /// Vertical field of view in radians.
    pub fov_y: f64,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn new(world_from_camera: DAffine3, fov_y: f64, width: u32, height: u32) -> Result<Self> {
        let cam = Camera {
            world_from_camera,
            fov_y,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn look_at(eye: DVec3, target: DVec3, up: DVec3, fov_y: f64, width: u32, height: u32) -> Result<Self> {
        let fwd = (target - eye).normalize();
        let mut up = up;
        if fwd.cross(up).length_squared() < 1e-12 {
            up = if fwd.x.abs() < 0.9 { DVec3::X } else { DVec3::Z };
        }
        let right = fwd.cross(up).normalize();
        let true_up = right.cross(fwd);
        let rot = DMat3::from_cols(right, true_up, -fwd);
        Camera::new(DAffine3::from_mat3_translation(rot, eye), fov_y, width, height)
    }

    pub fn validate(&self) -> Result<()> {
        let det = self.world_from_camera.matrix3.determinant();
        let m = self.world_from_camera.matrix3;
        let ortho = (m.transpose() * m - DMat3::IDENTITY).to_cols_array().iter().all(|v| v.abs() < 1e-5);
        if (det - 1.0).abs() > 1e-5 || !ortho {
            return Err(Error::invalid(format!("camera rotation is not orthonormal (det {det})")));
        }
        if !(self.fov_y > 0.0 && self.fov_y < std::f64::consts::PI) {
            return Err(Error::invalid(format!("fov {} outside (0, pi)", self.fov_y)));
        }
        if self.width < 1 || self.height < 1 {
            return Err(Error::invalid("camera resolution must be at least 1x1"));
        }
        Ok(())
    }

    pub fn position(&self) -> DVec3 {
        self.world_from_camera.translation
    }

    pub fn forward(&self) -> DVec3 {
        -self.world_from_camera.matrix3.z_axis
    }

    pub fn num_pixels(&self) -> usize {
        (self.width * self.height) as usize
    }

    fn tan_half(&self) -> f64 {
        (0.5 * self.fov_y).tan()
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        0.5 * self.height as f64 / self.tan_half()
    }

    /// Camera-space direction through film position `(fx, fy)` in pixels,
    /// with `(0, 0)` at the top-left corner.
    pub fn camera_dir(&self, fx: f64, fy: f64) -> DVec3 {
        let th = self.tan_half();
        let aspect = self.width as f64 / self.height as f64;
        let x = (2.0 * fx / self.width as f64 - 1.0) * th * aspect;
        let y = (1.0 - 2.0 * fy / self.height as f64) * th;
        DVec3::new(x, y, -1.0).normalize()
    }

    pub fn world_dir(&self, fx: f64, fy: f64) -> DVec3 {
        self.world_from_camera.transform_vector3(self.camera_dir(fx, fy)).normalize()
    }

    pub fn generate_ray(&self, fx: f64, fy: f64) -> Ray {
        Ray::new(to_f32(self.position()), to_f32(self.world_dir(fx, fy)).normalize())
    }

    /// Film position (pixels) and depth along −Z for a world point, or `None`
    /// when the point is behind the camera.
    pub fn project(&self, p: DVec3) -> Option<(f64, f64, f64)> {
        let c = self.world_from_camera.inverse().transform_point3(p);
        if c.z >= 0.0 {
            return None;
        }
        let th = self.tan_half();
        let aspect = self.width as f64 / self.height as f64;
        let nx = (c.x / -c.z) / (th * aspect);
        let ny = (c.y / -c.z) / th;
        let fx = (nx + 1.0) * 0.5 * self.width as f64;
        let fy = (1.0 - ny) * 0.5 * self.height as f64;
        Some((fx, fy, -c.z))
    }

    pub fn camera_from_world_rotation(&self) -> DMat3 {
        self.world_from_camera.matrix3.transpose()
    }

    pub fn with_resolution(&self, width: u32, height: u32) -> Camera {
        Camera {
            width,
            height,
            ..*self
        }
    }
}

/// Fixed-elevation circular trajectory around a target point.
#[derive(Clone, Copy, Debug)]
pub struct Orbit {
    pub n_frames: usize,
    pub elevation: f64,
    pub radius: f64,
    pub center: DVec3,
    pub fov_y: f64,
    pub width: u32,
    pub height: u32,
    /// Azimuth of frame 0.
    pub azimuth_offset: f64,
}

impl Orbit {
    pub fn azimuth(&self, i: usize) -> f64 {
        let k = i % self.n_frames;
        self.azimuth_offset + 2.0 * std::f64::consts::PI * k as f64 / self.n_frames as f64
    }

    /// Camera `i`; indices wrap so the trajectory is cyclic.
    pub fn camera(&self, i: usize) -> Result<Camera> {
        let az = self.azimuth(i);
        let (se, ce) = self.elevation.sin_cos();
        let dir = DVec3::new(ce * az.cos(), se, ce * az.sin());
        Camera::look_at(self.center + self.radius * dir, self.center, DVec3::Y, self.fov_y, self.width, self.height)
    }

    pub fn cameras(&self) -> Result<Vec<Camera>> {
        (0..self.n_frames).map(|i| self.camera(i)).collect()
    }
}

/// Evenly spaced cameras in azimuth on a fixed-elevation circle around `center`.
pub fn generate_orbit(
    n_frames: usize,
    elevation: f64,
    radius: f64,
    center: Vec3A,
    fov_y: f64,
    width: u32,
    height: u32,
) -> Result<Vec<Camera>> {
    if n_frames < 1 {
        return Err(Error::invalid("orbit needs at least one frame"));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("orbit radius must be positive"));
    }
    Orbit {
        n_frames,
        elevation,
        radius,
        center: crate::math::to_f64(center),
        fov_y,
        width,
        height,
        azimuth_offset: 0.0,
    }
    .cameras()
}

/// One camera per line: 16 row-major world-from-camera entries, fov-y
/// (radians), width, height.
pub fn write_cameras(cameras: &[Camera]) -> String {
    let mut s = String::from("# world_from_camera (4x4 row-major) fov_y width height\n");
    for cam in cameras {
        let m = DMat4::from(cam.world_from_camera).transpose().to_cols_array();
        for v in m {
            let _ = write!(s, "{v:?} ");
        }
        let _ = writeln!(s, "{:?} {} {}", cam.fov_y, cam.width, cam.height);
    }
    s
}

pub fn parse_cameras(text: &str, origin: &str) -> Result<Vec<Camera>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: origin.to_string(),
            line: i + 1,
            msg,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 19 {
            return Err(err(format!("expected 19 values, found {}", toks.len())));
        }
        let mut vals = [0f64; 17];
        for (k, t) in toks[..17].iter().enumerate() {
            vals[k] = t.parse().map_err(|_| err(format!("bad number {t:?}")))?;
        }
        let w: u32 = toks[17].parse().map_err(|_| err("bad width".into()))?;
        let h: u32 = toks[18].parse().map_err(|_| err("bad height".into()))?;
        let mut cols = [0f64; 16];
        cols.copy_from_slice(&vals[..16]);
        let m = DMat4::from_cols_array(&cols).transpose();
        let affine = DAffine3::from_mat4(m);
        out.push(Camera::new(affine, vals[16], w, h).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}

pub fn load_cameras(path: impl AsRef<Path>) -> Result<Vec<Camera>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cameras(&text, &path.display().to_string())
}
