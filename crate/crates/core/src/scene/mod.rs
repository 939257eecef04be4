//! Geometry: meshes, ray intersection, cameras and orbit trajectories.

mod bvh;
mod camera;
mod mesh;
mod obj;

pub use bvh::{brute_force_intersect, Bvh, Hit, Ray};
pub use camera::{generate_orbit, load_cameras, parse_cameras, write_cameras, Camera, Orbit};
pub use mesh::{Aabb, TriangleMesh};
pub use obj::{load_mesh, parse_obj, write_obj};

use glam::{DVec2, DVec3, Vec3A};

use crate::math::{to_f32, to_f64};

/// Surface attributes at a ray hit.
#[derive(Clone, Copy, Debug)]
pub struct ShadePoint {
    pub position: DVec3,
    /// Interpolated shading normal, on the side of the incoming ray.
    pub normal: DVec3,
    /// Face normal, on the side of the incoming ray.
    pub geo_normal: DVec3,
    pub uv: DVec2,
    /// Unit direction back toward the ray origin.
    pub wo: DVec3,
    pub tri: u32,
}

/// An immutable mesh plus its acceleration structure.
#[derive(Clone, Debug)]
pub struct Scene {
    pub mesh: TriangleMesh,
    pub bvh: Bvh,
    /// Secondary-ray origin offset (1e-4 × scene diagonal).
    pub ray_epsilon: f32,
}

impl Scene {
    pub fn new(mesh: TriangleMesh) -> Self {
        let bvh = Bvh::build(&mesh);
        let diag = mesh.bounds.diagonal();
        let ray_epsilon = if diag.is_finite() && diag > 0.0 { 1e-4 * diag } else { 1e-4 };
        Scene { mesh, bvh, ray_epsilon }
    }

    pub fn bounds(&self) -> Aabb {
        self.mesh.bounds
    }

    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        self.bvh.intersect(ray)
    }

    pub fn occluded(&self, ray: &Ray) -> bool {
        self.bvh.occluded(ray)
    }

    pub fn shade_point(&self, hit: &Hit, ray: &Ray) -> ShadePoint {
        shade_point_from(hit, &self.mesh, ray)
    }

    /// Ray leaving `sp` in direction `dir`, offset along the geometric normal
    /// to the side `dir` points to.
    pub fn spawn_ray(&self, sp: &ShadePoint, dir: DVec3) -> Ray {
        let side = if dir.dot(sp.geo_normal) >= 0.0 { 1.0 } else { -1.0 };
        let origin = sp.position + sp.geo_normal * (side * self.ray_epsilon as f64);
        Ray::new(to_f32(origin), to_f32(dir).normalize())
    }
}

/// Interpolates hit attributes. The face normal is turned toward the incoming
/// ray and the shading normal follows it (two-sided shading).
pub fn shade_point_from(hit: &Hit, mesh: &TriangleMesh, ray: &Ray) -> ShadePoint {
    let tri = hit.tri as usize;
    let [i0, i1, i2] = mesh.indices[tri].map(|i| i as usize);
    let b0 = hit.bary[0] as f64;
    let b1 = hit.bary[1] as f64;
    let b2 = 1.0 - b0 - b1;
    let p = |i: usize| to_f64(mesh.positions[i]);
    let position = to_f64(ray.origin) + to_f64(ray.dir) * hit.t as f64;
    let wo = -to_f64(ray.dir).normalize();
    let mut geo = (p(i1) - p(i0)).cross(p(i2) - p(i0)).normalize_or_zero();
    let n = |i: usize| to_f64(mesh.normals[i]);
    let mut normal = (n(i0) * b0 + n(i1) * b1 + n(i2) * b2).normalize_or_zero();
    if normal == DVec3::ZERO {
        normal = geo;
    }
    if geo.dot(wo) < 0.0 {
        geo = -geo;
    }
    if normal.dot(geo) < 0.0 {
        normal = -normal;
    }
    let uv = if mesh.has_uvs() {
        let t = |i: usize| mesh.uvs[i].as_dvec2();
        t(i0) * b0 + t(i1) * b1 + t(i2) * b2
    } else {
        DVec2::ZERO
    };
    ShadePoint {
        position,
        normal,
        geo_normal: geo,
        uv,
        wo,
        tri: hit.tri,
    }
}

/// Position reconstructed from barycentrics, used by the texture baker.
pub fn interpolate_position(mesh: &TriangleMesh, tri: usize, b: [f64; 3]) -> DVec3 {
    let [a, bb, c] = mesh.triangle(tri).map(|v: Vec3A| to_f64(v));
    a * b[0] + bb * b[1] + c * b[2]
}
