//! Procedural meshes, probes and materials used by the examples, the bundled
//! assets and the tests.

use glam::{DVec2, DVec3, Vec2, Vec3A};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::brdf::PbrSample;
use crate::envlight::EnvironmentProbe;
use crate::error::Result;
use crate::scene::{Camera, Orbit, TriangleMesh};

/// Latitude-longitude sphere. Seam and pole vertices are duplicated so the UV
/// layout is `u = azimuth / 2π`, `v = polar / π`.
pub fn uv_sphere(nu: u32, nv: u32, radius: f32) -> TriangleMesh {
    sphere_with(nu, nv, |d| radius * d)
}

/// Sphere with a smooth pseudo-random radial displacement. The displacement
/// depends only on direction so duplicated seam vertices stay coincident.
pub fn noisy_sphere(nu: u32, nv: u32, amplitude: f32, seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(Vec3A, f32)> = (0..6)
        .map(|_| {
            let k = Vec3A::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            (k, rng.gen_range(0.0..6.28))
        })
        .collect();
    sphere_with(nu, nv, |d| {
        let s: f32 = waves.iter().map(|(k, p)| (k.dot(d) + p).sin()).sum::<f32>() / 6.0;
        (1.0 + amplitude * s) * d
    })
}

fn sphere_with(nu: u32, nv: u32, place: impl Fn(Vec3A) -> Vec3A) -> TriangleMesh {
    let (nu, nv) = (nu.max(3), nv.max(2));
    let mut positions = Vec::new();
    let mut uvs = Vec::new();
    for j in 0..=nv {
        let v = j as f32 / nv as f32;
        let theta = std::f32::consts::PI * v;
        for i in 0..=nu {
            let u = i as f32 / nu as f32;
            let phi = 2.0 * std::f32::consts::PI * u;
            let d = Vec3A::new(theta.sin() * phi.cos(), theta.cos(), theta.sin() * phi.sin());
            let d = if j == 0 {
                Vec3A::Y
            } else if j == nv {
                -Vec3A::Y
            } else {
                d
            };
            positions.push(place(d));
            uvs.push(Vec2::new(u, 1.0 - v));
        }
    }
    let idx = |i: u32, j: u32| j * (nu + 1) + i;
    let mut indices = Vec::new();
    for j in 0..nv {
        for i in 0..nu {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if j != 0 {
                indices.push([a, b, d]);
            }
            if j != nv - 1 {
                indices.push([b, c, d]);
            }
        }
    }
    TriangleMesh::new(positions, Vec::new(), uvs, indices)
}

/// Axis-aligned rectangle in the XY plane at `z = 0`, facing +Z, with the
/// full [0, 1]² UV square.
pub fn quad(width: f32, height: f32) -> TriangleMesh {
    let (w, h) = (0.5 * width, 0.5 * height);
    TriangleMesh::new(
        vec![
            Vec3A::new(-w, -h, 0.0),
            Vec3A::new(w, -h, 0.0),
            Vec3A::new(w, h, 0.0),
            Vec3A::new(-w, h, 0.0),
        ],
        vec![Vec3A::Z; 4],
        vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)],
        vec![[0, 1, 2], [0, 2, 3]],
    )
}

/// Horizontal rectangle at `y = 0` facing +Y, with the full UV square.
pub fn floor(width: f32, depth: f32) -> TriangleMesh {
    let (w, d) = (0.5 * width, 0.5 * depth);
    TriangleMesh::new(
        vec![
            Vec3A::new(-w, 0.0, d),
            Vec3A::new(w, 0.0, d),
            Vec3A::new(w, 0.0, -d),
            Vec3A::new(-w, 0.0, -d),
        ],
        vec![Vec3A::Y; 4],
        vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)],
        vec![[0, 1, 2], [0, 2, 3]],
    )
}

/// Floor (`y = 0`) meeting a back wall (`z = −size/2`) along the X axis.
/// The floor occupies the lower half of UV space, the wall the upper half.
pub fn corner(size: f32) -> TriangleMesh {
    let h = 0.5 * size;
    let positions = vec![
        Vec3A::new(-h, 0.0, h),
        Vec3A::new(h, 0.0, h),
        Vec3A::new(h, 0.0, -h),
        Vec3A::new(-h, 0.0, -h),
        Vec3A::new(-h, 0.0, -h),
        Vec3A::new(h, 0.0, -h),
        Vec3A::new(h, size, -h),
        Vec3A::new(-h, size, -h),
    ];
    let normals = vec![Vec3A::Y, Vec3A::Y, Vec3A::Y, Vec3A::Y, Vec3A::Z, Vec3A::Z, Vec3A::Z, Vec3A::Z];
    let uvs = vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(1.0, 0.0),
        Vec2::new(1.0, 0.49),
        Vec2::new(0.0, 0.49),
        Vec2::new(0.0, 0.51),
        Vec2::new(1.0, 0.51),
        Vec2::new(1.0, 1.0),
        Vec2::new(0.0, 1.0),
    ];
    TriangleMesh::new(positions, normals, uvs, vec![[0, 1, 2], [0, 2, 3], [4, 5, 6], [4, 6, 7]])
}

/// Cube of edge `size` centered at the origin with one UV chart per face,
/// laid out in a padded 3×2 atlas.
pub fn atlas_cube(size: f32) -> TriangleMesh {
    let h = 0.5 * size;
    // (normal, tangent s, tangent t) per face; s × t = normal
    let faces = [
        (Vec3A::X, -Vec3A::Z, Vec3A::Y),
        (-Vec3A::X, Vec3A::Z, Vec3A::Y),
        (Vec3A::Y, Vec3A::X, -Vec3A::Z),
        (-Vec3A::Y, Vec3A::X, Vec3A::Z),
        (Vec3A::Z, Vec3A::X, Vec3A::Y),
        (-Vec3A::Z, -Vec3A::X, Vec3A::Y),
    ];
    let margin = 1.0 / 32.0;
    let (cw, ch) = (1.0 / 3.0, 0.5);
    let mut positions = Vec::new();
    let mut normals = Vec::new();
    let mut uvs = Vec::new();
    let mut indices = Vec::new();
    for (f, (n, s, t)) in faces.iter().enumerate() {
        let base = positions.len() as u32;
        let cell = Vec2::new((f % 3) as f32 * cw, (f / 3) as f32 * ch);
        for (a, b) in [(-1.0f32, -1.0f32), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
            positions.push(h * (*n + a * *s + b * *t));
            normals.push(*n);
            let local = Vec2::new(0.5 * (a + 1.0), 0.5 * (b + 1.0));
            uvs.push(cell + Vec2::splat(margin) + local * Vec2::new(cw - 2.0 * margin, ch - 2.0 * margin));
        }
        indices.push([base, base + 1, base + 2]);
        indices.push([base, base + 2, base + 3]);
    }
    TriangleMesh::new(positions, normals, uvs, indices)
}

/// [`atlas_cube`] turned inside out. A camera inside sees surfaces that no
/// probe light can reach.
pub fn closed_box(size: f32) -> TriangleMesh {
    let mut mesh = atlas_cube(size);
    for t in &mut mesh.indices {
        t.swap(1, 2);
    }
    for n in &mut mesh.normals {
        *n = -*n;
    }
    mesh
}

pub fn constant_probe(value: f64) -> Result<EnvironmentProbe> {
    EnvironmentProbe::constant(DVec3::splat(value))
}

/// Blue sky over a dim ground with a small warm sun.
pub fn sky_probe(width: u32, height: u32, sun_dir: DVec3, sun_intensity: f64) -> Result<EnvironmentProbe> {
    let sun_dir = sun_dir.normalize();
    let cos_sun = (4f64.to_radians()).cos();
    EnvironmentProbe::from_fn(width, height, |d| {
        let sky = if d.y >= 0.0 {
            DVec3::new(0.35, 0.5, 0.8).lerp(DVec3::new(0.9, 0.9, 0.95), 1.0 - d.y)
        } else {
            DVec3::new(0.25, 0.22, 0.2)
        };
        if d.dot(sun_dir) > cos_sun {
            sky + DVec3::new(1.0, 0.9, 0.75) * sun_intensity
        } else {
            sky
        }
    })
}

/// Smooth color gradient with no zero texels.
pub fn gradient_probe(width: u32, height: u32) -> Result<EnvironmentProbe> {
    EnvironmentProbe::from_fn(width, height, |d| {
        DVec3::new(0.6 + 0.4 * d.y, 0.5 + 0.3 * d.x, 0.4 + 0.3 * d.z)
    })
}

/// Ground-truth material for the atlas cube: a 2×2 checkerboard per face in
/// base color, rough lower half / glossy upper half, and a metallic stripe
/// across `|x| < 0.12·size`.
pub fn oracle_cube_material(size: f64) -> impl Fn(DVec3, DVec2) -> PbrSample + Sync + Send + Clone {
    move |p: DVec3, _uv: DVec2| {
        let q = p / size;
        let a = q.abs();
        // the two in-face coordinates are the axes other than the dominant one
        let (s, t) = if a.x >= a.y && a.x >= a.z {
            (q.y, q.z)
        } else if a.y >= a.z {
            (q.x, q.z)
        } else {
            (q.x, q.y)
        };
        let base = if (s > 0.0) ^ (t > 0.0) {
            DVec3::new(0.75, 0.3, 0.2)
        } else {
            DVec3::new(0.2, 0.45, 0.7)
        };
        let roughness = if q.y > 0.0 { 0.3 } else { 0.8 };
        let metallic = if q.x.abs() < 0.12 { 1.0 } else { 0.0 };
        PbrSample::new(base, roughness, metallic)
    }
}

/// Sixteen views of the oracle cube: two rings of eight above and below the
/// equator, staggered so every face is seen.
pub fn oracle_cameras(center: DVec3, resolution: u32) -> Result<Vec<Camera>> {
    let ring = |elevation: f64, azimuth_offset: f64| Orbit {
        n_frames: 8,
        elevation,
        radius: 2.6,
        center,
        fov_y: 0.75,
        width: resolution,
        height: resolution,
        azimuth_offset,
    };
    let mut cams = ring(0.45, 0.0).cameras()?;
    cams.extend(ring(-0.45, std::f64::consts::PI / 8.0).cameras()?);
    Ok(cams)
}
