//! Conditioning images: camera-space normals and the packed shading guide.
//!
//! The shading guide renders the object three times with a uniform grey
//! material (diffuse, semi-specular, specular) and stores the luminance of
//! each tonemapped pass in one channel.

use std::path::{Path, PathBuf};

use glam::DVec3;
use rayon::prelude::*;

use crate::brdf::PbrSample;
use crate::envlight::EnvironmentProbe;
use crate::error::Result;
use crate::image::{save_rgb8, Image, RgbImage};
use crate::math::luminance;
use crate::scene::{Camera, Scene};
use crate::tracer::{render, RenderConfig};

/// Normal-guide colour where no surface is hit: camera-space +Z.
pub const NORMAL_BACKGROUND: DVec3 = DVec3::new(0.5, 0.5, 1.0);

pub const SHADING_ALBEDO: f64 = 0.7;

/// `(roughness, metallic)` of the R, G and B passes.
pub const SHADING_PASSES: [(f64, f64); 3] = [(1.0, 0.0), (0.5, 0.5), (0.0, 1.0)];

pub fn shading_material(pass: usize) -> PbrSample {
    let (r, m) = SHADING_PASSES[pass];
    PbrSample::new(DVec3::splat(SHADING_ALBEDO), r, m)
}

/// One primary ray per pixel centre; shading normals mapped `(n + 1) / 2`.
pub fn render_normal_guide(scene: &Scene, camera: &Camera) -> RgbImage {
    let rot = camera.camera_from_world_rotation();
    let w = camera.width;
    let pixels = (0..w * camera.height)
        .into_par_iter()
        .map(|i| {
            let ray = camera.generate_ray((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
            match scene.intersect(&ray) {
                Some(hit) => {
                    let n = (rot * scene.shade_point(&hit, &ray).normal).normalize();
                    (n + DVec3::ONE) * 0.5
                }
                None => NORMAL_BACKGROUND,
            }
        })
        .collect();
    Image {
        width: w,
        height: camera.height,
        pixels,
    }
}

/// Luminance of the tonemapped render of one shading pass.
pub fn shading_pass(scene: &Scene, probe: &EnvironmentProbe, camera: &Camera, config: &RenderConfig, pass: usize) -> Image<f64> {
    render(scene, probe, &shading_material(pass), camera, config)
        .tonemapped()
        .map(|c| luminance(*c))
}

pub fn render_shading_guide(scene: &Scene, probe: &EnvironmentProbe, camera: &Camera, config: &RenderConfig) -> RgbImage {
    let [r, g, b] = [0, 1, 2].map(|k| shading_pass(scene, probe, camera, config, k));
    Image {
        width: r.width,
        height: r.height,
        pixels: (0..r.len()).map(|i| DVec3::new(r.pixels[i], g.pixels[i], b.pixels[i])).collect(),
    }
}

pub fn normal_guide_path(dir: &Path, frame: usize) -> PathBuf {
    dir.join(format!("{frame:05}_normal.png"))
}

pub fn shading_guide_path(dir: &Path, frame: usize) -> PathBuf {
    dir.join(format!("{frame:05}_shading.png"))
}

/// Renders and writes both guides of one frame as 8-bit PNGs.
pub fn write_frame_guides(
    dir: &Path,
    frame: usize,
    scene: &Scene,
    probe: &EnvironmentProbe,
    camera: &Camera,
    config: &RenderConfig,
) -> Result<()> {
    let cam = config.camera(camera);
    save_rgb8(normal_guide_path(dir, frame), &render_normal_guide(scene, &cam))?;
    save_rgb8(shading_guide_path(dir, frame), &render_shading_guide(scene, probe, &cam, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use crate::tracer::tonemap;

    fn quad_scene() -> Scene {
        Scene::new(synthetic::quad(2.0, 2.0))
    }

    #[test]
    fn plane_facing_camera_is_flat_blue() {
        let cam = Camera::look_at(DVec3::new(0.0, 0.0, 3.0), DVec3::ZERO, DVec3::Y, 0.3, 8, 8).unwrap();
        let img = render_normal_guide(&quad_scene(), &cam);
        for p in &img.pixels {
            assert!((*p - NORMAL_BACKGROUND).abs().max_element() < 1e-6, "{p}");
        }
    }

    #[test]
    fn sphere_normals_follow_geometry() {
        let scene = Scene::new(synthetic::uv_sphere(128, 64, 1.0));
        let cam = Camera::look_at(DVec3::new(0.0, 0.0, 4.0), DVec3::ZERO, DVec3::Y, 0.6, 65, 65).unwrap();
        let img = render_normal_guide(&scene, &cam);
        let c = *img.get(32, 32);
        assert!((c - NORMAL_BACKGROUND).abs().max_element() < 1e-2, "{c}");
        // rightmost covered pixel on the centre row points toward +X
        let right = (0..65).rev().find(|x| *img.get(*x, 32) != NORMAL_BACKGROUND).unwrap();
        let r = *img.get(right, 32);
        assert!(r.x > 0.9, "{r}");
        assert_eq!(*img.get(0, 0), NORMAL_BACKGROUND);
    }

    #[test]
    fn empty_view_is_background() {
        let cam = Camera::look_at(DVec3::new(0.0, 0.0, 3.0), DVec3::new(0.0, 0.0, 6.0), DVec3::Y, 0.3, 4, 4).unwrap();
        let img = render_normal_guide(&quad_scene(), &cam);
        assert!(img.pixels.iter().all(|p| *p == NORMAL_BACKGROUND));
    }

    #[test]
    fn channels_decode_to_the_passes() {
        let scene = Scene::new(synthetic::uv_sphere(24, 12, 0.5));
        let probe = synthetic::gradient_probe(32, 16).unwrap();
        let cam = Camera::look_at(DVec3::new(0.0, 0.3, 2.0), DVec3::ZERO, DVec3::Y, 0.7, 10, 10).unwrap();
        let cfg = RenderConfig { spp: 4, ..Default::default() };
        let guide = render_shading_guide(&scene, &probe, &cam, &cfg);
        for k in 0..3 {
            let pass = shading_pass(&scene, &probe, &cam, &cfg, k);
            for (g, p) in guide.pixels.iter().zip(&pass.pixels) {
                assert_eq!(g[k], *p);
            }
        }
    }

    #[test]
    fn unlit_interior_is_black() {
        // inside a closed box no probe radiance can arrive
        let scene = Scene::new(synthetic::closed_box(2.0));
        let probe = synthetic::constant_probe(1.0).unwrap();
        let cam = Camera::look_at(DVec3::ZERO, DVec3::new(0.0, 0.0, -1.0), DVec3::Y, 1.0, 6, 6).unwrap();
        let guide = render_shading_guide(&scene, &probe, &cam, &RenderConfig { spp: 4, ..Default::default() });
        assert!(guide.pixels.iter().all(|p| *p == DVec3::ZERO));
    }

    #[test]
    fn diffuse_pass_under_constant_light_matches_furnace() {
        let scene = Scene::new(synthetic::uv_sphere(48, 24, 0.5));
        let probe = synthetic::constant_probe(0.5).unwrap();
        let cam = Camera::look_at(DVec3::new(0.0, 0.0, 3.0), DVec3::ZERO, DVec3::Y, 0.25, 8, 8).unwrap();
        let cfg = RenderConfig { spp: 64, max_bounces: 1, diffuse_only: true, ..Default::default() };
        let r = shading_pass(&scene, &probe, &cam, &cfg, 0);
        let expected = luminance(tonemap(DVec3::splat(SHADING_ALBEDO * 0.5)));
        let centre = r.get(4, 4);
        assert!((centre - expected).abs() < 0.01, "{centre} vs {expected}");
    }
}
