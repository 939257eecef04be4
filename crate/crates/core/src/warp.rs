//! Depth-based forward reprojection of a single view.
//!
//! Every source pixel with a valid depth is lifted to 3D through its pixel
//! centre and splatted into the single destination pixel it projects to. The
//! nearest point wins; ties go to the lower source index, so the result does
//! not depend on how rows are split across workers.

use glam::DVec3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{check_shape, write_float_dump, GrayImage, Image, RgbImage};
use crate::scene::{Camera, Scene};

/// Depth of pixels whose primary ray misses the mesh.
pub const NO_HIT: f64 = f64::INFINITY;

/// Source rows per parallel work unit.
const BAND_ROWS: u32 = 16;

pub type DepthImage = GrayImage;

/// Distance along the primary ray through each pixel centre.
pub fn render_depth(scene: &Scene, camera: &Camera) -> DepthImage {
    let w = camera.width;
    let pixels = (0..w * camera.height)
        .into_par_iter()
        .map(|i| {
            let ray = camera.generate_ray((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
            scene.intersect(&ray).map_or(NO_HIT, |h| h.t as f64)
        })
        .collect();
    Image {
        width: w,
        height: camera.height,
        pixels,
    }
}

pub fn save_depth(path: impl AsRef<std::path::Path>, depth: &DepthImage) -> Result<()> {
    let data: Vec<f32> = depth.pixels.iter().map(|d| *d as f32).collect();
    write_float_dump(path, depth.width, depth.height, 1, &data)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Warped {
    pub image: RgbImage,
    /// 1 where at least one source pixel landed, 0 at disocclusions.
    pub mask: GrayImage,
    /// Source pixel index that won each destination pixel.
    pub source: Vec<Option<u32>>,
}

pub fn warp_image(src: &RgbImage, depth: &DepthImage, src_cam: &Camera, dst_cam: &Camera) -> Result<Warped> {
    check_shape(src, depth, "warp source depth")?;
    if src.width != src_cam.width || src.height != src_cam.height {
        return Err(Error::ShapeMismatch(format!(
            "warp source {}x{} vs camera {}x{}",
            src.width, src.height, src_cam.width, src_cam.height
        )));
    }
    let (w, h) = (src.width, src.height);
    let (dw, dh) = (dst_cam.width, dst_cam.height);
    let origin = src_cam.position();
    let bands: Vec<u32> = (0..h).step_by(BAND_ROWS as usize).collect();
    // (destination index, depth, source index) per band
    let splats: Vec<Vec<(usize, f64, u32)>> = bands
        .par_iter()
        .map(|&y0| {
            let mut out = Vec::new();
            for y in y0..(y0 + BAND_ROWS).min(h) {
                for x in 0..w {
                    let i = (y * w + x) as usize;
                    let t = depth.pixels[i];
                    if !(t.is_finite() && t > 0.0) {
                        continue;
                    }
                    let p = origin + src_cam.world_dir(x as f64 + 0.5, y as f64 + 0.5) * t;
                    let Some((fx, fy, z)) = dst_cam.project(p) else { continue };
                    if !(fx >= 0.0 && fy >= 0.0 && fx < dw as f64 && fy < dh as f64) {
                        continue;
                    }
                    let d = (fy as usize) * dw as usize + fx as usize;
                    out.push((d, z, i as u32));
                }
            }
            out
        })
        .collect();
    let mut best: Vec<Option<(f64, u32)>> = vec![None; (dw * dh) as usize];
    for (d, z, i) in splats.into_iter().flatten() {
        let slot = &mut best[d];
        let wins = match slot {
            None => true,
            Some((bz, bi)) => z < *bz || (z == *bz && i < *bi),
        };
        if wins {
            *slot = Some((z, i));
        }
    }
    let image = Image {
        width: dw,
        height: dh,
        pixels: best
            .iter()
            .map(|b| b.map_or(DVec3::ZERO, |(_, i)| src.pixels[i as usize]))
            .collect(),
    };
    let mask = Image {
        width: dw,
        height: dh,
        pixels: best.iter().map(|b| if b.is_some() { 1.0 } else { 0.0 }).collect(),
    };
    Ok(Warped {
        image,
        mask,
        source: best.iter().map(|b| b.map(|(_, i)| i)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::luminance;
    use crate::synthetic;

    fn plane_scene() -> Scene {
        Scene::new(synthetic::quad(20.0, 20.0))
    }

    #[test]
    fn depth_of_facing_plane_and_empty_view() {
        let cam = Camera::look_at(DVec3::new(0.0, 0.0, 2.0), DVec3::ZERO, DVec3::Y, 0.5, 9, 9).unwrap();
        let d = render_depth(&plane_scene(), &cam);
        assert!((d.get(4, 4) - 2.0).abs() < 1e-5);
        let away = Camera::look_at(DVec3::new(0.0, 0.0, 2.0), DVec3::new(0.0, 0.0, 5.0), DVec3::Y, 0.5, 4, 4).unwrap();
        assert!(render_depth(&plane_scene(), &away).pixels.iter().all(|d| *d == NO_HIT));
    }

    #[test]
    fn sphere_depth_grows_toward_silhouette() {
        let scene = Scene::new(synthetic::uv_sphere(96, 48, 1.0));
        let cam = Camera::look_at(DVec3::new(0.0, 0.0, 4.0), DVec3::ZERO, DVec3::Y, 0.6, 41, 41).unwrap();
        let d = render_depth(&scene, &cam);
        let row: Vec<f64> = (20..41).map(|x| *d.get(x, 20)).take_while(|v| v.is_finite()).collect();
        assert!(row.len() > 5);
        assert!(row.windows(2).all(|p| p[1] >= p[0] - 1e-6), "{row:?}");
    }

    #[test]
    fn identity_warp_is_exact() {
        let scene = Scene::new(synthetic::uv_sphere(32, 16, 1.0));
        let cam = Camera::look_at(DVec3::new(0.3, 0.5, 3.0), DVec3::ZERO, DVec3::Y, 0.8, 24, 18).unwrap();
        let depth = render_depth(&scene, &cam);
        let src = Image::from_fn(24, 18, |x, y| DVec3::new(x as f64 / 24.0, y as f64 / 18.0, 0.25));
        let out = warp_image(&src, &depth, &cam, &cam).unwrap();
        for i in 0..src.len() {
            let valid = depth.pixels[i].is_finite();
            assert_eq!(out.mask.pixels[i], if valid { 1.0 } else { 0.0 });
            if valid {
                assert_eq!(out.image.pixels[i], src.pixels[i]);
            }
        }
    }

    #[test]
    fn lateral_translation_matches_disparity() {
        let (w, h) = (64u32, 48u32);
        let z = 4.0;
        let src_cam = Camera::look_at(DVec3::new(0.0, 0.0, z), DVec3::ZERO, DVec3::Y, 0.7, w, h).unwrap();
        let b = 0.3;
        let dst_cam = Camera::look_at(DVec3::new(b, 0.0, z), DVec3::new(b, 0.0, 0.0), DVec3::Y, 0.7, w, h).unwrap();
        let depth = render_depth(&plane_scene(), &src_cam);
        let src = Image::from_fn(w, h, |x, y| DVec3::new(x as f64, y as f64, 0.0));
        let out = warp_image(&src, &depth, &src_cam, &dst_cam).unwrap();
        let disparity = src_cam.focal_px() * b / z;
        let mut checked = 0;
        for y in 0..h {
            for x in 0..w {
                if let Some(i) = out.source[(y * w + x) as usize] {
                    let sx = (i % w) as f64;
                    let sy = (i / w) as f64;
                    assert!(((sx - x as f64) - disparity).abs() <= 1.0);
                    assert_eq!(sy, y as f64);
                    checked += 1;
                }
            }
        }
        assert!(checked > (w * h / 2) as usize);
    }

    #[test]
    fn rotation_around_cube_disoccludes_and_never_adds_energy() {
        let scene = Scene::new(synthetic::atlas_cube(1.0));
        let src_cam = Camera::look_at(DVec3::new(0.0, 0.0, 3.0), DVec3::ZERO, DVec3::Y, 0.8, 32, 32).unwrap();
        let dst_cam = Camera::look_at(DVec3::new(3.0, 0.0, 0.0), DVec3::ZERO, DVec3::Y, 0.8, 32, 32).unwrap();
        let depth = render_depth(&scene, &src_cam);
        let src = Image::filled(32, 32, DVec3::new(0.9, 0.6, 0.3));
        let out = warp_image(&src, &depth, &src_cam, &dst_cam).unwrap();
        let dst_depth = render_depth(&scene, &dst_cam);
        // the +X face, visible only from the destination, stays empty
        let hidden = (0..out.mask.len())
            .filter(|i| dst_depth.pixels[*i].is_finite() && out.mask.pixels[*i] == 0.0)
            .count();
        assert!(hidden > 50, "{hidden}");
        let sum_src: f64 = src.pixels.iter().zip(&depth.pixels).filter(|p| p.1.is_finite()).map(|p| luminance(*p.0)).sum();
        let sum_dst: f64 = out.image.pixels.iter().map(|p| luminance(*p)).sum();
        assert!(sum_dst <= sum_src * 1.01);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let cam = Camera::look_at(DVec3::new(0.0, 0.0, 2.0), DVec3::ZERO, DVec3::Y, 0.5, 4, 4).unwrap();
        let src = Image::filled(4, 4, DVec3::ONE);
        assert!(warp_image(&src, &Image::filled(3, 4, 1.0), &cam, &cam).is_err());
    }
}
