//! Sampling a material source into UV texture maps.

use std::path::Path;

use glam::{DVec2, DVec3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{self, GrayImage, Image, RgbImage};
use crate::material::{MaterialSource, TextureMaterial};
use crate::scene::{interpolate_position, TriangleMesh};
use crate::tracer::srgb_decode_rgb;

pub const MIN_BAKE_RESOLUTION: u32 = 16;

#[derive(Clone, Debug)]
pub struct BakedMaps {
    /// Linear base color.
    pub base_color: RgbImage,
    pub roughness: GrayImage,
    pub metallic: GrayImage,
    /// 1 where a triangle covers the texel center, 0 where the value was dilated.
    pub mask: GrayImage,
    /// Texels claimed by more than one triangle (last writer wins).
    pub overlaps: usize,
}

impl BakedMaps {
    pub fn to_material(&self) -> TextureMaterial {
        TextureMaterial {
            base_color: self.base_color.clone(),
            roughness: self.roughness.clone(),
            metallic: self.metallic.clone(),
        }
    }

    pub fn covered(&self) -> usize {
        self.mask.pixels.iter().filter(|m| **m > 0.5).count()
    }
}

#[derive(Clone, Copy)]
struct Owner {
    tri: u32,
    bary: [f64; 3],
}

#[inline]
fn edge(a: DVec2, b: DVec2, p: DVec2) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Texel ownership by UV-space rasterization of every triangle.
fn rasterize(mesh: &TriangleMesh, res: u32) -> (Vec<Option<Owner>>, usize) {
    let r = res as f64;
    let mut owners: Vec<Option<Owner>> = vec![None; (res * res) as usize];
    let mut overlaps = 0;
    for (t, tri) in mesh.indices.iter().enumerate() {
        let to_px = |i: u32| {
            let uv = mesh.uvs[i as usize].as_dvec2();
            DVec2::new(uv.x * r, (1.0 - uv.y) * r)
        };
        let (a, b, c) = (to_px(tri[0]), to_px(tri[1]), to_px(tri[2]));
        let area = edge(a, b, c);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        let lo = a.min(b).min(c);
        let hi = a.max(b).max(c);
        let x0 = (lo.x - 0.5).ceil().max(0.0) as u32;
        let y0 = (lo.y - 0.5).ceil().max(0.0) as u32;
        let x1 = ((hi.x - 0.5).floor().min(r - 1.0)).max(-1.0);
        let y1 = ((hi.y - 0.5).floor().min(r - 1.0)).max(-1.0);
        if x1 < 0.0 || y1 < 0.0 {
            continue;
        }
        for y in y0..=y1 as u32 {
            for x in x0..=x1 as u32 {
                let p = DVec2::new(x as f64 + 0.5, y as f64 + 0.5);
                let w = [edge(b, c, p) / area, edge(c, a, p) / area, edge(a, b, p) / area];
                if w.iter().any(|v| *v < 0.0) {
                    continue;
                }
                let slot = &mut owners[(y * res + x) as usize];
                if let Some(prev) = slot {
                    if prev.tri as usize != t {
                        // shared edges keep their first owner; true overlaps are counted
                        if w.iter().any(|v| *v == 0.0) {
                            continue;
                        }
                        overlaps += 1;
                    }
                }
                *slot = Some(Owner { tri: t as u32, bary: w });
            }
        }
    }
    (owners, overlaps)
}

/// Rasterizes every triangle in UV space, evaluates `source` at the surface
/// point behind each covered texel center and fills the rest by iterative
/// dilation from covered neighbors.
pub fn bake_textures(source: &dyn MaterialSource, mesh: &TriangleMesh, resolution: u32) -> Result<BakedMaps> {
    if !mesh.has_uvs() {
        return Err(Error::MissingUvs);
    }
    if resolution < MIN_BAKE_RESOLUTION {
        return Err(Error::invalid(format!(
            "bake resolution {resolution} is below {MIN_BAKE_RESOLUTION}"
        )));
    }
    let res = resolution;
    let (owners, overlaps) = rasterize(mesh, res);
    if overlaps > 0 {
        log::warn!("bake: {overlaps} texels covered by overlapping UV charts");
    }
    let values: Vec<Option<[f64; 5]>> = owners
        .par_iter()
        .enumerate()
        .map(|(i, o)| {
            o.map(|o| {
                let x = i as u32 % res;
                let y = i as u32 / res;
                let uv = DVec2::new((x as f64 + 0.5) / res as f64, 1.0 - (y as f64 + 0.5) / res as f64);
                let p = interpolate_position(mesh, o.tri as usize, o.bary);
                source.eval(p, uv).to_array()
            })
        })
        .collect();
    let mask = Image {
        width: res,
        height: res,
        pixels: values.iter().map(|v| if v.is_some() { 1.0 } else { 0.0 }).collect(),
    };
    let filled = dilate(values, res);
    Ok(BakedMaps {
        base_color: Image {
            width: res,
            height: res,
            pixels: filled.iter().map(|v| DVec3::new(v[0], v[1], v[2])).collect(),
        },
        roughness: Image {
            width: res,
            height: res,
            pixels: filled.iter().map(|v| v[3]).collect(),
        },
        metallic: Image {
            width: res,
            height: res,
            pixels: filled.iter().map(|v| v[4]).collect(),
        },
        mask,
        overlaps,
    })
}

/// Each pass assigns every empty texel bordering a filled one the mean of its
/// filled 8-neighbors from the previous pass.
fn dilate(mut values: Vec<Option<[f64; 5]>>, res: u32) -> Vec<[f64; 5]> {
    let n = res as i64;
    let mut frontier: Vec<usize> = (0..values.len())
        .filter(|&i| values[i].is_none() && neighbors(i, n).any(|j| values[j].is_some()))
        .collect();
    while !frontier.is_empty() {
        let updates: Vec<(usize, [f64; 5])> = frontier
            .iter()
            .map(|&i| {
                let mut acc = [0.0; 5];
                let mut k = 0.0;
                for j in neighbors(i, n) {
                    if let Some(v) = values[j] {
                        for c in 0..5 {
                            acc[c] += v[c];
                        }
                        k += 1.0;
                    }
                }
                (i, acc.map(|a| a / k))
            })
            .collect();
        for (i, v) in &updates {
            values[*i] = Some(*v);
        }
        let mut next: Vec<usize> = updates
            .iter()
            .flat_map(|(i, _)| neighbors(*i, n))
            .filter(|&j| values[j].is_none())
            .collect();
        next.sort_unstable();
        next.dedup();
        frontier = next;
    }
    values.into_iter().map(|v| v.unwrap_or([0.0; 5])).collect()
}

fn neighbors(i: usize, n: i64) -> impl Iterator<Item = usize> {
    let (x, y) = (i as i64 % n, i as i64 / n);
    (-1..=1i64)
        .flat_map(move |dy| (-1..=1i64).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| dx != 0 || dy != 0)
        .map(move |(dx, dy)| (x + dx, y + dy))
        .filter(move |&(a, b)| a >= 0 && b >= 0 && a < n && b < n)
        .map(move |(a, b)| (b * n + a) as usize)
}

pub const BASECOLOR_PNG: &str = "basecolor.png";
pub const ROUGHNESS_PNG: &str = "roughness.png";
pub const METALLIC_PNG: &str = "metallic.png";
pub const MASK_PNG: &str = "mask.png";

/// Writes 8-bit maps (sRGB base color, linear roughness/metallic), the
/// coverage mask, and 16-bit variants suffixed `_16`.
pub fn save_maps(dir: impl AsRef<Path>, maps: &BakedMaps) -> Result<()> {
    let dir = dir.as_ref();
    image::save_linear_rgb8_srgb(dir.join(BASECOLOR_PNG), &maps.base_color)?;
    image::save_gray8(dir.join(ROUGHNESS_PNG), &maps.roughness)?;
    image::save_gray8(dir.join(METALLIC_PNG), &maps.metallic)?;
    image::save_gray8(dir.join(MASK_PNG), &maps.mask)?;
    image::save_linear_rgb16_srgb(dir.join("basecolor_16.png"), &maps.base_color)?;
    image::save_gray16(dir.join("roughness_16.png"), &maps.roughness)?;
    image::save_gray16(dir.join("metallic_16.png"), &maps.metallic)?;
    Ok(())
}

/// Loads maps written by [`save_maps`], preferring the 16-bit variants.
pub fn load_maps(dir: impl AsRef<Path>) -> Result<TextureMaterial> {
    let dir = dir.as_ref();
    let pick = |name: &str, wide: &str| {
        let w = dir.join(wide);
        if w.exists() {
            w
        } else {
            dir.join(name)
        }
    };
    let base = image::load_rgb(pick(BASECOLOR_PNG, "basecolor_16.png"))?;
    let roughness = image::load_gray(pick(ROUGHNESS_PNG, "roughness_16.png"))?;
    let metallic = image::load_gray(pick(METALLIC_PNG, "metallic_16.png"))?;
    image::check_shape(&base, &roughness, "roughness map")?;
    image::check_shape(&base, &metallic, "metallic map")?;
    Ok(TextureMaterial {
        base_color: base.map(|c| srgb_decode_rgb(*c)),
        roughness,
        metallic,
    })
}
