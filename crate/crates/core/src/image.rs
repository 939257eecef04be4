//! Row-major image buffers and their file formats.
//!
//! Display images are 8- or 16-bit PNG. Linear data (HDR radiance, depth) is
//! dumped as raw little-endian `f32` behind a `{width, height, channels}`
//! header of three little-endian `u32`.

use std::io::Write;
use std::path::Path;

use glam::DVec3;

use crate::error::{Error, Result};
use crate::tracer::srgb_encode;

#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<T>,
}

pub type RgbImage = Image<DVec3>;
pub type GrayImage = Image<f64>;

impl<T: Clone> Image<T> {
    pub fn filled(width: u32, height: u32, value: T) -> Self {
        Image {
            width,
            height,
            pixels: vec![value; (width * height) as usize],
        }
    }
}

impl<T> Image<T> {
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> T) -> Self {
        let mut pixels = Vec::with_capacity((width * height) as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Image { width, height, pixels }
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        (y * self.width + x) as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> &T {
        &self.pixels[self.index(x, y)]
    }

    #[inline]
    pub fn get_mut(&mut self, x: u32, y: u32) -> &mut T {
        let i = self.index(x, y);
        &mut self.pixels[i]
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn same_shape<U>(&self, other: &Image<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(f).collect(),
        }
    }
}

pub(crate) fn check_shape<A, B>(a: &Image<A>, b: &Image<B>, what: &str) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "{what}: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )))
    }
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn to_u16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(())
}

fn save(path: &Path, img: impl Into<image::DynamicImage>) -> Result<()> {
    create_parent(path)?;
    img.into()
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Writes values already in display space as an 8-bit RGB PNG.
pub fn save_rgb8(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    let buf = image::RgbImage::from_fn(img.width, img.height, |x, y| {
        let c = img.get(x, y);
        image::Rgb([to_u8(c.x), to_u8(c.y), to_u8(c.z)])
    });
    save(path.as_ref(), buf)
}

pub fn save_rgb16(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    let buf = image::ImageBuffer::<image::Rgb<u16>, Vec<u16>>::from_fn(img.width, img.height, |x, y| {
        let c = img.get(x, y);
        image::Rgb([to_u16(c.x), to_u16(c.y), to_u16(c.z)])
    });
    save(path.as_ref(), buf)
}

/// Writes linear RGB values sRGB-encoded as 8-bit PNG.
pub fn save_linear_rgb8_srgb(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    save_rgb8(path, &img.map(|c| DVec3::new(srgb_encode(c.x), srgb_encode(c.y), srgb_encode(c.z))))
}

pub fn save_linear_rgb16_srgb(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    save_rgb16(path, &img.map(|c| DVec3::new(srgb_encode(c.x), srgb_encode(c.y), srgb_encode(c.z))))
}

pub fn save_gray8(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let buf = image::GrayImage::from_fn(img.width, img.height, |x, y| image::Luma([to_u8(*img.get(x, y))]));
    save(path.as_ref(), buf)
}

pub fn save_gray16(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let buf = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_fn(img.width, img.height, |x, y| {
        image::Luma([to_u16(*img.get(x, y))])
    });
    save(path.as_ref(), buf)
}

fn open(path: &Path) -> Result<image::DynamicImage> {
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "file not found")));
    }
    image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a PNG as RGB in [0, 1] without any transfer-function conversion.
pub fn load_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let img = open(path.as_ref())?.into_rgb32f();
    Ok(Image::from_fn(img.width(), img.height(), |x, y| {
        let p = img.get_pixel(x, y).0;
        DVec3::new(p[0] as f64, p[1] as f64, p[2] as f64)
    }))
}

pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let img = open(path.as_ref())?.to_luma32f();
    Ok(Image::from_fn(img.width(), img.height(), |x, y| img.get_pixel(x, y).0[0] as f64))
}

/// Raw little-endian `f32` dump with a `{w, h, channels}` header.
pub fn write_float_dump(path: impl AsRef<Path>, width: u32, height: u32, channels: u32, data: &[f32]) -> Result<()> {
    let path = path.as_ref();
    assert_eq!(data.len(), (width * height * channels) as usize);
    create_parent(path)?;
    let mut bytes = Vec::with_capacity(12 + 4 * data.len());
    for v in [width, height, channels] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_float_dump(path: impl AsRef<Path>) -> Result<(u32, u32, u32, Vec<f32>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = || Error::Parse {
        path: path.display().to_string(),
        line: 0,
        msg: "truncated float dump".into(),
    };
    if bytes.len() < 12 {
        return Err(bad());
    }
    let u = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let (w, h, c) = (u(0), u(4), u(8));
    let n = (w as usize) * (h as usize) * (c as usize);
    if bytes.len() != 12 + 4 * n {
        return Err(bad());
    }
    let data = bytes[12..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok((w, h, c, data))
}

pub fn write_rgb_dump(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    let data: Vec<f32> = img
        .pixels
        .iter()
        .flat_map(|c| [c.x as f32, c.y as f32, c.z as f32])
        .collect();
    write_float_dump(path, img.width, img.height, 3, &data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        let data: Vec<f32> = (0..24).map(|i| i as f32 * 0.5 - 3.0).collect();
        write_float_dump(&p, 4, 2, 3, &data).unwrap();
        let (w, h, c, back) = read_float_dump(&p).unwrap();
        assert_eq!((w, h, c), (4, 2, 3));
        assert_eq!(back, data);
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], &4u32.to_le_bytes());
    }

    #[test]
    fn png8_round_trip_quantizes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let img = Image::from_fn(3, 2, |x, y| DVec3::new(x as f64 / 2.0, y as f64, 0.25));
        save_rgb8(&p, &img).unwrap();
        let back = load_rgb(&p).unwrap();
        for (a, b) in img.pixels.iter().zip(&back.pixels) {
            assert!((*a - *b).abs().max_element() <= 0.5 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn missing_png_names_path() {
        let err = load_rgb("/nonexistent/frame.png").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/frame.png"));
    }
}
