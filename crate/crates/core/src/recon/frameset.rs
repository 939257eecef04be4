//! Multi-view training data on disk:
//!
//! ```text
//! cameras.txt
//! frames/00000.png               display-space reference
//! masks/00000.png                coverage, white = object
//! guides/basecolor/00000.png     optional, display space
//! guides/roughness/00000.png
//! guides/metallic/00000.png
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{check_shape, load_gray, load_rgb, save_gray8, save_rgb8, GrayImage, RgbImage};
use crate::scene::{load_cameras, write_cameras, Camera};

pub const CAMERAS_FILE: &str = "cameras.txt";

#[derive(Clone, Debug, PartialEq)]
pub struct Guides {
    /// Display-space base colour.
    pub base_color: RgbImage,
    pub roughness: GrayImage,
    pub metallic: GrayImage,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub camera: Camera,
    /// Display-space reference image.
    pub reference: RgbImage,
    pub mask: GrayImage,
    pub guides: Option<Guides>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameSet {
    pub frames: Vec<Frame>,
}

pub fn frame_name(i: usize) -> String {
    format!("{i:05}.png")
}

impl FrameSet {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        let fs = FrameSet { frames };
        fs.validate()?;
        Ok(fs)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn has_guides(&self) -> bool {
        self.frames.first().is_some_and(|f| f.guides.is_some())
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.frames.first() else {
            return Err(Error::invalid("frame set is empty"));
        };
        let guided = first.guides.is_some();
        for (i, f) in self.frames.iter().enumerate() {
            let what = |s: &str| format!("frame {i} {s}");
            check_shape(&f.reference, &first.reference, &what("resolution"))?;
            check_shape(&f.reference, &f.mask, &what("mask"))?;
            if f.camera.width != f.reference.width || f.camera.height != f.reference.height {
                return Err(Error::ShapeMismatch(format!(
                    "frame {i}: camera is {}x{}, image is {}x{}",
                    f.camera.width, f.camera.height, f.reference.width, f.reference.height
                )));
            }
            match &f.guides {
                Some(g) => {
                    check_shape(&f.reference, &g.base_color, &what("base colour guide"))?;
                    check_shape(&f.reference, &g.roughness, &what("roughness guide"))?;
                    check_shape(&f.reference, &g.metallic, &what("metallic guide"))?;
                }
                None if guided => return Err(Error::invalid(format!("frame {i} lacks guides present on frame 0"))),
                None => {}
            }
            if f.guides.is_some() && !guided {
                return Err(Error::invalid(format!("frame {i} has guides but frame 0 does not")));
            }
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let cameras = load_cameras(dir.join(CAMERAS_FILE))?;
        let guide_dir = dir.join("guides");
        let guided = guide_dir.exists();
        let mut frames = Vec::with_capacity(cameras.len());
        for (i, camera) in cameras.into_iter().enumerate() {
            let name = frame_name(i);
            let guides = if guided {
                Some(Guides {
                    base_color: load_rgb(guide_dir.join("basecolor").join(&name))?,
                    roughness: load_gray(guide_dir.join("roughness").join(&name))?,
                    metallic: load_gray(guide_dir.join("metallic").join(&name))?,
                })
            } else {
                None
            };
            frames.push(Frame {
                camera,
                reference: load_rgb(dir.join("frames").join(&name))?,
                mask: load_gray(dir.join("masks").join(&name))?,
                guides,
            });
        }
        FrameSet::new(frames)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let cams: Vec<Camera> = self.frames.iter().map(|f| f.camera).collect();
        let path = dir.join(CAMERAS_FILE);
        std::fs::write(&path, write_cameras(&cams)).map_err(|e| Error::io(&path, e))?;
        for (i, f) in self.frames.iter().enumerate() {
            let name = frame_name(i);
            save_rgb8(dir.join("frames").join(&name), &f.reference)?;
            save_gray8(dir.join("masks").join(&name), &f.mask)?;
            if let Some(g) = &f.guides {
                save_rgb8(dir.join("guides/basecolor").join(&name), &g.base_color)?;
                save_gray8(dir.join("guides/roughness").join(&name), &g.roughness)?;
                save_gray8(dir.join("guides/metallic").join(&name), &g.metallic)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use glam::{DVec3, DAffine3};

    use super::*;
    use crate::image::Image;

    fn frame(guided: bool, w: u32) -> Frame {
        let camera = Camera::new(DAffine3::IDENTITY, 0.8, w, 3).unwrap();
        let reference = Image::from_fn(w, 3, |x, y| DVec3::new(x as f64 / 4.0, y as f64 / 2.0, 0.2));
        let mask = Image::from_fn(w, 3, |x, _| if x > 1 { 1.0 } else { 0.0 });
        Frame {
            camera,
            guides: guided.then(|| Guides {
                base_color: reference.clone(),
                roughness: Image::filled(w, 3, 0.4),
                metallic: Image::filled(w, 3, 0.0),
            }),
            reference,
            mask,
        }
    }

    #[test]
    fn round_trip_through_directory() {
        let dir = tempfile::tempdir().unwrap();
        let fs = FrameSet::new(vec![frame(true, 4), frame(true, 4)]).unwrap();
        fs.save(dir.path()).unwrap();
        assert!(dir.path().join("guides/metallic/00001.png").exists());
        let back = FrameSet::load(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        assert!(back.has_guides());
        for (a, b) in fs.frames.iter().zip(&back.frames) {
            assert_eq!(a.mask, b.mask);
            for (p, q) in a.reference.pixels.iter().zip(&b.reference.pixels) {
                assert!((*p - *q).abs().max_element() <= 0.51 / 255.0);
            }
            let g = b.guides.as_ref().unwrap();
            assert!((g.roughness.pixels[0] - 0.4).abs() < 0.51 / 255.0);
        }
    }

    #[test]
    fn inconsistent_sets_are_rejected() {
        assert!(FrameSet::new(vec![]).is_err());
        assert!(FrameSet::new(vec![frame(true, 4), frame(false, 4)]).is_err());
        assert!(FrameSet::new(vec![frame(false, 4), frame(true, 4)]).is_err());
        assert!(FrameSet::new(vec![frame(false, 4), frame(false, 5)]).is_err());
    }

    #[test]
    fn missing_files_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        FrameSet::new(vec![frame(false, 4)]).unwrap().save(dir.path()).unwrap();
        std::fs::remove_file(dir.path().join("masks/00000.png")).unwrap();
        let err = FrameSet::load(dir.path()).unwrap_err();
        assert!(err.to_string().contains("00000.png"), "{err}");
    }
}
