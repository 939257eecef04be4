//! The pipeline config file (TOML). Unknown keys are rejected everywhere;
//! relative paths are taken relative to the config file.

use std::path::{Path, PathBuf};

use glam::DVec3;
use serde::{Deserialize, Serialize};

use crate::brdf::PbrSample;
use crate::envlight::{load_probe, EnvironmentProbe, ProbeFilter};
use crate::error::{Error, Result};
use crate::material::{MaterialSource, Procedural};
use crate::matfield::{load_checkpoint, load_maps, FieldConfig};
use crate::recon::OptimSettings;
use crate::scene::{load_cameras, load_mesh, Camera, Orbit, Scene};
use crate::synthetic::oracle_cube_material;
use crate::tracer::RenderConfig;

/// File name of the echoed config in every output directory.
pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scene: SceneSection,
    #[serde(default)]
    pub cameras: CameraSection,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub material: MaterialSpec,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub optim: OptimSettings,
    #[serde(default)]
    pub export: ExportSection,
    #[serde(default)]
    pub reconstruct: ReconstructSection,
    #[serde(default)]
    pub bake: BakeSection,
    #[serde(default)]
    pub relight: RelightSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub warp: WarpSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub mesh: PathBuf,
    pub probe: PathBuf,
    /// Probe rotation about +Y in radians.
    #[serde(default)]
    pub probe_rotation: f64,
    #[serde(default)]
    pub probe_filter: ProbeFilter,
    /// Rescale the mesh to a unit-diagonal box at the origin.
    #[serde(default)]
    pub normalize: bool,
}

/// Either a camera file or a fixed-elevation orbit around the mesh centre.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraSection {
    pub file: Option<PathBuf>,
    pub frames: usize,
    pub elevation: f64,
    pub radius: Option<f64>,
    pub fov: Option<f64>,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraSection {
    fn default() -> Self {
        CameraSection {
            file: None,
            frames: 121,
            elevation: 0.0,
            radius: None,
            fov: None,
            width: 1280,
            height: 704,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MaterialSpec {
    Constant {
        base_color: [f64; 3],
        roughness: f64,
        metallic: f64,
    },
    /// Directory of baked maps.
    Maps { dir: PathBuf },
    Checkpoint { path: PathBuf },
    /// Checkerboard cube material used by the synthetic examples.
    Oracle { size: f64 },
}

impl Default for MaterialSpec {
    fn default() -> Self {
        MaterialSpec::Constant {
            base_color: [0.8, 0.8, 0.8],
            roughness: 0.5,
            metallic: 0.0,
        }
    }
}

impl MaterialSpec {
    pub fn load(&self) -> Result<Box<dyn MaterialSource>> {
        Ok(match self {
            MaterialSpec::Constant {
                base_color,
                roughness,
                metallic,
            } => Box::new(PbrSample::new(DVec3::from_array(*base_color), *roughness, *metallic)),
            MaterialSpec::Maps { dir } => Box::new(load_maps(dir)?),
            MaterialSpec::Checkpoint { path } => Box::new(load_checkpoint(path)?),
            MaterialSpec::Oracle { size } => Box::new(Procedural(oracle_cube_material(*size))),
        })
    }

    fn resolve(&mut self, base: &Path) {
        match self {
            MaterialSpec::Maps { dir } => *dir = join(base, dir),
            MaterialSpec::Checkpoint { path } => *path = join(base, path),
            _ => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExportSection {
    /// Bit depth of rendered frame PNGs (8 or 16).
    pub bit_depth: u32,
    /// Also write linear radiance as float dumps.
    pub hdr: bool,
    /// Also write ground-truth intrinsics as FrameSet guides.
    pub intrinsics: bool,
}

impl Default for ExportSection {
    fn default() -> Self {
        ExportSection {
            bit_depth: 8,
            hdr: false,
            intrinsics: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructSection {
    pub frameset: Option<PathBuf>,
    /// Bake the optimized field at `[bake].resolution` when done.
    pub bake: bool,
}

impl Default for ReconstructSection {
    fn default() -> Self {
        ReconstructSection { frameset: None, bake: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BakeSection {
    pub checkpoint: Option<PathBuf>,
    pub resolution: u32,
}

impl Default for BakeSection {
    fn default() -> Self {
        BakeSection {
            checkpoint: None,
            resolution: 1024,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelightSection {
    pub probes: Vec<PathBuf>,
    /// Pre-rendered truth, `<truth_dir>/<probe:02>/<frame:05>.png`.
    pub truth_dir: Option<PathBuf>,
    /// Otherwise the truth is rendered from this material.
    pub reference: Option<MaterialSpec>,
    /// Write the relit frames next to the table.
    pub save_images: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    /// Two directories of `<frame:05>.png` images to compare.
    pub a: Option<PathBuf>,
    pub b: Option<PathBuf>,
    /// Optional masks with the same naming.
    pub masks: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WarpSection {
    /// Display image seen from the source camera; rendered from `[material]` when absent.
    pub image: Option<PathBuf>,
    /// Index of the source camera.
    pub source: usize,
    /// Destination camera indices; all cameras when empty.
    pub targets: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

fn join(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn join_opt(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(v) = p {
        *v = join(base, v);
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file, resolving relative paths against
    /// its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Config::parse(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        self.scene.mesh = join(base, &self.scene.mesh);
        self.scene.probe = join(base, &self.scene.probe);
        join_opt(base, &mut self.cameras.file);
        self.material.resolve(base);
        join_opt(base, &mut self.reconstruct.frameset);
        join_opt(base, &mut self.bake.checkpoint);
        for p in &mut self.relight.probes {
            *p = join(base, p);
        }
        join_opt(base, &mut self.relight.truth_dir);
        if let Some(r) = &mut self.relight.reference {
            r.resolve(base);
        }
        join_opt(base, &mut self.metrics.a);
        join_opt(base, &mut self.metrics.b);
        join_opt(base, &mut self.metrics.masks);
        join_opt(base, &mut self.warp.image);
        self.output.dir = join(base, &self.output.dir);
    }

    pub fn validate(&self) -> Result<()> {
        self.render.validate()?;
        self.field.validate().map_err(|e| Error::Config(format!("field: {e}")))?;
        let mut optim = self.optim.clone();
        optim.render = self.render.clone();
        optim.validate()?;
        if ![8, 16].contains(&self.export.bit_depth) {
            return Err(Error::Config(format!("export: bit_depth must be 8 or 16, got {}", self.export.bit_depth)));
        }
        if self.bake.resolution < crate::matfield::MIN_BAKE_RESOLUTION {
            return Err(Error::Config(format!(
                "bake: resolution must be at least {}",
                crate::matfield::MIN_BAKE_RESOLUTION
            )));
        }
        let c = &self.cameras;
        if c.file.is_none() {
            if c.frames == 0 || c.width == 0 || c.height == 0 {
                return Err(Error::Config("cameras: frames, width and height must be at least 1".into()));
            }
            if c.radius.is_none() || c.fov.is_none() {
                return Err(Error::Config("cameras: an orbit needs both radius and fov (or set cameras.file)".into()));
            }
        }
        if let MaterialSpec::Constant { roughness, metallic, .. } = &self.material {
            if !(0.0..=1.0).contains(roughness) || !(0.0..=1.0).contains(metallic) {
                return Err(Error::Config("material: roughness and metallic must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    /// Optimizer settings with the `[render]` section filled in.
    pub fn optim_settings(&self) -> OptimSettings {
        OptimSettings {
            render: self.render.clone(),
            ..self.optim.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load_scene(&self) -> Result<Scene> {
        let mut mesh = load_mesh(&self.scene.mesh)?;
        if self.scene.normalize {
            mesh.normalize_unit_diagonal();
        }
        Ok(Scene::new(mesh))
    }

    pub fn load_probe(&self) -> Result<EnvironmentProbe> {
        Ok(load_probe(&self.scene.probe)?
            .with_rotation(self.scene.probe_rotation)
            .with_filter(self.scene.probe_filter))
    }

    /// Cameras from the camera file or the orbit, with `[render]`
    /// resolution overrides applied.
    pub fn cameras(&self, scene: &Scene) -> Result<Vec<Camera>> {
        let c = &self.cameras;
        let cams = match &c.file {
            Some(f) => load_cameras(f)?,
            None => Orbit {
                n_frames: c.frames,
                elevation: c.elevation,
                radius: c.radius.unwrap_or(1.0),
                center: crate::math::to_f64(scene.bounds().center()),
                fov_y: c.fov.unwrap_or(0.8),
                width: c.width,
                height: c.height,
                azimuth_offset: 0.0,
            }
            .cameras()?,
        };
        Ok(cams.iter().map(|cam| self.render.camera(cam)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[scene]
mesh = "m.obj"
probe = "p.hdr"

[cameras]
frames = 4
radius = 2.0
fov = 0.7
width = 16
height = 8
"#;

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = Config::parse(MINIMAL).unwrap();
        assert_eq!(cfg.render, RenderConfig::default());
        assert_eq!(cfg.optim.iterations, 1000);
        assert_eq!(cfg.optim.batch_size, 8);
        assert_eq!(cfg.optim.lambda, 0.2);
        assert_eq!(cfg.bake.resolution, 1024);
        // the echo parses back to the same config
        assert_eq!(Config::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for extra in ["[render]\nspp_typo = 3\n", "[optim]\nlamda = 0.1\n", "[material]\nkind = \"constant\"\nbase_color = [1,1,1]\nroughness = 0.5\nmetallic = 0.0\nshiny = 1\n", "[bogus]\nx = 1\n"] {
            let text = format!("{MINIMAL}{extra}");
            assert!(matches!(Config::parse(&text), Err(Error::Config(_))), "{extra}");
        }
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for extra in ["[optim]\nlambda = -1.0\n", "[render]\nspp = 0\n", "[export]\nbit_depth = 12\n"] {
            assert!(matches!(Config::parse(&format!("{MINIMAL}{extra}")), Err(Error::Config(_))), "{extra}");
        }
        let no_fov = MINIMAL.replace("fov = 0.7\n", "");
        assert!(matches!(Config::parse(&no_fov), Err(Error::Config(_))));
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut cfg = Config::parse(&format!("{MINIMAL}[material]\nkind = \"maps\"\ndir = \"baked\"\n")).unwrap();
        cfg.resolve_paths(Path::new("/data/run"));
        assert_eq!(cfg.scene.mesh, PathBuf::from("/data/run/m.obj"));
        assert_eq!(cfg.material, MaterialSpec::Maps { dir: PathBuf::from("/data/run/baked") });
        assert_eq!(cfg.output.dir, PathBuf::from("/data/run/out"));
    }
}
