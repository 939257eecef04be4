// Regenerates the bundled assets: the oracle cube mesh, two probes, a
// 16-view FrameSet with ground-truth guides and the example configs.
//
// `cargo run --release --example make_assets -- [assets_dir]`

use std::path::{Path, PathBuf};

use glam::DVec3;
use matrecon::envlight::save_probe;
use matrecon::material::Procedural;
use matrecon::pipeline::synthesize_frameset;
use matrecon::scene::{write_obj, Scene};
use matrecon::synthetic;
use matrecon::tracer::RenderConfig;
use matrecon::Error;

pub const FRAMESET_RESOLUTION: u32 = 64;

const CONFIGS: &[(&str, &str)] = &[
    (
        "render.toml",
        r#"# Re-renders the bundled views of the oracle cube with an independent seed.
[scene]
mesh = "../cube.obj"
probe = "../sky.hdr"

[cameras]
file = "../frameset/cameras.txt"

[render]
spp = 64
max_bounces = 3
seed = 11

[material]
kind = "oracle"
size = 1.0

[export]
intrinsics = true

[output]
dir = "../out/render"
"#,
    ),
    (
        "guides.toml",
        r#"# Normal and shading guides for four orbit frames.
[scene]
mesh = "../cube.obj"
probe = "../sky.hdr"

[cameras]
frames = 4
elevation = 0.35
radius = 2.6
fov = 0.75
width = 64
height = 64

[render]
spp = 16

[output]
dir = "../out/guides"
"#,
    ),
    (
        "reconstruct.toml",
        r#"# Reconstructs the oracle cube materials from the bundled FrameSet.
[scene]
mesh = "../cube.obj"
probe = "../sky.hdr"

[cameras]
file = "../frameset/cameras.txt"

[render]
spp = 4
spp_backward = 1
max_bounces = 2

[field]
levels = 8
log2_table_size = 15
max_resolution = 256

[optim]
iterations = 100
batch_size = 2
lambda = 0.2
seed = 7

[reconstruct]
frameset = "../frameset"

[bake]
resolution = 256

[output]
dir = "../out/reconstruct"
"#,
    ),
    (
        "bake.toml",
        r#"# Bakes the checkpoint written by reconstruct.toml.
[scene]
mesh = "../cube.obj"
probe = "../sky.hdr"

[cameras]
file = "../frameset/cameras.txt"

[bake]
checkpoint = "../out/reconstruct/field.bin"
resolution = 1024

[output]
dir = "../out/bake"
"#,
    ),
    (
        "relight.toml",
        r#"# Relights the reconstructed maps and compares with the oracle material.
[scene]
mesh = "../cube.obj"
probe = "../sky.hdr"

[cameras]
file = "../frameset/cameras.txt"

[render]
spp = 32
max_bounces = 2

[material]
kind = "maps"
dir = "../out/reconstruct/maps"

[relight]
probes = ["../sky.hdr", "../gradient.hdr"]
reference = { kind = "oracle", size = 1.0 }

[output]
dir = "../out/relight"
"#,
    ),
    (
        "metrics.toml",
        r#"# PSNR between the bundled frames and the re-rendered ones.
[scene]
mesh = "../cube.obj"
probe = "../sky.hdr"

[cameras]
file = "../frameset/cameras.txt"

[metrics]
a = "../frameset/frames"
b = "../out/render/frames"
masks = "../frameset/masks"

[output]
dir = "../out/metrics"
"#,
    ),
    (
        "warp.toml",
        r#"# Warps the first bundled frame to its neighbours.
[scene]
mesh = "../cube.obj"
probe = "../sky.hdr"

[cameras]
file = "../frameset/cameras.txt"

[warp]
image = "../frameset/frames/00000.png"
source = 0
targets = [0, 1, 2, 8]

[output]
dir = "../out/warp"
"#,
    ),
];

pub fn run(dir: &Path) -> matrecon::Result<()> {
    std::fs::create_dir_all(dir.join("configs")).map_err(|e| Error::io(dir, e))?;
    let mesh = synthetic::atlas_cube(1.0);
    let path = dir.join("cube.obj");
    std::fs::write(&path, write_obj(&mesh)).map_err(|e| Error::io(&path, e))?;
    let sky = synthetic::sky_probe(128, 64, DVec3::new(0.5, 0.8, 0.3), 40.0)?;
    save_probe(dir.join("sky.hdr"), &sky)?;
    save_probe(dir.join("gradient.hdr"), &synthetic::gradient_probe(64, 32)?)?;

    // render from the files just written so the FrameSet matches what the CLI loads
    let scene = Scene::new(matrecon::scene::load_mesh(dir.join("cube.obj"))?);
    let probe = matrecon::envlight::load_probe(dir.join("sky.hdr"))?;
    let cams = synthetic::oracle_cameras(scene.bounds().center().as_dvec3(), FRAMESET_RESOLUTION)?;
    let truth = Procedural(synthetic::oracle_cube_material(1.0));
    let cfg = RenderConfig { spp: 64, max_bounces: 3, seed: 1, ..Default::default() };
    synthesize_frameset(&scene, &probe, &truth, &cams, &cfg, true)?.save(dir.join("frameset"))?;

    for (name, text) in CONFIGS {
        let path = dir.join("configs").join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> matrecon::Result<()> {
    let dir = std::env::args().nth(1).map_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/assets")), PathBuf::from);
    run(&dir)?;
    println!("assets written to {}", dir.display());
    Ok(())
}
