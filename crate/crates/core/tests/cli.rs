//! End-to-end tests of the `matrecon` binary on the bundled assets.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use matrecon::config::Config;
use matrecon::image::{load_gray, load_rgb};
use matrecon::matfield::{encode_checkpoint, MaterialField};
use matrecon::scene::load_mesh;

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets")
}

/// A shipped config with paths made absolute and `(from, to)` edits applied.
fn config(dir: &Path, name: &str, edits: &[(&str, &str)]) -> PathBuf {
    let mut text = std::fs::read_to_string(assets().join("configs").join(name)).unwrap();
    text = text.replace("\"../", &format!("\"{}/", assets().display()));
    for (from, to) in edits {
        assert!(text.contains(from), "{name} has no {from:?}");
        text = text.replace(from, to);
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], config: &Path, out: &Path, workers_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_matrecon"));
    cmd.args(args).arg("--config").arg(config).arg("--out").arg(out).env("RUST_LOG", "warn");
    match workers_env {
        Some(v) => cmd.env("MATRECON_WORKERS", v),
        None => cmd.env_remove("MATRECON_WORKERS"),
    };
    cmd.output().unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}\n{}", o.status.code(), String::from_utf8_lossy(&o.stderr));
}

fn sorted_names(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    v.sort();
    v
}

#[test]
fn guides_on_four_frames_write_eight_named_pngs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "guides.toml", &[]);
    let out = tmp.path().join("out");
    ok(&run(&["guides"], &cfg, &out, None));
    let names = sorted_names(&out.join("guides"));
    let want: Vec<String> = (0..4).flat_map(|i| [format!("{i:05}_normal.png"), format!("{i:05}_shading.png")]).collect();
    assert_eq!(names, want);
    let n = load_rgb(out.join("guides/00002_normal.png")).unwrap();
    assert_eq!((n.width, n.height), (64, 64));
    assert!(out.join("resolved_config.toml").exists());
}

#[test]
fn reconstruct_on_the_bundled_example_writes_maps_and_losses() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "reconstruct.toml", &[]);
    let out = tmp.path().join("out");
    ok(&run(&["reconstruct"], &cfg, &out, None));
    for map in ["basecolor.png", "roughness.png", "metallic.png", "mask.png"] {
        let img = load_rgb(out.join("maps").join(map)).unwrap();
        assert_eq!((img.width, img.height), (256, 256), "{map}");
    }
    let csv = std::fs::read_to_string(out.join("loss.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("iteration,L_image,L_reg_base,L_reg_rough,L_reg_metal,total"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().all(|r| r.len() == 6 && r.iter().all(|v| v.is_finite())));
    let head: f64 = rows[..10].iter().map(|r| r[5]).sum();
    let tail: f64 = rows[90..].iter().map(|r| r[5]).sum();
    assert!(tail < head, "loss did not decrease: {head} -> {tail}");
    // the echoed config is complete and loads on its own
    let echoed = Config::parse(&std::fs::read_to_string(out.join("resolved_config.toml")).unwrap()).unwrap();
    assert_eq!(echoed.optim.iterations, 100);
    assert_eq!(echoed.reconstruct.frameset, Some(assets().join("frameset")));
}

#[test]
fn zero_iterations_store_the_initial_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "reconstruct.toml", &[("iterations = 100", "iterations = 0")]);
    let out = tmp.path().join("out");
    ok(&run(&["reconstruct"], &cfg, &out, None));
    let parsed = Config::load(&cfg).unwrap();
    let mesh = load_mesh(assets().join("cube.obj")).unwrap();
    let init = MaterialField::for_bounds(parsed.field.clone(), &mesh.bounds).unwrap();
    assert_eq!(std::fs::read(out.join("field.bin")).unwrap(), encode_checkpoint(&init));
    assert_eq!(std::fs::read_to_string(out.join("loss.csv")).unwrap().lines().count(), 1);
}

#[test]
fn unknown_keys_exit_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "guides.toml", &[("spp = 16", "spp = 16\nsamples_per_pixel = 3")]);
    let o = run(&["guides"], &cfg, &tmp.path().join("out"), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("samples_per_pixel"));
}

#[test]
fn invalid_values_and_missing_flags_exit_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "guides.toml", &[("spp = 16", "spp = 0")]);
    assert_eq!(run(&["guides"], &cfg, &tmp.path().join("out"), None).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_matrecon")).arg("render").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let good = config(tmp.path(), "warp.toml", &[]);
    assert_eq!(run(&["warp"], &good, &tmp.path().join("out"), Some("many")).status.code(), Some(2));
}

#[test]
fn missing_files_exit_with_io_error_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere/cube.obj");
    let edit = format!("mesh = \"{}\"", missing.display());
    let cfg = config(tmp.path(), "guides.toml", &[(&format!("mesh = \"{}/cube.obj\"", assets().display()), &edit)]);
    let o = run(&["guides"], &cfg, &tmp.path().join("out"), None);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains(&missing.display().to_string()));

    let o = Command::new(env!("CARGO_BIN_EXE_matrecon"))
        .args(["bake", "--config"])
        .arg(tmp.path().join("absent.toml"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn exploding_optimization_exits_with_divergence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        "reconstruct.toml",
        &[("iterations = 100", "iterations = 5"), ("seed = 7", "seed = 7\n\n[optim.adam]\nlr_tables = 1e300\nlr_mlp = 1e300")],
    );
    let out = tmp.path().join("out");
    let o = run(&["reconstruct"], &cfg, &out, None);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    // the history before the divergence is kept
    assert!(std::fs::read_to_string(out.join("loss.csv")).unwrap().starts_with("iteration,"));
    assert!(!out.join("field.bin").exists());
}

#[test]
fn loss_csv_is_identical_across_runs_and_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "reconstruct.toml", &[("iterations = 100", "iterations = 6"), ("resolution = 256", "resolution = 64")]);
    let outs: Vec<PathBuf> = (0..3).map(|i| tmp.path().join(format!("out{i}"))).collect();
    ok(&run(&["reconstruct"], &cfg, &outs[0], Some("1")));
    ok(&run(&["reconstruct"], &cfg, &outs[1], Some("1")));
    ok(&run(&["reconstruct", "--workers", "3"], &cfg, &outs[2], Some("1")));
    for f in ["loss.csv", "field.bin", "maps/basecolor.png", "maps/roughness_16.png"] {
        let a = std::fs::read(outs[0].join(f)).unwrap();
        assert_eq!(a, std::fs::read(outs[1].join(f)).unwrap(), "{f} differs between runs");
        assert_eq!(a, std::fs::read(outs[2].join(f)).unwrap(), "{f} differs between worker counts");
    }
}

#[test]
fn render_exports_sixteen_bit_frames_masks_and_float_dumps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        "render.toml",
        &[("spp = 64", "spp = 4\nwidth = 24\nheight = 16"), ("intrinsics = true", "intrinsics = true\nbit_depth = 16\nhdr = true")],
    );
    let out = tmp.path().join("out");
    ok(&run(&["render"], &cfg, &out, None));
    assert_eq!(sorted_names(&out.join("frames")).len(), 16);
    let png = image_depth(&out.join("frames/00003.png"));
    assert_eq!(png, 16);
    let mask = load_gray(out.join("masks/00003.png")).unwrap();
    assert_eq!((mask.width, mask.height), (24, 16));
    assert!(mask.pixels.iter().all(|m| *m == 0.0 || *m == 1.0));
    let (w, h, c, data) = matrecon::image::read_float_dump(out.join("hdr/00003.bin")).unwrap();
    assert_eq!((w, h, c, data.len()), (24, 16, 3, 24 * 16 * 3));
    for g in ["basecolor", "roughness", "metallic"] {
        assert!(out.join("guides").join(g).join("00015.png").exists());
    }
    let cams = matrecon::scene::load_cameras(out.join("cameras.txt")).unwrap();
    assert_eq!(cams.len(), 16);
    assert_eq!((cams[0].width, cams[0].height), (24, 16));
}

fn image_depth(path: &Path) -> u8 {
    // PNG IHDR: 8-byte signature, 4-byte length, "IHDR", width, height, bit depth
    std::fs::read(path).unwrap()[24]
}

#[test]
fn metrics_of_identical_directories_are_infinite() {
    let tmp = tempfile::tempdir().unwrap();
    let frames = format!("{}/frameset/frames", assets().display());
    let cfg = config(tmp.path(), "metrics.toml", &[(&format!("b = \"{}/out/render/frames\"", assets().display()), &format!("b = \"{frames}\""))]);
    let out = tmp.path().join("out");
    ok(&run(&["metrics"], &cfg, &out, None));
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "frame,psnr_db");
    assert_eq!(lines.len(), 17);
    assert!(lines[1..].iter().all(|l| l.ends_with(",inf")), "{csv}");
}

#[test]
fn warp_to_the_source_view_reproduces_the_image() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "warp.toml", &[]);
    let out = tmp.path().join("out");
    ok(&run(&["warp"], &cfg, &out, None));
    let src = load_rgb(assets().join("frameset/frames/00000.png")).unwrap();
    let same = load_rgb(out.join("warp/frames/00000.png")).unwrap();
    let mask = load_gray(out.join("warp/masks/00000.png")).unwrap();
    let truth_mask = load_gray(assets().join("frameset/masks/00000.png")).unwrap();
    assert_eq!(mask.pixels, truth_mask.pixels);
    for i in 0..src.len() {
        if mask.pixels[i] > 0.5 {
            assert_eq!(src.pixels[i], same.pixels[i]);
        }
    }
    assert_eq!(sorted_names(&out.join("warp/frames")), ["00000.png", "00001.png", "00002.png", "00008.png"]);
}
