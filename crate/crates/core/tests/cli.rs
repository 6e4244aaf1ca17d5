//! End-to-end checks of the `shbrdf` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use shbrdf::manifest::hash_tree;
use shbrdf::scene::textures::TextureSet;

fn shbrdf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shbrdf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(t: &TextureSet, dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    t.write(dir, false).unwrap();
}

fn texture(resolution: usize, valid: impl Fn(usize) -> bool, entropy: f32) -> TextureSet {
    let n = resolution * resolution;
    TextureSet {
        resolution,
        base_color: (0..n).map(|i| [i as f32 / n as f32, 0.5, 0.25]).collect(),
        roughness: (0..n).map(|i| (i % 7) as f32 / 7.0).collect(),
        metallic: (0..n).map(|i| (i % 3) as f32 / 3.0).collect(),
        entropy: vec![entropy; n],
        valid: (0..n).map(valid).collect(),
    }
}

#[test]
fn missing_camera_file_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit");
    let o = shbrdf(&[
        "fit",
        "--env",
        arg(&dir.path().join("env.exr")),
        "--mesh",
        arg(&dir.path().join("mesh.obj")),
        "--cameras",
        arg(&dir.path().join("missing.json")),
        "--out",
        arg(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn same_seed_gives_identical_bundles() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = shbrdf(&[
            "synth", "--preset", "sphere-4env", "--out", arg(&out), "--seed", "3", "--resolution", "8", "--views", "6",
            "--image-size", "32", "--noise", "0.01",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        hash_tree(&out).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    assert!(a.len() > 10);
    assert_eq!(a, b);
}

#[test]
fn masked_fit_preset_keeps_88_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f3");
    let o = shbrdf(&["synth", "--preset", "figure3", "--out", arg(&out)]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("figure3.json")).unwrap()).unwrap();
    assert_eq!(doc["samples"].as_array().unwrap().len(), 88);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("log_ratio_error_exp_degree"));
}

#[test]
fn merging_identical_runs_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = texture(8, |i| i % 5 != 0, 0.4);
    for name in ["a", "b"] {
        write(&t, &dir.path().join(name));
    }
    let out = dir.path().join("merged");
    let o = shbrdf(&["merge", "--runs", arg(&dir.path().join("a")), arg(&dir.path().join("b")), "--out", arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    t.fill_holes();
    assert_eq!(TextureSet::read(&out).unwrap(), t);
}

#[test]
fn disjoint_masks_merge_to_their_union() {
    let dir = tempfile::tempdir().unwrap();
    write(&texture(8, |i| i < 20, 0.3), &dir.path().join("a"));
    write(&texture(8, |i| (30..50).contains(&i), 0.6), &dir.path().join("b"));
    let out = dir.path().join("merged");
    let o = shbrdf(&["merge", "--runs", arg(&dir.path().join("a")), arg(&dir.path().join("b")), "--out", arg(&out)]);
    assert!(o.status.success());
    let m = TextureSet::read(&out).unwrap();
    for (i, v) in m.valid.iter().enumerate() {
        assert_eq!(*v, i < 20 || (30..50).contains(&i), "texel {i}");
    }
    assert_eq!(m.entropy[10], 0.3);
    assert_eq!(m.entropy[40], 0.6);
}

#[test]
fn refuses_to_overwrite_foreign_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("taken");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("notes.txt"), "keep me").unwrap();
    let o = shbrdf(&["synth", "--preset", "figure5", "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(fs::read_to_string(out.join("notes.txt")).unwrap(), "keep me");
    assert_eq!(fs::read_dir(&out).unwrap().count(), 1);
}

#[test]
fn bad_config_value_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "lambda = -1.0\n").unwrap();
    let o = shbrdf(&[
        "entropy", "--env", "e.exr", "--mesh", "m.obj", "--cameras", "c.json", "--out", arg(&dir.path().join("o")),
        "--config", arg(&cfg),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
