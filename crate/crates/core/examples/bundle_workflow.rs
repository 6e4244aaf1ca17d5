//! The file-based workflow behind the `shbrdf` binary: synthesize a
//! bundle, fit two of its environments, merge them, and reproduce a run
//! from its manifest.
//!
//! ```bash
//! cargo run --release --example bundle_workflow -- /tmp/shbrdf-demo
//! ```

use std::path::Path;

use shbrdf::commands::{cmd_fit, cmd_merge, cmd_rerun, cmd_synth, env_dir, FitArgs, SceneInputs, SynthOptions, SynthPreset};
use shbrdf::config::ConfigFile;

pub fn run_example(root: &Path) -> anyhow::Result<()> {
    let opts = SynthOptions {
        resolution: 16,
        views: 24,
        image_size: 64,
        ..Default::default()
    };
    let bundle = root.join("bundle");
    let m = cmd_synth(SynthPreset::Sphere4Env, &bundle, 1, &opts)?;
    println!("synth wrote {} files", m.outputs.len());

    let config = ConfigFile {
        resolution: Some(16),
        iterations: Some(50),
        ..Default::default()
    };
    let mut runs = Vec::new();
    for k in 0..2 {
        let dir = bundle.join(env_dir(k));
        let args = FitArgs {
            inputs: SceneInputs {
                env: dir.join("env.exr"),
                mesh: bundle.join("mesh.obj"),
                cameras: dir.join("cameras.json"),
                images: None,
            },
            out: root.join(format!("fit_{k}")),
            config: config.clone(),
            spectrum_only: false,
            truth: Some(bundle.join("truth")),
        };
        let m = cmd_fit(&args)?;
        println!("fit {k}: {:?}", m.metrics);
        runs.push(args.out);
    }
    let merged = cmd_merge(&runs, &root.join("merged"))?;
    println!("merged: {:?}", merged.metrics);

    let again = cmd_rerun(&runs[0].join("manifest.json"), &root.join("rerun"))?;
    let first = shbrdf::manifest::RunManifest::load(&runs[0].join("manifest.json"))?;
    println!("rerun reproduces outputs: {}", again.outputs == first.outputs);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    match std::env::args().nth(1) {
        Some(dir) => run_example(Path::new(&dir)),
        None => run_example(tempfile::tempdir()?.path()),
    }
}
