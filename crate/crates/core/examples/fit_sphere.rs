//! Render a textured sphere under a studio environment and recover its
//! parameter textures, first from the spectra alone and then with the
//! optimizer.
//!
//! ```bash
//! cargo run --release --example fit_sphere -- 64 100
//! cargo run --release --example fit_sphere -- 32 100 quadrature
//! ```

use std::time::Instant;

use shbrdf::pipeline::{fit_scene, PipelineConfig};
use shbrdf::scene::synth::{patch_materials, synth_generate, EnvPreset, RenderMode, SphereRig};
use shbrdf::scene::textures::parameter_mse;

pub fn run_example(resolution: usize, views: usize, quadrature: bool) -> anyhow::Result<()> {
    let rig = SphereRig {
        resolution,
        n_views: views,
        ..Default::default()
    };
    let geom = rig.geometry();
    let truth = patch_materials(&geom, 4, (0.3, 0.8), 7);
    let env = EnvPreset::Studio.build(128);
    let mode = if quadrature {
        RenderMode::Quadrature { samples: 24 }
    } else {
        RenderMode::convolution(8)
    };
    let clock = Instant::now();
    let cams = synth_generate(&geom, &env, &truth, rig.cameras(), mode)?;
    println!("rendered {views} views in {:.1}s", clock.elapsed().as_secs_f64());

    for spectrum_only in [true, false] {
        let cfg = PipelineConfig {
            spectrum_only,
            ..Default::default()
        };
        let out = fit_scene(&geom, &env, &cams, &cfg)?;
        let mse = parameter_mse(&out.params(), &truth).unwrap_or(f64::NAN);
        let stages: Vec<String> = out.timings.iter().map(|(s, t)| format!("{s} {t:.2}s")).collect();
        println!(
            "{}: MSE {mse:.4}, mean entropy {:.3} ({})",
            if spectrum_only { "spectrum only" } else { "optimized    " },
            out.mean_entropy(),
            stages.join(", ")
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let res = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(32);
    let views = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(100);
    run_example(res, views, args.get(3).map(String::as_str) == Some("quadrature"))
}
