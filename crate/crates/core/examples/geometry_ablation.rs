//! Parameter error with and without the shadowing and masking terms on
//! data rendered by hemisphere quadrature.
//!
//! ```bash
//! cargo run --release --example geometry_ablation -- 200
//! ```

use shbrdf::brdf::GeometryTerms;
use shbrdf::pipeline::{fit_scene, PipelineConfig};
use shbrdf::scene::synth::{patch_materials, synth_generate, EnvPreset, RenderMode, SphereRig};
use shbrdf::scene::textures::parameter_mse;

pub fn run_example(iterations: usize) -> anyhow::Result<()> {
    let rig = SphereRig {
        resolution: 32,
        ..Default::default()
    };
    let geom = rig.geometry();
    let truth = patch_materials(&geom, 4, (0.3, 0.8), 7);
    let env = EnvPreset::four_suns()[2].build(128);
    let cams = synth_generate(&geom, &env, &truth, rig.cameras(), RenderMode::Quadrature { samples: 24 })?;
    for (shadowing, masking) in [(false, false), (true, false), (false, true), (true, true)] {
        let mut cfg = PipelineConfig::default();
        cfg.optimizer.iterations = iterations;
        cfg.optimizer.geometry = GeometryTerms { shadowing, masking };
        let out = fit_scene(&geom, &env, &cams, &cfg)?;
        println!(
            "shadowing {shadowing:<5} masking {masking:<5} MSE {:.4}",
            parameter_mse(&out.params(), &truth).unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    let iterations = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(200);
    run_example(iterations)
}
