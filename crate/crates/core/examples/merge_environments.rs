//! Fit the same sphere under four sun positions and merge the results per
//! texel, keeping the parameters of the lowest-entropy fit.
//!
//! ```bash
//! cargo run --release --example merge_environments -- 400
//! ```

use shbrdf::pipeline::{entropy_error_pairs, fit_scene, pearson, PipelineConfig};
use shbrdf::scene::synth::{add_noise, patch_materials, synth_generate, EnvPreset, RenderMode, SphereRig};
use shbrdf::scene::textures::{merge_texture_sets, parameter_mse};

pub fn run_example(iterations: usize) -> anyhow::Result<()> {
    let rig = SphereRig {
        resolution: 32,
        ..Default::default()
    };
    let geom = rig.geometry();
    let truth = patch_materials(&geom, 4, (0.3, 0.8), 7);
    let mut cfg = PipelineConfig::default();
    cfg.optimizer.iterations = iterations;
    let (mut sets, mut hs, mut es) = (Vec::new(), Vec::new(), Vec::new());
    for (k, preset) in EnvPreset::four_suns().iter().enumerate() {
        let env = preset.build(128);
        let mut cams = synth_generate(&geom, &env, &truth, rig.cameras(), RenderMode::convolution(8))?;
        add_noise(&mut cams, 0.03, 3e-4, 3 + k as u64);
        let out = fit_scene(&geom, &env, &cams, &cfg)?;
        let (h, e) = entropy_error_pairs(&out, &truth);
        println!(
            "{preset:?}: MSE {:.4}, mean entropy {:.3}, rho {:.3}",
            parameter_mse(&out.params(), &truth).unwrap_or(f64::NAN),
            out.mean_entropy(),
            pearson(&h, &e).unwrap_or(f64::NAN)
        );
        hs.extend(h);
        es.extend(e);
        sets.push(out.textures(rig.resolution)?);
    }
    let merged = merge_texture_sets(&sets)?;
    println!("pooled rho {:.3}", pearson(&hs, &es).unwrap_or(f64::NAN));
    println!("merged MSE {:.4}", parameter_mse(&merged.to_params(), &truth).unwrap_or(f64::NAN));
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    let iterations = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(400);
    run_example(iterations)
}
