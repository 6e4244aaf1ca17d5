//! How error and entropy fall as more views are added.
//!
//! ```bash
//! cargo run --release --example view_sweep
//! ```

use shbrdf::optimizer::alpha_lower_bound;
use shbrdf::pipeline::{fit_scene, PipelineConfig};
use shbrdf::scene::synth::{patch_materials, synth_generate, EnvPreset, RenderMode, SphereRig};
use shbrdf::scene::textures::parameter_mse;

pub fn run_example() -> anyhow::Result<()> {
    let rig = SphereRig {
        resolution: 32,
        ..Default::default()
    };
    let geom = rig.geometry();
    let truth = patch_materials(&geom, 4, (0.3, 0.8), 7);
    let env = EnvPreset::four_suns()[0].build(128);
    println!("views   alpha'   valid   mean H   MSE");
    for n in [10, 25, 50, 100] {
        let cams = synth_generate(&geom, &env, &truth, SphereRig { n_views: n, ..rig }.cameras(), RenderMode::convolution(8))?;
        let out = fit_scene(&geom, &env, &cams, &PipelineConfig::default())?;
        println!(
            "{n:>5}   {:.3}    {:>5}   {:.3}    {:.4}",
            alpha_lower_bound(n, 0.5),
            out.records.iter().filter(|r| r.valid).count(),
            out.mean_entropy(),
            parameter_mse(&out.params(), &truth).unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
