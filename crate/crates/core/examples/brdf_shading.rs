//! The convolution BRDF at one surface point: principled parameters map to
//! a diffuse term, a Gaussian filter on the reflected light, Fresnel, and
//! Smith masking.
//!
//! ```bash
//! cargo run --release --example brdf_shading
//! ```

use shbrdf::brdf::{filter_kernel, reflected_light_fitter, render_outgoing, smith_g1, FresnelMode, PrincipledParams};
use shbrdf::brdf::ShadingContext;
use nalgebra::Vector3;
use shbrdf::scene::env::sample_incoming_at;
use shbrdf::scene::frame::Frame;
use shbrdf::scene::synth::EnvPreset;
use shbrdf::sh::{fibonacci_hemisphere, Direction};

pub fn run_example() -> anyhow::Result<()> {
    println!("filter e^-(alpha l)^2 at alpha = 0.25: {:.3?}", filter_kernel(0.25, 8));
    println!("Smith G1 at alpha = 0.5, theta = 60 deg: {:.4}", smith_g1(0.5, 60f64.to_radians()));

    // light arriving at an upward-facing point, in its local frame
    let env = EnvPreset::Sun { azimuth: 0.3, elevation: 0.7 }.build(64);
    let frame = Frame::from_normal(&Vector3::z());
    let dirs = fibonacci_hemisphere(324);
    let incoming = sample_incoming_at(&env, &frame, &dirs);
    let fitter = reflected_light_fitter(&dirs, 8, shbrdf::DEFAULT_LAMBDA)?;

    let out_dirs: Vec<Direction> = (0..6).map(|i| Direction::new(i as f64 * 0.25, 0.3)).collect();
    for m in [0.0, 1.0] {
        for r in [0.3, 0.7] {
            let p = PrincipledParams::new([0.8, 0.5, 0.2], m, r)?;
            let ctx = ShadingContext::new(&incoming, &fitter, Some(p.alpha()))?;
            let (ts, fresnel) = p.shading(FresnelMode::Schlick);
            let b = render_outgoing(&ctx, &ts, &fresnel, true, &out_dirs);
            let red: Vec<String> = b.chunks(3).map(|c| format!("{:.3}", c[0])).collect();
            println!("metallic {m} roughness {r}: red channel along theta = {}", red.join(" "));
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
