//! Real spherical harmonics: evaluate an expansion, recover it from dense
//! samples, and fit a sparse hemisphere with the degree-weighted penalty.
//!
//! ```bash
//! cargo run --release --example sh_basics
//! ```

use shbrdf::sh::{fibonacci_hemisphere, fibonacci_sphere, fit_dense, num_coeffs, Direction, DirectionalSamples};
use shbrdf::sh::{Regularizer, ShExpansion, SparseFitter};

pub fn run_example() -> anyhow::Result<()> {
    // a smooth positive function up to degree 4
    let degree = 4;
    let coeffs: Vec<f64> = (0..num_coeffs(degree))
        .map(|i| if i == 0 { 3.0 } else { 0.4 / (1.0 + i as f64) })
        .collect();
    let truth = ShExpansion::from_coeffs(degree, 1, coeffs)?;
    let zenith = Direction::new(0.0, 0.0);
    println!("f(zenith) = {:.4}", truth.evaluate(&zenith)[0]);

    let dirs = fibonacci_sphere(64);
    let values = dirs.iter().map(|d| truth.evaluate(d)[0]).collect();
    let dense = fit_dense(&DirectionalSamples::unweighted(dirs, 1, values)?, degree)?;
    let err = dense
        .coeffs()
        .iter()
        .zip(truth.coeffs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("dense fit from 64 points: max coefficient error {err:.2e}");

    // only the upper hemisphere is observed; ask for degree 8 anyway
    let hemi = fibonacci_hemisphere(50);
    let values = hemi.iter().map(|d| truth.evaluate(d)[0]).collect();
    let weights = hemi.iter().map(Direction::cos_theta).collect();
    let samples = DirectionalSamples::new(hemi, 1, values, weights)?;
    let fit = SparseFitter::new(&samples, 8, shbrdf::DEFAULT_LAMBDA, Regularizer::ExpDegree)?.fit(&samples);
    let (st, sf) = (truth.power_spectrum(0), fit.power_spectrum(0));
    println!(" l   true power   fitted power");
    for l in 0..=8 {
        let t = st.values.get(l).copied().unwrap_or(0.0);
        println!("{l:>2}   {t:>10.5}   {:>12.5}", sf.values[l]);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
