//! Entropy as an error predictor on synthetic texels: random materials
//! under lights of random bandwidth, observed through a noisy sparse fit.
//!
//! ```bash
//! cargo run --release --example texel_sweep -- 2000
//! ```

use shbrdf::pipeline::pearson;
use shbrdf::scenarios::texel_sweep;

pub fn run_example(n: usize) -> anyhow::Result<()> {
    let mut texels = texel_sweep(n, 1)?;
    let h: Vec<f64> = texels.iter().map(|t| t.entropy).collect();
    let e: Vec<f64> = texels.iter().map(|t| t.squared_error()).collect();
    println!("{n} texels, Pearson(entropy, squared error) = {:.3}", pearson(&h, &e).unwrap_or(f64::NAN));
    texels.sort_by(|a, b| a.entropy.total_cmp(&b.entropy));
    println!("entropy quintile   mean H   mean error   mean blur   mean Ks");
    for (q, chunk) in texels.chunks(n.div_ceil(5)).enumerate() {
        let mean = |f: &dyn Fn(&shbrdf::scenarios::SweepTexel) -> f64| chunk.iter().map(f).sum::<f64>() / chunk.len() as f64;
        println!(
            "{q:>16}   {:.3}    {:.4}       {:.3}       {:.3}",
            mean(&|t| t.entropy),
            mean(&|t| t.squared_error()),
            mean(&|t| t.blur),
            mean(&|t| t.ks)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    let n = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1000);
    run_example(n)
}
