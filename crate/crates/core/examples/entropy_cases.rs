//! Posterior entropy for three light/material pairs: a point light on a
//! shiny surface, the same light blurred, and a nearly diffuse surface.
//!
//! ```bash
//! cargo run --release --example entropy_cases
//! ```

use shbrdf::scenarios::entropy_cases;

pub fn run_example() -> anyhow::Result<()> {
    for (case, post) in entropy_cases()? {
        let (ks, alpha) = post.map_estimate();
        println!(
            "{:<14} Ks {:.2} alpha {:.3}: H = {:.3}, MAP Ks {ks:.2} roughness {:.2}",
            case.name,
            case.ks,
            case.alpha,
            case.entropy,
            alpha.sqrt()
        );
        // marginal over roughness, one row per Ks cell
        let marginal: Vec<String> = (0..post.ks_values.len())
            .map(|i| {
                let p: f64 = (0..post.alpha_values.len()).map(|j| post.prob(i, j)).sum();
                format!("{p:.2}")
            })
            .collect();
        println!("{:<14} P(Ks) = [{}]", "", marginal.join(" "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
