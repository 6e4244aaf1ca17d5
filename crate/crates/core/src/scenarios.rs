//! Small self-contained experiments on synthetic spectra: a sparse
//! hemisphere fit with a masked region, and light/material cases with
//! contrasting posterior entropy.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::brdf::filter_kernel;
use crate::error::Result;
use crate::sh::{fibonacci_hemisphere, Direction, DirectionalSamples, PowerSpectrum, Regularizer, ShExpansion, SparseFitter};
use crate::spectrum::{grid_search, PosteriorGrid, SpectrumPair};

/// Incoming light with a decaying random spectrum, its filtered
/// reflection, and sparse weighted hemisphere samples of the latter.
#[derive(Debug, Clone)]
pub struct MaskedFit {
    pub incoming: ShExpansion,
    pub alpha: f64,
    pub samples: DirectionalSamples,
    pub fit_degree: usize,
}

pub const MASKED_FIT_SAMPLES: usize = 100;
pub const MASKED_FIT_HIDDEN: usize = 12;

/// Builds the scenario: degree-20 light with coefficient amplitude
/// `exp(-l / 2)`, filtered with `alpha = 0.2`, observed at 100 Fibonacci
/// hemisphere points minus the 12 closest to one direction, weighted by
/// `cos theta`.
pub fn masked_fit(seed: u64) -> MaskedFit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deg = 20;
    let mut incoming = ShExpansion::zeros(deg, 1);
    for (i, c) in incoming.channel_mut(0).iter_mut().enumerate() {
        let l = (i as f64).sqrt().floor();
        *c = rng.gen_range(-1.0..1.0) * (-0.5 * l).exp();
    }
    incoming.channel_mut(0)[0] += 4.0;
    let alpha = 0.2;
    let outgoing = incoming.scale_degrees(&filter_kernel(alpha, deg));
    let center = Direction::new(1.0, 0.4).to_vector();
    let mut dirs = fibonacci_hemisphere(MASKED_FIT_SAMPLES);
    dirs.sort_by(|a, b| {
        let (da, db) = (a.to_vector().dot(&center), b.to_vector().dot(&center));
        da.total_cmp(&db)
    });
    dirs.truncate(MASKED_FIT_SAMPLES - MASKED_FIT_HIDDEN);
    let values = dirs.iter().map(|d| outgoing.evaluate(d)[0]).collect();
    let weights = dirs.iter().map(|d| d.cos_theta().max(0.0)).collect();
    let samples = DirectionalSamples::new(dirs, 1, values, weights).expect("scenario samples are valid");
    MaskedFit {
        incoming,
        alpha,
        samples,
        fit_degree: crate::DEFAULT_MAX_DEGREE,
    }
}

impl MaskedFit {
    pub fn fit(&self, lambda: f64, reg: Regularizer) -> Result<ShExpansion> {
        Ok(SparseFitter::new(&self.samples, self.fit_degree, lambda, reg)?.fit(&self.samples))
    }

    /// Recovered `S_B / S_L` per degree against the incoming spectrum.
    pub fn spectrum_ratio(&self, fit: &ShExpansion) -> Vec<f64> {
        let sb = fit.power_spectrum(0);
        let sl = self.incoming.power_spectrum(0);
        (0..=self.fit_degree).map(|l| sb.values[l] / sl.values[l]).collect()
    }

    /// RMS over `l = 1..=L` of the log of recovered over ideal ratio.
    pub fn log_ratio_error(&self, fit: &ShExpansion) -> f64 {
        let r = self.spectrum_ratio(fit);
        let n = self.fit_degree;
        let s: f64 = (1..=n)
            .map(|l| {
                let ideal = -2.0 * (self.alpha * l as f64).powi(2);
                (r[l].max(1e-300).ln() - ideal).powi(2)
            })
            .sum();
        (s / n as f64).sqrt()
    }

    /// The spectrum pair seen by the grid search, with the fitted outgoing
    /// spectrum and the true incoming one.
    pub fn pair(&self, fit: &ShExpansion) -> Result<SpectrumPair> {
        let sl = self.incoming.power_spectrum(0).values[..=self.fit_degree].to_vec();
        SpectrumPair::new(
            vec![PowerSpectrum { values: sl }],
            vec![fit.power_spectrum(0)],
            vec![0.0],
            vec![0.0],
            vec![1.0],
        )
    }
}

/// One light/material case of the entropy comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCase {
    pub name: String,
    pub ks: f64,
    pub alpha: f64,
    pub s_l: Vec<f64>,
    pub s_b: Vec<f64>,
    pub entropy: f64,
}

/// Power of the lowest-`L` spectrum of a point light of total power `p`:
/// `p^2 (2l + 1) / (4 pi)`.
pub fn dirac_spectrum(p: f64, max_degree: usize) -> Vec<f64> {
    (0..=max_degree).map(|l| p * p * (2 * l + 1) as f64 / (4.0 * PI)).collect()
}

fn case(name: &str, s_l: Vec<f64>, ks: f64, alpha: f64) -> Result<(EntropyCase, PosteriorGrid)> {
    let s_b: Vec<f64> = s_l
        .iter()
        .enumerate()
        .map(|(l, v)| ks * ks * (-2.0 * (alpha * l as f64).powi(2)).exp() * v)
        .collect();
    let pair = SpectrumPair::new(
        vec![PowerSpectrum { values: s_l.clone() }],
        vec![PowerSpectrum { values: s_b.clone() }],
        vec![0.0],
        vec![0.0],
        vec![1.0],
    )?;
    let post = grid_search(&pair, 10, 10, crate::spectrum::DEFAULT_SIGMA)?;
    Ok((
        EntropyCase {
            name: name.to_owned(),
            ks,
            alpha,
            s_l,
            s_b,
            entropy: post.entropy,
        },
        post,
    ))
}

/// Three cases on a 10x10 grid with `sigma = 1e-2` and degree 8: a point
/// light of power 0.5 on a shiny material, the same light blurred with
/// `exp(-2 (0.25 l)^2)`, and the point light on a nearly diffuse material.
pub fn entropy_cases() -> Result<Vec<(EntropyCase, PosteriorGrid)>> {
    let deg = crate::DEFAULT_MAX_DEGREE;
    let dirac = dirac_spectrum(0.5, deg);
    let blurred: Vec<f64> = dirac
        .iter()
        .enumerate()
        .map(|(l, v)| v * (-2.0 * (0.25 * l as f64).powi(2)).exp())
        .collect();
    Ok(vec![
        case("dirac", dirac.clone(), 0.8, 0.25)?,
        case("low-frequency", blurred, 0.8, 0.25)?,
        case("low-specular", dirac, 0.05, 0.25)?,
    ])
}

/// One synthetic texel of [`texel_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepTexel {
    pub ks: f64,
    pub roughness: f64,
    pub blur: f64,
    pub ks_hat: f64,
    pub roughness_hat: f64,
    pub entropy: f64,
}

impl SweepTexel {
    /// Squared error of the grid estimate in `(Ks, r)`.
    pub fn squared_error(&self) -> f64 {
        (self.ks_hat - self.ks).powi(2) + (self.roughness_hat - self.roughness).powi(2)
    }
}

pub const SWEEP_SAMPLES: usize = 60;
pub const SWEEP_NOISE: f64 = 0.02;

/// Texels with random material and random light bandwidth, each observed
/// through a noisy sparse hemisphere fit and scored by the grid search.
///
/// Per texel: `Ks ~ U(0.05, 1)`, `r ~ U(0.1, 1)`, a degree-8 light with
/// coefficient amplitude `exp(-(beta l)^2)` for `beta ~ U(0, 0.6)`, 60
/// Fibonacci hemisphere samples of `Ks * filtered light` with Gaussian
/// noise of standard deviation 0.02, and a lambda-regularized fit.
pub fn texel_sweep(n: usize, seed: u64) -> Result<Vec<SweepTexel>> {
    use rand_distr::StandardNormal;

    let deg = crate::DEFAULT_MAX_DEGREE;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs = fibonacci_hemisphere(SWEEP_SAMPLES);
    let weights: Vec<f64> = dirs.iter().map(|d| d.cos_theta().max(0.0)).collect();
    let template = DirectionalSamples::new(dirs.clone(), 1, vec![0.0; dirs.len()], weights)?;
    let fitter = SparseFitter::new(&template, deg, crate::DEFAULT_LAMBDA, Regularizer::ExpDegree)?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let ks = rng.gen_range(0.05..1.0);
        let roughness: f64 = rng.gen_range(0.1..1.0);
        let blur = rng.gen_range(0.0..0.6);
        let mut light = ShExpansion::zeros(deg, 1);
        for (i, c) in light.channel_mut(0).iter_mut().enumerate() {
            let l = (i as f64).sqrt().floor();
            *c = rng.gen_range(-1.0..1.0) * (-(blur * l).powi(2)).exp();
        }
        light.channel_mut(0)[0] += 2.0;
        let kernel: Vec<f64> = filter_kernel(roughness * roughness, deg).iter().map(|k| ks * k).collect();
        let outgoing = light.scale_degrees(&kernel);
        let values: Vec<f64> = dirs
            .iter()
            .map(|d| outgoing.evaluate(d)[0] + SWEEP_NOISE * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let fit = fitter.fit_scalar(&values);
        let pair = SpectrumPair::new(
            vec![light.power_spectrum(0)],
            vec![fit.power_spectrum(0)],
            vec![0.0],
            vec![0.0],
            vec![1.0],
        )?;
        let post = grid_search(&pair, 10, 10, crate::spectrum::DEFAULT_SIGMA)?;
        let (ks_hat, alpha_hat) = post.map_estimate();
        out.push(SweepTexel {
            ks,
            roughness,
            blur,
            ks_hat,
            roughness_hat: alpha_hat.sqrt(),
            entropy: post.entropy,
        });
    }
    Ok(out)
}
