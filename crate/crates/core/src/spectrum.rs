//! Power-spectrum objective, posterior grid over `(Ks, alpha)`, normalized
//! entropy and diffuse recovery.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sh::{PowerSpectrum, ShExpansion};

/// Default noise scale of the likelihood.
pub const DEFAULT_SIGMA: f64 = 1e-2;

/// Irradiance at or below this is treated as unlit.
pub const IRRADIANCE_EPS: f64 = 1e-9;

/// Spectra of incoming and outgoing light at one surface point together
/// with the degree-zero terms needed to recover the diffuse albedo.
///
/// `b00` and `l00` are degree-zero coefficients of the radiance restricted
/// to the upper hemisphere, so that `b00 = Kd E / sqrt(pi) + Ks l00`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPair {
    pub s_l: Vec<PowerSpectrum>,
    pub s_b: Vec<PowerSpectrum>,
    pub b00: Vec<f64>,
    pub l00: Vec<f64>,
    pub irradiance: Vec<f64>,
}

impl SpectrumPair {
    pub fn new(
        s_l: Vec<PowerSpectrum>,
        s_b: Vec<PowerSpectrum>,
        b00: Vec<f64>,
        l00: Vec<f64>,
        irradiance: Vec<f64>,
    ) -> Result<Self> {
        if s_l.is_empty() || s_l.len() != s_b.len() {
            return Err(Error::invalid("spectra need matching, non-zero channel counts"));
        }
        let deg = s_l[0].max_degree();
        if s_l.iter().chain(&s_b).any(|s| s.max_degree() != deg) {
            return Err(Error::invalid("spectra have different max degrees"));
        }
        if s_l.iter().chain(&s_b).flat_map(|s| &s.values).any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("power spectra must be >= 0"));
        }
        if b00.len() != l00.len() || b00.len() != irradiance.len() {
            return Err(Error::invalid("degree-zero terms disagree in channel count"));
        }
        Ok(SpectrumPair {
            s_l,
            s_b,
            b00,
            l00,
            irradiance,
        })
    }

    /// Builds the pair from fitted RGB (or single-channel) expansions. The
    /// grid search runs on luminance spectra; degree-zero terms stay per
    /// channel.
    pub fn from_expansions(b: &ShExpansion, l: &ShExpansion, irradiance: Vec<f64>) -> Result<Self> {
        if b.max_degree() != l.max_degree() || b.channels() != l.channels() {
            return Err(Error::invalid("outgoing and incoming fits differ in shape"));
        }
        let b00 = (0..b.channels()).map(|c| b.upper_hemisphere_dc(c)).collect();
        let l00 = (0..l.channels()).map(|c| l.upper_hemisphere_dc(c)).collect();
        SpectrumPair::new(
            vec![l.luminance().power_spectrum(0)],
            vec![b.luminance().power_spectrum(0)],
            b00,
            l00,
            irradiance,
        )
    }

    pub fn max_degree(&self) -> usize {
        self.s_l[0].max_degree()
    }
}

/// `D = sum_{l>=1} (S_B(l) - Ks^2 exp(-2 (alpha l)^2) S_L(l))^2`, summed
/// over channels.
pub fn objective(s: &SpectrumPair, ks: f64, alpha: f64) -> f64 {
    s.s_l
        .iter()
        .zip(&s.s_b)
        .map(|(sl, sb)| {
            (1..sl.values.len())
                .map(|l| {
                    let x = alpha * l as f64;
                    let r = sb.values[l] - ks * ks * (-2.0 * x * x).exp() * sl.values[l];
                    r * r
                })
                .sum::<f64>()
        })
        .sum()
}

/// `Ks` values of a grid: evenly spaced over `[0, 1]`.
pub fn ks_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Roughness values of a grid: `r_j = (j + 1) / n`. The grid is linear in
/// roughness, so `alpha_j = r_j^2`.
pub fn roughness_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| (j + 1) as f64 / n as f64).collect()
}

/// Discretized posterior over `(Ks, alpha)`. Matrices are row-major with
/// one row per `Ks` value.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid {
    pub ks_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
    pub nll: Vec<f64>,
    pub probs: Vec<f64>,
    pub entropy: f64,
    pub sigma: f64,
}

impl PosteriorGrid {
    pub fn n_cells(&self) -> usize {
        self.nll.len()
    }

    /// `(ks index, alpha index)` of the most probable cell; ties go to the
    /// first cell in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        let na = self.alpha_values.len();
        (best / na, best % na)
    }

    pub fn map_estimate(&self) -> (f64, f64) {
        let (i, j) = self.argmax();
        (self.ks_values[i], self.alpha_values[j])
    }

    pub fn prob(&self, ks_index: usize, alpha_index: usize) -> f64 {
        self.probs[ks_index * self.alpha_values.len() + alpha_index]
    }
}

const PARALLEL_CELLS: usize = 4096;

/// Evaluates the objective on the grid and normalizes
/// `exp(-D / (2 sigma^2))` into a posterior.
pub fn grid_search(s: &SpectrumPair, n_ks: usize, n_alpha: usize, sigma: f64) -> Result<PosteriorGrid> {
    if n_ks < 2 || n_alpha < 2 {
        return Err(Error::invalid("grid needs at least 2 values per axis"));
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
    }
    let ks_values = ks_grid(n_ks);
    let alpha_values: Vec<f64> = roughness_grid(n_alpha).iter().map(|r| r * r).collect();

    // D(ks, a) = sum_b sb^2 - 2 ks^2 sum_b sb g_a + ks^4 sum_b g_a^2, with
    // g_a(l) = exp(-2 (a l)^2) S_L(l).
    let sbb: f64 = s.s_b.iter().flat_map(|sb| sb.values.iter().skip(1)).map(|v| v * v).sum();
    let moments: Vec<(f64, f64)> = alpha_values
        .iter()
        .map(|&a| {
            let mut cross = 0.0;
            let mut gg = 0.0;
            for (sl, sb) in s.s_l.iter().zip(&s.s_b) {
                for l in 1..sl.values.len() {
                    let x = a * l as f64;
                    let g = (-2.0 * x * x).exp() * sl.values[l];
                    cross += sb.values[l] * g;
                    gg += g * g;
                }
            }
            (cross, gg)
        })
        .collect();
    let inv = 1.0 / (2.0 * sigma * sigma);
    let cell = |idx: usize| {
        let ks = ks_values[idx / n_alpha];
        let (cross, gg) = moments[idx % n_alpha];
        let k2 = ks * ks;
        (sbb - 2.0 * k2 * cross + k2 * k2 * gg).max(0.0) * inv
    };
    let n = n_ks * n_alpha;
    let nll: Vec<f64> = if n >= PARALLEL_CELLS {
        (0..n).into_par_iter().map(cell).collect()
    } else {
        (0..n).map(cell).collect()
    };
    let probs = normalize_neg_log(&nll);
    let entropy = entropy(&probs, n);
    Ok(PosteriorGrid {
        ks_values,
        alpha_values,
        nll,
        probs,
        entropy,
        sigma,
    })
}

/// `p_i = exp(-x_i) / sum_j exp(-x_j)`, computed relative to the minimum.
pub fn normalize_neg_log(nll: &[f64]) -> Vec<f64> {
    let min = nll.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = nll.iter().map(|x| (min - x).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Shannon entropy divided by `log n`, with `0 log 0 = 0`.
pub fn entropy(probs: &[f64], n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let h: f64 = probs
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| -p * p.ln())
        .fold(0.0, |a, b| a + b);
    (h / (n as f64).ln()).clamp(0.0, 1.0)
}

/// `Kd = (B00 - Ks L00) sqrt(pi) / E` per channel, clamped to `[0, 1]`.
pub fn recover_diffuse(s: &SpectrumPair, ks: f64) -> Result<Vec<f64>> {
    s.irradiance
        .iter()
        .enumerate()
        .map(|(c, &e)| {
            if !(e > IRRADIANCE_EPS) {
                return Err(Error::DegenerateIrradiance(e));
            }
            Ok(((s.b00[c] - ks * s.l00[c]) * PI.sqrt() / e).clamp(0.0, 1.0))
        })
        .collect()
}

/// Index of the lowest entropy; ties go to the earliest candidate.
pub fn argmin_entropy(entropies: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, h) in entropies.iter().enumerate() {
        match best {
            Some(b) if entropies[b] <= *h => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Picks the candidate with the lowest entropy.
///
/// # Panics
///
/// If `candidates` is empty.
pub fn merge_by_entropy<T: Clone>(candidates: &[(T, f64)]) -> T {
    let hs: Vec<f64> = candidates.iter().map(|c| c.1).collect();
    let i = argmin_entropy(&hs).expect("merge_by_entropy needs at least one candidate");
    candidates[i].0.clone()
}
