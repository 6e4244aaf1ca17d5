//! Per-texel parameter recovery: spectrum-grid initialization and joint
//! gradient descent on the mixed frequency/directional model with a
//! total-variation prior.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::brdf::{
    degree_partials, schlick_weight, shadow_attenuate, smith_g1, smith_g1_dalpha, FresnelMode, GeometryTerms,
    PrincipledParams, ShadingContext, MIN_ROUGHNESS,
};
use crate::error::{Error, Result};
use crate::sh::{eval_basis_into, num_coeffs, DirectionalSamples, ShExpansion, SparseFitter};
use crate::spectrum::{grid_search, recover_diffuse, SpectrumPair, DEFAULT_SIGMA};

/// Confidence of an observation at angle `theta` from the normal:
/// `max(0, 1 - (1 - cos(a theta))^b)`, zero past `a pi / 2`.
pub fn sample_weight(theta: f64, a: f64, b: f64) -> f64 {
    if a * theta >= PI / 2.0 {
        return 0.0;
    }
    (1.0 - (1.0 - (a * theta).cos()).powf(b)).clamp(0.0, 1.0)
}

/// Smallest recoverable `alpha` for `n_views` views at attenuation
/// threshold `t`: `sqrt(-ln t) / floor(sqrt(n_views))`.
pub fn alpha_lower_bound(n_views: usize, t: f64) -> f64 {
    assert!(t > 0.0 && t < 1.0, "threshold must lie in (0, 1)");
    let l_star = (n_views.max(1) as f64).sqrt().floor();
    (-t.ln()).sqrt() / l_star
}

/// Views needed to resolve `alpha`, following `N ~ alpha^-2`.
pub fn views_for_alpha(alpha: f64) -> usize {
    (1.0 / (alpha * alpha)).ceil() as usize
}

/// Low-pass filter matching the angular resolution of `n_views` views,
/// `exp(-(alpha' l)^2)` with `alpha' = n_views^-1/2`.
pub fn bandlimit_prefilter(env: &ShExpansion, n_views: usize) -> ShExpansion {
    let a = 1.0 / (n_views.max(1) as f64).sqrt();
    env.scale_degrees(&crate::brdf::filter_kernel(a, env.max_degree()))
}

/// Grid used for the posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub n_ks: usize,
    pub n_alpha: usize,
    pub sigma: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_ks: 10,
            n_alpha: 10,
            sigma: DEFAULT_SIGMA,
        }
    }
}

/// Parameters and entropy from the posterior's most probable cell.
pub fn init_from_spectrum(pair: &SpectrumPair, grid: &GridConfig) -> Result<(PrincipledParams, f64)> {
    let post = grid_search(pair, grid.n_ks, grid.n_alpha, grid.sigma)?;
    let (ks, alpha) = post.map_estimate();
    let kd = recover_diffuse(pair, ks)?;
    let base_color = match kd.as_slice() {
        [r, g, b] => [*r, *g, *b],
        _ => [kd[0]; 3],
    };
    let max_rb = base_color.iter().copied().fold(0.0, f64::max);
    let metallic = if max_rb <= 0.04 {
        0.0
    } else {
        ((ks - 0.04) / (max_rb - 0.04)).clamp(0.0, 1.0)
    };
    let params = PrincipledParams {
        base_color,
        metallic,
        roughness: alpha.sqrt().clamp(0.0, 1.0),
    };
    Ok((params, post.entropy))
}

/// [`init_from_spectrum`] falling back to the prior (entropy 1, invalid)
/// when there is nothing to fit or the texel is unlit.
pub fn init_or_prior(pair: Option<&SpectrumPair>, grid: &GridConfig) -> (PrincipledParams, f64, bool) {
    match pair.map(|p| init_from_spectrum(p, grid)) {
        Some(Ok((p, h))) => (p, h, true),
        _ => (PrincipledParams::PRIOR, 1.0, false),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub iterations: usize,
    pub step: f64,
    /// Refit the shadowed light every this many iterations.
    pub shadow_refresh: usize,
    pub tv_weight: f64,
    /// `(a, b)` of [`sample_weight`].
    pub weighting: (f64, f64),
    pub geometry: GeometryTerms,
    pub fresnel: FresnelMode,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            iterations: 100,
            step: 1e-2,
            shadow_refresh: 10,
            tv_weight: 1e-3,
            weighting: (1.0, 1.0),
            geometry: GeometryTerms::BOTH,
            fresnel: FresnelMode::Schlick,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.shadow_refresh == 0 {
            return Err(Error::invalid("iterations and shadow refresh interval must be >= 1"));
        }
        if !(self.tv_weight >= 0.0) || !(self.step > 0.0) {
            return Err(Error::invalid("tv_weight must be >= 0 and step > 0"));
        }
        Ok(())
    }
}

/// Everything known about one texel.
#[derive(Debug, Clone)]
pub struct TexelRecord {
    pub uv: [f64; 2],
    /// Observed outgoing radiance in the local frame.
    pub samples: DirectionalSamples,
    pub light: Option<ShadingContext>,
    pub params: PrincipledParams,
    pub entropy: f64,
    pub valid: bool,
}

impl TexelRecord {
    pub fn invalid(uv: [f64; 2]) -> Self {
        TexelRecord {
            uv,
            samples: DirectionalSamples::empty(3),
            light: None,
            params: PrincipledParams::PRIOR,
            entropy: 1.0,
            valid: false,
        }
    }
}

/// Supplies the local-frame incoming light of a texel for shadow refits.
pub trait IncomingLight: Sync {
    fn incoming(&self, texel: usize) -> DirectionalSamples;
}

impl<F: Fn(usize) -> DirectionalSamples + Sync> IncomingLight for F {
    fn incoming(&self, texel: usize) -> DirectionalSamples {
        self(texel)
    }
}

const L1_EPS: f64 = 1e-6;

#[inline]
fn smooth_abs(x: f64) -> (f64, f64) {
    let s = (x * x + L1_EPS * L1_EPS).sqrt();
    (s, x / s)
}

/// Observation data of one texel prepared for fast evaluation.
#[derive(Debug, Clone)]
struct TexelData {
    irradiance: [f64; 3],
    theta: Vec<f64>,
    schlick: Vec<f64>,
    weights: Vec<f64>,
    /// Observed radiance, 3 per observation.
    target: Vec<f64>,
    /// Degree partial sums of the shadowed light, `3 * (L + 1)` per
    /// observation.
    partials: Vec<f64>,
    norm: f64,
}

/// The joint loss over all texels of a square texture.
pub struct Problem<'a> {
    resolution: usize,
    max_degree: usize,
    cfg: OptimizerConfig,
    valid: Vec<bool>,
    data: Vec<Option<TexelData>>,
    records: &'a [TexelRecord],
}

fn texel_data(rec: &TexelRecord, ctx: &ShadingContext) -> TexelData {
    let n = rec.samples.len();
    let l = ctx.max_degree();
    let e = ctx.irradiance();
    let mut partials = Vec::with_capacity(n * 3 * (l + 1));
    let mut basis = vec![0.0; num_coeffs(l)];
    for d in rec.samples.directions() {
        eval_basis_into(d, l, &mut basis);
        partials.extend(degree_partials(ctx.shadowed(), &basis));
    }
    let wsum: f64 = rec.samples.weights().iter().sum();
    TexelData {
        irradiance: [e[0], e[1.min(e.len() - 1)], e[2.min(e.len() - 1)]],
        theta: rec.samples.directions().iter().map(|d| d.theta).collect(),
        schlick: rec.samples.directions().iter().map(|d| schlick_weight(d.theta)).collect(),
        weights: rec.samples.weights().to_vec(),
        target: rec.samples.values().to_vec(),
        partials,
        norm: if wsum > 0.0 { 1.0 / wsum } else { 0.0 },
    }
}

impl<'a> Problem<'a> {
    /// Prepares the loss. Records must be laid out row-major over a
    /// `resolution x resolution` texture.
    pub fn new(records: &'a [TexelRecord], resolution: usize, cfg: OptimizerConfig) -> Result<Self> {
        cfg.validate()?;
        if records.len() != resolution * resolution {
            return Err(Error::invalid(format!(
                "{} records for a {resolution}x{resolution} texture",
                records.len()
            )));
        }
        let valid: Vec<bool> = records.iter().map(|r| r.valid && r.light.is_some()).collect();
        let max_degree = records
            .iter()
            .find_map(|r| r.light.as_ref().map(|l| l.max_degree()))
            .unwrap_or(0);
        let data = records
            .par_iter()
            .zip(&valid)
            .map(|(r, v)| v.then(|| texel_data(r, r.light.as_ref().unwrap())))
            .collect();
        Ok(Problem {
            resolution,
            max_degree,
            cfg,
            valid,
            data,
            records,
        })
    }

    pub fn n_valid(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Refits every shadowed expansion at each texel's current `alpha`.
    pub fn refresh_shadow(&mut self, params: &[[f64; 5]], light: &dyn IncomingLight, fitter: &SparseFitter) {
        if !self.cfg.geometry.shadowing {
            return;
        }
        let records = self.records;
        let new: Vec<Option<TexelData>> = (0..records.len())
            .into_par_iter()
            .map(|i| {
                let d = self.data[i].as_ref()?;
                let alpha = PrincipledParams::from_array(params[i]).alpha();
                let inc = shadow_attenuate(&light.incoming(i), alpha);
                let shadowed = fitter.fit(&inc);
                let mut basis = vec![0.0; num_coeffs(self.max_degree)];
                let mut partials = Vec::with_capacity(d.partials.len());
                for dir in records[i].samples.directions() {
                    eval_basis_into(dir, self.max_degree, &mut basis);
                    partials.extend(degree_partials(&shadowed, &basis));
                }
                Some(TexelData {
                    partials,
                    ..d.clone()
                })
            })
            .collect();
        self.data = new;
    }

    /// Data term of one texel and its gradient.
    fn texel_loss(&self, d: &TexelData, p: &[f64; 5], grad: Option<&mut [f64; 5]>) -> f64 {
        let nl = self.max_degree + 1;
        let [rb0, rb1, rb2, m, r] = *p;
        let rb = [rb0, rb1, rb2];
        let r_eff = r.max(MIN_ROUGHNESS);
        let alpha = r_eff * r_eff;
        let dalpha_dr = if r > MIN_ROUGHNESS { 2.0 * r } else { 0.0 };
        let filt: Vec<f64> = (0..nl).map(|l| (-(alpha * l as f64).powi(2)).exp()).collect();
        let dfilt: Vec<f64> = (0..nl)
            .map(|l| -2.0 * alpha * (l * l) as f64 * filt[l])
            .collect();
        let schlick = self.cfg.fresnel == FresnelMode::Schlick;
        let masking = self.cfg.geometry.masking;
        let mut loss = 0.0;
        let mut g = [0.0; 5];
        for k in 0..d.theta.len() {
            let w = d.weights[k];
            if w == 0.0 {
                continue;
            }
            let (gm, dgm) = if masking {
                (smith_g1(alpha, d.theta[k]), smith_g1_dalpha(alpha, d.theta[k]))
            } else {
                (1.0, 0.0)
            };
            let t = if schlick { d.schlick[k] } else { 0.0 };
            for c in 0..3 {
                let q = &d.partials[(k * 3 + c) * nl..(k * 3 + c + 1) * nl];
                let spec: f64 = q.iter().zip(&filt).map(|(a, b)| a * b).sum();
                let dspec: f64 = q.iter().zip(&dfilt).map(|(a, b)| a * b).sum();
                let r0 = 0.04 + (rb[c] - 0.04) * m;
                let f = r0 + (1.0 - r0) * t;
                let df_dr0 = 1.0 - t;
                let diffuse = rb[c] * d.irradiance[c] / PI;
                let b = diffuse + f * gm * spec;
                if b <= 0.0 {
                    let (v, _) = smooth_abs(d.target[3 * k + c]);
                    loss += w * v;
                    continue;
                }
                let (v, dv) = smooth_abs(b - d.target[3 * k + c]);
                loss += w * v;
                let s = w * dv;
                g[c] += s * (d.irradiance[c] / PI + df_dr0 * m * gm * spec);
                g[3] += s * df_dr0 * (rb[c] - 0.04) * gm * spec;
                g[4] += s * f * (dgm * spec + gm * dspec) * dalpha_dr;
            }
        }
        if let Some(out) = grad {
            for (o, v) in out.iter_mut().zip(g) {
                *o = v * d.norm;
            }
        }
        loss * d.norm
    }

    /// Total loss and, if requested, its gradient per texel.
    pub fn evaluate(&self, params: &[[f64; 5]], want_grad: bool) -> (f64, Vec<[f64; 5]>) {
        let nv = self.n_valid().max(1) as f64;
        let per_texel: Vec<(f64, [f64; 5])> = self
            .data
            .par_iter()
            .enumerate()
            .map(|(i, d)| match d {
                Some(d) => {
                    let mut g = [0.0; 5];
                    let l = self.texel_loss(d, &params[i], want_grad.then_some(&mut g));
                    (l, g)
                }
                None => (0.0, [0.0; 5]),
            })
            .collect();
        let mut loss = 0.0;
        let mut grad: Vec<[f64; 5]> = Vec::with_capacity(params.len());
        for (l, g) in per_texel {
            loss += l;
            grad.push(g.map(|x| x / nv));
        }
        loss /= nv;
        if self.cfg.tv_weight > 0.0 {
            let (tv, tv_grad) = self.total_variation(params, want_grad);
            loss += self.cfg.tv_weight * tv / nv;
            if want_grad {
                for (g, t) in grad.iter_mut().zip(tv_grad) {
                    for k in 0..5 {
                        g[k] += self.cfg.tv_weight * t[k] / nv;
                    }
                }
            }
        }
        (loss, grad)
    }

    /// Smoothed anisotropic TV over 4-neighbourhoods of valid texels.
    fn total_variation(&self, params: &[[f64; 5]], want_grad: bool) -> (f64, Vec<[f64; 5]>) {
        let n = self.resolution;
        let rows: Vec<(f64, Vec<[f64; 5]>)> = (0..n)
            .into_par_iter()
            .map(|y| {
                let mut tv = 0.0;
                // gradient contributions to this row and to the row below
                let mut here = vec![[0.0; 5]; n];
                let mut below = vec![[0.0; 5]; n];
                for x in 0..n {
                    let i = y * n + x;
                    if !self.valid[i] {
                        continue;
                    }
                    let mut pair = |j: usize, into_below: bool, xj: usize| {
                        if !self.valid[j] {
                            return;
                        }
                        for k in 0..5 {
                            let (v, dv) = smooth_abs(params[i][k] - params[j][k]);
                            tv += v;
                            if want_grad {
                                here[x][k] += dv;
                                if into_below {
                                    below[xj][k] -= dv;
                                } else {
                                    here[xj][k] -= dv;
                                }
                            }
                        }
                    };
                    if x + 1 < n {
                        pair(i + 1, false, x + 1);
                    }
                    if y + 1 < n {
                        pair(i + n, true, x);
                    }
                }
                let mut out = here;
                out.extend(below);
                (tv, out)
            })
            .collect();
        let mut tv = 0.0;
        let mut grad = vec![[0.0; 5]; n * n];
        for (y, (t, g)) in rows.into_iter().enumerate() {
            tv += t;
            if want_grad {
                for x in 0..n {
                    for k in 0..5 {
                        grad[y * n + x][k] += g[x][k];
                        if y + 1 < n {
                            grad[(y + 1) * n + x][k] += g[n + x][k];
                        }
                    }
                }
            }
        }
        (tv, grad)
    }
}

/// Loss trace of an optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub history: Vec<f64>,
    pub iterations: usize,
}

const ADAM_B1: f64 = 0.9;
const ADAM_B2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Jointly refines the parameters of all valid records in place.
///
/// `light` supplies each texel's incoming samples on the directions
/// `fitter` was built from. The shadowed light is refit every
/// `shadow_refresh` iterations at the current roughness. Uses projected
/// Adam with a cosine-annealed step and keeps the best iterate, so the
/// returned loss never exceeds the initial one.
pub fn optimize(
    records: &mut [TexelRecord],
    resolution: usize,
    light: &dyn IncomingLight,
    fitter: &SparseFitter,
    cfg: &OptimizerConfig,
) -> Result<OptimizeReport> {
    let init: Vec<[f64; 5]> = records.iter().map(|r| r.params.to_array()).collect();
    let (best, report) = {
        let mut problem = Problem::new(records, resolution, *cfg)?;
        run_adam(&mut problem, init.clone(), light, fitter, cfg)?
    };
    for (r, p) in records.iter_mut().zip(&best) {
        if r.valid {
            r.params = PrincipledParams::from_array(*p);
        }
    }
    // keep the stored shading contexts consistent with the final roughness
    if cfg.geometry.shadowing {
        records.par_iter_mut().enumerate().for_each(|(i, r)| {
            if let (true, Some(ctx)) = (r.valid, r.light.as_mut()) {
                ctx.refresh_shadow(&light.incoming(i), fitter, r.params.alpha());
            }
        });
    }
    Ok(report)
}

fn run_adam(
    problem: &mut Problem<'_>,
    init: Vec<[f64; 5]>,
    light: &dyn IncomingLight,
    fitter: &SparseFitter,
    cfg: &OptimizerConfig,
) -> Result<(Vec<[f64; 5]>, OptimizeReport)> {
    let n = init.len();
    problem.refresh_shadow(&init, light, fitter);
    let (initial_loss, _) = problem.evaluate(&init, false);
    if !initial_loss.is_finite() {
        return Err(Error::NonFiniteLoss { iteration: 0 });
    }
    let mut params = init.clone();
    let mut m1 = vec![[0.0; 5]; n];
    let mut m2 = vec![[0.0; 5]; n];
    let mut history = Vec::with_capacity(cfg.iterations);
    let mut best = (initial_loss, init.clone());
    for it in 0..cfg.iterations {
        if it > 0 && it % cfg.shadow_refresh == 0 {
            problem.refresh_shadow(&params, light, fitter);
        }
        let (loss, grad) = problem.evaluate(&params, true);
        if !loss.is_finite() || grad.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { iteration: it });
        }
        history.push(loss);
        if loss < best.0 {
            best = (loss, params.clone());
        }
        let lr = cfg.step * 0.5 * (1.0 + (PI * it as f64 / cfg.iterations as f64).cos());
        let t = (it + 1) as i32;
        let c1 = 1.0 - ADAM_B1.powi(t);
        let c2 = 1.0 - ADAM_B2.powi(t);
        for i in 0..n {
            if !problem.valid[i] {
                continue;
            }
            for k in 0..5 {
                let g = grad[i][k];
                m1[i][k] = ADAM_B1 * m1[i][k] + (1.0 - ADAM_B1) * g;
                m2[i][k] = ADAM_B2 * m2[i][k] + (1.0 - ADAM_B2) * g * g;
                let step = lr * (m1[i][k] / c1) / ((m2[i][k] / c2).sqrt() + ADAM_EPS);
                params[i][k] = (params[i][k] - step).clamp(0.0, 1.0);
            }
        }
    }
    // score the last iterate and the best one under their own shadowing
    let (last_loss, _) = problem.evaluate(&params, false);
    if last_loss < best.0 {
        best = (last_loss, params);
    }
    problem.refresh_shadow(&best.1, light, fitter);
    let (mut final_loss, _) = problem.evaluate(&best.1, false);
    let mut out = best.1;
    if !(final_loss <= initial_loss) {
        out = init;
        final_loss = initial_loss;
    }
    Ok((
        out,
        OptimizeReport {
            initial_loss,
            final_loss,
            history,
            iterations: cfg.iterations,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighting_function() {
        assert_eq!(sample_weight(0.0, 1.3, 2.0), 1.0);
        for &t in &[0.1, 0.7, 1.5] {
            assert!((sample_weight(t, 1.0, 1.0) - t.cos()).abs() < 1e-12);
        }
        assert_eq!(sample_weight(1.7, 1.0, 1.0), 0.0);
        assert!((sample_weight(PI / 3.0, 1.0, 2.0) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn alpha_bound_values() {
        assert!((alpha_lower_bound(100, (-1.0f64).exp()) - 0.1).abs() < 1e-12);
        assert!((alpha_lower_bound(400, 0.5) - 0.041_628).abs() < 1e-5);
        assert_eq!(views_for_alpha(0.1), 100);
    }

    #[test]
    fn prefilter_limits() {
        let mut e = ShExpansion::zeros(8, 1);
        for (i, c) in e.channel_mut(0).iter_mut().enumerate() {
            *c = 1.0 + i as f64;
        }
        let f = bandlimit_prefilter(&e, 1_000_000);
        for (a, b) in f.coeffs().iter().zip(e.coeffs()) {
            assert!((a - b).abs() < 1e-4 * b.abs());
        }
        let f = bandlimit_prefilter(&e, 25);
        let i = crate::sh::sh_index(5, 0);
        assert!((f.channel(0)[i] / e.channel(0)[i] - (-1.0f64).exp()).abs() < 1e-12);
    }
}
