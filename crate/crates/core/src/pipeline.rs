//! The end-to-end recovery pipeline: project observations onto texels,
//! fit spectra and initialize from the posterior, then refine all texels
//! jointly.

use std::time::Instant;

use log::info;
use rayon::prelude::*;

use crate::brdf::{reflected_light_fitter, ShadingContext};
use crate::error::{Error, Result};
use crate::optimizer::{
    bandlimit_prefilter, init_or_prior, optimize, GridConfig, IncomingLight, OptimizeReport, OptimizerConfig,
    TexelRecord,
};
use crate::scene::bvh::Ray;
use crate::scene::camera::CameraView;
use crate::scene::env::{sample_incoming_at, EnvironmentMap, LightSource, PrefilteredEnvironment};
use crate::scene::projection::{project_observations, RAY_EPS};
use crate::scene::synth::ParamTexture;
use crate::scene::textures::TextureSet;
use crate::scene::SurfaceGeometry;
use crate::sh::{fibonacci_hemisphere, num_coeffs, Direction, DirectionalSamples, Regularizer, SparseFitter};
use crate::spectrum::{SpectrumPair, IRRADIANCE_EPS};

/// Every tunable of a fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub max_degree: usize,
    pub lambda: f64,
    pub grid: GridConfig,
    pub optimizer: OptimizerConfig,
    /// Low-pass the light used for spectra to the views' resolution.
    pub prefilter: bool,
    /// Zero incoming light occluded by the object itself.
    pub self_occlusion: bool,
    /// Stop after the posterior initialization.
    pub spectrum_only: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            max_degree: crate::DEFAULT_MAX_DEGREE,
            lambda: crate::DEFAULT_LAMBDA,
            grid: GridConfig::default(),
            optimizer: OptimizerConfig::default(),
            prefilter: true,
            self_occlusion: false,
            spectrum_only: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be finite and >= 0"));
        }
        if self.grid.n_ks < 2 || self.grid.n_alpha < 2 || !(self.grid.sigma > 0.0) {
            return Err(Error::invalid("grid needs >= 2 values per axis and sigma > 0"));
        }
        self.optimizer.validate()
    }

    /// Local directions on which incoming light is sampled.
    pub fn light_directions(&self) -> Vec<Direction> {
        fibonacci_hemisphere(4 * num_coeffs(self.max_degree))
    }
}

/// Incoming light of each texel in its local frame.
pub struct TexelLight<'a> {
    geom: &'a SurfaceGeometry,
    source: &'a dyn LightSource,
    dirs: Vec<Direction>,
    self_occlusion: bool,
}

impl<'a> TexelLight<'a> {
    pub fn new(geom: &'a SurfaceGeometry, source: &'a dyn LightSource, dirs: Vec<Direction>, self_occlusion: bool) -> Self {
        TexelLight {
            geom,
            source,
            dirs,
            self_occlusion,
        }
    }

    pub fn directions(&self) -> &[Direction] {
        &self.dirs
    }
}

impl IncomingLight for TexelLight<'_> {
    fn incoming(&self, texel: usize) -> DirectionalSamples {
        let Some(t) = self.geom.texels.texels[texel] else {
            return DirectionalSamples::empty(3);
        };
        let s = sample_incoming_at(self.source, &t.frame, &self.dirs);
        if !self.self_occlusion {
            return s;
        }
        let origin = t.position + t.frame.n * RAY_EPS * (1.0 + t.position.norm());
        let mut values = s.values().to_vec();
        for (i, d) in self.dirs.iter().enumerate() {
            let ray = Ray {
                origin,
                dir: t.frame.dir_to_world(d),
            };
            if self.geom.bvh.occluded(&ray, RAY_EPS, f64::INFINITY) {
                values[3 * i..3 * i + 3].fill(0.0);
            }
        }
        s.with_values(values).expect("zeroing keeps samples valid")
    }
}

/// Wall-clock seconds per stage, in execution order.
pub type Timings = Vec<(&'static str, f64)>;

/// Result of [`fit_scene`].
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub records: Vec<TexelRecord>,
    pub report: Option<OptimizeReport>,
    pub timings: Timings,
}

impl FitOutput {
    pub fn textures(&self, resolution: usize) -> Result<TextureSet> {
        TextureSet::from_records(&self.records, resolution)
    }

    /// Parameters of valid texels.
    pub fn params(&self) -> ParamTexture {
        self.records.iter().map(|r| r.valid.then_some(r.params)).collect()
    }

    pub fn mean_entropy(&self) -> f64 {
        let v: Vec<f64> = self.records.iter().filter(|r| r.valid).map(|r| r.entropy).collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    }
}

/// The light behind the spectrum fits: the environment projected to SH at
/// three times the fit degree and optionally low-passed to the angular
/// resolution of `n_views` views.
pub fn spectrum_light(env: &EnvironmentMap, cfg: &PipelineConfig, n_views: usize) -> Result<PrefilteredEnvironment> {
    let e = env.to_sh(3 * cfg.max_degree)?;
    let expansion = if cfg.prefilter { bandlimit_prefilter(&e, n_views) } else { e };
    Ok(PrefilteredEnvironment { expansion })
}

/// Fits outgoing and mirrored incoming radiance of one texel on the same
/// directions and reduces them to a [`SpectrumPair`]. `None` when the
/// texel has no usable observations or no light.
pub fn texel_spectra(
    geom: &SurfaceGeometry,
    texel: usize,
    observed: &DirectionalSamples,
    spectrum_light: &dyn LightSource,
    incoming: &DirectionalSamples,
    cfg: &PipelineConfig,
) -> Option<SpectrumPair> {
    let t = geom.texels.texels[texel]?;
    if observed.is_empty() || observed.weights().iter().all(|w| *w <= 0.0) {
        return None;
    }
    let e = crate::brdf::irradiance(incoming).ok()?;
    if e.iter().all(|x| *x <= IRRADIANCE_EPS) {
        return None;
    }
    let fitter = SparseFitter::new(observed, cfg.max_degree, cfg.lambda, Regularizer::ExpDegree).ok()?;
    let mirrored: Vec<f64> = observed
        .directions()
        .iter()
        .flat_map(|d| spectrum_light.radiance(&t.frame.dir_to_world(&d.mirror())))
        .collect();
    let b = fitter.fit(observed);
    let l = fitter.fit(&observed.with_values(mirrored).ok()?);
    SpectrumPair::from_expansions(&b, &l, e).ok()
}

/// Initial records from the posterior of every texel. Light contexts are
/// not attached yet.
pub fn initialize(
    geom: &SurfaceGeometry,
    observations: &[DirectionalSamples],
    light: &TexelLight<'_>,
    spectrum_source: &dyn LightSource,
    cfg: &PipelineConfig,
) -> Vec<TexelRecord> {
    (0..geom.texels.len())
        .into_par_iter()
        .map(|i| {
            let uv = geom.texels.uv_of(i);
            let uv = [uv.x, uv.y];
            if geom.texels.texels[i].is_none() {
                return TexelRecord::invalid(uv);
            }
            let incoming = light.incoming(i);
            let pair = texel_spectra(geom, i, &observations[i], spectrum_source, &incoming, cfg);
            let (params, entropy, valid) = init_or_prior(pair.as_ref(), &cfg.grid);
            TexelRecord {
                uv,
                samples: observations[i].clone(),
                light: None,
                params,
                entropy,
                valid,
            }
        })
        .collect()
}

/// Builds the shading context of each valid record from its own incoming
/// light. Records whose light cannot be fit become invalid.
pub fn attach_light(records: &mut [TexelRecord], light: &TexelLight<'_>, fitter: &SparseFitter, cfg: &PipelineConfig) {
    records.par_iter_mut().enumerate().for_each(|(i, r)| {
        if !r.valid {
            return;
        }
        let alpha = cfg.optimizer.geometry.shadowing.then(|| r.params.alpha());
        match ShadingContext::new(&light.incoming(i), fitter, alpha) {
            Ok(ctx) => r.light = Some(ctx),
            Err(_) => {
                r.valid = false;
                r.entropy = 1.0;
            }
        }
    });
}

/// Runs the full pipeline on pre-projected observations.
pub fn fit_observations(
    geom: &SurfaceGeometry,
    env: &EnvironmentMap,
    observations: &[DirectionalSamples],
    n_views: usize,
    cfg: &PipelineConfig,
) -> Result<FitOutput> {
    cfg.validate()?;
    let mut timings = Timings::new();
    let clock = Instant::now();
    let source = spectrum_light(env, cfg, n_views)?;
    let light = TexelLight::new(geom, env, cfg.light_directions(), cfg.self_occlusion);
    let mut records = initialize(geom, observations, &light, &source, cfg);
    timings.push(("spectra", clock.elapsed().as_secs_f64()));
    let n_valid = records.iter().filter(|r| r.valid).count();
    info!("{n_valid} of {} texels initialized from spectra", records.len());
    if cfg.spectrum_only || n_valid == 0 {
        return Ok(FitOutput {
            records,
            report: None,
            timings,
        });
    }
    let clock = Instant::now();
    let fitter = reflected_light_fitter(light.directions(), cfg.max_degree, cfg.lambda)?;
    attach_light(&mut records, &light, &fitter, cfg);
    let report = optimize(&mut records, geom.resolution(), &light, &fitter, &cfg.optimizer)?;
    timings.push(("optimize", clock.elapsed().as_secs_f64()));
    info!("loss {:.4e} -> {:.4e}", report.initial_loss, report.final_loss);
    Ok(FitOutput {
        records,
        report: Some(report),
        timings,
    })
}

/// Projects `views` onto the surface and runs [`fit_observations`].
pub fn fit_scene(
    geom: &SurfaceGeometry,
    env: &EnvironmentMap,
    views: &[CameraView],
    cfg: &PipelineConfig,
) -> Result<FitOutput> {
    if views.is_empty() {
        return Err(Error::invalid("at least one view is required"));
    }
    let clock = Instant::now();
    let obs = project_observations(views, geom, cfg.optimizer.weighting);
    let t_project = clock.elapsed().as_secs_f64();
    let mut out = fit_observations(geom, env, &obs, views.len(), cfg)?;
    out.timings.insert(0, ("project", t_project));
    Ok(out)
}

/// Pearson correlation of two equally long series; `None` when either is
/// constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (a, b) = (x[i] - mx, y[i] - my);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Per-texel entropy against squared parameter error over texels valid in
/// both the fit and `truth`.
pub fn entropy_error_pairs(out: &FitOutput, truth: &ParamTexture) -> (Vec<f64>, Vec<f64>) {
    out.records
        .iter()
        .zip(truth)
        .filter_map(|(r, t)| {
            let t = t.as_ref().filter(|_| r.valid)?;
            Some((r.entropy, crate::scene::textures::squared_error(&r.params, t)))
        })
        .unzip()
}

