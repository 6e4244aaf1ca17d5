//! Batch entry points behind the `shbrdf` binary: fitting, entropy maps,
//! synthetic bundles, merging and benchmarks. Each command stages its
//! output in a temporary directory and moves it into place only on
//! success.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::ConfigFile;
use crate::error::{Error, Result};
use crate::manifest::{RunManifest, StagedOutput};
use crate::pipeline::{fit_scene, FitOutput, PipelineConfig};
use crate::scenarios::{entropy_cases, masked_fit};
use crate::scene::camera::{load_cameras, save_cameras, CameraView};
use crate::scene::env::{load_environment, EnvironmentMap};
use crate::scene::image::check_hdr_extension;
use crate::scene::mesh::Mesh;
use crate::scene::synth::{add_noise, patch_materials, synth_generate, EnvPreset, ParamTexture, RenderMode, SphereRig};
use crate::scene::textures::{merge_texture_sets, parameter_mse, TextureSet};
use crate::scene::SurfaceGeometry;
use crate::sh::{fibonacci_hemisphere, DirectionalSamples, Regularizer, ShExpansion, SparseFitter};
use crate::spectrum::{grid_search, SpectrumPair};

/// Paths of a captured (or synthesized) scene.
#[derive(Debug, Clone)]
pub struct SceneInputs {
    pub env: PathBuf,
    pub mesh: PathBuf,
    pub cameras: PathBuf,
    /// Directory the camera file's image names are resolved against;
    /// defaults to the camera file's directory.
    pub images: Option<PathBuf>,
}

/// A scene loaded into memory.
pub struct Scene {
    pub env: EnvironmentMap,
    pub geometry: SurfaceGeometry,
    pub views: Vec<CameraView>,
}

impl SceneInputs {
    pub fn load(&self, resolution: usize) -> Result<Scene> {
        check_hdr_extension(&self.env)?;
        let env = load_environment(&self.env)?;
        let views = load_cameras(&self.cameras, self.images.as_deref(), true)?;
        let mesh = Mesh::load_obj(&self.mesh)?;
        Ok(Scene {
            env,
            geometry: SurfaceGeometry::new(mesh, resolution),
            views,
        })
    }

    fn record(&self, m: RunManifest) -> RunManifest {
        let m = m
            .input("env", &self.env)
            .input("mesh", &self.mesh)
            .input("cameras", &self.cameras);
        match &self.images {
            Some(p) => m.input("images", p),
            None => m,
        }
    }

    /// Inputs recorded in a manifest.
    pub fn from_manifest(m: &RunManifest) -> Result<Self> {
        Ok(SceneInputs {
            env: m.input_path("env")?,
            mesh: m.input_path("mesh")?,
            cameras: m.input_path("cameras")?,
            images: m.input_path("images").ok(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct FitArgs {
    pub inputs: SceneInputs,
    pub out: PathBuf,
    pub config: ConfigFile,
    pub spectrum_only: bool,
    /// Ground-truth texture directory; enables the MSE metric.
    pub truth: Option<PathBuf>,
}

fn fit_common(inputs: &SceneInputs, config: &ConfigFile, spectrum_only: bool) -> Result<(FitOutput, PipelineConfig, usize)> {
    let (mut cfg, res) = config.resolve()?;
    cfg.spectrum_only = spectrum_only;
    let clock = Instant::now();
    let scene = inputs.load(res)?;
    let t_load = clock.elapsed().as_secs_f64();
    let mut out = fit_scene(&scene.geometry, &scene.env, &scene.views, &cfg)?;
    out.timings.insert(0, ("load", t_load));
    Ok((out, cfg, res))
}

/// Fits parameter textures and writes them with an entropy map and a
/// manifest into `args.out`.
pub fn cmd_fit(args: &FitArgs) -> Result<RunManifest> {
    let truth = args.truth.as_deref().map(TextureSet::read).transpose()?;
    let (out, _, res) = fit_common(&args.inputs, &args.config, args.spectrum_only)?;
    let mut textures = out.textures(res)?;
    let stage = StagedOutput::new(&args.out)?;
    let clock = Instant::now();
    textures.fill_holes();
    textures.write(stage.path(), true)?;
    let mut m = args.inputs.record(RunManifest::new(
        if args.spectrum_only { "fit --spectrum-only" } else { "fit" },
        args.config.clone(),
    ));
    if let Some(t) = &args.truth {
        m = m.input("truth", t);
    }
    m.add_timings(&out.timings);
    m.add_timings(&vec![("export", clock.elapsed().as_secs_f64())]);
    m.metrics.insert("mean_entropy".into(), out.mean_entropy());
    m.metrics
        .insert("valid_texels".into(), out.records.iter().filter(|r| r.valid).count() as f64);
    if let Some(r) = &out.report {
        m.metrics.insert("initial_loss".into(), r.initial_loss);
        m.metrics.insert("final_loss".into(), r.final_loss);
    }
    if let Some(t) = truth {
        let t = t.resampled(res).to_params();
        if let Some(mse) = parameter_mse(&out.params(), &t) {
            m.metrics.insert("parameter_mse".into(), mse);
        }
    }
    stage.commit(m)
}

/// Entropy and validity maps only; no optimization.
pub fn cmd_entropy(inputs: &SceneInputs, out_dir: &Path, config: &ConfigFile) -> Result<RunManifest> {
    let (out, _, res) = fit_common(inputs, config, true)?;
    let t = out.textures(res)?;
    let stage = StagedOutput::new(out_dir)?;
    let r = t.resolution;
    crate::scene::image::write_gray(&stage.path().join(crate::scene::textures::ENTROPY_FILE), r, r, t.entropy)?;
    let mask = t.valid.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
    crate::scene::image::write_gray(&stage.path().join(crate::scene::textures::VALID_FILE), r, r, mask)?;
    let mut m = inputs.record(RunManifest::new("entropy", config.clone()));
    m.add_timings(&out.timings);
    m.metrics.insert("mean_entropy".into(), out.mean_entropy());
    stage.commit(m)
}

/// Reruns the command recorded in a manifest into `out_dir`.
pub fn cmd_rerun(manifest: &Path, out_dir: &Path) -> Result<RunManifest> {
    let m = RunManifest::load(manifest)?;
    let inputs = || SceneInputs::from_manifest(&m);
    match m.command.as_str() {
        "fit" | "fit --spectrum-only" => cmd_fit(&FitArgs {
            inputs: inputs()?,
            out: out_dir.to_path_buf(),
            config: m.config.clone(),
            spectrum_only: m.command != "fit",
            truth: m.input_path("truth").ok(),
        }),
        "entropy" => cmd_entropy(&inputs()?, out_dir, &m.config),
        other if other.starts_with("synth ") => {
            let preset: SynthPreset = other["synth ".len()..].parse()?;
            let opts: SynthOptions = serde_json::from_value(
                m.inputs
                    .get("options")
                    .map(|s| serde_json::from_str(s))
                    .transpose()?
                    .unwrap_or(json!({})),
            )?;
            cmd_synth(preset, out_dir, m.seed.unwrap_or(0), &opts)
        }
        other => Err(Error::invalid(format!("cannot rerun command {other:?}"))),
    }
}

/// Bundles `cmd_synth` can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthPreset {
    /// A textured sphere under four environments.
    Sphere4Env,
    /// Sparse masked hemisphere samples of filtered light.
    Figure3,
    /// Three light/material cases with contrasting entropy.
    Figure5,
    /// The sphere under one environment at increasing view counts.
    ViewSweep,
}

impl FromStr for SynthPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere-4env" => Ok(SynthPreset::Sphere4Env),
            "figure3" => Ok(SynthPreset::Figure3),
            "figure5" => Ok(SynthPreset::Figure5),
            "viewsweep" => Ok(SynthPreset::ViewSweep),
            _ => Err(Error::invalid(format!(
                "unknown preset {s:?}; expected sphere-4env, figure3, figure5 or viewsweep"
            ))),
        }
    }
}

impl fmt::Display for SynthPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthPreset::Sphere4Env => "sphere-4env",
            SynthPreset::Figure3 => "figure3",
            SynthPreset::Figure5 => "figure5",
            SynthPreset::ViewSweep => "viewsweep",
        })
    }
}

/// Size and rendering knobs of the scene presets.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SynthOptions {
    pub resolution: usize,
    pub views: usize,
    pub image_size: usize,
    pub env_height: usize,
    /// Render by hemisphere quadrature instead of the fitted model.
    pub quadrature: bool,
    /// Relative pixel noise.
    pub noise: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            resolution: 64,
            views: 100,
            image_size: 128,
            env_height: 128,
            quadrature: false,
            noise: 0.0,
        }
    }
}

/// View counts of the sweep preset.
pub const SWEEP_VIEWS: [usize; 4] = [10, 25, 50, 100];

/// Sub-directory of a sphere-4env bundle holding environment `k`.
pub fn env_dir(k: usize) -> String {
    format!("env_{k}")
}

/// Sub-directory of a viewsweep bundle for `n` views.
pub fn views_dir(n: usize) -> String {
    format!("views_{n:03}")
}

fn write_views(dir: &Path, views: &[CameraView]) -> Result<()> {
    let images = dir.join("images");
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let names: Vec<String> = (0..views.len()).map(|i| format!("images/view_{i:03}.exr")).collect();
    for (v, n) in views.iter().zip(&names) {
        v.image.as_ref().expect("rendered views carry images").write(&dir.join(n))?;
    }
    save_cameras(&dir.join("cameras.json"), views, &names)
}

fn render_into(
    dir: &Path,
    geom: &SurfaceGeometry,
    env: &EnvironmentMap,
    truth: &ParamTexture,
    views: Vec<CameraView>,
    opts: &SynthOptions,
    seed: u64,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mode = if opts.quadrature {
        RenderMode::Quadrature { samples: 24 }
    } else {
        RenderMode::convolution(crate::DEFAULT_MAX_DEGREE)
    };
    let mut views = synth_generate(geom, env, truth, views, mode)?;
    if opts.noise > 0.0 {
        add_noise(&mut views, opts.noise, 0.01 * opts.noise, seed);
    }
    env.write(&dir.join("env.exr"))?;
    write_views(dir, &views)
}

/// Writes a deterministic synthetic bundle into `out`.
pub fn cmd_synth(preset: SynthPreset, out: &Path, seed: u64, opts: &SynthOptions) -> Result<RunManifest> {
    let stage = StagedOutput::new(out)?;
    let dir = stage.path();
    let mut m = RunManifest::new(&format!("synth {preset}"), ConfigFile::default());
    m.seed = Some(seed);
    m.inputs.insert("options".into(), serde_json::to_string(opts)?);
    match preset {
        SynthPreset::Sphere4Env | SynthPreset::ViewSweep => {
            let rig = SphereRig {
                resolution: opts.resolution,
                n_views: opts.views,
                image_size: opts.image_size,
                ..Default::default()
            };
            let geom = rig.geometry();
            geom.mesh.write_obj(&dir.join("mesh.obj"))?;
            let truth = patch_materials(&geom, 4, (0.3, 0.8), seed);
            let tdir = dir.join("truth");
            fs::create_dir_all(&tdir).map_err(|e| Error::io(&tdir, e))?;
            TextureSet::from_params(&truth, rig.resolution)?.write(&tdir, false)?;
            if preset == SynthPreset::Sphere4Env {
                for (k, p) in EnvPreset::four_suns().iter().enumerate() {
                    let env = p.build(opts.env_height);
                    render_into(&dir.join(env_dir(k)), &geom, &env, &truth, rig.cameras(), opts, seed + k as u64)?;
                }
            } else {
                let env = EnvPreset::four_suns()[0].build(opts.env_height);
                env.write(&dir.join("env.exr"))?;
                for n in SWEEP_VIEWS {
                    let r = SphereRig { n_views: n, ..rig };
                    render_into(&dir.join(views_dir(n)), &geom, &env, &truth, r.cameras(), opts, seed + n as u64)?;
                }
            }
        }
        SynthPreset::Figure3 => {
            let s = masked_fit(seed);
            let samples: Vec<_> = (0..s.samples.len())
                .map(|i| {
                    let d = s.samples.directions()[i];
                    json!({"theta": d.theta, "phi": d.phi, "value": s.samples.value(i)[0], "weight": s.samples.weights()[i]})
                })
                .collect();
            let doc = json!({
                "alpha": s.alpha,
                "fit_degree": s.fit_degree,
                "incoming_degree": s.incoming.max_degree(),
                "incoming_coeffs": s.incoming.coeffs(),
                "samples": samples,
            });
            write_json(&dir.join("figure3.json"), &doc)?;
            for (name, lambda, reg) in [
                ("exp_degree", crate::DEFAULT_LAMBDA, Regularizer::ExpDegree),
                ("identity", crate::DEFAULT_LAMBDA, Regularizer::Identity),
                ("unregularized", 0.0, Regularizer::ExpDegree),
            ] {
                if let Ok(fit) = s.fit(lambda, reg) {
                    m.metrics.insert(format!("log_ratio_error_{name}"), s.log_ratio_error(&fit));
                }
            }
        }
        SynthPreset::Figure5 => {
            let cases: Vec<_> = entropy_cases()?.into_iter().map(|(c, _)| c).collect();
            for c in &cases {
                m.metrics.insert(format!("entropy_{}", c.name), c.entropy);
            }
            write_json(&dir.join("figure5.json"), &serde_json::to_value(&cases)?)?;
        }
    }
    stage.commit(m)
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)?).map_err(|e| Error::io(path, e))
}

/// Per-texel lowest-entropy merge of exported fits.
pub fn cmd_merge(runs: &[PathBuf], out: &Path) -> Result<RunManifest> {
    if runs.len() < 2 {
        return Err(Error::invalid("merging needs at least two runs"));
    }
    let sets = runs.iter().map(|r| TextureSet::read(r)).collect::<Result<Vec<_>>>()?;
    let mut merged = merge_texture_sets(&sets)?;
    merged.fill_holes();
    let stage = StagedOutput::new(out)?;
    merged.write(stage.path(), true)?;
    let mut m = RunManifest::new("merge", ConfigFile::default());
    for (i, r) in runs.iter().enumerate() {
        m = m.input(&format!("run_{i}"), r);
    }
    m.metrics
        .insert("valid_texels".into(), merged.valid.iter().filter(|v| **v).count() as f64);
    stage.commit(m)
}

/// Benchmark suites of `cmd_bench`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchSuite {
    Spectra,
    Entropy,
    EndToEnd,
}

impl FromStr for BenchSuite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectra" => Ok(BenchSuite::Spectra),
            "entropy" => Ok(BenchSuite::Entropy),
            "endtoend" => Ok(BenchSuite::EndToEnd),
            _ => Err(Error::invalid(format!(
                "unknown suite {s:?}; expected spectra, entropy or endtoend"
            ))),
        }
    }
}

/// Runs a benchmark suite and returns its JSON report.
pub fn cmd_bench(suite: BenchSuite, seed: u64) -> Result<serde_json::Value> {
    match suite {
        BenchSuite::Spectra => bench_spectra(seed),
        BenchSuite::Entropy => bench_entropy(seed),
        BenchSuite::EndToEnd => bench_end_to_end(seed),
    }
}

/// Residual and penalty norm of the sparse fit across `lambda`.
fn bench_spectra(seed: u64) -> Result<serde_json::Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deg = crate::DEFAULT_MAX_DEGREE;
    let mut truth = ShExpansion::zeros(12, 1);
    for c in truth.channel_mut(0) {
        *c = rng.gen_range(-1.0..1.0);
    }
    let dirs = fibonacci_hemisphere(120);
    let values: Vec<f64> = dirs.iter().map(|d| truth.evaluate(d)[0]).collect();
    let samples = DirectionalSamples::unweighted(dirs, 1, values)?;
    let w = crate::sh::regularizer_weights(deg, Regularizer::ExpDegree);
    let mut rows = Vec::new();
    for lambda in [0.0, 1e-6, 1e-4, 1e-2, 1.0, 100.0] {
        let clock = Instant::now();
        let Ok(f) = SparseFitter::new(&samples, deg, lambda, Regularizer::ExpDegree) else {
            rows.push(json!({"lambda": lambda, "error": "singular"}));
            continue;
        };
        let fit = f.fit(&samples);
        let secs = clock.elapsed().as_secs_f64();
        let residual = (0..samples.len())
            .map(|i| (fit.evaluate(&samples.directions()[i])[0] - samples.value(i)[0]).powi(2))
            .sum::<f64>()
            .sqrt();
        let penalty = fit.channel(0).iter().zip(&w).map(|(c, w)| w * c * c).sum::<f64>().sqrt();
        rows.push(json!({"lambda": lambda, "residual": residual, "penalty_norm": penalty, "seconds": secs}));
    }
    Ok(json!({"suite": "spectra", "max_degree": deg, "rows": rows}))
}

/// Latency of the 100-cell grid search per texel.
fn bench_entropy(seed: u64) -> Result<serde_json::Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deg = crate::DEFAULT_MAX_DEGREE;
    let n = 2000;
    let mut lat = Vec::with_capacity(n);
    for _ in 0..n {
        let (ks, a) = (rng.gen_range(0.1..1.0), rng.gen_range(0.05..1.0));
        let sl: Vec<f64> = (0..=deg).map(|_| rng.gen_range(0.0..1.0)).collect();
        let sb = sl
            .iter()
            .enumerate()
            .map(|(l, v)| ks * ks * (-2.0 * (a * l as f64).powi(2)).exp() * v)
            .collect();
        let pair = SpectrumPair::new(
            vec![crate::sh::PowerSpectrum { values: sl }],
            vec![crate::sh::PowerSpectrum { values: sb }],
            vec![0.0],
            vec![0.0],
            vec![1.0],
        )?;
        let clock = Instant::now();
        let g = grid_search(&pair, 10, 10, crate::spectrum::DEFAULT_SIGMA)?;
        lat.push(clock.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(g);
    }
    lat.sort_by(f64::total_cmp);
    let q = |p: f64| lat[((lat.len() - 1) as f64 * p) as usize];
    let edges = [0.001, 0.01, 0.1, 1.0, 10.0, f64::INFINITY];
    let mut hist = vec![0usize; edges.len()];
    for x in &lat {
        hist[edges.iter().position(|e| x <= e).unwrap()] += 1;
    }
    Ok(json!({
        "suite": "entropy",
        "cells": 100,
        "texels": n,
        "threads": rayon::current_num_threads(),
        "median_ms": q(0.5),
        "p10_ms": q(0.1),
        "p90_ms": q(0.9),
        "histogram_ms": {"edges": [0.001, 0.01, 0.1, 1.0, 10.0, "inf"], "counts": hist},
    }))
}

/// Parameter MSE on small sphere scenes.
fn bench_end_to_end(seed: u64) -> Result<serde_json::Value> {
    let rig = SphereRig {
        resolution: 32,
        n_views: 50,
        image_size: 96,
        ..Default::default()
    };
    let geom = rig.geometry();
    let truth = patch_materials(&geom, 4, (0.3, 0.8), seed);
    let mut rows = Vec::new();
    for (name, preset) in [
        ("sun", EnvPreset::four_suns()[0]),
        ("studio", EnvPreset::Studio),
        ("overcast", EnvPreset::Overcast),
    ] {
        let env = preset.build(128);
        let views = synth_generate(&geom, &env, &truth, rig.cameras(), RenderMode::convolution(8))?;
        for spectrum_only in [true, false] {
            let cfg = PipelineConfig {
                spectrum_only,
                ..Default::default()
            };
            let clock = Instant::now();
            let out = fit_scene(&geom, &env, &views, &cfg)?;
            rows.push(json!({
                "preset": name,
                "spectrum_only": spectrum_only,
                "mse": parameter_mse(&out.params(), &truth),
                "mean_entropy": out.mean_entropy(),
                "seconds": clock.elapsed().as_secs_f64(),
            }));
        }
    }
    Ok(json!({"suite": "endtoend", "resolution": rig.resolution, "views": rig.n_views, "rows": rows}))
}
