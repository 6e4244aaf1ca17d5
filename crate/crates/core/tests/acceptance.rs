//! The acceptance suite: one pass/fail line per criterion. Tolerances are
//! pinned here; the heavy scene criteria share datasets.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture` to see
//! the report.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shbrdf::brdf::{filter_kernel, reflected_light_fitter, GeometryTerms};
use shbrdf::optimizer::Problem;
use shbrdf::pipeline::{attach_light, entropy_error_pairs, fit_scene, pearson, FitOutput, PipelineConfig, TexelLight};
use shbrdf::scenarios::{entropy_cases, masked_fit};
use shbrdf::scene::synth::{add_noise, patch_materials, synth_generate, EnvPreset, ParamTexture, RenderMode, SphereRig};
use shbrdf::scene::textures::{merge_texture_sets, parameter_mse};
use shbrdf::scene::SurfaceGeometry;
use shbrdf::sh::{
    convolve_isotropic, eval_basis_into, fibonacci_sphere, fit_dense, num_coeffs, Direction, DirectionalSamples,
    PowerSpectrum, Regularizer, ShExpansion,
};
use shbrdf::spectrum::{entropy, grid_search, SpectrumPair, DEFAULT_SIGMA};

// criterion 1
const SH_ROUND_TRIP_TOL: f64 = 1e-6;
const SH_ORTHO_TOL: f64 = 1e-3;
// criterion 2
const CONVOLUTION_TOL: f64 = 1e-4;
// criterion 3
const MASKED_FIT_TRUE_ALPHA: f64 = 0.2;
const MASKED_FIT_SEED: u64 = 0;
const VARIANT_ERROR_FACTOR: f64 = 2.0;
// criterion 4
const SPECTRUM_IDENTITY_TOL: f64 = 1e-10;
// criterion 5
const ENTROPY_TARGETS: [f64; 3] = [0.25, 0.69, 0.87];
const ENTROPY_BAND: f64 = 0.15;
/// Rounding slack for the uniform entropy.
const ENTROPY_EXACT_TOL: f64 = 1e-12;
const NEAR_MAX_ENTROPY: f64 = 0.8;
// criteria 6 to 10
const SCENE_RESOLUTION: usize = 32;
const ABLATION_ITERATIONS: usize = 200;
const MERGE_ITERATIONS: usize = 400;
const MERGE_NOISE: f64 = 0.03;
const MERGE_SLACK: f64 = 1e-3;
const FORWARD_MSE_MAX: f64 = 0.05;
const QUADRATURE_MSE_MAX: f64 = 0.10;
const END_TO_END_SECONDS: f64 = 120.0;
const MIN_CORRELATION: f64 = 0.1;
const SWEEP_BAND: f64 = 0.05;
// criterion 11
const GRID_SEARCH_MS: f64 = 10.0;
// criterion 12
const GRADIENT_REL_TOL: f64 = 1e-4;

struct Outcome {
    pass: bool,
    soft: bool,
    detail: String,
}

fn hard(pass: bool, detail: String) -> Outcome {
    Outcome {
        pass,
        soft: false,
        detail,
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn random_expansion(rng: &mut ChaCha8Rng, degree: usize, channels: usize) -> ShExpansion {
    let coeffs = (0..num_coeffs(degree) * channels).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ShExpansion::from_coeffs(degree, channels, coeffs).unwrap()
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            loop {
                let (p, dp) = legendre_with_derivative(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    let (_, dp) = legendre_with_derivative(n, x);
                    return (x, 2.0 / ((1.0 - x * x) * dp * dp));
                }
            }
        })
        .collect()
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

fn legendre(l: usize, x: f64) -> f64 {
    match l {
        0 => 1.0,
        _ => legendre_with_derivative(l, x).0,
    }
}

/// Product rule over the sphere: Gauss-Legendre in `cos theta`, uniform in
/// `phi`. Returns `(direction, weight)`.
fn sphere_quadrature(n_theta: usize, n_phi: usize) -> Vec<(Direction, f64)> {
    let mut q = Vec::with_capacity(n_theta * n_phi);
    for (x, w) in gauss_legendre(n_theta) {
        for k in 0..n_phi {
            let phi = 2.0 * PI * k as f64 / n_phi as f64;
            q.push((Direction::new(x.acos(), phi), w * 2.0 * PI / n_phi as f64));
        }
    }
    q
}

fn c1_sh_correctness() -> Outcome {
    let (r, secs) = timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst = 0.0f64;
        for deg in [0, 1, 2, 4, 8] {
            let mut truth = random_expansion(&mut rng, deg, 3);
            let dirs = fibonacci_sphere(2 * num_coeffs(deg) + 16);
            // radiance samples must be non-negative; lift by a constant
            let floor = dirs.iter().flat_map(|d| truth.evaluate(d)).fold(0.0, f64::min);
            for c in 0..3 {
                truth.channel_mut(c)[0] -= floor * (4.0 * PI).sqrt();
            }
            let values = dirs.iter().flat_map(|d| truth.evaluate(d).into_iter().map(|v| v.max(0.0))).collect();
            let s = DirectionalSamples::unweighted(dirs, 3, values).unwrap();
            let fit = fit_dense(&s, deg).unwrap();
            for (a, b) in fit.coeffs().iter().zip(truth.coeffs()) {
                worst = worst.max((a - b).abs());
            }
        }
        // quasi-Monte-Carlo Gram matrix of the degree-8 basis
        let n = 200_000;
        let k = num_coeffs(8);
        let mut gram = vec![0.0; k * k];
        let mut y = vec![0.0; k];
        for d in fibonacci_sphere(n) {
            eval_basis_into(&d, 8, &mut y);
            for i in 0..k {
                for j in i..k {
                    gram[i * k + j] += y[i] * y[j];
                }
            }
        }
        let w = 4.0 * PI / n as f64;
        let mut ortho = 0.0f64;
        for i in 0..k {
            for j in i..k {
                let target = if i == j { 1.0 } else { 0.0 };
                ortho = ortho.max((gram[i * k + j] * w - target).abs());
            }
        }
        (worst, ortho)
    });
    let (worst, ortho) = r;
    hard(
        worst < SH_ROUND_TRIP_TOL && ortho < SH_ORTHO_TOL && secs < 5.0,
        format!("round trip {worst:.1e} (< {SH_ROUND_TRIP_TOL:e}), orthonormality {ortho:.1e} (< {SH_ORTHO_TOL:e}), {secs:.2}s (< 5s)"),
    )
}

fn c2_convolution() -> Outcome {
    let (worst, secs) = timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let quad = sphere_quadrature(48, 96);
        let kernels: Vec<Box<dyn Fn(f64) -> f64>> = vec![
            Box::new(|t: f64| (4.0 * (t - 1.0)).exp()),
            Box::new(|t: f64| (15.0 * (t - 1.0)).exp()),
            Box::new(|t: f64| 0.3 + t * t),
            Box::new(|t: f64| (2.0 * t).cos() + 0.2 * t),
        ];
        let gl = gauss_legendre(64);
        let mut worst = 0.0f64;
        for deg in 1..=4 {
            for k in &kernels {
                // Funk-Hecke eigenvalues 2 pi int k(t) P_l(t) dt
                let lambda: Vec<f64> = (0..=deg)
                    .map(|l| 2.0 * PI * gl.iter().map(|(x, w)| w * k(*x) * legendre(l, *x)).sum::<f64>())
                    .collect();
                let light = random_expansion(&mut rng, deg, 1);
                let fast = convolve_isotropic(&light, &lambda);
                for d in fibonacci_sphere(12) {
                    let v = d.to_vector();
                    let brute: f64 = quad
                        .iter()
                        .map(|(q, w)| w * k(v.dot(&q.to_vector())) * light.evaluate(q)[0])
                        .sum();
                    worst = worst.max((brute - fast.evaluate(&d)[0]).abs());
                }
            }
        }
        worst
    });
    hard(
        worst < CONVOLUTION_TOL && secs < 10.0,
        format!("max deviation {worst:.1e} (< {CONVOLUTION_TOL:e}) over 4 zonal kernels, degrees 1..=4, {secs:.2}s (< 10s)"),
    )
}

fn c3_masked_fit() -> Outcome {
    let (r, secs) = timed(|| {
        let s = masked_fit(MASKED_FIT_SEED);
        let ours = s.fit(shbrdf::DEFAULT_LAMBDA, Regularizer::ExpDegree).unwrap();
        let post = grid_search(&s.pair(&ours).unwrap(), 10, 10, DEFAULT_SIGMA).unwrap();
        let r_hat = post.map_estimate().1.sqrt();
        let e_ours = s.log_ratio_error(&ours);
        let e_ident = s.log_ratio_error(&s.fit(shbrdf::DEFAULT_LAMBDA, Regularizer::Identity).unwrap());
        // an unregularized degree-8 fit on 88 samples may be singular; that
        // counts as failing to recover the ratio
        let e_zero = s
            .fit(0.0, Regularizer::ExpDegree)
            .map(|f| s.log_ratio_error(&f))
            .unwrap_or(f64::INFINITY);
        (s.samples.len(), r_hat, e_ours, e_ident, e_zero)
    });
    let (n, r_hat, e_ours, e_ident, e_zero) = r;
    let cell = 1.0 / 10.0;
    let found = (r_hat - MASKED_FIT_TRUE_ALPHA.sqrt()).abs() <= cell + 1e-12;
    let ranked = e_ident > VARIANT_ERROR_FACTOR * e_ours && e_zero > VARIANT_ERROR_FACTOR * e_ours;
    hard(
        n == 88 && found && ranked && secs < 5.0,
        format!(
            "{n} samples, grid roughness {r_hat:.2} vs {:.3}; log-ratio error ours {e_ours:.3}, W=I {e_ident:.3}, lambda=0 {e_zero:.3}; {secs:.2}s",
            MASKED_FIT_TRUE_ALPHA.sqrt()
        ),
    )
}

fn c4_spectrum_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let deg = 8;
    let mut identity = 0.0f64;
    for _ in 0..20 {
        let light = random_expansion(&mut rng, deg, 1);
        let (ks, alpha) = (rng.gen_range(0.0..1.0), rng.gen_range(0.01..1.0));
        let kernel: Vec<f64> = filter_kernel(alpha, deg).iter().map(|f| ks * f).collect();
        let b = light.scale_degrees(&kernel);
        let (sl, sb) = (light.power_spectrum(0), b.power_spectrum(0));
        for l in 0..=deg {
            let expected = ks * ks * (-2.0 * (alpha * l as f64).powi(2)).exp() * sl.values[l];
            identity = identity.max((sb.values[l] - expected).abs());
        }
    }
    // Generators on the nodes of an 11 x 10 grid (Ks = 0, 0.1, .., 1 and
    // roughness 0.1, .., 1), skipping Ks = 0. Off-node generators are
    // counted separately for information: near alpha = 1 only degree 1
    // carries signal and the argmin slides along the Ks-alpha ridge.
    let s_l: Vec<f64> = (0..=deg).map(|l| (2 * l + 1) as f64 / (4.0 * PI)).collect();
    let argmin = |ks: f64, alpha: f64, n_ks: usize| {
        let s_b = s_l
            .iter()
            .enumerate()
            .map(|(l, v)| ks * ks * (-2.0 * (alpha * l as f64).powi(2)).exp() * v)
            .collect();
        let pair = SpectrumPair::new(
            vec![PowerSpectrum { values: s_l.clone() }],
            vec![PowerSpectrum { values: s_b }],
            vec![0.0],
            vec![0.0],
            vec![1.0],
        )
        .unwrap();
        grid_search(&pair, n_ks, 10, DEFAULT_SIGMA).unwrap().map_estimate()
    };
    let outside = |ks: f64, alpha: f64, (k_hat, a_hat): (f64, f64), ks_step: f64| {
        (k_hat - ks).abs() > ks_step + 1e-9 || (a_hat.sqrt() - alpha.sqrt()).abs() > 0.1 + 1e-9
    };
    let mut misses = 0;
    let mut off_node = 0;
    for i in 1..=10 {
        for j in 1..=10 {
            let (ks, r) = (0.1 * i as f64, 0.1 * j as f64);
            if outside(ks, r * r, argmin(ks, r * r, 11), 0.1) {
                misses += 1;
            }
            let (ks, alpha) = (0.1 * i as f64, 0.1 * j as f64);
            if outside(ks, alpha, argmin(ks, alpha, 10), 1.0 / 9.0) {
                off_node += 1;
            }
        }
    }
    hard(
        identity < SPECTRUM_IDENTITY_TOL && misses == 0,
        format!(
            "identity deviation {identity:.1e} (< {SPECTRUM_IDENTITY_TOL:e}); {misses} of 100 grid-node generators outside one cell ({off_node} of 100 off-node, not scored)"
        ),
    )
}

fn c5_entropy() -> Outcome {
    let (cases, secs) = timed(|| entropy_cases().unwrap());
    let h: Vec<f64> = cases.iter().map(|(c, _)| c.entropy).collect();
    let uniform = entropy(&[0.01; 100], 100);
    let mut one_hot = vec![0.0; 100];
    one_hot[37] = 1.0;
    let one_hot = entropy(&one_hot, 100);
    let within = h.iter().zip(ENTROPY_TARGETS).all(|(a, b)| (a - b).abs() <= ENTROPY_BAND);
    hard(
        h[0] < h[1] && h[2] >= NEAR_MAX_ENTROPY && (uniform - 1.0).abs() <= ENTROPY_EXACT_TOL && one_hot == 0.0 && within && secs < 1.0,
        format!(
            "H dirac {:.3}, low-frequency {:.3}, low-specular {:.3} (targets {ENTROPY_TARGETS:?} +/- {ENTROPY_BAND}); uniform {uniform}, one-hot {one_hot}; {secs:.3}s",
            h[0], h[1], h[2]
        ),
    )
}

struct SphereScene {
    geom: SurfaceGeometry,
    truth: ParamTexture,
    rig: SphereRig,
}

fn sphere(resolution: usize, views: usize) -> SphereScene {
    let rig = SphereRig {
        resolution,
        n_views: views,
        ..Default::default()
    };
    let geom = rig.geometry();
    let truth = patch_materials(&geom, 4, (0.3, 0.8), 7);
    SphereScene { geom, truth, rig }
}

fn mse(out: &FitOutput, truth: &ParamTexture) -> f64 {
    parameter_mse(&out.params(), truth).unwrap()
}

fn c6_ablation() -> Outcome {
    let s = sphere(SCENE_RESOLUTION, 100);
    let variants = [
        GeometryTerms::NONE,
        GeometryTerms {
            shadowing: true,
            masking: false,
        },
        GeometryTerms {
            shadowing: false,
            masking: true,
        },
        GeometryTerms::BOTH,
    ];
    let mut sums = [0.0; 4];
    let suns = EnvPreset::four_suns();
    for p in &suns {
        let env = p.build(128);
        let views = synth_generate(&s.geom, &env, &s.truth, s.rig.cameras(), RenderMode::Quadrature { samples: 24 }).unwrap();
        for (k, g) in variants.iter().enumerate() {
            let mut cfg = PipelineConfig::default();
            cfg.optimizer.iterations = ABLATION_ITERATIONS;
            cfg.optimizer.geometry = *g;
            sums[k] += mse(&fit_scene(&s.geom, &env, &views, &cfg).unwrap(), &s.truth) / suns.len() as f64;
        }
    }
    let [none, shadow, mask, both] = sums;
    hard(
        shadow < none && mask < none && both < none && both <= shadow.min(mask) + MERGE_SLACK,
        format!("mean MSE over 4 quadrature-rendered scenes: neither {none:.4}, shadowing {shadow:.4}, masking {mask:.4}, both {both:.4}"),
    )
}

fn c7_end_to_end() -> Outcome {
    let (r, secs) = timed(|| {
        let s = sphere(64, 100);
        let env = EnvPreset::Studio.build(128);
        let views = synth_generate(&s.geom, &env, &s.truth, s.rig.cameras(), RenderMode::convolution(8)).unwrap();
        let spectrum_only = PipelineConfig {
            spectrum_only: true,
            ..Default::default()
        };
        let a = mse(&fit_scene(&s.geom, &env, &views, &spectrum_only).unwrap(), &s.truth);
        let b = mse(&fit_scene(&s.geom, &env, &views, &PipelineConfig::default()).unwrap(), &s.truth);
        (a, b)
    });
    let (spec_only, optimized) = r;
    let s = sphere(SCENE_RESOLUTION, 100);
    let env = EnvPreset::Studio.build(128);
    let views = synth_generate(&s.geom, &env, &s.truth, s.rig.cameras(), RenderMode::Quadrature { samples: 24 }).unwrap();
    let quad = mse(&fit_scene(&s.geom, &env, &views, &PipelineConfig::default()).unwrap(), &s.truth);
    hard(
        spec_only > optimized && optimized <= FORWARD_MSE_MAX && quad <= QUADRATURE_MSE_MAX && secs < END_TO_END_SECONDS,
        format!(
            "64x64, 100 views: spectrum-only {spec_only:.4} > optimized {optimized:.4} (<= {FORWARD_MSE_MAX}) in {secs:.1}s; quadrature data {quad:.4} (<= {QUADRATURE_MSE_MAX})"
        ),
    )
}

/// Fits of the sphere under each of the four sun environments with 3%
/// pixel noise.
fn four_environment_fits() -> (SphereScene, Vec<FitOutput>) {
    let s = sphere(SCENE_RESOLUTION, 100);
    let fits = EnvPreset::four_suns()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let env = p.build(128);
            let mut views = synth_generate(&s.geom, &env, &s.truth, s.rig.cameras(), RenderMode::convolution(8)).unwrap();
            add_noise(&mut views, MERGE_NOISE, 0.01 * MERGE_NOISE, 3 + k as u64);
            let mut cfg = PipelineConfig::default();
            cfg.optimizer.iterations = MERGE_ITERATIONS;
            fit_scene(&s.geom, &env, &views, &cfg).unwrap()
        })
        .collect();
    (s, fits)
}

fn c8_correlation(s: &SphereScene, fits: &[FitOutput]) -> Outcome {
    let (mut h, mut e) = (Vec::new(), Vec::new());
    for f in fits {
        let (a, b) = entropy_error_pairs(f, &s.truth);
        h.extend(a);
        e.extend(b);
    }
    let rho = pearson(&h, &e).unwrap_or(f64::NAN);
    hard(
        rho >= MIN_CORRELATION,
        format!("Pearson rho {rho:.3} (>= {MIN_CORRELATION}) over {} texels of 4 noisy scenes", h.len()),
    )
}

fn c9_merge(s: &SphereScene, fits: &[FitOutput]) -> Outcome {
    let singles: Vec<f64> = fits.iter().map(|f| mse(f, &s.truth)).collect();
    let sets: Vec<_> = fits.iter().map(|f| f.textures(SCENE_RESOLUTION).unwrap()).collect();
    let merged = parameter_mse(&merge_texture_sets(&sets).unwrap().to_params(), &s.truth).unwrap();
    let min = singles.iter().copied().fold(f64::INFINITY, f64::min);
    let avg = singles.iter().sum::<f64>() / singles.len() as f64;
    hard(
        merged <= min + MERGE_SLACK && merged < avg,
        format!("merged {merged:.4} vs singles {singles:.4?} (min {min:.4}, mean {avg:.4})"),
    )
}

fn c10_view_sweep() -> Outcome {
    let s = sphere(SCENE_RESOLUTION, 100);
    let env = EnvPreset::four_suns()[0].build(128);
    let mut rows = Vec::new();
    for n in [10, 25, 50, 100] {
        let rig = SphereRig { n_views: n, ..s.rig };
        let views = synth_generate(&s.geom, &env, &s.truth, rig.cameras(), RenderMode::convolution(8)).unwrap();
        let out = fit_scene(&s.geom, &env, &views, &PipelineConfig::default()).unwrap();
        rows.push((n, out.mean_entropy(), mse(&out, &s.truth)));
    }
    let ok = rows
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 * (1.0 + SWEEP_BAND) && w[1].2 <= w[0].2 * (1.0 + SWEEP_BAND));
    let text: Vec<String> = rows.iter().map(|(n, h, m)| format!("{n}: H {h:.3} MSE {m:.4}")).collect();
    hard(ok, text.join(", "))
}

fn c11_grid_latency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut lat = Vec::new();
    for _ in 0..500 {
        let s_l: Vec<f64> = (0..=8).map(|_| rng.gen_range(0.0..1.0)).collect();
        let pair = SpectrumPair::new(
            vec![PowerSpectrum { values: s_l.clone() }],
            vec![PowerSpectrum { values: s_l }],
            vec![0.0],
            vec![0.0],
            vec![1.0],
        )
        .unwrap();
        let (g, secs) = timed(|| grid_search(&pair, 10, 10, DEFAULT_SIGMA).unwrap());
        std::hint::black_box(g);
        lat.push(secs * 1e3);
    }
    lat.sort_by(f64::total_cmp);
    let median = lat[lat.len() / 2];
    Outcome {
        pass: median <= GRID_SEARCH_MS,
        soft: true,
        detail: format!(
            "median {median:.4} ms per 100-cell posterior (<= {GRID_SEARCH_MS} ms) on {} thread(s)",
            rayon::current_num_threads()
        ),
    }
}

fn c12_gradient() -> Outcome {
    let s = sphere(8, 24);
    let env = EnvPreset::Studio.build(64);
    let rig = SphereRig { image_size: 64, ..s.rig };
    let mut views = synth_generate(&s.geom, &env, &s.truth, rig.cameras(), RenderMode::convolution(8)).unwrap();
    add_noise(&mut views, 0.05, 1e-3, 5);
    let cfg = PipelineConfig {
        spectrum_only: true,
        ..Default::default()
    };
    let mut records = fit_scene(&s.geom, &env, &views, &cfg).unwrap().records;
    let light = TexelLight::new(&s.geom, &env, cfg.light_directions(), false);
    let fitter = reflected_light_fitter(light.directions(), cfg.max_degree, cfg.lambda).unwrap();
    attach_light(&mut records, &light, &fitter, &cfg);
    let problem = Problem::new(&records, 8, cfg.optimizer).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let params: Vec<[f64; 5]> = (0..records.len()).map(|_| std::array::from_fn(|_| rng.gen_range(0.1..0.9))).collect();
        let (_, grad) = problem.evaluate(&params, true);
        for _ in 0..3 {
            let dir: Vec<[f64; 5]> = (0..records.len()).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
            let step = |t: f64| -> Vec<[f64; 5]> {
                params
                    .iter()
                    .zip(&dir)
                    .map(|(p, d)| std::array::from_fn(|k| p[k] + t * d[k]))
                    .collect()
            };
            let h = 1e-6;
            let fd = (problem.evaluate(&step(h), false).0 - problem.evaluate(&step(-h), false).0) / (2.0 * h);
            let analytic: f64 = grad.iter().zip(&dir).flat_map(|(g, d)| g.iter().zip(d).map(|(a, b)| a * b)).sum();
            worst = worst.max((fd - analytic).abs() / analytic.abs().max(1e-8));
        }
    }
    hard(
        worst < GRADIENT_REL_TOL,
        format!("max relative deviation {worst:.1e} (< {GRADIENT_REL_TOL:e}) over 10 states x 3 directions"),
    )
}

/// Writes straight to stderr so the lines survive the test harness's
/// output capture.
fn report(n: usize, name: &str, o: &Outcome) {
    let tag = match (o.pass, o.soft) {
        (true, _) => "PASS",
        (false, true) => "SOFT-FAIL",
        (false, false) => "FAIL",
    };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "[{tag}] {n:>2}. {name}: {}", o.detail);
}

#[test]
fn acceptance() {
    let criteria: [(usize, &str, fn() -> Outcome); 7] = [
        (1, "SH correctness", c1_sh_correctness),
        (2, "convolution theorem", c2_convolution),
        (3, "masked sparse fit", c3_masked_fit),
        (4, "spectrum identity", c4_spectrum_identity),
        (5, "entropy behavior", c5_entropy),
        (6, "shadowing/masking ablation", c6_ablation),
        (7, "end-to-end synthetic", c7_end_to_end),
    ];
    let mut failed = Vec::new();
    let mut record = |n: usize, name: &str, o: Outcome| {
        report(n, name, &o);
        if !o.pass && !o.soft {
            failed.push(n);
        }
    };
    for (n, name, f) in criteria {
        record(n, name, f());
    }
    let (scene, fits) = four_environment_fits();
    record(8, "entropy-error correlation", c8_correlation(&scene, &fits));
    record(9, "entropy merge", c9_merge(&scene, &fits));
    record(10, "view sweep", c10_view_sweep());
    record(11, "grid-search latency", c11_grid_latency());
    record(12, "gradient check", c12_gradient());
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
