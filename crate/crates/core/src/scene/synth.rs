//! Synthetic scenes with known materials, used as ground truth.
//!
//! Two renderers are provided. The convolution renderer evaluates the
//! same reflection model the estimator fits. The quadrature renderer
//! integrates a microfacet BRDF with a Beckmann distribution over the
//! hemisphere by importance sampling and shares nothing with the model
//! beyond vector math, which makes it an independent oracle.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::bvh::Ray;
use super::camera::{orbit_cameras, CameraView, Intrinsics};
use super::env::{sample_incoming_at, EnvironmentMap};
use super::frame::Frame;
use super::image::HdrImage;
use super::mesh::Mesh;
use super::SurfaceGeometry;
use crate::brdf::{reflected_light_fitter, render_outgoing, FresnelMode, GeometryTerms, PrincipledParams, ShadingContext};
use crate::error::Result;
use crate::sh::{fibonacci_hemisphere, num_coeffs, Direction};

/// Procedural lighting presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvPreset {
    /// Sharp sun plus a dim sky; `azimuth` and `elevation` place the sun.
    Sun { azimuth: f64, elevation: f64 },
    /// Only broad, low-frequency lighting.
    Overcast,
    /// Several medium-sized area lights.
    Studio,
    /// A single tiny, very bright source over a faint ambient.
    Dirac { azimuth: f64, elevation: f64 },
    /// Uniform radiance.
    Constant(f64),
}

fn lobe(d: &Vector3<f64>, mu: &Vector3<f64>, kappa: f64, amp: f64) -> f64 {
    amp * (kappa * (d.dot(mu) - 1.0)).exp()
}

fn dir_from(azimuth: f64, elevation: f64) -> Vector3<f64> {
    Vector3::new(
        elevation.cos() * azimuth.cos(),
        elevation.cos() * azimuth.sin(),
        elevation.sin(),
    )
}

impl EnvPreset {
    pub fn radiance(&self, d: &Vector3<f64>) -> [f64; 3] {
        let sky = |d: &Vector3<f64>| {
            let t = 0.5 * (d.z + 1.0);
            [0.15 + 0.25 * t, 0.18 + 0.3 * t, 0.25 + 0.4 * t]
        };
        match *self {
            EnvPreset::Sun { azimuth, elevation } => {
                let s = lobe(d, &dir_from(azimuth, elevation), 400.0, 40.0);
                let halo = lobe(d, &dir_from(azimuth, elevation), 30.0, 1.5);
                let k = sky(d);
                [k[0] + s + halo, k[1] + 0.95 * s + halo, k[2] + 0.85 * s + halo]
            }
            EnvPreset::Overcast => {
                let w = lobe(d, &Vector3::z(), 1.5, 1.2);
                let k = sky(d);
                [k[0] + w, k[1] + w, k[2] + w]
            }
            EnvPreset::Studio => {
                let lights = [
                    (dir_from(0.3, 0.6), 60.0, 6.0, [1.0, 0.9, 0.8]),
                    (dir_from(2.4, 0.2), 80.0, 5.0, [0.7, 0.8, 1.0]),
                    (dir_from(4.2, -0.3), 50.0, 4.0, [1.0, 1.0, 1.0]),
                    (dir_from(5.3, 1.1), 120.0, 7.0, [1.0, 0.85, 0.7]),
                ];
                let mut out = [0.1, 0.1, 0.1];
                for (mu, kappa, amp, tint) in lights {
                    let v = lobe(d, &mu, kappa, amp);
                    for c in 0..3 {
                        out[c] += v * tint[c];
                    }
                }
                out
            }
            EnvPreset::Dirac { azimuth, elevation } => {
                let s = lobe(d, &dir_from(azimuth, elevation), 3000.0, 200.0);
                [0.05 + s, 0.05 + s, 0.05 + s]
            }
            EnvPreset::Constant(v) => [v; 3],
        }
    }

    pub fn build(&self, height: usize) -> EnvironmentMap {
        EnvironmentMap::from_fn(height, |d| self.radiance(d)).expect("presets are finite and non-negative")
    }

    /// Four suns from different directions, used for the merge experiment.
    pub fn four_suns() -> [EnvPreset; 4] {
        [
            EnvPreset::Sun { azimuth: 0.2, elevation: 0.5 },
            EnvPreset::Sun { azimuth: 1.8, elevation: -0.4 },
            EnvPreset::Sun { azimuth: 3.4, elevation: 0.9 },
            EnvPreset::Sun { azimuth: 4.9, elevation: -0.1 },
        ]
    }
}

/// Per-texel ground-truth materials; `None` where the texture is not
/// mapped onto the surface.
pub type ParamTexture = Vec<Option<PrincipledParams>>;

/// A `blocks x blocks` grid of random materials with roughness in
/// `roughness_range`.
pub fn patch_materials(
    geom: &SurfaceGeometry,
    blocks: usize,
    roughness_range: (f64, f64),
    seed: u64,
) -> ParamTexture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mats: Vec<PrincipledParams> = (0..blocks * blocks)
        .map(|_| {
            // f32-representable so exported ground truth reads back exactly
            let mut u = |lo: f64, hi: f64| rng.gen_range(lo..hi) as f32 as f64;
            PrincipledParams {
                base_color: [u(0.1, 0.9), u(0.1, 0.9), u(0.1, 0.9)],
                metallic: u(0.0, 1.0),
                roughness: u(roughness_range.0, roughness_range.1),
            }
        })
        .collect();
    let res = geom.resolution();
    geom.texels
        .texels
        .iter()
        .enumerate()
        .map(|(i, t)| {
            t.map(|_| {
                let (x, y) = (i % res, i / res);
                mats[(y * blocks / res) * blocks + x * blocks / res]
            })
        })
        .collect()
}

/// The same material everywhere on the surface.
pub fn uniform_material(geom: &SurfaceGeometry, p: PrincipledParams) -> ParamTexture {
    geom.texels.texels.iter().map(|t| t.map(|_| p)).collect()
}

/// How pixels are shaded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RenderMode {
    /// The estimator's own model at degree `max_degree`.
    Convolution {
        max_degree: usize,
        geometry: GeometryTerms,
        fresnel: FresnelMode,
    },
    /// Importance-sampled hemisphere integral with `samples^2` strata.
    Quadrature { samples: usize },
}

impl RenderMode {
    pub fn convolution(max_degree: usize) -> Self {
        RenderMode::Convolution {
            max_degree,
            geometry: GeometryTerms::BOTH,
            fresnel: FresnelMode::Schlick,
        }
    }
}

/// Shades one surface point seen from `view_local` (local frame).
pub trait PointShader: Sync {
    fn shade(&self, texel: usize, view_local: &Direction) -> [f64; 3];
}

struct ConvolutionShader {
    contexts: Vec<Option<ShadingContext>>,
    params: ParamTexture,
    masking: bool,
    fresnel: FresnelMode,
}

impl PointShader for ConvolutionShader {
    fn shade(&self, texel: usize, view_local: &Direction) -> [f64; 3] {
        let (Some(ctx), Some(p)) = (&self.contexts[texel], &self.params[texel]) else {
            return [0.0; 3];
        };
        let (bp, f) = p.shading(self.fresnel);
        let v = render_outgoing(ctx, &bp, &f, self.masking, std::slice::from_ref(view_local));
        [v[0], v[1], v[2]]
    }
}

/// Shading contexts for every mapped texel under `env`.
pub fn convolution_contexts(
    geom: &SurfaceGeometry,
    env: &EnvironmentMap,
    params: &ParamTexture,
    max_degree: usize,
    shadowing: bool,
) -> Vec<Option<ShadingContext>> {
    let dirs = fibonacci_hemisphere(4 * num_coeffs(max_degree));
    let fitter = reflected_light_fitter(&dirs, max_degree, crate::DEFAULT_LAMBDA).expect("fixed light fit is well posed");
    geom.texels
        .texels
        .par_iter()
        .zip(params)
        .map(|(t, p)| {
            let (t, p) = (t.as_ref()?, p.as_ref()?);
            let inc = sample_incoming_at(env, &t.frame, &dirs);
            ShadingContext::new(&inc, &fitter, shadowing.then(|| p.alpha())).ok()
        })
        .collect()
}

/// Independent hemisphere-quadrature shader.
pub struct QuadratureShader<'a> {
    env: &'a EnvironmentMap,
    frames: Vec<Option<Frame>>,
    params: &'a ParamTexture,
    irradiance: Vec<[f64; 3]>,
    n: usize,
}

impl<'a> QuadratureShader<'a> {
    pub fn new(geom: &SurfaceGeometry, env: &'a EnvironmentMap, params: &'a ParamTexture, samples: usize) -> Self {
        let frames: Vec<Option<Frame>> = geom.texels.texels.iter().map(|t| t.map(|t| t.frame)).collect();
        let irradiance = frames
            .par_iter()
            .map(|f| f.map(|f| cosine_irradiance(env, &f, 2 * samples)).unwrap_or([0.0; 3]))
            .collect();
        QuadratureShader {
            env,
            frames,
            params,
            irradiance,
            n: samples,
        }
    }
}

/// `E = int L cos` by stratified cosine-weighted sampling.
fn cosine_irradiance(env: &EnvironmentMap, frame: &Frame, n: usize) -> [f64; 3] {
    let mut sum = [0.0; 3];
    for i in 0..n {
        for j in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            let v = (j as f64 + 0.5) / n as f64;
            let r = u.sqrt();
            let local = Vector3::new(r * (TAU * v).cos(), r * (TAU * v).sin(), (1.0 - u).sqrt());
            let l = env.lookup(&frame.to_world(&local));
            for c in 0..3 {
                sum[c] += l[c];
            }
        }
    }
    sum.map(|s| PI * s / (n * n) as f64)
}

/// GGX Smith masking through its auxiliary function.
fn ggx_g1_lambda(alpha: f64, cos_t: f64) -> f64 {
    if cos_t <= 0.0 {
        return 0.0;
    }
    let tan2 = (1.0 - cos_t * cos_t).max(0.0) / (cos_t * cos_t);
    let lambda = 0.5 * ((1.0 + alpha * alpha * tan2).sqrt() - 1.0);
    1.0 / (1.0 + lambda)
}

impl PointShader for QuadratureShader<'_> {
    fn shade(&self, texel: usize, view_local: &Direction) -> [f64; 3] {
        let (Some(frame), Some(p)) = (&self.frames[texel], &self.params[texel]) else {
            return [0.0; 3];
        };
        let alpha = p.roughness.max(crate::brdf::MIN_ROUGHNESS).powi(2);
        let wo = view_local.to_vector();
        let cos_o = wo.z;
        if cos_o <= 0.0 {
            return [0.0; 3];
        }
        let mut spec = [0.0; 3];
        let n = self.n;
        for i in 0..n {
            let u1 = (i as f64 + 0.5) / n as f64;
            let tan2 = -alpha * alpha * (1.0 - u1).ln();
            let cos_m = 1.0 / (1.0 + tan2).sqrt();
            let sin_m = (1.0 - cos_m * cos_m).max(0.0).sqrt();
            for j in 0..n {
                // offset rows so strata do not line up in azimuth
                let u2 = (j as f64 + 0.5 + 0.37 * i as f64) / n as f64;
                let phi = TAU * u2;
                let m = Vector3::new(sin_m * phi.cos(), sin_m * phi.sin(), cos_m);
                let om = wo.dot(&m);
                if om <= 0.0 {
                    continue;
                }
                let wi = m * (2.0 * om) - wo;
                if wi.z <= 0.0 {
                    continue;
                }
                let g = ggx_g1_lambda(alpha, wi.z) * ggx_g1_lambda(alpha, cos_o);
                let w = g * om / (cos_o * cos_m);
                let l = self.env.lookup(&frame.to_world(&wi));
                for c in 0..3 {
                    spec[c] += w * l[c];
                }
            }
        }
        let fw = (1.0 - cos_o.clamp(0.0, 1.0)).powi(5);
        let e = self.irradiance[texel];
        std::array::from_fn(|c| {
            let r0 = 0.04 + (p.base_color[c] - 0.04) * p.metallic;
            let f = r0 + (1.0 - r0) * fw;
            p.base_color[c] * e[c] / PI + f * spec[c] / (n * n) as f64
        })
    }
}

/// Renders every view. Each pixel takes the shaded value of the texel its
/// camera ray hits, evaluated at the texel center with the view direction
/// from that center, so projecting the image back recovers the texel's
/// own radiance.
pub fn render_views(geom: &SurfaceGeometry, shader: &dyn PointShader, views: &[CameraView]) -> Vec<HdrImage> {
    views
        .iter()
        .map(|v| {
            let k = v.intrinsics;
            // texel index hit by each pixel
            let hits: Vec<Option<usize>> = (0..k.width * k.height)
                .into_par_iter()
                .map(|i| {
                    let ray: Ray = v.pixel_ray(i % k.width, i / k.width);
                    let h = geom.bvh.intersect(&ray, 1e-9, f64::INFINITY)?;
                    let uv = geom.mesh.uv_at(h.triangle, &h.bary);
                    let t = geom.texels.index_of_uv(&uv);
                    geom.texels.texels[t].map(|_| t)
                })
                .collect();
            let mut unique: Vec<usize> = hits.iter().flatten().copied().collect();
            unique.sort_unstable();
            unique.dedup();
            let shaded: Vec<[f64; 3]> = unique
                .par_iter()
                .map(|&t| {
                    let g = geom.texels.texels[t].unwrap();
                    let d = g.frame.dir_to_local(&(v.position() - g.position));
                    shader.shade(t, &d)
                })
                .collect();
            let mut img = HdrImage::filled(k.width, k.height, [0.0; 3]);
            for (i, h) in hits.iter().enumerate() {
                if let Some(t) = h {
                    let j = unique.binary_search(t).unwrap();
                    img.set_pixel(i % k.width, i / k.width, shaded[j].map(|c| c.max(0.0) as f32));
                }
            }
            img
        })
        .collect()
}

/// Renders `views` of the surface under `env` with the chosen shader and
/// attaches the images.
pub fn synth_generate(
    geom: &SurfaceGeometry,
    env: &EnvironmentMap,
    params: &ParamTexture,
    views: Vec<CameraView>,
    mode: RenderMode,
) -> Result<Vec<CameraView>> {
    let images = match mode {
        RenderMode::Convolution {
            max_degree,
            geometry,
            fresnel,
        } => {
            let shader = ConvolutionShader {
                contexts: convolution_contexts(geom, env, params, max_degree, geometry.shadowing),
                params: params.clone(),
                masking: geometry.masking,
                fresnel,
            };
            render_views(geom, &shader, &views)
        }
        RenderMode::Quadrature { samples } => {
            let shader = QuadratureShader::new(geom, env, params, samples);
            render_views(geom, &shader, &views)
        }
    };
    views.into_iter().zip(images).map(|(v, i)| v.with_image(i)).collect()
}

/// Adds zero-mean Gaussian noise with standard deviation
/// `relative * value + absolute` to every pixel, clamping at zero. Stands
/// in for the sampling noise of a physically based renderer or a sensor.
pub fn add_noise(views: &mut [CameraView], relative: f64, absolute: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::StandardNormal;
    for v in views.iter_mut() {
        let Some(img) = v.image.as_mut() else { continue };
        for x in img.data.iter_mut() {
            let z: f64 = rng.sample(normal);
            let sd = relative * (*x as f64) + absolute;
            *x = (*x as f64 + sd * z).max(0.0) as f32;
        }
    }
}

/// Geometry and cameras of the standard synthetic setup: a unit UV sphere
/// seen by `n_views` cameras spread around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereRig {
    pub resolution: usize,
    pub n_views: usize,
    pub image_size: usize,
    pub distance: f64,
    pub fov: f64,
}

impl Default for SphereRig {
    fn default() -> Self {
        SphereRig {
            resolution: 64,
            n_views: 100,
            image_size: 128,
            distance: 3.5,
            fov: 0.7,
        }
    }
}

impl SphereRig {
    pub fn geometry(&self) -> SurfaceGeometry {
        SurfaceGeometry::new(Mesh::uv_sphere(1.0, 32, 64), self.resolution)
    }

    pub fn cameras(&self) -> Vec<CameraView> {
        let k = Intrinsics::from_fov(self.fov, self.image_size, self.image_size);
        orbit_cameras(self.n_views, self.distance, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_form_matches_closed_form() {
        for &(a, t) in &[(0.1, 0.2), (0.5, 1.0), (0.9, 1.3)] {
            let want = crate::brdf::smith_g1(a, t);
            assert!((ggx_g1_lambda(a, f64::cos(t)) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_diffuse_pixels_ignore_the_view() {
        let rig = SphereRig {
            resolution: 16,
            n_views: 3,
            image_size: 48,
            ..Default::default()
        };
        let geom = rig.geometry();
        let env = EnvPreset::Studio.build(32);
        let p = PrincipledParams::new([0.6, 0.4, 0.2], 0.0, 0.5).unwrap();
        let params = uniform_material(&geom, p);
        let dirs = fibonacci_hemisphere(324);
        let fitter = reflected_light_fitter(&dirs, 8, 1e-4).unwrap();
        let ctx_of = |t: usize| {
            let g = geom.texels.texels[t].unwrap();
            ShadingContext::new(&sample_incoming_at(&env, &g.frame, &dirs), &fitter, None).unwrap()
        };
        let shader = ConvolutionShader {
            contexts: (0..geom.texels.len()).map(|t| Some(ctx_of(t))).collect(),
            params,
            masking: true,
            fresnel: FresnelMode::Schlick,
        };
        // with no specular weight the result is Kd E / pi for any view
        let mut zero = shader;
        zero.params = zero
            .params
            .iter()
            .map(|p| p.map(|p| PrincipledParams { metallic: 0.0, ..p }))
            .collect();
        let ctx = ctx_of(40);
        let (mut bp, _) = zero.params[40].unwrap().shading(FresnelMode::Schlick);
        bp.ks = 0.0;
        let a = render_outgoing(&ctx, &bp, &crate::brdf::Fresnel::One, true, &[Direction::new(0.2, 0.1)]);
        let b = render_outgoing(&ctx, &bp, &crate::brdf::Fresnel::One, true, &[Direction::new(1.2, 2.1)]);
        assert_eq!(a, b);
        assert!((a[0] - 0.6 * ctx.irradiance()[0] / PI).abs() < 1e-12);
    }
}
