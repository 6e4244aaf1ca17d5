//! The convolution reflection model: microfacet filter, shadowing and
//! masking, Fresnel, the diffuse term and the principled parameter mapping.
//!
//! Specular light is handled in a "reflected" parametrization: the light
//! expansion stored in a [`ShadingContext`] holds `L(mirror(w))` at `w`, so
//! filtering it and evaluating at the view direction gives the specular lobe
//! around the mirror direction.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::sh::{eval_basis_into, num_coeffs, Direction, DirectionalSamples, ShExpansion, SparseFitter};

/// Frequency response of the microfacet lobe, `exp(-(alpha l)^2)`.
#[inline]
pub fn filter_coeff(alpha: f64, degree: usize) -> f64 {
    let x = alpha * degree as f64;
    (-x * x).exp()
}

/// [`filter_coeff`] for every degree up to `max_degree`.
pub fn filter_kernel(alpha: f64, max_degree: usize) -> Vec<f64> {
    (0..=max_degree).map(|l| filter_coeff(alpha, l)).collect()
}

/// Smith G1 for the GGX distribution. Zero at and beyond grazing.
#[inline]
pub fn smith_g1(alpha: f64, theta: f64) -> f64 {
    if theta >= FRAC_PI_2 {
        return 0.0;
    }
    let t = theta.tan();
    2.0 / (1.0 + (1.0 + alpha * alpha * t * t).sqrt())
}

/// Derivative of [`smith_g1`] with respect to `alpha`.
#[inline]
pub fn smith_g1_dalpha(alpha: f64, theta: f64) -> f64 {
    if theta >= FRAC_PI_2 {
        return 0.0;
    }
    let t2 = theta.tan().powi(2);
    let s = (1.0 + alpha * alpha * t2).sqrt();
    -2.0 / (1.0 + s).powi(2) * alpha * t2 / s
}

/// Schlick's approximation driven by the outgoing angle only.
pub fn fresnel_schlick(r0: &[f64; 3], theta_o: f64) -> [f64; 3] {
    let t = schlick_weight(theta_o);
    r0.map(|r| r + (1.0 - r) * t)
}

#[inline]
pub(crate) fn schlick_weight(theta_o: f64) -> f64 {
    (1.0 - theta_o.cos().clamp(0.0, 1.0)).powi(5)
}

/// Microfacet parameters: per-channel diffuse albedo, scalar specular
/// weight and lobe width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrdfParams {
    pub kd: [f64; 3],
    pub ks: f64,
    pub alpha: f64,
}

impl BrdfParams {
    pub fn new(kd: [f64; 3], ks: f64, alpha: f64) -> Result<Self> {
        let p = BrdfParams { kd, ks, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !self.kd.iter().all(|k| unit(*k)) || !unit(self.ks) {
            return Err(Error::invalid(format!("reflectances out of [0, 1]: {self:?}")));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        Ok(())
    }
}

/// Artist-facing parameters: base color, metallic, roughness.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PrincipledParams {
    pub base_color: [f64; 3],
    pub metallic: f64,
    pub roughness: f64,
}

/// Smallest roughness the optimizer and mapping will produce.
pub const MIN_ROUGHNESS: f64 = 0.01;

impl PrincipledParams {
    /// All parameters at 0.5, used where nothing can be recovered.
    pub const PRIOR: PrincipledParams = PrincipledParams {
        base_color: [0.5; 3],
        metallic: 0.5,
        roughness: 0.5,
    };

    pub fn new(base_color: [f64; 3], metallic: f64, roughness: f64) -> Result<Self> {
        let p = PrincipledParams {
            base_color,
            metallic,
            roughness,
        };
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !base_color.iter().all(|c| unit(*c)) || !unit(metallic) || !unit(roughness) {
            return Err(Error::invalid(format!("principled parameters out of [0, 1]: {p:?}")));
        }
        Ok(p)
    }

    /// Packs to `[r, g, b, metallic, roughness]`.
    pub fn to_array(&self) -> [f64; 5] {
        let [r, g, b] = self.base_color;
        [r, g, b, self.metallic, self.roughness]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        PrincipledParams {
            base_color: [a[0], a[1], a[2]],
            metallic: a[3],
            roughness: a[4],
        }
    }

    pub fn alpha(&self) -> f64 {
        self.roughness.max(MIN_ROUGHNESS).powi(2)
    }

    pub fn r0(&self) -> [f64; 3] {
        self.base_color.map(|b| 0.04 + (b - 0.04) * self.metallic)
    }

    /// Shading parameters for the given Fresnel handling.
    pub fn shading(&self, mode: FresnelMode) -> (BrdfParams, Fresnel) {
        let (p, r0) = principled_to_ts(self);
        match mode {
            FresnelMode::Schlick => (p, Fresnel::Schlick(r0)),
            FresnelMode::Disabled => (p, Fresnel::Constant(r0)),
        }
    }
}

/// `Kd = Rb`, `Ks = 1`, `R0 = 0.04 + (Rb - 0.04) m`, `alpha = r^2`.
pub fn principled_to_ts(p: &PrincipledParams) -> (BrdfParams, [f64; 3]) {
    (
        BrdfParams {
            kd: p.base_color,
            ks: 1.0,
            alpha: p.alpha(),
        },
        p.r0(),
    )
}

/// How the principled mapping treats Fresnel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FresnelMode {
    #[default]
    Schlick,
    /// Ablation mode: the specular weight becomes `R0` with no angular boost.
    Disabled,
}

/// Per-channel Fresnel factor applied to the specular lobe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fresnel {
    /// `F = 1`.
    One,
    Schlick([f64; 3]),
    Constant([f64; 3]),
}

impl Fresnel {
    pub fn eval(&self, theta_o: f64) -> [f64; 3] {
        match self {
            Fresnel::One => [1.0; 3],
            Fresnel::Schlick(r0) => fresnel_schlick(r0, theta_o),
            Fresnel::Constant(r0) => *r0,
        }
    }
}

/// Which microfacet occlusion terms the model includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeometryTerms {
    pub shadowing: bool,
    pub masking: bool,
}

impl GeometryTerms {
    pub const BOTH: GeometryTerms = GeometryTerms {
        shadowing: true,
        masking: true,
    };
    pub const NONE: GeometryTerms = GeometryTerms {
        shadowing: false,
        masking: false,
    };
}

impl Default for GeometryTerms {
    fn default() -> Self {
        Self::BOTH
    }
}

/// Scales each sample by `G1(alpha, theta_i)`.
pub fn shadow_attenuate(light: &DirectionalSamples, alpha: f64) -> DirectionalSamples {
    let c = light.channels();
    let mut values = light.values().to_vec();
    for (i, d) in light.directions().iter().enumerate() {
        let g = smith_g1(alpha, d.theta);
        values[i * c..(i + 1) * c].iter_mut().for_each(|v| *v *= g);
    }
    light
        .with_values(values)
        .expect("attenuation keeps values finite and non-negative")
}

/// Hemisphere quadrature of `L cos(theta)` with uniform weights `2 pi / n`.
pub fn irradiance(light: &DirectionalSamples) -> Result<Vec<f64>> {
    if light.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let c = light.channels();
    let mut e = vec![0.0; c];
    for (i, d) in light.directions().iter().enumerate() {
        let ct = d.cos_theta().max(0.0);
        for (k, v) in light.value(i).iter().enumerate() {
            e[k] += v * ct;
        }
    }
    let w = 2.0 * PI / light.len() as f64;
    Ok(e.into_iter().map(|x| x * w).collect())
}

/// Builds the fitter for the reflected light parametrization: the light
/// sample at `w` is placed at `mirror(w)`.
pub fn reflected_light_fitter(
    incoming_dirs: &[Direction],
    max_degree: usize,
    lambda: f64,
) -> Result<SparseFitter> {
    let mirrored: Vec<Direction> = incoming_dirs.iter().map(Direction::mirror).collect();
    let n = mirrored.len();
    let s = DirectionalSamples::unweighted(mirrored, 1, vec![0.0; n])?;
    SparseFitter::new(&s, max_degree, lambda, crate::sh::Regularizer::ExpDegree)
}

/// Lighting at one surface point in its local frame.
#[derive(Debug, Clone)]
pub struct ShadingContext {
    irradiance: Vec<f64>,
    light: ShExpansion,
    shadowed: ShExpansion,
    alpha_shadow: Option<f64>,
}

impl ShadingContext {
    /// `incoming` holds the environment in the local frame on the same
    /// directions `fitter` was built from (see [`reflected_light_fitter`]).
    /// `alpha_shadow = None` disables shadowing.
    pub fn new(
        incoming: &DirectionalSamples,
        fitter: &SparseFitter,
        alpha_shadow: Option<f64>,
    ) -> Result<Self> {
        let irradiance = irradiance(incoming)?;
        let light = fitter.fit(incoming);
        let shadowed = match alpha_shadow {
            Some(a) => fitter.fit(&shadow_attenuate(incoming, a)),
            None => light.clone(),
        };
        Ok(ShadingContext {
            irradiance,
            light,
            shadowed,
            alpha_shadow,
        })
    }

    /// Assembles a context from precomputed parts.
    pub fn from_parts(
        irradiance: Vec<f64>,
        light: ShExpansion,
        shadowed: ShExpansion,
        alpha_shadow: Option<f64>,
    ) -> Result<Self> {
        if irradiance.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::invalid("irradiance must be finite and >= 0"));
        }
        if light.max_degree() != shadowed.max_degree() || light.channels() != shadowed.channels() {
            return Err(Error::invalid("light expansions disagree in shape"));
        }
        Ok(ShadingContext {
            irradiance,
            light,
            shadowed,
            alpha_shadow,
        })
    }

    /// Refits the shadowed expansion at a new `alpha`.
    pub fn refresh_shadow(&mut self, incoming: &DirectionalSamples, fitter: &SparseFitter, alpha: f64) {
        self.shadowed = fitter.fit(&shadow_attenuate(incoming, alpha));
        self.alpha_shadow = Some(alpha);
    }

    pub fn irradiance(&self) -> &[f64] {
        &self.irradiance
    }

    pub fn light(&self) -> &ShExpansion {
        &self.light
    }

    pub fn shadowed(&self) -> &ShExpansion {
        &self.shadowed
    }

    pub fn alpha_shadow(&self) -> Option<f64> {
        self.alpha_shadow
    }

    pub fn max_degree(&self) -> usize {
        self.light.max_degree()
    }

    pub fn channels(&self) -> usize {
        self.light.channels()
    }

    /// Specular expansion before masking and Fresnel: `Ks S_alpha * G L`.
    pub fn specular_expansion(&self, params: &BrdfParams) -> ShExpansion {
        let k: Vec<f64> = filter_kernel(params.alpha, self.max_degree())
            .into_iter()
            .map(|f| f * params.ks)
            .collect();
        self.shadowed.scale_degrees(&k)
    }
}

/// Outgoing radiance at each direction, sample-major with one value per
/// channel, clamped at zero.
pub fn render_outgoing(
    ctx: &ShadingContext,
    params: &BrdfParams,
    fresnel: &Fresnel,
    masking: bool,
    out_dirs: &[Direction],
) -> Vec<f64> {
    let c = ctx.channels();
    let spec = ctx.specular_expansion(params);
    let mut basis = vec![0.0; num_coeffs(ctx.max_degree())];
    let mut out = Vec::with_capacity(out_dirs.len() * c);
    for d in out_dirs {
        eval_basis_into(d, ctx.max_degree(), &mut basis);
        let f = fresnel.eval(d.theta);
        let g = if masking { smith_g1(params.alpha, d.theta) } else { 1.0 };
        for ch in 0..c {
            let diffuse = params.kd[ch.min(2)] * ctx.irradiance[ch] / PI;
            let s = spec.evaluate_with_basis(ch, &basis);
            out.push((diffuse + f[ch.min(2)] * g * s).max(0.0));
        }
    }
    out
}

/// Per-degree partial sums `q_l = sum_m c_lm Y_lm(dir)` for every channel,
/// laid out channel-major. Filtering then reduces to a weighted sum over `l`.
pub fn degree_partials(e: &ShExpansion, basis: &[f64]) -> Vec<f64> {
    let n = e.max_degree() + 1;
    let mut q = vec![0.0; e.channels() * n];
    for c in 0..e.channels() {
        let coeffs = e.channel(c);
        for l in 0..n {
            q[c * n + l] = coeffs[l * l..(l + 1) * (l + 1)]
                .iter()
                .zip(&basis[l * l..(l + 1) * (l + 1)])
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sh::fibonacci_hemisphere;

    #[test]
    fn filter_values() {
        assert_eq!(filter_coeff(0.3, 0), 1.0);
        assert!((filter_coeff(0.2, 5) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((filter_coeff(1.0, 3) - (-9.0f64).exp()).abs() < 1e-18);
        assert!(filter_coeff(0.3, 4) < filter_coeff(0.2, 4));
        assert!(filter_coeff(0.3, 5) < filter_coeff(0.3, 4));
    }

    #[test]
    fn smith_values() {
        assert_eq!(smith_g1(0.7, 0.0), 1.0);
        let want = 2.0 / (1.0 + (1.0f64 + 0.25 * 3.0).sqrt());
        assert!((smith_g1(0.5, PI / 3.0) - want).abs() < 1e-12);
        assert!((smith_g1(0.5, PI / 3.0) - 0.861_0).abs() < 1e-4);
        assert_eq!(smith_g1(0.5, FRAC_PI_2), 0.0);
        assert!(smith_g1(0.5, 1.0) > smith_g1(0.5, 1.2));
        assert!(smith_g1(0.4, 1.0) > smith_g1(0.6, 1.0));
    }

    #[test]
    fn smith_derivative_matches_differences() {
        for &(a, t) in &[(0.1, 0.3), (0.5, 1.0), (0.9, 1.4)] {
            let h = 1e-6;
            let fd = (smith_g1(a + h, t) - smith_g1(a - h, t)) / (2.0 * h);
            assert!((fd - smith_g1_dalpha(a, t)).abs() < 1e-8);
        }
    }

    #[test]
    fn fresnel_values() {
        let r0 = [0.04, 0.5, 0.9];
        assert_eq!(fresnel_schlick(&r0, 0.0), r0);
        assert!(fresnel_schlick(&r0, FRAC_PI_2).iter().all(|f| (f - 1.0).abs() < 1e-12));
        let f = fresnel_schlick(&[0.04; 3], PI / 3.0);
        assert!((f[0] - 0.07).abs() < 1e-12);
    }

    #[test]
    fn principled_mapping() {
        let p = PrincipledParams::new([0.7, 0.2, 0.5], 0.0, 0.5).unwrap();
        let (ts, r0) = principled_to_ts(&p);
        assert_eq!(ts.kd, [0.7, 0.2, 0.5]);
        assert_eq!(ts.ks, 1.0);
        assert!((ts.alpha - 0.25).abs() < 1e-15);
        assert!(r0.iter().all(|r| (r - 0.04).abs() < 1e-15));
        let p = PrincipledParams::new([0.7, 0.2, 0.5], 1.0, 0.5).unwrap();
        assert_eq!(principled_to_ts(&p).1, [0.7, 0.2, 0.5]);
        assert!(PrincipledParams::new([1.2, 0.0, 0.0], 0.0, 0.5).is_err());
    }

    fn constant_context(value: f64) -> (ShadingContext, DirectionalSamples, SparseFitter) {
        let dirs = fibonacci_hemisphere(4 * 25);
        let n = dirs.len();
        let inc = DirectionalSamples::unweighted(dirs.clone(), 3, vec![value; 3 * n]).unwrap();
        let fitter = reflected_light_fitter(&dirs, 4, 1e-4).unwrap();
        let ctx = ShadingContext::new(&inc, &fitter, Some(0.3)).unwrap();
        (ctx, inc, fitter)
    }

    #[test]
    fn irradiance_of_constant_light() {
        let (ctx, _, _) = constant_context(1.0);
        assert!(ctx.irradiance().iter().all(|e| (e - PI).abs() / PI < 0.02));
        let (ctx, _, _) = constant_context(0.0);
        assert!(ctx.irradiance().iter().all(|e| *e == 0.0));
        let empty = DirectionalSamples::empty(1);
        assert!(irradiance(&empty).is_err());
    }

    #[test]
    fn pure_diffuse_is_view_independent() {
        let (ctx, _, _) = constant_context(2.0);
        let p = BrdfParams::new([0.3, 0.6, 0.9], 0.0, 0.2).unwrap();
        let dirs = fibonacci_hemisphere(20);
        let b = render_outgoing(&ctx, &p, &Fresnel::One, true, &dirs);
        for (i, v) in b.iter().enumerate() {
            let want = p.kd[i % 3] * ctx.irradiance()[i % 3] / PI;
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn shadow_attenuation_limits() {
        let dirs = vec![Direction::new(0.0, 0.0), Direction::new(PI / 3.0, 1.0)];
        let s = DirectionalSamples::unweighted(dirs, 1, vec![1.0, 1.0]).unwrap();
        let a = shadow_attenuate(&s, 0.5);
        assert_eq!(a.values()[0], 1.0);
        assert!((a.values()[1] - smith_g1(0.5, PI / 3.0)).abs() < 1e-15);
        let tiny = shadow_attenuate(&s, 1e-6);
        assert!((tiny.values()[1] - 1.0).abs() < 1e-6);
        assert_eq!(a.weights(), s.weights());
    }

    #[test]
    fn specular_is_linear_in_light() {
        let dirs = fibonacci_hemisphere(100);
        let vals: Vec<f64> = (0..300).map(|i| ((i * 37) % 17) as f64 * 0.1).collect();
        let fitter = reflected_light_fitter(&dirs, 4, 1e-4).unwrap();
        let s1 = DirectionalSamples::unweighted(dirs.clone(), 3, vals.clone()).unwrap();
        let s2 = s1.with_values(vals.iter().map(|v| 2.0 * v).collect()).unwrap();
        let c1 = ShadingContext::new(&s1, &fitter, Some(0.2)).unwrap();
        let c2 = ShadingContext::new(&s2, &fitter, Some(0.2)).unwrap();
        let p = BrdfParams::new([0.0; 3], 0.8, 0.2).unwrap();
        let e1 = c1.specular_expansion(&p);
        let e2 = c2.specular_expansion(&p);
        for (a, b) in e1.coeffs().iter().zip(e2.coeffs()) {
            assert!((2.0 * a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }
}
