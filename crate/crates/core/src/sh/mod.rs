//! Real spherical harmonics: basis evaluation, least-squares transforms,
//! power spectra and zonal convolution.
//!
//! Coefficients are stored degree-major with the flat index
//! `l * l + l + m`, so degree `l` occupies `l*l .. (l+1)*(l+1)`.

mod basis;
mod fit;
mod sampling;

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub use basis::{eval_basis_into, eval_sh_basis, legendre_normalized};
pub use fit::{fit_dense, fit_sparse_regularized, regularizer_weights, Regularizer, SparseFitter};
pub use sampling::{fibonacci_hemisphere, fibonacci_sphere};

/// Number of coefficients for a band limit.
#[inline]
pub const fn num_coeffs(max_degree: usize) -> usize {
    (max_degree + 1) * (max_degree + 1)
}

/// Flat index of `(l, m)`.
#[inline]
pub fn sh_index(l: usize, m: i64) -> usize {
    debug_assert!(m.unsigned_abs() as usize <= l);
    ((l * l + l) as i64 + m) as usize
}

/// Inverse of [`sh_index`].
#[inline]
pub fn sh_degree_order(index: usize) -> (usize, i64) {
    let l = (index as f64).sqrt() as usize;
    // guard against sqrt rounding
    let l = if (l + 1) * (l + 1) <= index { l + 1 } else { l };
    let l = if l * l > index { l - 1 } else { l };
    (l, index as i64 - (l * l + l) as i64)
}

/// A direction on the unit sphere in spherical coordinates. `theta` is the
/// colatitude measured from +z, `phi` the longitude measured from +x
/// towards +y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub theta: f64,
    pub phi: f64,
}

impl Direction {
    /// Clamps `theta` into `[0, pi]` and wraps `phi` into `[0, 2pi)`.
    pub fn new(theta: f64, phi: f64) -> Self {
        let mut phi = phi.rem_euclid(TAU);
        if phi >= TAU {
            phi = 0.0;
        }
        Direction {
            theta: theta.clamp(0.0, PI),
            phi,
        }
    }

    /// Direction of a (not necessarily normalized) non-zero vector.
    pub fn from_vector(v: &Vector3<f64>) -> Self {
        let n = v.norm();
        let z = (v.z / n).clamp(-1.0, 1.0);
        Direction::new(z.acos(), v.y.atan2(v.x))
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }

    #[inline]
    pub fn cos_theta(&self) -> f64 {
        self.theta.cos()
    }

    /// Mirror direction about the +z normal: `(theta, phi + pi)`.
    pub fn mirror(&self) -> Self {
        Direction::new(self.theta, self.phi + PI)
    }
}

/// Power per degree, `S(l) = sum_m c_lm^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub values: Vec<f64>,
}

impl PowerSpectrum {
    pub fn max_degree(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn zeros(max_degree: usize) -> Self {
        PowerSpectrum {
            values: vec![0.0; max_degree + 1],
        }
    }
}

/// Spherical-harmonics coefficients for one or more color channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ShExpansion {
    max_degree: usize,
    channels: usize,
    coeffs: Vec<f64>,
}

/// Rec. 709 luminance weights.
pub const LUMINANCE: [f64; 3] = [0.2126, 0.7152, 0.0722];

impl ShExpansion {
    pub fn zeros(max_degree: usize, channels: usize) -> Self {
        assert!(channels >= 1, "an expansion needs at least one channel");
        ShExpansion {
            max_degree,
            channels,
            coeffs: vec![0.0; channels * num_coeffs(max_degree)],
        }
    }

    /// Builds an expansion from channel-major coefficients.
    pub fn from_coeffs(max_degree: usize, channels: usize, coeffs: Vec<f64>) -> Result<Self> {
        if channels == 0 || coeffs.len() != channels * num_coeffs(max_degree) {
            return Err(Error::invalid(format!(
                "expected {} coefficients for degree {max_degree} and {channels} channel(s), got {}",
                channels * num_coeffs(max_degree),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite coefficient"));
        }
        Ok(ShExpansion {
            max_degree,
            channels,
            coeffs,
        })
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len_per_channel(&self) -> usize {
        num_coeffs(self.max_degree)
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.len_per_channel();
        &self.coeffs[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.len_per_channel();
        &mut self.coeffs[c * n..(c + 1) * n]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, channel: usize, l: usize, m: i64) -> f64 {
        self.channel(channel)[sh_index(l, m)]
    }

    pub fn set_coeff(&mut self, channel: usize, l: usize, m: i64, value: f64) {
        self.channel_mut(channel)[sh_index(l, m)] = value;
    }

    /// Evaluates every channel at `dir`.
    pub fn evaluate(&self, dir: &Direction) -> Vec<f64> {
        let mut basis = vec![0.0; self.len_per_channel()];
        eval_basis_into(dir, self.max_degree, &mut basis);
        (0..self.channels)
            .map(|c| dot(self.channel(c), &basis))
            .collect()
    }

    /// Evaluates one channel using a precomputed basis row.
    pub fn evaluate_with_basis(&self, channel: usize, basis: &[f64]) -> f64 {
        dot(self.channel(channel), basis)
    }

    pub fn power_spectrum(&self, channel: usize) -> PowerSpectrum {
        let c = self.channel(channel);
        PowerSpectrum {
            values: (0..=self.max_degree)
                .map(|l| c[l * l..(l + 1) * (l + 1)].iter().map(|x| x * x).sum())
                .collect(),
        }
    }

    /// Single-channel luminance expansion. The transform is linear so the
    /// luminance of the coefficients equals the coefficients of the luminance.
    pub fn luminance(&self) -> ShExpansion {
        if self.channels == 1 {
            return self.clone();
        }
        assert_eq!(self.channels, 3, "luminance needs 1 or 3 channels");
        let n = self.len_per_channel();
        let coeffs = (0..n)
            .map(|i| (0..3).map(|c| LUMINANCE[c] * self.coeffs[c * n + i]).sum())
            .collect();
        ShExpansion {
            max_degree: self.max_degree,
            channels: 1,
            coeffs,
        }
    }

    /// Multiplies degree `l` by `kernel[l]` in every channel.
    pub fn scale_degrees(&self, kernel: &[f64]) -> ShExpansion {
        assert!(
            kernel.len() > self.max_degree,
            "kernel has {} entries, degree {} needs {}",
            kernel.len(),
            self.max_degree,
            self.max_degree + 1
        );
        let mut out = self.clone();
        let n = self.len_per_channel();
        for c in 0..self.channels {
            for (i, v) in out.coeffs[c * n..(c + 1) * n].iter_mut().enumerate() {
                *v *= kernel[sh_degree_order(i).0];
            }
        }
        out
    }

    /// Integral of one channel over the upper hemisphere `z >= 0`.
    pub fn upper_hemisphere_integral(&self, channel: usize) -> f64 {
        let c = self.channel(channel);
        (0..=self.max_degree)
            .map(|l| c[sh_index(l, 0)] * zonal_hemisphere_integral(l))
            .sum()
    }

    /// Degree-zero coefficient of the channel restricted to the upper
    /// hemisphere (zero below the horizon).
    pub fn upper_hemisphere_dc(&self, channel: usize) -> f64 {
        self.upper_hemisphere_integral(channel) / (4.0 * PI).sqrt()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `int_{z>=0} Y_l0 dw = 2 pi N_l int_0^1 P_l(x) dx`.
fn zonal_hemisphere_integral(l: usize) -> f64 {
    let norm = ((2 * l + 1) as f64 / (4.0 * PI)).sqrt();
    let legendre_integral = if l == 0 {
        1.0
    } else {
        (legendre_at_zero(l - 1) - legendre_at_zero(l + 1)) / (2 * l + 1) as f64
    };
    TAU * norm * legendre_integral
}

/// `P_n(0)`: zero for odd n, `(-1)^(n/2) (n-1)!! / n!!` for even n.
fn legendre_at_zero(n: usize) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    let mut v = 1.0;
    let mut k = 2;
    while k <= n {
        v *= -((k - 1) as f64) / k as f64;
        k += 2;
    }
    v
}

/// Radiance samples over directions in a surface-local frame (+z is the
/// normal). Values are stored sample-major, `channels` values per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalSamples {
    directions: Vec<Direction>,
    channels: usize,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl DirectionalSamples {
    pub fn new(
        directions: Vec<Direction>,
        channels: usize,
        values: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if channels == 0 {
            return Err(Error::invalid("samples need at least one channel"));
        }
        if values.len() != directions.len() * channels || weights.len() != directions.len() {
            return Err(Error::invalid(format!(
                "{} directions, {} values ({} channel(s)), {} weights",
                directions.len(),
                values.len(),
                channels,
                weights.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(format!("radiance {v} is not finite and >= 0")));
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::invalid(format!("weight {w} outside [0, 1]")));
        }
        Ok(DirectionalSamples {
            directions,
            channels,
            values,
            weights,
        })
    }

    /// Samples with unit weights.
    pub fn unweighted(directions: Vec<Direction>, channels: usize, values: Vec<f64>) -> Result<Self> {
        let n = directions.len();
        Self::new(directions, channels, values, vec![1.0; n])
    }

    pub fn empty(channels: usize) -> Self {
        DirectionalSamples {
            directions: Vec::new(),
            channels,
            values: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, sample: usize) -> &[f64] {
        &self.values[sample * self.channels..(sample + 1) * self.channels]
    }

    /// Same directions and weights with new values. Values are validated.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(
            self.directions.clone(),
            self.channels,
            values,
            self.weights.clone(),
        )
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(
            self.directions.clone(),
            self.channels,
            self.values.clone(),
            weights,
        )
    }

    /// Keeps the samples for which `keep` returns true.
    pub fn filter(&self, mut keep: impl FnMut(usize, &Direction) -> bool) -> Self {
        let mut out = DirectionalSamples::empty(self.channels);
        for (i, d) in self.directions.iter().enumerate() {
            if keep(i, d) {
                out.directions.push(*d);
                out.values.extend_from_slice(self.value(i));
                out.weights.push(self.weights[i]);
            }
        }
        out
    }

    pub(crate) fn push(&mut self, dir: Direction, value: &[f64], weight: f64) {
        debug_assert_eq!(value.len(), self.channels);
        self.directions.push(dir);
        self.values.extend_from_slice(value);
        self.weights.push(weight);
    }
}

/// Multiplies degree `l` of `light` by `kernel[l]`.
///
/// # Panics
///
/// If `kernel` is shorter than `max_degree + 1`.
pub fn convolve_isotropic(light: &ShExpansion, kernel: &[f64]) -> ShExpansion {
    light.scale_degrees(kernel)
}

/// Per-channel power spectra.
pub fn power_spectrum(e: &ShExpansion) -> Vec<PowerSpectrum> {
    (0..e.channels()).map(|c| e.power_spectrum(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_map_is_a_bijection() {
        let mut seen = vec![false; num_coeffs(12)];
        for l in 0..=12usize {
            for m in -(l as i64)..=(l as i64) {
                let i = sh_index(l, m);
                assert!(!seen[i]);
                seen[i] = true;
                assert_eq!(sh_degree_order(i), (l, m));
            }
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn direction_round_trips_through_vectors() {
        for &(t, p) in &[(0.3, 1.2), (2.9, 6.0), (1.5707, 3.2), (0.0, 0.0), (PI, 0.0)] {
            let d = Direction::new(t, p);
            let back = Direction::from_vector(&d.to_vector());
            assert!((back.to_vector() - d.to_vector()).norm() < 1e-12);
        }
        let d = Direction::new(1.0, -0.5);
        assert!((d.phi - (TAU - 0.5)).abs() < 1e-15);
        assert!(Direction::new(4.0, 0.0).theta <= PI);
    }

    #[test]
    fn spectrum_of_constant() {
        let mut e = ShExpansion::zeros(4, 1);
        assert!(e.power_spectrum(0).values.iter().all(|v| *v == 0.0));
        e.set_coeff(0, 0, 0, (4.0 * PI).sqrt());
        let s = e.power_spectrum(0);
        assert!((s.values[0] - 4.0 * PI).abs() < 1e-12);
        assert!(s.values[1..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn hemisphere_integral_matches_closed_forms() {
        // constant 1 -> 2 pi; cos(theta) = sqrt(4pi/3) Y_10 -> pi
        let mut e = ShExpansion::zeros(3, 1);
        e.set_coeff(0, 0, 0, (4.0 * PI).sqrt());
        assert!((e.upper_hemisphere_integral(0) - TAU).abs() < 1e-12);
        let mut e = ShExpansion::zeros(3, 1);
        e.set_coeff(0, 1, 0, (4.0 * PI / 3.0).sqrt());
        assert!((e.upper_hemisphere_integral(0) - PI).abs() < 1e-12);
        // P_2 integrates to zero on [0, 1]
        let mut e = ShExpansion::zeros(3, 1);
        e.set_coeff(0, 2, 0, 1.0);
        assert!(e.upper_hemisphere_integral(0).abs() < 1e-14);
    }

    #[test]
    fn samples_reject_bad_inputs() {
        let d = vec![Direction::new(0.1, 0.0)];
        assert!(DirectionalSamples::new(d.clone(), 1, vec![f64::NAN], vec![1.0]).is_err());
        assert!(DirectionalSamples::new(d.clone(), 1, vec![-1.0], vec![1.0]).is_err());
        assert!(DirectionalSamples::new(d.clone(), 1, vec![1.0], vec![1.5]).is_err());
        assert!(DirectionalSamples::new(d.clone(), 3, vec![1.0], vec![1.0]).is_err());
        assert!(DirectionalSamples::new(d, 1, vec![1.0], vec![0.5]).is_ok());
    }

    #[test]
    fn convolution_identity_and_gaussian() {
        let mut e = ShExpansion::zeros(5, 1);
        for i in 0..num_coeffs(5) {
            e.channel_mut(0)[i] = i as f64 * 0.1 - 1.0;
        }
        assert_eq!(convolve_isotropic(&e, &[1.0; 6]), e);
        let k: Vec<f64> = (0..=5).map(|l| (-(0.2 * l as f64).powi(2)).exp()).collect();
        let out = convolve_isotropic(&e, &k);
        let ratio = out.coeff(0, 5, 2) / e.coeff(0, 5, 2);
        assert!((ratio - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    #[should_panic]
    fn convolution_rejects_short_kernel() {
        let e = ShExpansion::zeros(4, 1);
        convolve_isotropic(&e, &[1.0; 3]);
    }
}
