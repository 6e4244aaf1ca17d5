use nalgebra::{DMatrix, DVector};

use super::{eval_sh_basis, num_coeffs, sh_degree_order, DirectionalSamples, ShExpansion};
use crate::error::{Error, Result};

/// Per-coefficient penalty used by the sparse fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularizer {
    /// `e^l` for every coefficient of degree `l`.
    ExpDegree,
    /// Unit penalty on every coefficient.
    Identity,
}

/// Diagonal of the penalty matrix, one entry per coefficient.
pub fn regularizer_weights(max_degree: usize, reg: Regularizer) -> Vec<f64> {
    (0..num_coeffs(max_degree))
        .map(|i| match reg {
            Regularizer::ExpDegree => (sh_degree_order(i).0 as f64).exp(),
            Regularizer::Identity => 1.0,
        })
        .collect()
}

const PIVOT_RATIO: f64 = 1e-12;

/// Cached solver for fixed sample directions and weights. Holds the
/// projection `(Y^T Ws Y + lambda W)^-1 Y^T Ws` so each fit is one
/// matrix-vector product per channel.
#[derive(Debug, Clone)]
pub struct SparseFitter {
    max_degree: usize,
    n_samples: usize,
    projection: DMatrix<f64>,
}

impl SparseFitter {
    pub fn new(
        samples: &DirectionalSamples,
        max_degree: usize,
        lambda: f64,
        reg: Regularizer,
    ) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        if samples.is_empty() {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        let y = eval_sh_basis(samples.directions(), max_degree);
        let mut yw = y.clone();
        for (i, w) in samples.weights().iter().enumerate() {
            yw.row_mut(i).scale_mut(*w);
        }
        // yw^T is (Y^T Ws)
        let mut a = yw.transpose() * &y;
        for (i, w) in regularizer_weights(max_degree, reg).iter().enumerate() {
            a[(i, i)] += lambda * w;
        }
        let rhs = yw.transpose();
        let projection = solve_spd(a, rhs)?;
        Ok(SparseFitter {
            max_degree,
            n_samples: samples.len(),
            projection,
        })
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Fits values laid out like [`DirectionalSamples::values`].
    pub fn fit_values(&self, values: &[f64], channels: usize) -> ShExpansion {
        assert_eq!(values.len(), self.n_samples * channels);
        let k = num_coeffs(self.max_degree);
        let mut coeffs = vec![0.0; k * channels];
        for c in 0..channels {
            let f = DVector::from_iterator(
                self.n_samples,
                (0..self.n_samples).map(|i| values[i * channels + c]),
            );
            let out = &self.projection * f;
            coeffs[c * k..(c + 1) * k].copy_from_slice(out.as_slice());
        }
        ShExpansion::from_coeffs(self.max_degree, channels, coeffs)
            .expect("projection of finite values is finite")
    }

    /// Fits a single channel given one value per sample.
    pub fn fit_scalar(&self, values: &[f64]) -> ShExpansion {
        self.fit_values(values, 1)
    }

    pub fn fit(&self, samples: &DirectionalSamples) -> ShExpansion {
        self.fit_values(samples.values(), samples.channels())
    }
}

/// Solves `A X = B` for symmetric positive definite `A`.
fn solve_spd(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = a.cholesky().ok_or(Error::SingularSystem)?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d * d), hi.max(d * d)));
    if !(lo / hi > PIVOT_RATIO) {
        return Err(Error::SingularSystem);
    }
    Ok(chol.solve(&b))
}

/// Least-squares transform of samples covering the full sphere. On a
/// quasi-uniform set this approximates the inner-product integral and is
/// exact for bandlimited input.
pub fn fit_dense(samples: &DirectionalSamples, max_degree: usize) -> Result<ShExpansion> {
    let needed = num_coeffs(max_degree);
    if samples.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            got: samples.len(),
        });
    }
    let unit = samples.with_weights(vec![1.0; samples.len()])?;
    Ok(SparseFitter::new(&unit, max_degree, 0.0, Regularizer::Identity)?.fit(samples))
}

/// Weighted, Tikhonov-regularized fit with an `e^l` penalty.
pub fn fit_sparse_regularized(
    samples: &DirectionalSamples,
    max_degree: usize,
    lambda: f64,
) -> Result<ShExpansion> {
    Ok(SparseFitter::new(samples, max_degree, lambda, Regularizer::ExpDegree)?.fit(samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sh::{fibonacci_hemisphere, fibonacci_sphere, Direction};
    use std::f64::consts::PI;

    fn synth(coeffs: &ShExpansion, dirs: Vec<Direction>) -> DirectionalSamples {
        let vals = dirs.iter().map(|d| coeffs.evaluate(d)[0]).collect();
        DirectionalSamples::unweighted(dirs, 1, vals).unwrap()
    }

    #[test]
    fn constant_function() {
        let dirs = fibonacci_sphere(1024);
        let s = DirectionalSamples::unweighted(dirs, 1, vec![1.0; 1024]).unwrap();
        let e = fit_dense(&s, 4).unwrap();
        assert!((e.coeff(0, 0, 0) - (4.0 * PI).sqrt()).abs() < 1e-6);
        assert!(e.channel(0)[1..].iter().all(|c| c.abs() < 1e-6));
    }

    #[test]
    fn too_few_samples() {
        let s = DirectionalSamples::unweighted(fibonacci_sphere(10), 1, vec![1.0; 10]).unwrap();
        assert!(matches!(
            fit_dense(&s, 3),
            Err(Error::InsufficientSamples { needed: 16, got: 10 })
        ));
    }

    #[test]
    fn hemisphere_unregularized_is_exact() {
        let mut e = ShExpansion::zeros(3, 1);
        for i in 0..16 {
            e.channel_mut(0)[i] = ((i * 7 % 5) as f64 - 2.0) * 0.3;
        }
        e.channel_mut(0)[0] = 6.0;
        let s = synth(&e, fibonacci_hemisphere(100));
        let got = fit_sparse_regularized(&s, 3, 0.0).unwrap();
        for (a, b) in got.coeffs().iter().zip(e.coeffs()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn underdetermined_without_penalty_is_singular() {
        let s = DirectionalSamples::unweighted(fibonacci_hemisphere(20), 1, vec![1.0; 20]).unwrap();
        assert!(matches!(
            fit_sparse_regularized(&s, 6, 0.0),
            Err(Error::SingularSystem)
        ));
        assert!(fit_sparse_regularized(&s, 6, 1e-4).is_ok());
    }

    #[test]
    fn huge_penalty_drives_coefficients_to_zero() {
        let s = DirectionalSamples::unweighted(fibonacci_hemisphere(50), 1, vec![2.0; 50]).unwrap();
        let e = fit_sparse_regularized(&s, 4, 1e12).unwrap();
        assert!(e.coeffs().iter().all(|c| c.abs() < 1e-8));
    }

    #[test]
    fn channels_share_the_factorization() {
        let dirs = fibonacci_hemisphere(60);
        let vals: Vec<f64> = (0..180).map(|i| (i % 11) as f64 * 0.1).collect();
        let s = DirectionalSamples::unweighted(dirs.clone(), 3, vals.clone()).unwrap();
        let rgb = fit_sparse_regularized(&s, 4, 1e-4).unwrap();
        let g: Vec<f64> = (0..60).map(|i| vals[3 * i + 1]).collect();
        let s1 = DirectionalSamples::unweighted(dirs, 1, g).unwrap();
        let single = fit_sparse_regularized(&s1, 4, 1e-4).unwrap();
        for (a, b) in rgb.channel(1).iter().zip(single.channel(0)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
