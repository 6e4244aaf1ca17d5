use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;

use super::{num_coeffs, sh_index, Direction};

/// Fully normalized associated Legendre values `N_lm P_l^m(cos theta)` for
/// `m >= 0`, without the Condon-Shortley phase, stored at `sh_index(l, m)`.
/// Entries for negative `m` are left untouched.
pub fn legendre_normalized(cos_theta: f64, max_degree: usize, out: &mut [f64]) {
    let x = cos_theta.clamp(-1.0, 1.0);
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=max_degree {
        if m > 0 {
            pmm *= s * ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
        }
        out[sh_index(m, m as i64)] = pmm;
        if m == max_degree {
            break;
        }
        let mut prev2 = pmm;
        let mut prev1 = x * ((2 * m + 3) as f64).sqrt() * pmm;
        out[sh_index(m + 1, m as i64)] = prev1;
        for l in (m + 2)..=max_degree {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let l1 = lf - 1.0;
            let b = ((l1 * l1 - mf * mf) / (4.0 * l1 * l1 - 1.0)).sqrt();
            let cur = a * (x * prev1 - b * prev2);
            out[sh_index(l, m as i64)] = cur;
            prev2 = prev1;
            prev1 = cur;
        }
    }
}

/// Writes every real orthonormal `Y_lm(dir)` up to `max_degree` into `out`.
pub fn eval_basis_into(dir: &Direction, max_degree: usize, out: &mut [f64]) {
    assert!(out.len() >= num_coeffs(max_degree));
    legendre_normalized(dir.theta.cos(), max_degree, out);
    for m in 1..=max_degree {
        let (sin_m, cos_m) = (m as f64 * dir.phi).sin_cos();
        for l in m..=max_degree {
            let p = out[sh_index(l, m as i64)] * SQRT_2;
            out[sh_index(l, m as i64)] = p * cos_m;
            out[sh_index(l, -(m as i64))] = p * sin_m;
        }
    }
}

/// Basis matrix with one row per direction and one column per `(l, m)`.
pub fn eval_sh_basis(dirs: &[Direction], max_degree: usize) -> DMatrix<f64> {
    let k = num_coeffs(max_degree);
    let mut m = DMatrix::zeros(dirs.len(), k);
    let mut row = vec![0.0; k];
    for (i, d) in dirs.iter().enumerate() {
        eval_basis_into(d, max_degree, &mut row);
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn y(l: usize, m: i64, theta: f64, phi: f64) -> f64 {
        let mut row = vec![0.0; num_coeffs(l)];
        eval_basis_into(&Direction::new(theta, phi), l, &mut row);
        row[sh_index(l, m)]
    }

    #[test]
    fn low_degree_closed_forms() {
        let (t, p): (f64, f64) = (0.7, 1.9);
        let (st, ct) = (t.sin(), t.cos());
        let c1 = (3.0 / (4.0 * PI)).sqrt();
        assert!((y(0, 0, t, p) - 0.282_094_791_773_878_1).abs() < 1e-15);
        assert!((y(1, 0, t, p) - c1 * ct).abs() < 1e-14);
        assert!((y(1, 1, t, p) - c1 * st * p.cos()).abs() < 1e-14);
        assert!((y(1, -1, t, p) - c1 * st * p.sin()).abs() < 1e-14);
        let c20 = (5.0 / (16.0 * PI)).sqrt();
        assert!((y(2, 0, t, p) - c20 * (3.0 * ct * ct - 1.0)).abs() < 1e-14);
        let c21 = (15.0 / (4.0 * PI)).sqrt();
        assert!((y(2, 1, t, p) - c21 * st * ct * p.cos()).abs() < 1e-14);
        let c22 = (15.0 / (16.0 * PI)).sqrt();
        assert!((y(2, -2, t, p) - c22 * st * st * (2.0 * p).sin()).abs() < 1e-14);
    }

    #[test]
    fn north_pole_is_zonal() {
        let mut row = vec![0.0; num_coeffs(10)];
        eval_basis_into(&Direction::new(0.0, 1.3), 10, &mut row);
        for l in 0..=10usize {
            for m in -(l as i64)..=(l as i64) {
                let v = row[sh_index(l, m)];
                if m == 0 {
                    assert!((v - ((2 * l + 1) as f64 / (4.0 * PI)).sqrt()).abs() < 1e-12);
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn matrix_rows_match_pointwise_evaluation() {
        let dirs = [Direction::new(0.3, 0.2), Direction::new(2.0, 5.0)];
        let m = eval_sh_basis(&dirs, 6);
        assert_eq!(m.shape(), (2, 49));
        assert!((m[(1, sh_index(5, -3))] - y(5, -3, 2.0, 5.0)).abs() < 1e-15);
    }
}
