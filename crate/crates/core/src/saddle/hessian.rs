//! Curvature of the continuum revenue functional at the Myerson multiplier.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::analysis::universal::discretized_revenue;
use crate::error::{invalid, Result};

/// Central finite-difference Hessian of `f` at `x`.
pub fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut m = DMatrix::zeros(n, n);
    let mut y = x.to_vec();
    let f0 = f(x);
    for i in 0..n {
        y[i] = x[i] + h;
        let up = f(&y);
        y[i] = x[i] - h;
        let down = f(&y);
        y[i] = x[i];
        m[(i, i)] = (up - 2.0 * f0 + down) / (h * h);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                y[i] = x[i] + si * h;
                y[j] = x[j] + sj * h;
                let v = f(&y);
                y[i] = x[i];
                y[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Eigenvalues in increasing order.
pub fn symmetric_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessianReport {
    pub gamma_hat: f64,
    pub points: usize,
    pub step: f64,
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Largest relative change of an eigenvalue when the step is halved.
    pub step_sensitivity: f64,
    pub has_positive: bool,
}

/// Hessian of the midpoint-discretized `R[λ]` at `λ(θ) = 1 - θ` on uniform types.
pub fn myerson_hessian_check(gamma_hat: f64, points: usize) -> Result<HessianReport> {
    if !(gamma_hat > 0.0 && gamma_hat.is_finite()) {
        return invalid(format!("gamma_hat must be positive, got {gamma_hat}"));
    }
    if points < 2 {
        return invalid("need at least two grid points");
    }
    let lam: Vec<f64> = (0..points).map(|i| 1.0 - (i as f64 + 0.5) / points as f64).collect();
    let f = |l: &[f64]| discretized_revenue(l, gamma_hat);
    let step = 1e-3 * lam.iter().fold(f64::INFINITY, |a, &b| a.min(b)).min(1.0);
    let eig = symmetric_eigenvalues(fd_hessian(&f, &lam, step));
    let half = symmetric_eigenvalues(fd_hessian(&f, &lam, step / 2.0));
    let step_sensitivity = eig
        .iter()
        .zip(&half)
        .map(|(a, b)| (a - b).abs() / a.abs().max(1e-300))
        .fold(0.0, f64::max);
    let max = *eig.last().unwrap();
    Ok(HessianReport {
        gamma_hat,
        points,
        step,
        min_eigenvalue: eig[0],
        max_eigenvalue: max,
        step_sensitivity,
        has_positive: max > 0.0,
        eigenvalues: eig,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_has_exact_eigenvalues() {
        // f = x0² + 3 x1² - x2² + x0 x1; Hessian [[2,1,0],[1,6,0],[0,0,-2]].
        let f = |x: &[f64]| x[0] * x[0] + 3.0 * x[1] * x[1] - x[2] * x[2] + x[0] * x[1];
        let e = symmetric_eigenvalues(fd_hessian(&f, &[0.3, -0.2, 1.1], 1e-3));
        let s = 5f64.sqrt();
        let exact = [-2.0, 4.0 - s, 4.0 + s];
        for (a, b) in e.iter().zip(exact) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn estimates_are_stable_under_step_halving() {
        let r = myerson_hessian_check(0.5, 20).unwrap();
        assert_eq!(r.eigenvalues.len(), 20);
        assert!(r.step_sensitivity < 1e-2, "{}", r.step_sensitivity);
    }
}
