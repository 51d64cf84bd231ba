//! The universal allocation function, the normalized investigation cost and the
//! continuum revenue functional on uniform types.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::special::{kink_weight, log_low_atom};

fn check_eta(eta: f64) -> Result<()> {
    if !(eta >= 0.0) {
        return invalid(format!("eta must be nonnegative, got {eta}"));
    }
    Ok(())
}

/// `w(η) = (e^η - 1 - η) / (e^η + e^{-η} - 2)`.
pub fn w_universal(eta: f64) -> Result<f64> {
    check_eta(eta)?;
    if eta > 700.0 {
        return Ok(1.0);
    }
    Ok(kink_weight(eta, 1.0))
}

pub fn logistic(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// `k(η) = -w log a - (1 - w) log b` with unit-κ atoms `a = (1 - e^{-η})/η`, `b = a e^η`.
pub fn normalized_k(eta: f64) -> Result<f64> {
    check_eta(eta)?;
    if eta < 0.1 {
        let e2 = eta * eta;
        return Ok(
            e2 * (1.0 / 8.0 + e2 * (-1.0 / 192.0 + e2 * (1.0 / 5184.0 + e2 * (-1.0 / 153_600.0 + e2 / 4_838_400.0))))
        );
    }
    if eta > 700.0 {
        // w = 1, a = 1/η
        return Ok(eta.ln());
    }
    Ok(-log_low_atom(eta) - (1.0 - kink_weight(eta, 1.0)) * eta)
}

/// `η(θ) = λ θ / (2γ̂)`.
pub fn eta_continuum(lambda: f64, theta: f64, gamma_hat: f64) -> f64 {
    lambda * theta / (2.0 * gamma_hat)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticGap {
    pub eta: Vec<f64>,
    pub w: Vec<f64>,
    /// `ℓ(η) - w(η)`
    pub gap: Vec<f64>,
    pub argmax: f64,
    pub max_gap: f64,
}

pub fn logistic_gap(eta_grid: &[f64]) -> Result<LogisticGap> {
    if eta_grid.is_empty() {
        return invalid("logistic_gap: empty grid");
    }
    let w = eta_grid.iter().map(|&e| w_universal(e)).collect::<Result<Vec<_>>>()?;
    let gap: Vec<f64> = eta_grid.iter().zip(&w).map(|(&e, &v)| logistic(e) - v).collect();
    let (i, &max_gap) = gap
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    Ok(LogisticGap {
        eta: eta_grid.to_vec(),
        argmax: eta_grid[i],
        max_gap,
        w,
        gap,
    })
}

/// Evenly spaced grid on `[0, eta_max]`.
pub fn eta_grid(eta_max: f64, points: usize) -> Vec<f64> {
    let n = points.max(2) - 1;
    (0..=n).map(|i| eta_max * i as f64 / n as f64).collect()
}

/// `Φ(θ) w(η) - 2γ̂ k(η)` on uniform `[0,1]` types; `λ = 0` gives the
/// no-investigation contribution `Φ(θ)⁺`.
pub fn revenue_integrand(theta: f64, lambda: f64, gamma_hat: f64) -> f64 {
    let phi = 2.0 * theta - 1.0;
    if lambda <= 0.0 {
        return phi.max(0.0);
    }
    let eta = eta_continuum(lambda, theta, gamma_hat);
    phi * w_universal(eta).unwrap_or(1.0) - 2.0 * gamma_hat * normalized_k(eta).unwrap_or(0.0)
}

/// `R[λ]` by composite Simpson on `quadrature_n` intervals (rounded up to even).
pub fn revenue_functional(lambda: &dyn Fn(f64) -> f64, gamma_hat: f64, quadrature_n: usize) -> Result<f64> {
    if !(gamma_hat > 0.0) {
        return invalid(format!("gamma_hat must be positive, got {gamma_hat}"));
    }
    let n = quadrature_n.max(2).div_ceil(2) * 2;
    let h = 1.0 / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let theta = i as f64 * h;
        let l = lambda(theta);
        if !(l >= 0.0 && l.is_finite()) {
            return invalid(format!("lambda({theta}) = {l} is not a nonnegative number"));
        }
        let c = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += c * revenue_integrand(theta, l, gamma_hat);
    }
    Ok(acc * h / 3.0)
}

/// Midpoint discretization `(1/n) Σ_i integrand(θ_i, λ_i)`, `θ_i = (i + 1/2)/n`.
pub fn discretized_revenue(lambdas: &[f64], gamma_hat: f64) -> f64 {
    let n = lambdas.len() as f64;
    lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| revenue_integrand((i as f64 + 0.5) / n, l, gamma_hat))
        .sum::<f64>()
        / n
}
