//! Outer minimisation of the dual over the multipliers.
//!
//! Projected gradient descent with finite-difference gradients runs first from
//! the Myerson multipliers; a column-generation polish then solves the boxed
//! dual exactly and supplies a primal mechanism consistent with the multipliers.

mod check;
mod hessian;

pub use check::{saddle_check, saddle_check_at, SaddleCheck};
pub use hessian::{fd_hessian, myerson_hessian_check, symmetric_eigenvalues, HessianReport};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concavify::{concavify_at_mean, DEFAULT_GRID_POINTS};
use crate::error::{invalid, Result};
use crate::screening::dual::{
    myerson_multipliers, report_coefficients, report_mfunction, solve_inner, MechanismSolution, MultiplierVector,
    TransferMargin,
};
use crate::screening::feasibility::check_primal;
use crate::screening::instance::ScreeningInstance;
use crate::screening::primal::{recover_primal, PrimalRecovery, RecoveryOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaddleConfig {
    pub initial_step: f64,
    /// Backtracking factor.
    pub decay: f64,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    pub max_iter: usize,
    /// Box bound `λ̄`; `None` uses twice the largest Myerson multiplier.
    pub lambda_bar: Option<f64>,
    /// Relative dual change over `stall_window` iterations.
    pub rel_tol: f64,
    pub stall_window: usize,
    /// Projected-gradient norm.
    pub grad_tol: f64,
    /// Finite-difference step, scaled by `1 + |λ|`.
    pub fd_step: f64,
    /// Include the top-type IR multiplier.
    pub top_ir: bool,
    /// Run the column-generation polish after the descent.
    pub polish: bool,
    pub seed: u64,
}

impl Default for SaddleConfig {
    fn default() -> Self {
        SaddleConfig {
            initial_step: 1.0,
            decay: 0.5,
            armijo: 1e-4,
            max_iter: 500,
            lambda_bar: None,
            rel_tol: 1e-9,
            stall_window: 5,
            grad_tol: 1e-7,
            fd_step: 1e-5,
            top_ir: false,
            polish: true,
            seed: 7,
        }
    }
}

impl SaddleConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("initial_step", self.initial_step),
            ("rel_tol", self.rel_tol),
            ("grad_tol", self.grad_tol),
            ("fd_step", self.fd_step),
            ("armijo", self.armijo),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return invalid(format!("decay must lie in (0, 1), got {}", self.decay));
        }
        if self.stall_window == 0 {
            return invalid("stall_window must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub dual_value: f64,
    pub grad_norm: f64,
    pub step: f64,
    /// `max_j |κ_p - 1|` over reports with an in-domain transfer kink.
    pub kappa_p_departure: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleResult {
    pub multipliers: MultiplierVector,
    pub solution: MechanismSolution,
    pub dual_value: f64,
    /// Dual value where the descent stopped.
    pub pgd_dual_value: f64,
    pub myerson_dual_value: f64,
    pub primal_value: f64,
    pub duality_gap: f64,
    pub lambda_bar: f64,
    /// The top type's participation constraint was imposed.
    pub top_ir: bool,
    pub iterations: usize,
    pub converged: bool,
    /// The returned point came from the column-generation polish.
    pub polished: bool,
    pub warning: Option<String>,
    pub trace: Vec<TraceRow>,
}

fn report_value(instance: &ScreeningInstance, j: usize, lam: &MultiplierVector) -> Result<f64> {
    let m = report_mfunction(instance, j, lam, TransferMargin::Free)?;
    Ok(concavify_at_mean(&m, 1.0, DEFAULT_GRID_POINTS)?.value)
}

fn report_values(instance: &ScreeningInstance, lam: &MultiplierVector) -> Result<Vec<f64>> {
    (0..instance.len())
        .into_par_iter()
        .map(|j| report_value(instance, j, lam))
        .collect()
}

/// Reports whose value depends on coordinate `i` of `to_vec(true)`.
fn affected(n: usize, i: usize) -> Vec<usize> {
    if i + 1 < n {
        vec![i, i + 1]
    } else if i + 1 == n {
        vec![0]
    } else {
        vec![n - 1]
    }
}

fn project(x: &mut [f64], hi: f64) {
    for v in x {
        *v = v.clamp(0.0, hi);
    }
}

fn gradient(instance: &ScreeningInstance, x: &[f64], dim: usize, cfg: &SaddleConfig, bar: f64) -> Result<Vec<f64>> {
    let n = instance.len();
    (0..dim)
        .into_par_iter()
        .map(|i| {
            let h = cfg.fd_step * (1.0 + x[i].abs());
            let (up, down) = ((x[i] + h).min(bar), (x[i] - h).max(0.0));
            let mut xu = x.to_vec();
            xu[i] = up;
            let mut xd = x.to_vec();
            xd[i] = down;
            let lu = MultiplierVector::from_vec(&xu, n, cfg.top_ir);
            let ld = MultiplierVector::from_vec(&xd, n, cfg.top_ir);
            let mut diff = 0.0;
            for j in affected(n, i) {
                diff += report_value(instance, j, &lu)? - report_value(instance, j, &ld)?;
            }
            Ok(diff / (up - down))
        })
        .collect()
}

pub fn kappa_p_departure(instance: &ScreeningInstance, lam: &MultiplierVector) -> f64 {
    let (lo, hi) = instance.domain;
    (0..instance.len())
        .filter_map(|j| report_coefficients(instance, j, lam).kappa_p())
        .filter(|&k| k >= lo && k <= hi)
        .map(|k| (k - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Minimises `D(Λ)` over `[0, λ̄]` starting from `init` (Myerson when `None`).
pub fn outer_optimize(
    instance: &ScreeningInstance,
    init: Option<&MultiplierVector>,
    cfg: &SaddleConfig,
) -> Result<SaddleResult> {
    instance.validate()?;
    cfg.validate()?;
    let n = instance.len();
    let myerson = myerson_multipliers(instance);
    let bar = cfg
        .lambda_bar
        .unwrap_or_else(|| 2.0 * myerson.iter().fold(0.0, f64::max));
    let max_myerson = myerson.iter().fold(0.0, f64::max);
    if !(bar >= max_myerson) {
        return invalid(format!(
            "lambda_bar {bar} is below the largest Myerson multiplier {max_myerson}"
        ));
    }
    let start = init.cloned().unwrap_or_else(|| myerson.clone());
    start.validate(instance)?;
    let dim = n + usize::from(cfg.top_ir);
    let mut x = start.to_vec(cfg.top_ir);
    project(&mut x, bar);

    let myerson_dual: f64 = report_values(instance, &myerson)?.iter().sum();
    let mut value: f64 = report_values(instance, &MultiplierVector::from_vec(&x, n, cfg.top_ir))?
        .iter()
        .sum();
    let mut trace = Vec::new();
    let mut step = cfg.initial_step;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let g = gradient(instance, &x, dim, cfg, bar)?;
        let mut pg = x.clone();
        for (p, gi) in pg.iter_mut().zip(&g) {
            *p -= gi;
        }
        project(&mut pg, bar);
        let grad_norm = pg.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        trace.push(TraceRow {
            iter: iterations - 1,
            dual_value: value,
            grad_norm,
            step,
            kappa_p_departure: kappa_p_departure(instance, &MultiplierVector::from_vec(&x, n, cfg.top_ir)),
        });
        if grad_norm < cfg.grad_tol {
            converged = true;
            break;
        }
        if trace.len() > cfg.stall_window {
            let old = trace[trace.len() - 1 - cfg.stall_window].dual_value;
            if (old - value).abs() <= cfg.rel_tol * (1.0 + value.abs()) {
                converged = true;
                break;
            }
        }
        let mut accepted = None;
        let mut t = step;
        for _ in 0..60 {
            let mut y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - t * b).collect();
            project(&mut y, bar);
            let dec: f64 = g
                .iter()
                .zip(y.iter().zip(&x))
                .map(|(gi, (yi, xi))| gi * (yi - xi))
                .sum();
            let vy: f64 = report_values(instance, &MultiplierVector::from_vec(&y, n, cfg.top_ir))?
                .iter()
                .sum();
            if vy <= value + cfg.armijo * dec {
                accepted = Some((y, vy));
                break;
            }
            t *= cfg.decay;
        }
        match accepted {
            Some((y, vy)) => {
                x = y;
                value = vy;
                step = t / cfg.decay;
            }
            None => {
                // No descent along the finite-difference direction: stationary up to noise.
                converged = true;
                break;
            }
        }
    }
    let pgd_lam = MultiplierVector::from_vec(&x, n, cfg.top_ir);
    let pgd_value = value;
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!("descent stopped at max_iter = {}", cfg.max_iter));
    }

    let mut polished = false;
    let mut lam = pgd_lam.clone();
    let mut dual = pgd_value;
    let mut solution = None;
    if cfg.polish {
        let opts = RecoveryOptions {
            top_ir: cfg.top_ir,
            lambda_bar: bar,
            ..RecoveryOptions::default()
        };
        // A converged master certifies its own duals; otherwise the polish
        // has to beat the descent.
        let accept = |rec: &PrimalRecovery| {
            (rec.converged && !rec.elastic_used && rec.lp_error.is_none())
                || rec.dual_bound <= pgd_value + 1e-12 * (1.0 + pgd_value.abs())
        };
        let seeded = recover_primal(instance, Some(&pgd_lam), &opts);
        let attempt = match seeded {
            Ok(rec) if accept(&rec) => Ok(rec),
            // Retry from the corner columns alone.
            first => match recover_primal(instance, None, &opts) {
                Ok(rec) if accept(&rec) => Ok(rec),
                _ => first,
            },
        };
        match attempt {
            Ok(rec) if accept(&rec) => {
                if !rec.converged {
                    warnings.push("column generation did not reach zero reduced cost".into());
                }
                polished = true;
                lam = rec.solution.multipliers.clone();
                dual = rec.dual_bound;
                solution = Some(rec.solution);
            }
            Ok(_) => warnings.push("column generation did not improve on the descent".into()),
            Err(e) => warnings.push(format!("column generation failed: {e}")),
        }
    }
    let solution = match solution {
        Some(s) => s,
        None => solve_inner(instance, &lam)?,
    };
    if lam.iter().any(|v| v >= bar * (1.0 - 1e-9)) {
        warnings.push(format!("a multiplier sits at the box bound {bar}"));
    }
    let primal = check_primal(instance, &solution).primal_revenue;
    Ok(SaddleResult {
        multipliers: lam,
        dual_value: dual,
        pgd_dual_value: pgd_value,
        myerson_dual_value: myerson_dual,
        primal_value: primal,
        duality_gap: dual - primal,
        lambda_bar: bar,
        top_ir: cfg.top_ir,
        iterations,
        converged,
        polished,
        warning: (!warnings.is_empty()).then(|| warnings.join("; ")),
        trace,
        solution,
    })
}
