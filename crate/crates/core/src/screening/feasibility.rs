use serde::{Deserialize, Serialize};

use crate::screening::dual::{MechanismSolution, MultiplierVector, ReportSolution};
use crate::screening::instance::ScreeningInstance;

pub const DEFAULT_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `max_j |∫z dF_j - 1|`
    pub mean_error: f64,
    /// Largest excursion of `x` outside `[0,1]` or `p` outside `[0, p̄]`.
    pub bounds_violation: f64,
    /// Some transfer leaves `[0, p̄]`.
    pub ll_violation: bool,
    /// `max_j (q_j - q_{j+1})⁺` of the unironed allocation.
    pub monotone_violation: f64,
    /// `max_j |U_j - Σ_{k<j} (θ_{k+1} - θ_k) q_k|` with `U_j` from the atoms.
    pub envelope_error: f64,
    /// `U_{j+1} - ∫(θ_{j+1} x_j - p_j) z dF_j` per adjacent pair.
    pub ic_slack: Vec<f64>,
    pub ir_slack: f64,
    pub top_ir_slack: f64,
    /// `Σ_j π_j ∫p_j dF_j - c_j ∫ψ dF_j`
    pub primal_revenue: f64,
    pub dual_value: Option<f64>,
    pub duality_gap: Option<f64>,
    pub weak_duality: bool,
    /// Mean, bounds, IC and bottom IR hold within tolerance.
    pub feasible: bool,
}

/// Truthful payoff `∫(θ x - p) dF`.
pub fn truthful_payoff(theta: f64, r: &ReportSolution) -> f64 {
    r.weighted(|_, x, p| theta * x - p)
}

/// Payoff of type `theta` misreporting into `r`: `∫(θ x - p) z dF`.
pub fn deviation_payoff(theta: f64, r: &ReportSolution) -> f64 {
    r.weighted(|z, x, p| (theta * x - p) * z)
}

/// Seller objective of a solution.
pub fn primal_revenue(instance: &ScreeningInstance, reports: &[ReportSolution]) -> f64 {
    reports
        .iter()
        .enumerate()
        .map(|(j, r)| {
            let k = r.experiment.expect(|z| instance.cost.psi(z));
            instance.masses[j] * r.transfer() - instance.cost_weight(j) * k
        })
        .sum()
}

/// Constraint slacks `(ic, ir, top_ir)` computed from the atoms.
pub fn slacks(instance: &ScreeningInstance, reports: &[ReportSolution]) -> (Vec<f64>, f64, f64) {
    let t = &instance.thetas;
    let n = t.len();
    let ic = (0..n - 1)
        .map(|j| truthful_payoff(t[j + 1], &reports[j + 1]) - deviation_payoff(t[j + 1], &reports[j]))
        .collect();
    (
        ic,
        truthful_payoff(t[0], &reports[0]),
        truthful_payoff(t[n - 1], &reports[n - 1]),
    )
}

/// `L(Λ, F)` for the relaxed problem.
pub fn lagrangian(instance: &ScreeningInstance, lam: &MultiplierVector, reports: &[ReportSolution]) -> f64 {
    let (ic, ir, top) = slacks(instance, reports);
    primal_revenue(instance, reports)
        + lam.lambdas.iter().zip(&ic).map(|(l, s)| l * s).sum::<f64>()
        + lam.mu * ir
        + lam.mu_top * top
}

pub fn check_primal(instance: &ScreeningInstance, solution: &MechanismSolution) -> FeasibilityReport {
    check_primal_tol(instance, solution, DEFAULT_TOL)
}

pub fn check_primal_tol(instance: &ScreeningInstance, solution: &MechanismSolution, tol: f64) -> FeasibilityReport {
    let reports = &solution.reports;
    let t = &instance.thetas;
    let mean_error = reports
        .iter()
        .map(|r| (r.experiment.mean() - 1.0).abs())
        .fold(0.0, f64::max);
    let mut bounds_violation: f64 = 0.0;
    let mut ll_violation = false;
    for r in reports {
        for &(x, p) in &r.actions {
            bounds_violation = bounds_violation.max(-x).max(x - 1.0);
            let over = (-p).max(p - instance.pbar);
            if over > tol {
                ll_violation = true;
            }
            bounds_violation = bounds_violation.max(over);
        }
    }
    let monotone_violation = solution.q_raw.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    let envelope_error = reports
        .iter()
        .enumerate()
        .map(|(j, r)| (truthful_payoff(t[j], r) - solution.rents[j]).abs())
        .fold(0.0, f64::max);
    let (ic_slack, ir_slack, top_ir_slack) = slacks(instance, reports);
    let primal = primal_revenue(instance, reports);
    let gap = solution.dual_value.map(|d| d - primal);
    let feasible =
        mean_error <= tol && bounds_violation <= tol && ic_slack.iter().all(|&s| s >= -tol) && ir_slack >= -tol;
    FeasibilityReport {
        mean_error,
        bounds_violation,
        ll_violation,
        monotone_violation,
        envelope_error,
        ic_slack,
        ir_slack,
        top_ir_slack,
        primal_revenue: primal,
        dual_value: solution.dual_value,
        duality_gap: gap,
        weak_duality: gap.is_none_or(|g| g >= -tol * (1.0 + primal.abs())),
        feasible,
    }
}
