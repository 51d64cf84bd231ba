//! Perturbation test of the saddle inequalities
//! `L(Λ*, F) ≤ L(Λ*, F*) ≤ L(Λ, F*)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::screening::dual::{MechanismSolution, MultiplierVector};
use crate::screening::instance::ScreeningInstance;

use super::SaddleResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleCheck {
    pub n_perturb: usize,
    pub radius: f64,
    /// `L(Λ*, F*)`
    pub value: f64,
    /// `min L(Λ*, F*) - L(Λ*, F̃)` over perturbed experiments and actions.
    pub experiment_residual: f64,
    /// `min L(Λ̃, F*) - L(Λ*, F*)` over perturbed multipliers.
    pub multiplier_residual: f64,
}

impl SaddleCheck {
    /// Most negative residual; negative values are violations.
    pub fn worst(&self) -> f64 {
        self.experiment_residual.min(self.multiplier_residual)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.worst() >= -tol
    }
}

/// `(z, w, x, p)` per atom.
type Atoms = Vec<(f64, f64, f64, f64)>;

fn lagrangian(instance: &ScreeningInstance, lam: &MultiplierVector, reports: &[Atoms]) -> f64 {
    let t = &instance.thetas;
    let n = t.len();
    let payoff = |j: usize, theta: f64, tilt: bool| -> f64 {
        reports[j]
            .iter()
            .map(|&(z, w, x, p)| w * (theta * x - p) * if tilt { z } else { 1.0 })
            .sum()
    };
    let mut l = 0.0;
    for (j, r) in reports.iter().enumerate() {
        let revenue: f64 = r.iter().map(|&(_, w, _, p)| w * p).sum();
        let cost: f64 = r.iter().map(|&(z, w, _, _)| w * instance.cost.psi(z)).sum();
        l += instance.masses[j] * revenue - instance.cost_weight(j) * cost;
    }
    for j in 0..n - 1 {
        l += lam.lambdas[j] * (payoff(j + 1, t[j + 1], false) - payoff(j, t[j + 1], true));
    }
    l + lam.mu * payoff(0, t[0], false) + lam.mu_top * payoff(n - 1, t[n - 1], false)
}

fn perturb(instance: &ScreeningInstance, reports: &[Atoms], radius: f64, rng: &mut ChaCha8Rng) -> Vec<Atoms> {
    let mut out = reports.to_vec();
    let j = rng.gen_range(0..out.len());
    let r = &mut out[j];
    let (lo, hi) = instance.domain;
    match rng.gen_range(0..3) {
        0 if r.len() >= 2 => {
            // Mean-preserving shift of two atoms.
            let i = rng.gen_range(0..r.len());
            let k = (i + rng.gen_range(1..r.len())) % r.len();
            let d = rng.gen_range(-radius..=radius);
            let dk = -d * r[i].1 / r[k].1;
            if (r[i].0 + d).clamp(lo, hi) == r[i].0 + d && (r[k].0 + dk).clamp(lo, hi) == r[k].0 + dk {
                r[i].0 += d;
                r[k].0 += dk;
            }
        }
        0 | 1 => {
            // Split an atom symmetrically, keeping its action.
            let i = rng.gen_range(0..r.len());
            let (z, w, x, p) = r[i];
            let d = rng.gen_range(0.0..=radius).min(z - lo);
            r[i] = (z - d, w / 2.0, x, p);
            r.push((z + d, w / 2.0, x, p));
        }
        _ => {
            let i = rng.gen_range(0..r.len());
            let a = &mut r[i];
            a.2 = (a.2 + rng.gen_range(-radius..=radius)).clamp(0.0, 1.0);
            a.3 = (a.3 + rng.gen_range(-radius..=radius)).clamp(0.0, instance.pbar);
        }
    }
    out
}

/// Residuals of the saddle inequalities at `(lam, solution)`. The top
/// multiplier is perturbed only when `top_ir` is set.
pub fn saddle_check_at(
    instance: &ScreeningInstance,
    lam: &MultiplierVector,
    solution: &MechanismSolution,
    top_ir: bool,
    n_perturb: usize,
    radius: f64,
    seed: u64,
) -> SaddleCheck {
    let reports: Vec<Atoms> = solution
        .reports
        .iter()
        .map(|r| {
            r.experiment
                .atoms()
                .iter()
                .zip(&r.actions)
                .map(|(a, &(x, p))| (a.z, a.weight, x, p))
                .collect()
        })
        .collect();
    let value = lagrangian(instance, lam, &reports);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut experiment_residual = f64::INFINITY;
    let mut multiplier_residual = f64::INFINITY;
    let base = lam.to_vec(top_ir);
    for _ in 0..n_perturb {
        let f = perturb(instance, &reports, radius, &mut rng);
        experiment_residual = experiment_residual.min(value - lagrangian(instance, lam, &f));
        let v: Vec<f64> = base
            .iter()
            .map(|&b| (b + rng.gen_range(-radius..=radius)).max(0.0))
            .collect();
        let mut l2 = MultiplierVector::from_vec(&v, instance.len(), top_ir);
        if !top_ir {
            l2.mu_top = lam.mu_top;
        }
        multiplier_residual = multiplier_residual.min(lagrangian(instance, &l2, &reports) - value);
    }
    SaddleCheck {
        n_perturb,
        radius,
        value,
        experiment_residual,
        multiplier_residual,
    }
}

pub fn saddle_check(
    instance: &ScreeningInstance,
    result: &SaddleResult,
    n_perturb: usize,
    radius: f64,
    seed: u64,
) -> SaddleCheck {
    saddle_check_at(
        instance,
        &result.multipliers,
        &result.solution,
        result.top_ir,
        n_perturb,
        radius,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CostSpec;
    use crate::saddle::{outer_optimize, SaddleConfig};
    use crate::screening::dual::{myerson_multipliers, solve_inner};

    fn instance() -> ScreeningInstance {
        ScreeningInstance::two_type(0.5, 10.0 / 11.0, 0.6, 1.5, CostSpec::entropy(0.5).unwrap()).unwrap()
    }

    #[test]
    fn optimum_passes() {
        let inst = instance();
        let r = outer_optimize(&inst, None, &SaddleConfig::default()).unwrap();
        let c = saddle_check(&inst, &r, 1000, 1e-3, 1);
        assert!(c.passed(1e-6), "{c:?}");
    }

    #[test]
    fn pooling_instance_passes() {
        // Serving both types at the low value is optimal here.
        let inst = ScreeningInstance::two_type(0.9, 0.91, 0.01, 1.5, CostSpec::entropy(0.5).unwrap()).unwrap();
        let r = outer_optimize(&inst, None, &SaddleConfig::default()).unwrap();
        let c = saddle_check(&inst, &r, 500, 1e-3, 2);
        assert!(c.passed(1e-6), "{c:?}");
    }

    #[test]
    fn myerson_point_is_not_a_saddle() {
        let inst = instance();
        let lam = myerson_multipliers(&inst);
        let sol = solve_inner(&inst, &lam).unwrap();
        let c = saddle_check_at(&inst, &lam, &sol, false, 1000, 1e-3, 3);
        assert!(c.worst() < -1e-6, "{c:?}");
    }
}
