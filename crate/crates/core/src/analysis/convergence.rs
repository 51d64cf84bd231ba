//! N-type studies on a uniform grid: refinement at fixed Myerson multipliers
//! and the outer optimisation at a single `N`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::CostSpec;
use crate::saddle::{outer_optimize, SaddleConfig};
use crate::screening::dual::{myerson_multipliers, report_coefficients, solve_inner, MechanismSolution};
use crate::screening::instance::ScreeningInstance;
use crate::screening::myerson::myerson_benchmark;

/// Points used to compare piecewise-constant schedules.
const EVAL_POINTS: usize = 20_001;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceLevel {
    pub n: usize,
    pub thetas: Vec<f64>,
    pub q: Vec<f64>,
    pub support: Vec<usize>,
    /// `K(θ_j)`
    pub costs: Vec<f64>,
    /// Envelope rents `U(θ_j)`.
    pub rents: Vec<f64>,
    pub max_support: usize,
    /// `max_j |U(θ_j) - ∫_{θ_1}^{θ_j} q|` with the trapezoid rule.
    pub rent_error: f64,
    /// `max |q_j - 1[Φ(θ_j) ≥ 0]|` over reports with support 1; `None` when every
    /// report investigates.
    pub myerson_gap: Option<f64>,
    /// Reports with support above one.
    pub band_size: usize,
    /// Sup distance to the previous level's schedule.
    pub sup_distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub theta_range: (f64, f64),
    pub gamma_hat: f64,
    pub pbar: f64,
    pub theta0: f64,
    pub levels: Vec<ConvergenceLevel>,
}

impl ConvergenceStudy {
    pub fn max_support(&self) -> usize {
        self.levels.iter().map(|l| l.max_support).max().unwrap_or(0)
    }

    pub fn sup_distances(&self) -> Vec<f64> {
        self.levels.iter().filter_map(|l| l.sup_distance).collect()
    }

    /// The last three sup distances are nonincreasing.
    pub fn tail_nonincreasing(&self) -> bool {
        let d = self.sup_distances();
        d.len() >= 3 && d[d.len() - 3..].windows(2).all(|w| w[1] <= w[0])
    }

    /// Largest gap to the Myerson step outside the band over levels with `n >= n_min`.
    pub fn myerson_gap(&self, n_min: usize) -> f64 {
        self.levels
            .iter()
            .filter(|l| l.n >= n_min)
            .filter_map(|l| l.myerson_gap)
            .fold(0.0, f64::max)
    }
}

/// `n` equally spaced types with entropy cost `γ̂` charged once per report.
pub fn uniform_instance(theta_range: (f64, f64), gamma_hat: f64, n: usize, pbar: f64) -> Result<ScreeningInstance> {
    ScreeningInstance::uniform_grid(theta_range.0, theta_range.1, n, pbar, CostSpec::entropy(gamma_hat)?)
}

/// Piecewise-constant value at `x`: the schedule of the nearest grid type.
fn nearest(thetas: &[f64], q: &[f64], x: f64) -> f64 {
    let i = thetas.partition_point(|&t| t < x);
    if i == 0 {
        q[0]
    } else if i == thetas.len() || x - thetas[i - 1] <= thetas[i] - x {
        q[i - 1]
    } else {
        q[i]
    }
}

pub fn sup_distance(a: (&[f64], &[f64]), b: (&[f64], &[f64]), range: (f64, f64)) -> f64 {
    (0..EVAL_POINTS)
        .map(|i| {
            let x = range.0 + (range.1 - range.0) * i as f64 / (EVAL_POINTS - 1) as f64;
            (nearest(a.0, a.1, x) - nearest(b.0, b.1, x)).abs()
        })
        .fold(0.0, f64::max)
}

fn level(inst: &ScreeningInstance, sol: &MechanismSolution) -> ConvergenceLevel {
    let t = &inst.thetas;
    let step = myerson_benchmark(inst).q_step;
    let support: Vec<usize> = sol.reports.iter().map(|r| r.support()).collect();
    let mut integral = 0.0;
    let mut rent_error: f64 = 0.0;
    for j in 0..t.len() {
        if j > 0 {
            integral += 0.5 * (t[j] - t[j - 1]) * (sol.q[j] + sol.q[j - 1]);
        }
        rent_error = rent_error.max((sol.rents[j] - integral).abs());
    }
    let outside: Vec<f64> = (0..t.len())
        .filter(|&j| support[j] == 1)
        .map(|j| (sol.q[j] - step[j]).abs())
        .collect();
    ConvergenceLevel {
        n: t.len(),
        thetas: t.clone(),
        q: sol.q.clone(),
        max_support: sol.max_support(),
        band_size: support.iter().filter(|&&s| s > 1).count(),
        support,
        costs: sol.costs.clone(),
        rents: sol.rents.clone(),
        rent_error,
        myerson_gap: (!outside.is_empty()).then(|| outside.into_iter().fold(0.0, f64::max)),
        sup_distance: None,
    }
}

/// Solves the uniform-grid problem at the Myerson multipliers for each `N`.
pub fn convergence_study(
    theta_range: (f64, f64),
    gamma_hat: f64,
    n_list: &[usize],
    pbar: f64,
) -> Result<ConvergenceStudy> {
    if n_list.is_empty() {
        return invalid("n_list: need at least one grid size");
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("n_list: grid sizes must be increasing");
    }
    let mut levels: Vec<ConvergenceLevel> = Vec::with_capacity(n_list.len());
    let mut theta0 = f64::NAN;
    for &n in n_list {
        let inst = uniform_instance(theta_range, gamma_hat, n, pbar)?;
        theta0 = myerson_benchmark(&inst).theta0;
        let sol = solve_inner(&inst, &myerson_multipliers(&inst))?;
        let mut l = level(&inst, &sol);
        if let Some(prev) = levels.last() {
            l.sup_distance = Some(sup_distance((&prev.thetas, &prev.q), (&l.thetas, &l.q), theta_range));
        }
        levels.push(l);
    }
    Ok(ConvergenceStudy {
        theta_range,
        gamma_hat,
        pbar,
        theta0,
        levels,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterStudy {
    pub n: usize,
    pub theta0: f64,
    pub dual_value: f64,
    pub myerson_dual_value: f64,
    /// `κ_p` per report at the optimised multipliers, where it lies in the domain.
    pub kappa_p: Vec<Option<f64>>,
    pub kappa_p_departure: f64,
    /// `argmax_j K(θ_j)` under each set of multipliers.
    pub argmax_cost: f64,
    pub myerson_argmax_cost: f64,
    pub max_support: usize,
    pub optimized: ConvergenceLevel,
    pub myerson: ConvergenceLevel,
    pub converged: bool,
    pub warning: Option<String>,
}

impl OuterStudy {
    /// Investigation cost peaks closer to `θ_0` than under Myerson multipliers.
    pub fn shifted_toward_theta0(&self) -> bool {
        (self.argmax_cost - self.theta0).abs() < (self.myerson_argmax_cost - self.theta0).abs()
    }

    pub fn departing_reports(&self, tol: f64) -> usize {
        self.kappa_p.iter().flatten().filter(|k| (*k - 1.0).abs() > tol).count()
    }
}

fn argmax_cost(level: &ConvergenceLevel) -> f64 {
    let (j, _) = level.costs.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |best, (j, &k)| if k > best.1 { (j, k) } else { best },
    );
    level.thetas[j]
}

/// Outer optimisation of the multipliers, compared with the Myerson multipliers.
pub fn outer_study(inst: &ScreeningInstance, cfg: &SaddleConfig) -> Result<OuterStudy> {
    let theta0 = myerson_benchmark(inst).theta0;
    let r = outer_optimize(inst, None, cfg)?;
    let myerson_sol = solve_inner(inst, &myerson_multipliers(inst))?;
    let kappa_p: Vec<Option<f64>> = (0..inst.len())
        .map(|j| {
            let k = report_coefficients(inst, j, &r.multipliers).kappa_p();
            k.filter(|&k| k >= inst.domain.0 && k <= inst.domain.1)
        })
        .collect();
    let optimized = level(inst, &r.solution);
    let myerson = level(inst, &myerson_sol);
    Ok(OuterStudy {
        n: inst.len(),
        theta0,
        dual_value: r.dual_value,
        myerson_dual_value: r.myerson_dual_value,
        kappa_p_departure: kappa_p.iter().flatten().map(|k| (k - 1.0).abs()).fold(0.0, f64::max),
        kappa_p,
        argmax_cost: argmax_cost(&optimized),
        myerson_argmax_cost: argmax_cost(&myerson),
        max_support: r.solution.max_support(),
        optimized,
        myerson,
        converged: r.converged,
        warning: r.warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sup_distance_of_shifted_steps() {
        let t = [0.0, 0.5, 1.0];
        assert_eq!(
            sup_distance((&t, &[0.0, 1.0, 1.0]), (&t, &[0.0, 1.0, 1.0]), (0.0, 1.0)),
            0.0
        );
        let fine = [0.0, 0.25, 0.5, 0.75, 1.0];
        let d = sup_distance((&t, &[0.0, 1.0, 1.0]), (&fine, &[0.0, 0.0, 0.5, 1.0, 1.0]), (0.0, 1.0));
        assert_eq!(d, 1.0);
    }

    #[test]
    fn small_study_respects_the_ternary_bound() {
        let s = convergence_study((0.1, 0.9), 0.5, &[5, 10, 20, 40], 1.0).unwrap();
        assert_eq!(s.levels.len(), 4);
        assert!(s.max_support() <= 3);
        assert!((s.theta0 - 0.45).abs() < 1e-9);
        assert!(s.levels[0].sup_distance.is_none());
        assert_eq!(s.sup_distances().len(), 3);
        // The rent quadrature error is first order in the grid step.
        assert!(s.levels.windows(2).all(|w| w[1].rent_error < w[0].rent_error));
    }

    #[test]
    fn rejects_bad_grid_lists() {
        assert!(convergence_study((0.1, 0.9), 0.5, &[], 1.0).is_err());
        assert!(convergence_study((0.1, 0.9), 0.5, &[10, 10], 1.0).is_err());
        assert!(convergence_study((0.1, 0.9), 0.5, &[1, 4], 1.0).is_err());
    }

    #[test]
    fn outer_study_moves_the_transfer_cutoff() {
        let cfg = SaddleConfig {
            max_iter: 30,
            top_ir: true,
            ..SaddleConfig::default()
        };
        let o = outer_study(&uniform_instance((0.1, 0.9), 0.5, 8, 1.0).unwrap(), &cfg).unwrap();
        assert!(o.dual_value <= o.myerson_dual_value + 1e-9);
        assert!(o.max_support <= 3);
        assert!(o.myerson.support.len() == 8);
        assert!(o.kappa_p_departure > 0.01, "{o:?}");
    }
}
