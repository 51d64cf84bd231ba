//! Two-type sweeps: support class, allocation, seller benefit and welfare
//! relative to the no-information mechanism.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::CostSpec;
use crate::saddle::{outer_optimize, SaddleConfig};
use crate::screening::feasibility::check_primal;
use crate::screening::instance::ScreeningInstance;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoTypeParams {
    pub v_l: f64,
    pub v_h: f64,
    pub pi_h: f64,
    pub gamma: f64,
    pub pbar: f64,
    /// Cost multiplier `α`; the cost is `α ψ`.
    #[serde(default = "one")]
    pub alpha: f64,
}

fn one() -> f64 {
    1.0
}

impl TwoTypeParams {
    pub fn new(v_l: f64, v_h: f64, pi_h: f64, gamma: f64) -> Self {
        TwoTypeParams {
            v_l,
            v_h,
            pi_h,
            gamma,
            pbar: 1.5 * v_h,
            alpha: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_l > 0.0 && self.v_l < self.v_h && self.v_h.is_finite()) {
            return invalid(format!(
                "need 0 < v_l < v_h, got v_l = {}, v_h = {}",
                self.v_l, self.v_h
            ));
        }
        if !(self.pi_h > 0.0 && self.pi_h < 1.0) {
            return invalid(format!("pi_h must lie in (0, 1), got {}", self.pi_h));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return invalid(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.pbar > self.v_h) {
            return invalid(format!("pbar must exceed v_h, got {}", self.pbar));
        }
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return invalid(format!("alpha must be at least 1, got {}", self.alpha));
        }
        Ok(())
    }

    pub fn pi_l(&self) -> f64 {
        1.0 - self.pi_h
    }

    /// `W^eff = π_H v_H + π_L v_L`.
    pub fn efficient_welfare(&self) -> f64 {
        self.pi_h * self.v_h + self.pi_l() * self.v_l
    }

    /// `U_S^NI = max(π_H v_H, v_L)`.
    pub fn no_information_revenue(&self) -> f64 {
        (self.pi_h * self.v_h).max(self.v_l)
    }

    /// Welfare of the posted price; the tie serves both types.
    pub fn no_information_welfare(&self) -> f64 {
        if self.v_l < self.pi_h * self.v_h {
            self.pi_h * self.v_h
        } else {
            self.efficient_welfare()
        }
    }

    pub fn instance(&self) -> Result<ScreeningInstance> {
        self.validate()?;
        let cost = if self.alpha == 1.0 {
            CostSpec::entropy(self.gamma)?
        } else {
            CostSpec::scaled_entropy(self.gamma, self.alpha)?
        };
        ScreeningInstance::two_type(self.v_l, self.v_h, self.pi_h, self.pbar, cost)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub params: TwoTypeParams,
    /// Largest support over the two reports, in `{1, 2, 3}`.
    pub support: usize,
    /// Allocation of the low type.
    pub q_star: f64,
    /// `(U_S* - U_S^NI) / W^eff`
    pub seller_benefit: f64,
    /// `(W* - W^NI) / W^eff`
    pub welfare_delta: f64,
    /// Total investigation cost `K`.
    pub cost: f64,
    pub revenue: f64,
    pub welfare: f64,
    pub dual_value: f64,
    pub feasible: bool,
    pub warning: Option<String>,
}

/// Saddle settings for two-type cells: a short descent, the top participation
/// constraint and the exact polish.
pub fn twotype_config() -> SaddleConfig {
    SaddleConfig {
        max_iter: 25,
        top_ir: true,
        ..SaddleConfig::default()
    }
}

pub fn twotype_solve(params: &TwoTypeParams, cfg: &SaddleConfig) -> Result<SweepCell> {
    let inst = params.instance()?;
    let r = outer_optimize(&inst, None, cfg)?;
    let sol = &r.solution;
    let rep = check_primal(&inst, sol);
    let revenue = rep.primal_revenue;
    let values = [params.v_l, params.v_h];
    let welfare = sol
        .q
        .iter()
        .zip(&inst.masses)
        .zip(values)
        .map(|((q, m), v)| m * v * q)
        .sum::<f64>()
        - sol.total_cost;
    let w_eff = params.efficient_welfare();
    Ok(SweepCell {
        params: *params,
        support: sol.max_support().min(3),
        q_star: sol.q[0],
        seller_benefit: (revenue - params.no_information_revenue()) / w_eff,
        welfare_delta: (welfare - params.no_information_welfare()) / w_eff,
        cost: sol.total_cost,
        revenue,
        welfare,
        dual_value: r.dual_value,
        feasible: rep.feasible,
        warning: r.warning,
    })
}

/// `n × n` midpoint grid over `(π_H v_H, v_L) ∈ (0, v_H)²`.
pub fn welfare_grid(v_h: f64, gamma: f64, n: usize, cfg: &SaddleConfig) -> Result<Vec<SweepCell>> {
    if n == 0 {
        return invalid("grid size must be positive");
    }
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |k| (i, k))).collect();
    cells
        .into_par_iter()
        .map(|(i, k)| {
            let x = v_h * (i as f64 + 0.5) / n as f64;
            let v_l = v_h * (k as f64 + 0.5) / n as f64;
            twotype_solve(&TwoTypeParams::new(v_l, v_h, x / v_h, gamma), cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn far_below_the_diagonal_nothing_is_learned() {
        let c = twotype_solve(&TwoTypeParams::new(0.05, 10.0 / 11.0, 0.6, 0.5), &twotype_config()).unwrap();
        assert_eq!(c.support, 1, "{c:?}");
        assert!(c.seller_benefit.abs() < 1e-9, "{c:?}");
        assert!(c.feasible);
    }

    #[test]
    fn near_the_diagonal_the_seller_investigates() {
        let p = TwoTypeParams::new(0.6 * 10.0 / 11.0 - 0.01, 10.0 / 11.0, 0.6, 0.5);
        let c = twotype_solve(&p, &twotype_config()).unwrap();
        assert!(c.support >= 2, "{c:?}");
        assert!(c.seller_benefit > 1e-4);
        assert!(c.q_star > 0.0 && c.q_star < 1.0);
        assert!(c.welfare_delta >= -1e-6);
        assert!(c.feasible);
    }

    #[test]
    fn no_information_benchmarks() {
        let p = TwoTypeParams::new(0.3, 1.0, 0.5, 0.5);
        assert_eq!(p.no_information_revenue(), 0.5);
        assert_eq!(p.no_information_welfare(), 0.5);
        let tie = TwoTypeParams::new(0.5, 1.0, 0.5, 0.5);
        assert_eq!(tie.no_information_welfare(), 0.75);
        assert!(TwoTypeParams { pbar: 0.9, ..p }.validate().is_err());
    }
}
