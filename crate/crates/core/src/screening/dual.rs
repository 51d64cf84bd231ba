//! Pointwise duals per report and the inner solve at fixed multipliers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concavify::{concavify_at_mean, DEFAULT_GRID_POINTS};
use crate::error::{invalid, Result};
use crate::model::{upper_envelope, AffinePiece, Experiment, MFunction, PolicyEnvelope};
use crate::screening::instance::ScreeningInstance;
use crate::screening::iron::iron;

/// IC multipliers `λ_1..λ_{N-1}`, bottom IR `μ` and top IR `μ_N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierVector {
    pub lambdas: Vec<f64>,
    pub mu: f64,
    #[serde(default)]
    pub mu_top: f64,
}

impl MultiplierVector {
    pub fn zeros(n_types: usize) -> Self {
        MultiplierVector {
            lambdas: vec![0.0; n_types.saturating_sub(1)],
            mu: 0.0,
            mu_top: 0.0,
        }
    }

    pub fn validate(&self, instance: &ScreeningInstance) -> Result<()> {
        if self.lambdas.len() + 1 != instance.len() {
            return invalid(format!(
                "multipliers: expected {} IC multipliers, got {}",
                instance.len() - 1,
                self.lambdas.len()
            ));
        }
        if self.iter().any(|v| !(v.is_finite() && v >= 0.0)) {
            return invalid("multipliers must be finite and nonnegative");
        }
        Ok(())
    }

    /// `λ_{j-1}` for 0-based report `j`, with `λ_0 = μ`.
    pub fn incoming(&self, j: usize) -> f64 {
        if j == 0 {
            self.mu
        } else {
            self.lambdas[j - 1]
        }
    }

    /// `λ_j` for 0-based report `j`, zero at the top.
    pub fn outgoing(&self, j: usize) -> f64 {
        self.lambdas.get(j).copied().unwrap_or(0.0)
    }

    /// `[λ_1.., μ, μ_N]`.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.lambdas.iter().copied().chain([self.mu, self.mu_top])
    }

    pub fn to_vec(&self, with_top: bool) -> Vec<f64> {
        let mut v = self.lambdas.clone();
        v.push(self.mu);
        if with_top {
            v.push(self.mu_top);
        }
        v
    }

    pub fn from_vec(v: &[f64], n_types: usize, with_top: bool) -> Self {
        MultiplierVector {
            lambdas: v[..n_types - 1].to_vec(),
            mu: v[n_types - 1],
            mu_top: if with_top { v[n_types] } else { 0.0 },
        }
    }
}

/// `λ_j = Σ_{k>j} π_k`, `μ = 1`.
pub fn myerson_multipliers(instance: &ScreeningInstance) -> MultiplierVector {
    let n = instance.len();
    MultiplierVector {
        lambdas: (0..n - 1).map(|j| instance.tail_mass(j)).collect(),
        mu: 1.0,
        mu_top: 0.0,
    }
}

/// Whether the transfer may depend on the signal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMargin {
    #[default]
    Free,
    /// Transfer fixed before the signal; only the allocation responds to `z`.
    Fixed,
}

/// Corner actions `(x, p)` in the order used for envelope labels.
pub fn corner_actions(pbar: f64) -> [(f64, f64); 4] {
    [(0.0, 0.0), (0.0, pbar), (1.0, 0.0), (1.0, pbar)]
}

/// Allocation and transfer coefficients `A(z) = a0 + a1 z`, `B(z) = b0 + b1 z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportCoefficients {
    pub a0: f64,
    pub a1: f64,
    pub b0: f64,
    pub b1: f64,
}

impl ReportCoefficients {
    pub fn piece(&self, x: f64, p: f64) -> AffinePiece<f64> {
        AffinePiece::new(x * self.a0 + p * self.b0, x * self.a1 + p * self.b1)
    }

    /// Root of `A`, if positive and finite.
    pub fn kappa_x(&self) -> Option<f64> {
        root(self.a0, self.a1)
    }

    /// Root of `B`, if positive and finite.
    pub fn kappa_p(&self) -> Option<f64> {
        root(self.b0, self.b1)
    }
}

fn root(c0: f64, c1: f64) -> Option<f64> {
    if c1 == 0.0 {
        return None;
    }
    let r = -c0 / c1;
    (r.is_finite() && r > 0.0).then_some(r)
}

pub fn report_coefficients(instance: &ScreeningInstance, j: usize, lam: &MultiplierVector) -> ReportCoefficients {
    let n = instance.len();
    let theta = instance.thetas[j];
    let (l_in, l_out) = (lam.incoming(j), lam.outgoing(j));
    let theta_next = if j + 1 < n { instance.thetas[j + 1] } else { 0.0 };
    let mut c = ReportCoefficients {
        a0: l_in * theta,
        a1: -l_out * theta_next,
        b0: instance.masses[j] - l_in,
        b1: l_out,
    };
    if j + 1 == n {
        c.a0 += lam.mu_top * theta;
        c.b0 -= lam.mu_top;
    }
    c
}

/// Envelope of the corner actions for report `j`; labels index [`corner_actions`].
pub fn dual_pieces(
    instance: &ScreeningInstance,
    j: usize,
    lam: &MultiplierVector,
    margin: TransferMargin,
) -> Result<PolicyEnvelope<f64>> {
    if j >= instance.len() {
        return invalid(format!("report {j} out of range"));
    }
    let c = report_coefficients(instance, j, lam);
    let corners = corner_actions(instance.pbar);
    // With a fixed transfer only the allocation responds to the signal; the
    // transfer adds the same line to both actions and is dropped.
    let used: &[usize] = match margin {
        TransferMargin::Free => &[0, 1, 2, 3],
        TransferMargin::Fixed => &[0, 2],
    };
    let actions: Vec<AffinePiece<f64>> = used.iter().map(|&l| c.piece(corners[l].0, corners[l].1)).collect();
    let (lo, hi) = instance.domain;
    Ok(upper_envelope(&actions, lo, hi)?.map_labels(|i| used[i]))
}

/// Region by support size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Degenerate,
    Binary,
    Ternary,
}

impl Region {
    pub fn from_support(n: usize) -> Self {
        match n {
            0 | 1 => Region::Degenerate,
            2 => Region::Binary,
            _ => Region::Ternary,
        }
    }
}

/// Experiment and post-signal actions for one report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSolution {
    pub experiment: Experiment<f64>,
    /// `(x, p)` at each atom.
    pub actions: Vec<(f64, f64)>,
    pub kappa_x: Option<f64>,
    pub kappa_p: Option<f64>,
    /// Concavified value at one; `None` when built outside the dual.
    pub value: Option<f64>,
    pub region: Region,
    pub dimension: usize,
}

impl ReportSolution {
    pub fn support(&self) -> usize {
        self.experiment.support_size()
    }

    /// `∫x dF`.
    pub fn allocation(&self) -> f64 {
        self.weighted(|_, x, _| x)
    }

    /// `∫p dF`.
    pub fn transfer(&self) -> f64 {
        self.weighted(|_, _, p| p)
    }

    pub fn weighted(&self, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
        self.experiment
            .atoms()
            .iter()
            .zip(&self.actions)
            .map(|(a, &(x, p))| a.weight * f(a.z, x, p))
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismSolution {
    pub multipliers: MultiplierVector,
    pub reports: Vec<ReportSolution>,
    /// Allocation before ironing.
    pub q_raw: Vec<f64>,
    pub q: Vec<f64>,
    pub ironed: bool,
    /// Envelope rents `U(θ_j) = Σ_{k<j} (θ_{k+1} - θ_k) q_k`.
    pub rents: Vec<f64>,
    /// `K(θ_j) = ∫ψ dF_j`.
    pub costs: Vec<f64>,
    /// `I(θ_j)` = support - 1.
    pub intensity: Vec<usize>,
    pub dual_value: Option<f64>,
    /// `Σ_j π_j ∫p dF_j - c_j K_j` with the stored per-atom transfers.
    pub net_revenue: f64,
    /// `Σ_j c_j K_j`.
    pub total_cost: f64,
}

impl MechanismSolution {
    /// Assembles schedules from per-report solutions.
    pub fn assemble(
        instance: &ScreeningInstance,
        multipliers: MultiplierVector,
        reports: Vec<ReportSolution>,
        dual_value: Option<f64>,
    ) -> Result<Self> {
        let q_raw: Vec<f64> = reports.iter().map(|r| r.allocation()).collect();
        let ironed = q_raw.windows(2).any(|w| w[1] < w[0] - 1e-12);
        let q = if ironed {
            iron(&q_raw, &instance.masses)
        } else {
            q_raw.clone()
        };
        let rents = envelope_rents(&instance.thetas, &q);
        let mut costs = Vec::with_capacity(reports.len());
        for r in &reports {
            costs.push(r.experiment.cost(&instance.cost)?);
        }
        let total_cost = costs.iter().enumerate().map(|(j, k)| instance.cost_weight(j) * k).sum();
        let net_revenue = reports
            .iter()
            .enumerate()
            .map(|(j, r)| instance.masses[j] * r.transfer())
            .sum::<f64>()
            - total_cost;
        Ok(MechanismSolution {
            intensity: reports.iter().map(|r| r.support() - 1).collect(),
            multipliers,
            reports,
            q_raw,
            q,
            ironed,
            rents,
            costs,
            dual_value,
            net_revenue,
            total_cost,
        })
    }

    pub fn max_support(&self) -> usize {
        self.reports.iter().map(|r| r.support()).max().unwrap_or(0)
    }

    pub fn regions(&self) -> Vec<Region> {
        self.reports.iter().map(|r| r.region).collect()
    }
}

pub fn envelope_rents(thetas: &[f64], q: &[f64]) -> Vec<f64> {
    let mut u = vec![0.0; thetas.len()];
    for j in 1..thetas.len() {
        u[j] = u[j - 1] + (thetas[j] - thetas[j - 1]) * q[j - 1];
    }
    u
}

/// `M_j` for report `j` at multipliers `lam`.
pub fn report_mfunction(
    instance: &ScreeningInstance,
    j: usize,
    lam: &MultiplierVector,
    margin: TransferMargin,
) -> Result<MFunction<f64>> {
    MFunction::new(dual_pieces(instance, j, lam, margin)?, instance.report_cost(j))
}

/// Concavifies report `j` and reads off the per-atom actions from the touching pieces.
pub fn solve_report(
    instance: &ScreeningInstance,
    j: usize,
    lam: &MultiplierVector,
    margin: TransferMargin,
) -> Result<ReportSolution> {
    let m = report_mfunction(instance, j, lam, margin)?;
    let r = concavify_at_mean(&m, 1.0, DEFAULT_GRID_POINTS)?;
    let corners = corner_actions(instance.pbar);
    let actions = r.labels(&m).iter().map(|&l| corners[l]).collect();
    let c = report_coefficients(instance, j, lam);
    let in_domain = |k: Option<f64>| k.filter(|&k| m.envelope.contains(k));
    Ok(ReportSolution {
        region: Region::from_support(r.support_size),
        dimension: m.envelope.dimension(),
        experiment: r.experiment,
        actions,
        kappa_x: in_domain(c.kappa_x()),
        kappa_p: in_domain(c.kappa_p()),
        value: Some(r.value),
    })
}

/// Inner solve: one concavification per report, run in parallel.
pub fn solve_inner(instance: &ScreeningInstance, lam: &MultiplierVector) -> Result<MechanismSolution> {
    solve_inner_with(instance, lam, TransferMargin::Free)
}

pub fn solve_inner_with(
    instance: &ScreeningInstance,
    lam: &MultiplierVector,
    margin: TransferMargin,
) -> Result<MechanismSolution> {
    lam.validate(instance)?;
    let reports: Vec<ReportSolution> = (0..instance.len())
        .into_par_iter()
        .map(|j| solve_report(instance, j, lam, margin))
        .collect::<Result<_>>()?;
    let dual = reports.iter().map(|r| r.value.unwrap_or(0.0)).sum();
    MechanismSolution::assemble(instance, lam.clone(), reports, Some(dual))
}

/// `D(Λ) = Σ_j M_j^c(1)`.
pub fn dual_value(instance: &ScreeningInstance, lam: &MultiplierVector) -> Result<f64> {
    let mut total = 0.0;
    for j in 0..instance.len() {
        let m = report_mfunction(instance, j, lam, TransferMargin::Free)?;
        total += concavify_at_mean(&m, 1.0, DEFAULT_GRID_POINTS)?.value;
    }
    Ok(total)
}
