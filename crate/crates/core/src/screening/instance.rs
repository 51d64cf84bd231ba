use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{CostSpec, DEFAULT_DOMAIN};

/// Continuous type distribution used for virtual surplus and Myerson benchmarks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Uniform { lo: f64, hi: f64 },
}

impl Distribution {
    pub fn cdf(&self, theta: f64) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => ((theta - lo) / (hi - lo)).clamp(0.0, 1.0),
        }
    }

    pub fn pdf(&self, theta: f64) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => {
                if (lo..=hi).contains(&theta) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
        }
    }

    /// `θ - (1 - F(θ)) / f(θ)`.
    pub fn virtual_surplus(&self, theta: f64) -> f64 {
        match *self {
            Distribution::Uniform { hi, .. } => 2.0 * theta - hi,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Uniform { lo, hi } if lo >= 0.0 && hi > lo && hi.is_finite() => Ok(()),
            Distribution::Uniform { lo, hi } => invalid(format!("uniform range [{lo}, {hi}] is invalid")),
        }
    }
}

/// How the information cost enters the seller's objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostWeighting {
    /// Each report pays `∫ψ dF_j` once.
    #[default]
    PerReport,
    /// Report `j` pays `π_j ∫ψ dF_j`.
    MassWeighted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningInstance {
    pub thetas: Vec<f64>,
    pub masses: Vec<f64>,
    pub pbar: f64,
    pub cost: CostSpec<f64>,
    #[serde(default)]
    pub distribution: Option<Distribution>,
    #[serde(default)]
    pub cost_weighting: CostWeighting,
    #[serde(default = "default_domain")]
    pub domain: (f64, f64),
}

fn default_domain() -> (f64, f64) {
    DEFAULT_DOMAIN
}

impl ScreeningInstance {
    pub fn new(thetas: Vec<f64>, masses: Vec<f64>, pbar: f64, cost: CostSpec<f64>) -> Result<Self> {
        let inst = ScreeningInstance {
            thetas,
            masses,
            pbar,
            cost,
            distribution: None,
            cost_weighting: CostWeighting::default(),
            domain: DEFAULT_DOMAIN,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// `n` equally spaced types on `[lo, hi]` with equal masses.
    pub fn uniform_grid(lo: f64, hi: f64, n: usize, pbar: f64, cost: CostSpec<f64>) -> Result<Self> {
        if n < 2 {
            return invalid("uniform grid needs at least 2 types");
        }
        let thetas = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let mut inst = ScreeningInstance::new(thetas, vec![1.0 / n as f64; n], pbar, cost)?;
        inst.distribution = Some(Distribution::Uniform { lo, hi });
        inst.validate()?;
        Ok(inst)
    }

    /// Low value `v_l` with mass `1 - pi_h`, high value `v_h` with mass `pi_h`.
    pub fn two_type(v_l: f64, v_h: f64, pi_h: f64, pbar: f64, cost: CostSpec<f64>) -> Result<Self> {
        ScreeningInstance::new(vec![v_l, v_h], vec![1.0 - pi_h, pi_h], pbar, cost)
    }

    pub fn with_weighting(mut self, w: CostWeighting) -> Self {
        self.cost_weighting = w;
        self
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.thetas.len();
        if n == 0 {
            return invalid("thetas: at least one type is required");
        }
        if self.masses.len() != n {
            return invalid(format!("masses: expected {n} entries, got {}", self.masses.len()));
        }
        if self.thetas.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return invalid("thetas: types must be positive and finite");
        }
        if self.thetas.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("thetas: types must be strictly increasing");
        }
        if self.masses.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return invalid("masses: every mass must be positive");
        }
        let total: f64 = self.masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("masses: sum to {total}, not 1"));
        }
        if !(self.pbar > self.thetas[n - 1]) || !self.pbar.is_finite() {
            return invalid(format!(
                "pbar: {} must exceed the top type {}",
                self.pbar,
                self.thetas[n - 1]
            ));
        }
        let (lo, hi) = self.domain;
        if !(lo > 0.0 && lo < 1.0 && hi > 1.0 && hi.is_finite()) {
            return invalid(format!("domain: [{lo}, {hi}] must contain 1"));
        }
        if let Some(d) = &self.distribution {
            d.validate()?;
        }
        self.cost.validate()
    }

    /// Multiplier on `∫ψ dF_j` in the objective.
    pub fn cost_weight(&self, j: usize) -> f64 {
        match self.cost_weighting {
            CostWeighting::PerReport => 1.0,
            CostWeighting::MassWeighted => self.masses[j],
        }
    }

    /// Cost charged to report `j`.
    pub fn report_cost(&self, j: usize) -> CostSpec<f64> {
        match self.cost_weighting {
            CostWeighting::PerReport => self.cost.clone(),
            CostWeighting::MassWeighted => self.cost.scaled(self.masses[j]),
        }
    }

    /// `Σ_{k>j} π_k`.
    pub fn tail_mass(&self, j: usize) -> f64 {
        self.masses[j + 1..].iter().sum()
    }
}

/// `Φ(θ_j)` under the tagged distribution.
pub fn virtual_surplus(instance: &ScreeningInstance, j: usize) -> Result<f64> {
    let d = instance
        .distribution
        .ok_or_else(|| Error::Invalid("virtual_surplus needs a distribution tag".into()))?;
    let theta = *instance
        .thetas
        .get(j)
        .ok_or_else(|| Error::Invalid(format!("report {j} out of range")))?;
    Ok(d.virtual_surplus(theta))
}

/// Discrete virtual surplus `θ_j - (Σ_{k>j} π_k / π_j)(θ_{j+1} - θ_j)`.
pub fn discrete_virtual_surplus(instance: &ScreeningInstance, j: usize) -> f64 {
    let t = &instance.thetas;
    if j + 1 == t.len() {
        return t[j];
    }
    t[j] - instance.tail_mass(j) / instance.masses[j] * (t[j + 1] - t[j])
}

/// Instance description accepted by the CLI and JSON configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    #[serde(default)]
    pub thetas: Option<Vec<f64>>,
    #[serde(default)]
    pub masses: Option<Vec<f64>>,
    #[serde(default)]
    pub dist: Option<String>,
    #[serde(default)]
    pub range: Option<(f64, f64)>,
    #[serde(default)]
    pub n: Option<usize>,
    pub pbar: f64,
    pub cost: CostSpec<f64>,
    #[serde(default)]
    pub cost_weighting: CostWeighting,
}

impl InstanceConfig {
    pub fn build(&self) -> Result<ScreeningInstance> {
        let inst = match (&self.thetas, &self.dist) {
            (Some(thetas), None) => {
                let n = thetas.len();
                let masses = self.masses.clone().unwrap_or_else(|| vec![1.0 / n as f64; n]);
                ScreeningInstance::new(thetas.clone(), masses, self.pbar, self.cost.clone())?
            }
            (None, Some(dist)) if dist == "uniform" => {
                let (lo, hi) = self
                    .range
                    .ok_or_else(|| Error::Invalid("range: required with dist".into()))?;
                let n = self.n.ok_or_else(|| Error::Invalid("n: required with dist".into()))?;
                if self.masses.is_some() {
                    return invalid("masses: not allowed with dist (grid masses are uniform)");
                }
                ScreeningInstance::uniform_grid(lo, hi, n, self.pbar, self.cost.clone())?
            }
            (None, Some(dist)) => return invalid(format!("dist: unsupported distribution '{dist}'")),
            _ => return invalid("thetas: give either thetas or dist/range/n"),
        };
        Ok(inst.with_weighting(self.cost_weighting))
    }
}
