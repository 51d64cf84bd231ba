//! Effective policy dimension: finite action families, their dual envelopes and
//! the support bound `d + 1`.
//!
//! A family lists the post-signal actions `a` with payoff `α(a) + β(a) z`. The
//! dimension `d` is the number of kinks of the upper envelope, counted from the
//! envelope itself; the tag only carries the nominal value.

pub mod sweep;
pub mod tightness;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{upper_envelope, AffinePiece, CostSpec, MFunction, PolicyEnvelope, DEFAULT_DOMAIN};
use crate::screening::dual::ReportCoefficients;

pub use sweep::{verify_support_bound, SupportSweep, SweepOptions, SweepRow};
pub use tightness::{search_tightness, TightnessReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    Monitoring,
    Screening,
    Quality,
    Capacity,
    Custom,
}

impl FamilyTag {
    /// Number of independent switching margins the model is meant to have.
    pub fn nominal_dimension(self) -> Option<usize> {
        match self {
            FamilyTag::Monitoring => Some(1),
            FamilyTag::Screening => Some(2),
            FamilyTag::Quality | FamilyTag::Capacity => Some(3),
            FamilyTag::Custom => None,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "monitoring" => Ok(FamilyTag::Monitoring),
            "screening" => Ok(FamilyTag::Screening),
            "quality" => Ok(FamilyTag::Quality),
            "capacity" => Ok(FamilyTag::Capacity),
            "custom" => Ok(FamilyTag::Custom),
            _ => invalid(format!("unknown family '{s}'")),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FamilyTag::Monitoring => "monitoring",
            FamilyTag::Screening => "screening",
            FamilyTag::Quality => "quality",
            FamilyTag::Capacity => "capacity",
            FamilyTag::Custom => "custom",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyAction {
    pub label: String,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionFamily {
    pub tag: FamilyTag,
    pub actions: Vec<FamilyAction>,
}

impl ActionFamily {
    pub fn new(tag: FamilyTag, actions: Vec<FamilyAction>) -> Result<Self> {
        if actions.is_empty() {
            return invalid("an action family needs at least one action");
        }
        if let Some(a) = actions.iter().find(|a| !(a.alpha.is_finite() && a.beta.is_finite())) {
            return invalid(format!("action '{}' has a non-finite coefficient", a.label));
        }
        Ok(ActionFamily { tag, actions })
    }

    pub fn pieces(&self) -> Vec<AffinePiece<f64>> {
        self.actions.iter().map(|a| AffinePiece::new(a.alpha, a.beta)).collect()
    }

    pub fn envelope(&self, domain: (f64, f64)) -> Result<PolicyEnvelope<f64>> {
        upper_envelope(&self.pieces(), domain.0, domain.1)
    }

    /// Kink count of the envelope on `domain`.
    pub fn dimension(&self, domain: (f64, f64)) -> Result<usize> {
        Ok(self.envelope(domain)?.dimension())
    }

    /// Computed `d` exceeds the nominal one for the tag.
    pub fn mislabeled(&self, domain: (f64, f64)) -> Result<bool> {
        let d = self.dimension(domain)?;
        Ok(self.tag.nominal_dimension().is_some_and(|n| d > n))
    }

    pub fn mfunction(&self, cost: &CostSpec<f64>, domain: (f64, f64)) -> Result<MFunction<f64>> {
        MFunction::new(self.envelope(domain)?, cost.clone())
    }

    pub fn label(&self, index: usize) -> &str {
        &self.actions[index].label
    }
}

/// Quality choice on the report of the low type, with the high type as the
/// deviator. `lambda` weights the low type's own payoff; the deviator's
/// payoff enters with its mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityParams {
    pub v_lo: f64,
    pub v_hi: f64,
    pub c_lo: f64,
    pub c_hi: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub pi_lo: f64,
    pub pi_hi: f64,
    pub lambda: f64,
    pub pbar: f64,
}

impl Default for QualityParams {
    /// Thresholds `κ_q = 2/3`, `κ_p = 3/2`, `κ_x = 5/3`.
    fn default() -> Self {
        QualityParams {
            v_lo: 0.5,
            v_hi: 1.0,
            c_lo: 0.0,
            c_hi: 0.3,
            theta_lo: 0.4,
            theta_hi: 0.6,
            pi_lo: 0.5,
            pi_hi: 0.5,
            lambda: 1.25,
            pbar: 1.0,
        }
    }
}

impl QualityParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.v_lo,
            self.v_hi,
            self.c_lo,
            self.c_hi,
            self.theta_lo,
            self.theta_hi,
            self.pi_lo,
            self.pi_hi,
            self.lambda,
            self.pbar,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return invalid("quality parameters must be finite");
        }
        if !(self.v_hi > self.v_lo && self.v_lo > 0.0) {
            return invalid("quality values need v_hi > v_lo > 0");
        }
        if !(self.c_hi > self.c_lo && self.c_lo >= 0.0) {
            return invalid("quality costs need c_hi > c_lo >= 0");
        }
        if !(self.pi_lo > 0.0 && self.pi_hi > 0.0 && (self.pi_lo + self.pi_hi - 1.0).abs() <= 1e-10) {
            return invalid("masses must be positive and sum to 1");
        }
        if !(self.theta_lo > 0.0 && self.theta_hi > self.theta_lo) {
            return invalid("types need theta_hi > theta_lo > 0");
        }
        if !(self.lambda >= 0.0 && self.pbar > 0.0) {
            return invalid("need lambda >= 0 and pbar > 0");
        }
        Ok(())
    }

    /// `(κ_q, κ_p, κ_x)` from the pairwise switching points of the three margins.
    pub fn thresholds(&self) -> (f64, f64, f64) {
        let dv = self.v_hi - self.v_lo;
        let dc = self.c_hi - self.c_lo;
        let kq = (self.lambda * self.theta_lo - self.pi_lo * dc / dv) / (self.pi_hi * self.theta_hi);
        let kp = (self.lambda - self.pi_lo) / self.pi_hi;
        let kx = (self.lambda * self.theta_lo * self.v_lo - self.pi_lo * self.c_lo)
            / (self.pi_hi * self.theta_hi * self.v_lo);
        (kq, kp, kx)
    }

    fn action(&self, x: f64, q: Option<bool>, p: f64) -> (f64, f64) {
        let (v, c) = match q {
            Some(true) => (self.v_hi, self.c_hi),
            Some(false) => (self.v_lo, self.c_lo),
            None => (0.0, 0.0),
        };
        let alpha = self.pi_lo * p + self.lambda * (self.theta_lo * v * x - p) - self.pi_lo * c * x;
        let beta = -self.pi_hi * (self.theta_hi * v * x - p);
        (alpha, beta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyParams {
    /// Punish (`α + β z`) or not (`0`).
    Monitoring {
        alpha: f64,
        beta: f64,
    },
    /// Corner actions `(x, p) ∈ {0,1} × {0, p̄}` with payoff `x A(z) + p B(z)`.
    Screening {
        coefficients: ReportCoefficients,
        pbar: f64,
    },
    Quality(QualityParams),
    /// Screening corners with the capacity price `ν` charged per unit allocated.
    Capacity {
        coefficients: ReportCoefficients,
        pbar: f64,
        nu: f64,
    },
    Custom {
        actions: Vec<FamilyAction>,
    },
}

impl FamilyParams {
    pub fn tag(&self) -> FamilyTag {
        match self {
            FamilyParams::Monitoring { .. } => FamilyTag::Monitoring,
            FamilyParams::Screening { .. } => FamilyTag::Screening,
            FamilyParams::Quality(_) => FamilyTag::Quality,
            FamilyParams::Capacity { .. } => FamilyTag::Capacity,
            FamilyParams::Custom { .. } => FamilyTag::Custom,
        }
    }

    /// Parameters with every margin interior, used as sweep and CLI defaults.
    pub fn default_for(tag: FamilyTag) -> Self {
        let coefficients = ReportCoefficients {
            a0: 0.5,
            a1: -0.4,
            b0: -0.3,
            b1: 0.25,
        };
        match tag {
            FamilyTag::Monitoring => FamilyParams::Monitoring { alpha: 1.0, beta: -1.0 },
            FamilyTag::Screening => FamilyParams::Screening {
                coefficients,
                pbar: 1.0,
            },
            FamilyTag::Quality => FamilyParams::Quality(QualityParams::default()),
            FamilyTag::Capacity => FamilyParams::Capacity {
                coefficients,
                pbar: 1.0,
                nu: 0.1,
            },
            FamilyTag::Custom => FamilyParams::Custom {
                actions: vec![FamilyAction {
                    label: "a0".into(),
                    alpha: 0.0,
                    beta: 0.0,
                }],
            },
        }
    }
}

fn action(label: impl Into<String>, (alpha, beta): (f64, f64)) -> FamilyAction {
    FamilyAction {
        label: label.into(),
        alpha,
        beta,
    }
}

fn corners(c: &ReportCoefficients, pbar: f64, nu: f64) -> Vec<FamilyAction> {
    let mut out = Vec::with_capacity(4);
    for (x, p, label) in [
        (0.0, 0.0, "x0_p0"),
        (0.0, pbar, "x0_pbar"),
        (1.0, 0.0, "x1_p0"),
        (1.0, pbar, "x1_pbar"),
    ] {
        out.push(action(label, (x * (c.a0 - nu) + p * c.b0, x * c.a1 + p * c.b1)));
    }
    out
}

pub fn build_family(params: &FamilyParams) -> Result<ActionFamily> {
    let tag = params.tag();
    let actions = match params {
        FamilyParams::Monitoring { alpha, beta } => {
            vec![action("no_punish", (0.0, 0.0)), action("punish", (*alpha, *beta))]
        }
        FamilyParams::Screening { coefficients, pbar } => {
            if !(*pbar > 0.0) {
                return invalid("pbar must be positive");
            }
            corners(coefficients, *pbar, 0.0)
        }
        FamilyParams::Capacity { coefficients, pbar, nu } => {
            if !(*pbar > 0.0 && *nu >= 0.0) {
                return invalid("capacity family needs pbar > 0 and nu >= 0");
            }
            corners(coefficients, *pbar, *nu)
        }
        FamilyParams::Quality(q) => {
            q.validate()?;
            let mut out = Vec::with_capacity(8);
            for x in [0.0, 1.0] {
                for (q_hi, qname) in [(false, "qlo"), (true, "qhi")] {
                    for (p, pname) in [(0.0, "p0"), (q.pbar, "pbar")] {
                        let quality = (x > 0.0).then_some(q_hi);
                        out.push(action(format!("x{x}_{qname}_{pname}"), q.action(x, quality, p)));
                    }
                }
            }
            out
        }
        FamilyParams::Custom { actions } => actions.clone(),
    };
    ActionFamily::new(tag, actions)
}

/// Family on the default likelihood-ratio domain.
pub fn default_domain() -> (f64, f64) {
    DEFAULT_DOMAIN
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monitoring_kink_is_minus_alpha_over_beta() {
        let f = build_family(&FamilyParams::Monitoring { alpha: 0.6, beta: -0.8 }).unwrap();
        let env = f.envelope(DEFAULT_DOMAIN).unwrap();
        assert_eq!(env.dimension(), 1);
        assert!((env.kinks()[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn quality_thresholds_are_ordered_and_match_the_envelope() {
        let q = QualityParams::default();
        let (kq, kp, kx) = q.thresholds();
        assert!((kq - 2.0 / 3.0).abs() < 1e-12);
        assert!((kp - 1.5).abs() < 1e-12);
        assert!((kx - 5.0 / 3.0).abs() < 1e-12);
        let env = build_family(&FamilyParams::Quality(q))
            .unwrap()
            .envelope(DEFAULT_DOMAIN)
            .unwrap();
        assert_eq!(env.dimension(), 3);
        for (a, b) in env.kinks().iter().zip([kq, kp, kx]) {
            assert!((a - b).abs() < 1e-10, "{a} {b}");
        }
    }

    #[test]
    fn top_report_corners_have_no_kink() {
        let c = ReportCoefficients {
            a0: 0.7,
            a1: 0.0,
            b0: 0.2,
            b1: 0.0,
        };
        let f = build_family(&FamilyParams::Screening {
            coefficients: c,
            pbar: 1.0,
        })
        .unwrap();
        assert_eq!(f.dimension(DEFAULT_DOMAIN).unwrap(), 0);
    }

    #[test]
    fn capacity_price_only_moves_the_allocation_kink() {
        let FamilyParams::Capacity { coefficients, pbar, .. } = FamilyParams::default_for(FamilyTag::Capacity) else {
            unreachable!()
        };
        let base = build_family(&FamilyParams::Screening { coefficients, pbar }).unwrap();
        let cap = build_family(&FamilyParams::Capacity {
            coefficients,
            pbar,
            nu: 0.1,
        })
        .unwrap();
        let (e0, e1) = (
            base.envelope(DEFAULT_DOMAIN).unwrap(),
            cap.envelope(DEFAULT_DOMAIN).unwrap(),
        );
        assert_eq!(e0.dimension(), 2);
        assert_eq!(e1.dimension(), 2);
        assert!(cap.mislabeled(DEFAULT_DOMAIN).is_ok_and(|m| !m));
        assert!((e1.kinks()[0] - 1.0).abs() < 1e-12);
        assert!((e0.kinks()[0] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn mislabeled_monitoring_is_caught() {
        let actions = vec![
            action("a", (1.0, -1.0)),
            action("b", (0.0, 0.0)),
            action("c", (-2.0, 1.0)),
        ];
        let f = ActionFamily::new(FamilyTag::Monitoring, actions).unwrap();
        assert!(f.mislabeled(DEFAULT_DOMAIN).unwrap());
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(ActionFamily::new(FamilyTag::Custom, vec![]).is_err());
        let q = QualityParams {
            c_hi: -1.0,
            ..QualityParams::default()
        };
        assert!(build_family(&FamilyParams::Quality(q)).is_err());
        assert!(FamilyTag::parse("auction").is_err());
    }
}
