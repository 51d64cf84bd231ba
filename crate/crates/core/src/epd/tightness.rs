//! Search for instances that attain the bound `d + 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{CostSpec, Experiment, DEFAULT_DOMAIN};

use super::sweep::{calibrate_tie, random_params, solve_family};
use super::{build_family, FamilyParams, FamilyTag};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub tag: FamilyTag,
    /// Kink count of the best instance.
    pub d: usize,
    pub best_support: usize,
    /// The best instance attains `d + 1` with `d` equal to the nominal dimension.
    pub found: bool,
    pub evaluations: usize,
    pub params: FamilyParams,
    pub experiment: Experiment<f64>,
    pub kinks: Vec<f64>,
    /// Smallest atom weight of the best instance.
    pub min_weight: f64,
}

/// Multiplicative jitter of every slope-determining parameter.
fn jitter(p: &FamilyParams, rng: &mut ChaCha8Rng, scale: f64) -> FamilyParams {
    let mut f = |v: f64| v * (1.0 + rng.gen_range(-scale..=scale));
    match p {
        FamilyParams::Monitoring { alpha, beta } => FamilyParams::Monitoring {
            alpha: f(*alpha),
            beta: f(*beta),
        },
        FamilyParams::Screening { coefficients, pbar } => {
            let mut c = *coefficients;
            c.a1 = f(c.a1);
            c.b1 = f(c.b1);
            FamilyParams::Screening {
                coefficients: c,
                pbar: *pbar,
            }
        }
        FamilyParams::Capacity { coefficients, pbar, nu } => {
            let mut c = *coefficients;
            c.a1 = f(c.a1);
            c.b1 = f(c.b1);
            FamilyParams::Capacity {
                coefficients: c,
                pbar: *pbar,
                nu: *nu,
            }
        }
        FamilyParams::Quality(q) => {
            let mut q = q.clone();
            q.theta_hi = f(q.theta_hi).max(q.theta_lo * 1.001);
            q.pbar = f(q.pbar);
            FamilyParams::Quality(q)
        }
        FamilyParams::Custom { actions } => FamilyParams::Custom {
            actions: actions
                .iter()
                .map(|a| super::FamilyAction {
                    label: a.label.clone(),
                    alpha: f(a.alpha),
                    beta: f(a.beta),
                })
                .collect(),
        },
    }
}

/// Random draws, half of them tie-calibrated, followed by local jitter around
/// the incumbent. Candidates are ranked by support and then by their lightest
/// atom, so a found instance is not a numerical accident.
pub fn search_tightness(
    base: &FamilyParams,
    cost: &CostSpec<f64>,
    budget: usize,
    seed: u64,
) -> Result<TightnessReport> {
    if budget == 0 {
        return invalid("budget must be at least 1");
    }
    let tag = base.tag();
    let target = tag.nominal_dimension().map(|d| d + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, f64, TightnessReport)> = None;
    for k in 0..budget {
        let start = match (&best, k % 2) {
            (Some((_, _, b)), 1) => jitter(&b.params, &mut rng, 0.05),
            _ => random_params(base, &mut rng, (1e-3, 10.0)),
        };
        let candidate = if rng.gen_bool(0.5) {
            calibrate_tie(&start, cost, DEFAULT_DOMAIN, &mut rng).unwrap_or(start)
        } else {
            start
        };
        let Ok(family) = build_family(&candidate) else { continue };
        let Ok((d, kinks, r)) = solve_family(&family, cost, DEFAULT_DOMAIN) else {
            continue;
        };
        let min_weight = r
            .experiment
            .atoms()
            .iter()
            .map(|a| a.weight)
            .fold(f64::INFINITY, f64::min);
        let better = match &best {
            None => true,
            Some((s, w, _)) => r.support_size > *s || (r.support_size == *s && min_weight > *w),
        };
        if better {
            let report = TightnessReport {
                tag,
                d,
                best_support: r.support_size,
                found: target == Some(r.support_size) && Some(d + 1) == target,
                evaluations: k + 1,
                params: candidate,
                experiment: r.experiment,
                kinks,
                min_weight,
            };
            let done = report.found;
            best = Some((r.support_size, min_weight, report));
            if done {
                break;
            }
        }
    }
    let Some((_, _, mut report)) = best else {
        return invalid("no instance could be solved within the budget");
    };
    report.evaluations = report.evaluations.max(1);
    Ok(report)
}
