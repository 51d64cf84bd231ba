//! Randomized check of the support bound.
//!
//! Plain draws perturb the family's multipliers and masses. Generic draws give
//! at most two touching pieces, so a share of the trials is tie-calibrated:
//! slopes are drawn as usual and the free intercepts are then solved so that
//! every piece of the envelope touches one supporting line through the mean.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concavify::oracle::log_step;
use crate::concavify::{concavify_at_mean, ConcavifyResult, DEFAULT_GRID_POINTS};
use crate::error::{invalid, Result};
use crate::model::{CostSpec, DEFAULT_DOMAIN};
use crate::screening::dual::ReportCoefficients;

use super::{build_family, ActionFamily, FamilyParams, FamilyTag, QualityParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepOptions {
    pub domain: (f64, f64),
    /// Share of trials whose intercepts are solved for a full tie.
    pub tie_fraction: f64,
    /// Multipliers are drawn log-uniformly from this range.
    pub multiplier_range: (f64, f64),
    /// Grid used for the no-atom-at-kink distance.
    pub grid_points: usize,
    pub keep_rows: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            domain: DEFAULT_DOMAIN,
            tie_fraction: 0.25,
            multiplier_range: (1e-3, 10.0),
            grid_points: DEFAULT_GRID_POINTS,
            keep_rows: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub trial: u64,
    pub calibrated: bool,
    pub d: usize,
    pub support: usize,
    pub kinks: Vec<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportSweep {
    pub tag: FamilyTag,
    pub trials: u64,
    pub seed: u64,
    pub nominal_d: Option<usize>,
    pub max_d: usize,
    pub max_support: usize,
    /// Trials with `support > d + 1`.
    pub violations: u64,
    /// Trials with an atom of weight above `1e-6` within one grid step of a kink.
    pub kink_atoms: u64,
    /// Trials with such an atom within `1e-9` relative of a kink.
    pub atoms_on_kink: u64,
    /// Smallest relative distance between a weighted atom and an interior kink.
    pub min_kink_distance: f64,
    /// Trials whose computed `d` exceeds the nominal one.
    pub mislabeled: u64,
    /// Trials whose solve failed.
    pub failures: u64,
    /// `support_counts[k]` = trials with support `k`.
    pub support_counts: Vec<u64>,
    pub rows: Vec<SweepRow>,
}

impl SupportSweep {
    /// No support above `d + 1`, no atom on a kink and no failed solve.
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.atoms_on_kink == 0 && self.failures == 0
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

fn ordered_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let a: f64 = rng.gen_range(0.01..1.0);
    let b: f64 = rng.gen_range(0.01..1.0);
    if a < b {
        (a, b)
    } else if b < a {
        (b, a)
    } else {
        (a, a + 0.01)
    }
}

fn random_coefficients(rng: &mut ChaCha8Rng, range: (f64, f64)) -> (ReportCoefficients, f64) {
    let l_in = log_uniform(rng, range);
    let l_out = log_uniform(rng, range);
    let mass: f64 = rng.gen_range(0.01..0.99);
    let (theta, theta_next) = ordered_pair(rng);
    let pbar = theta_next * rng.gen_range(1.0..2.0);
    let c = ReportCoefficients {
        a0: l_in * theta,
        a1: -l_out * theta_next,
        b0: mass - l_in,
        b1: l_out,
    };
    (c, pbar)
}

/// Fresh parameters of the same family; structural constants of `base` kept.
pub fn random_params(base: &FamilyParams, rng: &mut ChaCha8Rng, range: (f64, f64)) -> FamilyParams {
    match base {
        FamilyParams::Monitoring { .. } => FamilyParams::Monitoring {
            alpha: log_uniform(rng, range),
            beta: -log_uniform(rng, range),
        },
        FamilyParams::Screening { .. } => {
            let (coefficients, pbar) = random_coefficients(rng, range);
            FamilyParams::Screening { coefficients, pbar }
        }
        FamilyParams::Capacity { .. } => {
            let (coefficients, pbar) = random_coefficients(rng, range);
            FamilyParams::Capacity {
                coefficients,
                pbar,
                nu: log_uniform(rng, range),
            }
        }
        FamilyParams::Quality(q) => {
            let pi_lo: f64 = rng.gen_range(0.01..0.99);
            let (theta_lo, theta_hi) = ordered_pair(rng);
            FamilyParams::Quality(QualityParams {
                theta_lo,
                theta_hi,
                pi_lo,
                pi_hi: 1.0 - pi_lo,
                lambda: log_uniform(rng, range),
                pbar: rng.gen_range(0.5..2.0),
                ..q.clone()
            })
        }
        FamilyParams::Custom { actions } => FamilyParams::Custom {
            actions: actions
                .iter()
                .map(|a| super::FamilyAction {
                    label: a.label.clone(),
                    alpha: a.alpha * log_uniform(rng, (0.5, 2.0)),
                    beta: a.beta * log_uniform(rng, (0.5, 2.0)),
                })
                .collect(),
        },
    }
}

/// `sup_z (β - s) z - ψ(z)` on the domain.
fn support_gap(cost: &CostSpec<f64>, beta: f64, s: f64, (lo, hi): (f64, f64)) -> f64 {
    let z = cost.best_response(beta - s, lo, hi);
    (beta - s) * z - cost.psi(z)
}

/// Supporting slope with touch points on both sides of `z = 1` for the extreme
/// slopes `bmin < bmax`.
fn tie_slope(cost: &CostSpec<f64>, bmin: f64, bmax: f64, rng: &mut ChaCha8Rng) -> f64 {
    let d1 = cost.deriv(1.0);
    bmin - d1 + rng.gen_range(0.05..0.95) * (bmax - bmin)
}

/// Solves the free intercepts of `params` for a full tie; `None` when the
/// solution leaves the parameter space.
pub fn calibrate_tie(
    params: &FamilyParams,
    cost: &CostSpec<f64>,
    domain: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Option<FamilyParams> {
    let h = |beta: f64, s: f64| support_gap(cost, beta, s, domain);
    match params {
        FamilyParams::Monitoring { beta, .. } => {
            // Touching pieces satisfy α = c - h(β); the idle piece fixes c = h(0).
            let s = tie_slope(cost, *beta, 0.0, rng);
            let alpha = h(0.0, s) - h(*beta, s);
            (alpha > 0.0).then_some(FamilyParams::Monitoring { alpha, beta: *beta })
        }
        FamilyParams::Screening { coefficients, pbar } | FamilyParams::Capacity { coefficients, pbar, .. } => {
            let nu = match params {
                FamilyParams::Capacity { nu, .. } => *nu,
                _ => 0.0,
            };
            let c = coefficients;
            let (b1, b3) = (c.a1, pbar * c.b1);
            if !(b1 < 0.0 && b3 > 0.0) {
                return None;
            }
            // Allocate-free below and charge-only above. In between sits
            // whichever of idle and allocate-and-charge is higher on the line.
            let s = tie_slope(cost, b1, b3, rng);
            let (h1, h3) = (h(b1, s), h(b3, s));
            let line = (h1 + h3 - h(b1 + b3, s)).max(h(0.0, s));
            // α(1,0) = a0 - ν, α(0,p̄) = p̄ b0.
            let a0 = line - h1 + nu;
            let b0 = (line - h3) / pbar;
            let coefficients = ReportCoefficients { a0, b0, ..*c };
            Some(match params {
                FamilyParams::Capacity { nu, .. } => FamilyParams::Capacity {
                    coefficients,
                    pbar: *pbar,
                    nu: *nu,
                },
                _ => FamilyParams::Screening {
                    coefficients,
                    pbar: *pbar,
                },
            })
        }
        FamilyParams::Quality(q) => {
            // Pieces: high quality, low quality, low quality at p̄, charge only.
            let b1 = -q.pi_hi * q.theta_hi * q.v_hi;
            let b2 = -q.pi_hi * q.theta_hi * q.v_lo;
            let b4 = q.pbar * q.pi_hi;
            let b3 = b2 + b4;
            let s = tie_slope(cost, b1, b4, rng);
            let (h1, h2, h3, h4) = (h(b1, s), h(b2, s), h(b3, s), h(b4, s));
            let p0 = h2 - h3;
            let a_lo = h4 - h3;
            let a_hi = h2 - h3 + h4 - h1;
            let lambda = q.pi_lo - p0 / q.pbar;
            let c_lo = (lambda * q.theta_lo * q.v_lo - a_lo) / q.pi_lo;
            let c_hi = (lambda * q.theta_lo * q.v_hi - a_hi) / q.pi_lo;
            let out = QualityParams {
                lambda,
                c_lo,
                c_hi,
                ..q.clone()
            };
            out.validate().ok().map(|_| FamilyParams::Quality(out))
        }
        FamilyParams::Custom { .. } => None,
    }
}

/// Solves one family instance; `(d, kinks, result)`.
pub fn solve_family(
    family: &ActionFamily,
    cost: &CostSpec<f64>,
    domain: (f64, f64),
) -> Result<(usize, Vec<f64>, ConcavifyResult<f64>)> {
    let m = family.mfunction(cost, domain)?;
    let r = concavify_at_mean(&m, 1.0, DEFAULT_GRID_POINTS)?;
    Ok((m.envelope.dimension(), m.envelope.kinks().to_vec(), r))
}

/// Smallest `|z - κ| / κ` over atoms of weight above `1e-6` and interior kinks.
pub fn kink_distance(r: &ConcavifyResult<f64>, kinks: &[f64], domain: (f64, f64)) -> f64 {
    r.experiment
        .atoms()
        .iter()
        .filter(|a| a.weight > 1e-6)
        .flat_map(|a| {
            kinks
                .iter()
                .filter(|&&k| k > domain.0 && k < domain.1)
                .map(move |&k| (a.z - k).abs() / k)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Relative spacing of the log grid with `grid_points` points on `domain`.
pub fn grid_step(domain: (f64, f64), grid_points: usize) -> f64 {
    log_step(domain.0, domain.1, grid_points).exp_m1()
}

struct Outcome {
    row: SweepRow,
    failed: bool,
    kink_distance: f64,
    mislabeled: bool,
}

fn draw(base: &FamilyParams, cost: &CostSpec<f64>, opts: &SweepOptions, rng: &mut ChaCha8Rng) -> (FamilyParams, bool) {
    let calibrate = rng.gen_bool(opts.tie_fraction.clamp(0.0, 1.0));
    for _ in 0..100 {
        let p = random_params(base, rng, opts.multiplier_range);
        if !calibrate {
            return (p, false);
        }
        if let Some(c) = calibrate_tie(&p, cost, opts.domain, rng) {
            return (c, true);
        }
    }
    (random_params(base, rng, opts.multiplier_range), false)
}

fn trial(base: &FamilyParams, cost: &CostSpec<f64>, opts: &SweepOptions, seed: u64, t: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t);
    let (params, calibrated) = draw(base, cost, opts, &mut rng);
    let solved = build_family(&params).and_then(|f| {
        let mis = f.mislabeled(opts.domain)?;
        Ok((solve_family(&f, cost, opts.domain)?, mis))
    });
    match solved {
        Ok(((d, kinks, r), mislabeled)) => Outcome {
            kink_distance: kink_distance(&r, &kinks, opts.domain),
            mislabeled,
            failed: false,
            row: SweepRow {
                trial: t,
                calibrated,
                d,
                support: r.support_size,
                kinks,
                seed,
            },
        },
        Err(_) => Outcome {
            kink_distance: f64::INFINITY,
            mislabeled: false,
            failed: true,
            row: SweepRow {
                trial: t,
                calibrated,
                d: 0,
                support: 0,
                kinks: vec![],
                seed,
            },
        },
    }
}

/// Draws `n_trials` instances of the family of `base`, solves each at mean one
/// and records `d`, the support and the kink positions.
pub fn verify_support_bound(
    base: &FamilyParams,
    cost: &CostSpec<f64>,
    n_trials: u64,
    seed: u64,
    opts: &SweepOptions,
) -> Result<SupportSweep> {
    if n_trials == 0 {
        return invalid("n_trials must be at least 1");
    }
    if matches!(base, FamilyParams::Custom { actions } if actions.is_empty()) {
        return invalid("custom family without actions");
    }
    cost.validate()?;
    let outcomes: Vec<Outcome> = (0..n_trials)
        .into_par_iter()
        .map(|t| trial(base, cost, opts, seed, t))
        .collect();
    let step = grid_step(opts.domain, opts.grid_points);
    let mut s = SupportSweep {
        tag: base.tag(),
        trials: n_trials,
        seed,
        nominal_d: base.tag().nominal_dimension(),
        max_d: 0,
        max_support: 0,
        violations: 0,
        kink_atoms: 0,
        atoms_on_kink: 0,
        min_kink_distance: f64::INFINITY,
        mislabeled: 0,
        failures: 0,
        support_counts: Vec::new(),
        rows: Vec::new(),
    };
    for o in outcomes {
        if o.failed {
            s.failures += 1;
        } else {
            let r = &o.row;
            s.max_d = s.max_d.max(r.d);
            s.max_support = s.max_support.max(r.support);
            if r.support > r.d + 1 {
                s.violations += 1;
            }
            if s.support_counts.len() <= r.support {
                s.support_counts.resize(r.support + 1, 0);
            }
            s.support_counts[r.support] += 1;
        }
        s.kink_atoms += u64::from(o.kink_distance <= step);
        s.atoms_on_kink += u64::from(o.kink_distance <= 1e-9);
        s.min_kink_distance = s.min_kink_distance.min(o.kink_distance);
        s.mislabeled += u64::from(o.mislabeled);
        if opts.keep_rows {
            s.rows.push(o.row);
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cost() -> CostSpec<f64> {
        CostSpec::entropy(0.5).unwrap()
    }

    #[test]
    fn calibrated_screening_is_ternary() {
        let base = FamilyParams::default_for(FamilyTag::Screening);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ternary = 0;
        for _ in 0..50 {
            let p = random_params(&base, &mut rng, (1e-3, 10.0));
            if let Some(c) = calibrate_tie(&p, &cost(), DEFAULT_DOMAIN, &mut rng) {
                let (d, _, r) = solve_family(&build_family(&c).unwrap(), &cost(), DEFAULT_DOMAIN).unwrap();
                assert!(r.support_size <= d + 1);
                ternary += usize::from(r.support_size == 3);
            }
        }
        assert!(ternary > 10, "{ternary}");
    }

    #[test]
    fn calibrated_quality_reaches_four_atoms() {
        let base = FamilyParams::default_for(FamilyTag::Quality);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut best = 0;
        for _ in 0..400 {
            let p = random_params(&base, &mut rng, (1e-3, 10.0));
            if let Some(c) = calibrate_tie(&p, &cost(), DEFAULT_DOMAIN, &mut rng) {
                let (d, _, r) = solve_family(&build_family(&c).unwrap(), &cost(), DEFAULT_DOMAIN).unwrap();
                assert!(r.support_size <= d + 1);
                best = best.max(r.support_size);
            }
        }
        assert_eq!(best, 4);
    }

    #[test]
    fn small_sweeps_respect_the_bound() {
        for tag in [
            FamilyTag::Monitoring,
            FamilyTag::Screening,
            FamilyTag::Quality,
            FamilyTag::Capacity,
        ] {
            let s = verify_support_bound(
                &FamilyParams::default_for(tag),
                &cost(),
                300,
                3,
                &SweepOptions::default(),
            )
            .unwrap();
            assert!(s.passed(), "{tag:?} {:?}", (s.violations, s.kink_atoms, s.failures));
            assert_eq!(s.rows.len(), 300);
            assert!(s.max_support <= s.max_d + 1);
        }
    }

    #[test]
    fn sweeps_are_reproducible() {
        let base = FamilyParams::default_for(FamilyTag::Screening);
        let a = verify_support_bound(&base, &cost(), 64, 9, &SweepOptions::default()).unwrap();
        let b = verify_support_bound(&base, &cost(), 64, 9, &SweepOptions::default()).unwrap();
        assert_eq!(a, b);
        assert!(verify_support_bound(&base, &cost(), 0, 9, &SweepOptions::default()).is_err());
    }
}
