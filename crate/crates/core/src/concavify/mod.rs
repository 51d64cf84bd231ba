//! Concave envelope of `M` at a prescribed mean.
//!
//! The main solver works on the conjugate: with `g_k(s) = sup_z piece_k(z) - s z`,
//! `M^c(m) = min_s [s m + max_k g_k(s)]`, a one-dimensional convex problem solved
//! by bisection on its subgradient. Atoms are the touch points of the optimal
//! supporting line. The grid LP in [`oracle`] is the independent check and the
//! fallback.

pub mod closed_form;
pub mod oracle;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{Atom, Experiment, MFunction};
use crate::scalar::Scalar;

pub use closed_form::{closed_form_single_kink, ClosedFormKink};
pub use oracle::{concavify_capped, concavify_lp_oracle};

pub const DEFAULT_GRID_POINTS: usize = 20_001;
/// Third atoms lighter than this are folded back into a binary solution.
pub const BORDERLINE_WEIGHT: f64 = 1e-6;
/// Relative gain below which `M` counts as concave at the mean.
pub const DEGENERATE_GAP: f64 = 1e-8;
/// Relative tolerance for two pieces touching the same supporting line.
pub const TIE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Conjugate,
    GridLp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics<T> {
    pub method: Method,
    /// More than two pieces touched the supporting line.
    pub tie: bool,
    pub dropped_borderline: usize,
    pub truncated_upper: bool,
    pub truncated_lower: bool,
    /// `value - M(mean)`.
    pub gain: T,
    /// Supporting-line bound minus value.
    pub dual_gap: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcavifyResult<T> {
    pub experiment: Experiment<T>,
    pub value: T,
    pub support_size: usize,
    /// Envelope piece index of each atom.
    pub pieces: Vec<usize>,
    /// Supporting line `intercept + slope·z`.
    pub slope: T,
    pub intercept: T,
    pub diagnostics: Diagnostics<T>,
}

impl<T: Scalar> ConcavifyResult<T> {
    /// Action labels (indices into the original action list) of the atoms.
    pub fn labels(&self, m: &MFunction<T>) -> Vec<usize> {
        self.pieces.iter().map(|&k| m.envelope.labels()[k]).collect()
    }
}

pub(crate) fn check_grid(grid_points: usize) -> Result<()> {
    if grid_points < 10 {
        return invalid(format!("grid_points must be at least 10, got {grid_points}"));
    }
    Ok(())
}

pub(crate) fn check_mean<T: Scalar>(m: &MFunction<T>, mean: T) -> Result<()> {
    let (lo, hi) = m.envelope.domain();
    if !(mean > lo && mean < hi) {
        return Err(Error::OutOfDomain {
            what: "mean",
            value: mean.as_f64(),
            lo: lo.as_f64(),
            hi: hi.as_f64(),
        });
    }
    Ok(())
}

/// Optimal experiment for `M` with mean `mean`.
///
/// `grid_points` sizes the LP fallback, which is used only when the conjugate
/// solve fails to bracket the mean.
pub fn concavify_at_mean<T: Scalar>(m: &MFunction<T>, mean: T, grid_points: usize) -> Result<ConcavifyResult<T>> {
    check_grid(grid_points)?;
    check_mean(m, mean)?;
    if let Some(r) = conjugate_solve(m, mean) {
        return Ok(r);
    }
    let r = concavify_lp_oracle(&m.cast::<f64>(), mean.as_f64(), grid_points)?;
    let atoms = r
        .experiment
        .atoms()
        .iter()
        .map(|a| Atom::new(T::of(a.z), T::of(a.weight)))
        .collect();
    let experiment = Experiment::with_mean(atoms, mean)?;
    Ok(ConcavifyResult {
        support_size: experiment.support_size(),
        value: experiment.expect(|z| m.eval_unchecked(z)),
        pieces: experiment.atoms().iter().map(|a| m.envelope.piece_index(a.z)).collect(),
        experiment,
        slope: T::of(r.slope),
        intercept: T::of(r.intercept),
        diagnostics: Diagnostics {
            method: Method::GridLp,
            tie: r.diagnostics.tie,
            dropped_borderline: 0,
            truncated_upper: r.diagnostics.truncated_upper,
            truncated_lower: r.diagnostics.truncated_lower,
            gain: T::of(r.diagnostics.gain),
            dual_gap: T::of(r.diagnostics.dual_gap),
        },
    })
}

/// Best piece at slope `s`: `(index, g, touch point)`.
fn best_piece<T: Scalar>(m: &MFunction<T>, s: T) -> (usize, T, T) {
    let mut best = (0, T::neg_infinity(), T::zero());
    for k in 0..m.envelope.pieces().len() {
        let (g, z) = m.conjugate(k, s);
        if g > best.1 {
            best = (k, g, z);
        }
    }
    best
}

fn conjugate_solve<T: Scalar>(m: &MFunction<T>, mean: T) -> Option<ConcavifyResult<T>> {
    let pieces = m.envelope.pieces();
    let (lo, hi) = m.envelope.domain();
    let dpsi = m.cost.deriv(mean);
    let smin = pieces.iter().map(|p| p.slope).fold(T::infinity(), T::min);
    let smax = pieces.iter().map(|p| p.slope).fold(T::neg_infinity(), T::max);
    // Every touch point lies right of the mean at `a` and left of it at `b`.
    let mut a = smin - dpsi - T::one();
    let mut b = smax - dpsi + T::one();
    for _ in 0..500 {
        let mid = (a + b) * T::of(0.5);
        if mid <= a || mid >= b {
            break;
        }
        let (_, _, z) = best_piece(m, mid);
        if z > mean {
            a = mid;
        } else {
            b = mid;
        }
    }
    let s = (a + b) * T::of(0.5);
    let (ka, _, _) = best_piece(m, a);
    let (kb, _, _) = best_piece(m, b);
    let conj: Vec<(T, T)> = (0..pieces.len()).map(|k| m.conjugate(k, s)).collect();
    let h = conj.iter().map(|c| c.0).fold(T::neg_infinity(), T::max);
    if !h.is_finite() {
        return None;
    }
    let tie = T::tol(TIE_TOL) * (T::one() + h.abs());
    let mut touch: Vec<(T, usize)> = (0..pieces.len())
        .filter(|&k| conj[k].0 >= h - tie || k == ka || k == kb)
        .map(|k| (conj[k].1, k))
        .collect();
    touch.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    touch.dedup_by(|later, kept| later.0 - kept.0 <= T::of(crate::model::experiment::ATOM_MERGE_TOL));

    let mut dropped = 0;
    let mut atoms = mixture(&touch, mean)?;
    while atoms.len() > 2 {
        let light: Vec<T> = atoms
            .iter()
            .filter(|a| a.weight < T::of(BORDERLINE_WEIGHT))
            .map(|a| a.z)
            .collect();
        if light.is_empty() {
            break;
        }
        let kept: Vec<(T, usize)> = touch.iter().copied().filter(|t| !light.contains(&t.0)).collect();
        match mixture(&kept, mean) {
            Some(next) => {
                dropped += light.len();
                touch = kept;
                atoms = next;
            }
            None => break,
        }
    }

    let m_mean = m.eval_unchecked(mean);
    let mut value: T = atoms.iter().map(|a| a.weight * m.eval_unchecked(a.z)).sum();
    let bound = h + s * mean;
    let mut experiment = Experiment::with_mean(atoms, mean).ok()?;
    if value - m_mean <= T::tol(DEGENERATE_GAP) * (T::one() + m_mean.abs()) {
        experiment = Experiment::degenerate(mean);
        value = m_mean;
    }
    let zs: Vec<T> = experiment.atoms().iter().map(|a| a.z).collect();
    Some(ConcavifyResult {
        support_size: zs.len(),
        pieces: zs.iter().map(|&z| m.envelope.piece_index(z)).collect(),
        value,
        slope: s,
        intercept: h,
        diagnostics: Diagnostics {
            method: Method::Conjugate,
            tie: touch.len() > 2,
            dropped_borderline: dropped,
            truncated_upper: zs.iter().any(|&z| z >= hi),
            truncated_lower: zs.iter().any(|&z| z <= lo),
            gain: value - m_mean,
            dual_gap: bound - value,
        },
        experiment,
    })
}

/// Average of the basic solutions spanned by the touch points.
///
/// With two points this is the unique split; with more it is an interior point of
/// the optimal face, so every touch point gets positive weight.
fn mixture<T: Scalar>(touch: &[(T, usize)], mean: T) -> Option<Vec<Atom<T>>> {
    let merge = T::of(crate::model::experiment::ATOM_MERGE_TOL);
    let at: Vec<T> = touch
        .iter()
        .map(|t| t.0)
        .filter(|&z| (z - mean).abs() <= merge)
        .collect();
    let below: Vec<T> = touch.iter().map(|t| t.0).filter(|&z| z < mean - merge).collect();
    let above: Vec<T> = touch.iter().map(|t| t.0).filter(|&z| z > mean + merge).collect();
    let mut basics: Vec<[(T, T); 2]> = Vec::new();
    if !at.is_empty() {
        basics.push([(mean, T::one()), (mean, T::zero())]);
    }
    for &l in &below {
        for &r in &above {
            let wl = (r - mean) / (r - l);
            basics.push([(l, wl), (r, T::one() - wl)]);
        }
    }
    if basics.is_empty() {
        return None;
    }
    let n = T::of(basics.len() as f64);
    let mut atoms: Vec<Atom<T>> = Vec::new();
    for pair in &basics {
        for &(z, w) in pair {
            if w == T::zero() {
                continue;
            }
            match atoms.iter_mut().find(|a| a.z == z) {
                Some(a) => a.weight = a.weight + w / n,
                None => atoms.push(Atom::new(z, w / n)),
            }
        }
    }
    atoms.sort_by(|x, y| x.z.partial_cmp(&y.z).unwrap());
    Some(atoms)
}
