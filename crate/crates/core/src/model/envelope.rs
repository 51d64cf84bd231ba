//! Upper envelopes of affine action values over a bounded likelihood-ratio domain.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece<T> {
    pub intercept: T,
    pub slope: T,
}

impl<T: Scalar> AffinePiece<T> {
    pub fn new(intercept: T, slope: T) -> Self {
        AffinePiece { intercept, slope }
    }

    pub fn at(&self, z: T) -> T {
        self.intercept + self.slope * z
    }
}

/// `P(z) = max_k (α_k + β_k z)` restricted to `[lo, hi]`.
///
/// Pieces are stored in order of increasing slope, one per linear stretch of
/// the envelope. `labels[i]` is the index of the input action behind piece `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyEnvelope<T> {
    pieces: Vec<AffinePiece<T>>,
    labels: Vec<usize>,
    kinks: Vec<T>,
    lo: T,
    hi: T,
}

/// Kinks closer than this (relative) are merged.
pub const KINK_MERGE_TOL: f64 = 1e-10;

fn crossing<T: Scalar>(a: &AffinePiece<T>, b: &AffinePiece<T>) -> T {
    (a.intercept - b.intercept) / (b.slope - a.slope)
}

/// Builds the upper envelope of `actions` on `[lo, hi]`.
pub fn upper_envelope<T: Scalar>(actions: &[AffinePiece<T>], lo: T, hi: T) -> Result<PolicyEnvelope<T>> {
    if actions.is_empty() {
        return invalid("upper_envelope: empty action set");
    }
    if !(lo > T::zero() && hi > lo && hi.is_finite()) {
        return invalid(format!("upper_envelope: bad domain [{lo}, {hi}]"));
    }
    if actions.iter().any(|p| !p.intercept.is_finite() || !p.slope.is_finite()) {
        return invalid("upper_envelope: non-finite coefficients");
    }
    let mut order: Vec<usize> = (0..actions.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&actions[i], &actions[j]);
        a.slope
            .partial_cmp(&b.slope)
            .unwrap()
            .then(b.intercept.partial_cmp(&a.intercept).unwrap())
            .then(i.cmp(&j))
    });
    order.dedup_by(|later, kept| actions[*later].slope == actions[*kept].slope);

    // Lines sorted by slope; pop the top while it never wins against the newcomer.
    let mut hull: Vec<usize> = Vec::with_capacity(order.len());
    for &k in &order {
        let c = &actions[k];
        while hull.len() >= 2 {
            let a = &actions[hull[hull.len() - 2]];
            let b = &actions[hull[hull.len() - 1]];
            let lhs = (a.intercept - c.intercept) * (b.slope - a.slope);
            let rhs = (a.intercept - b.intercept) * (c.slope - a.slope);
            if lhs <= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }

    let tol = T::tol(KINK_MERGE_TOL);
    loop {
        let mut changed = false;
        while hull.len() >= 2 && crossing(&actions[hull[0]], &actions[hull[1]]) <= lo + tol * (T::one() + lo.abs()) {
            hull.remove(0);
            changed = true;
        }
        while hull.len() >= 2 {
            let n = hull.len();
            if crossing(&actions[hull[n - 2]], &actions[hull[n - 1]]) >= hi - tol * (T::one() + hi.abs()) {
                hull.pop();
                changed = true;
            } else {
                break;
            }
        }
        let mut i = 1;
        while i + 1 < hull.len() {
            let left = crossing(&actions[hull[i - 1]], &actions[hull[i]]);
            let right = crossing(&actions[hull[i]], &actions[hull[i + 1]]);
            if (right - left).abs() <= tol * (T::one() + left.abs()) {
                hull.remove(i);
                changed = true;
            } else {
                i += 1;
            }
        }
        if !changed {
            break;
        }
    }

    let pieces: Vec<AffinePiece<T>> = hull.iter().map(|&k| actions[k]).collect();
    let kinks = pieces.windows(2).map(|w| crossing(&w[0], &w[1])).collect();
    Ok(PolicyEnvelope {
        pieces,
        labels: hull,
        kinks,
        lo,
        hi,
    })
}

impl<T: Scalar> PolicyEnvelope<T> {
    pub fn pieces(&self) -> &[AffinePiece<T>] {
        &self.pieces
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn kinks(&self) -> &[T] {
        &self.kinks
    }

    /// Effective policy dimension: the number of interior kinks.
    pub fn dimension(&self) -> usize {
        self.kinks.len()
    }

    pub fn domain(&self) -> (T, T) {
        (self.lo, self.hi)
    }

    pub fn contains(&self, z: T) -> bool {
        z >= self.lo && z <= self.hi
    }

    /// Index of the piece active at `z` (no domain check).
    pub fn piece_index(&self, z: T) -> usize {
        self.kinks.partition_point(|&k| k <= z)
    }

    pub fn eval(&self, z: T) -> Result<T> {
        if !self.contains(z) {
            return Err(Error::OutOfDomain {
                what: "z",
                value: z.as_f64(),
                lo: self.lo.as_f64(),
                hi: self.hi.as_f64(),
            });
        }
        Ok(self.eval_unchecked(z))
    }

    pub fn eval_unchecked(&self, z: T) -> T {
        self.pieces[self.piece_index(z)].at(z)
    }

    /// Renames piece labels, e.g. back to a caller's action numbering.
    pub fn map_labels(mut self, f: impl Fn(usize) -> usize) -> Self {
        self.labels = self.labels.into_iter().map(f).collect();
        self
    }

    pub fn cast<U: Scalar>(&self) -> PolicyEnvelope<U> {
        let f = |x: T| U::of(x.as_f64());
        PolicyEnvelope {
            pieces: self
                .pieces
                .iter()
                .map(|p| AffinePiece::new(f(p.intercept), f(p.slope)))
                .collect(),
            labels: self.labels.clone(),
            kinks: self.kinks.iter().map(|&k| f(k)).collect(),
            lo: f(self.lo),
            hi: f(self.hi),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(v: &[(f64, f64)]) -> Vec<AffinePiece<f64>> {
        v.iter().map(|&(a, b)| AffinePiece::new(a, b)).collect()
    }

    #[test]
    fn one_kink() {
        let env = upper_envelope(&lines(&[(0.0, 0.0), (1.0, -1.0)]), 1e-4, 1e3).unwrap();
        assert_eq!(env.kinks(), &[1.0]);
        assert_eq!(env.labels(), &[1, 0]);
        assert_eq!(env.eval(0.5).unwrap(), 0.5);
        assert_eq!(env.eval(3.0).unwrap(), 0.0);
    }

    #[test]
    fn dominated_action_is_dropped() {
        let env = upper_envelope(&lines(&[(0.0, 0.0), (1.0, -1.0), (-5.0, -1.0), (-1.0, 0.0)]), 1e-4, 1e3).unwrap();
        assert_eq!(env.dimension(), 1);
        assert_eq!(env.labels(), &[1, 0]);
    }

    #[test]
    fn kinks_outside_domain_are_clipped() {
        let env = upper_envelope(&lines(&[(0.0, 0.0), (5000.0, -1.0)]), 1e-4, 1e3).unwrap();
        assert_eq!(env.dimension(), 0);
        assert_eq!(env.labels(), &[1]);
    }

    #[test]
    fn coincident_kinks_merge() {
        // Three lines through (1, 0) up to rounding.
        let env = upper_envelope(&lines(&[(1.0, -1.0), (0.5, -0.5 + 1e-13), (0.0, 0.0)]), 1e-4, 1e3).unwrap();
        assert_eq!(env.dimension(), 1);
    }

    #[test]
    fn domain_errors() {
        let env = upper_envelope(&lines(&[(0.0, 1.0)]), 0.5, 2.0).unwrap();
        assert!(env.eval(3.0).is_err());
        assert!(upper_envelope::<f64>(&[], 0.5, 2.0).is_err());
        assert!(upper_envelope(&lines(&[(0.0, 1.0)]), 2.0, 0.5).is_err());
    }
}
