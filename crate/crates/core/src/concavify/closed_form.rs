use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::special::kink_weight;

/// Entropy-cost solution for one kink at `κ` with slope drop `Δβ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormKink<T> {
    /// `Δβ κ / (2γ)`
    pub eta: T,
    /// Low atom `(2γ/Δβ)(1 - e^{-η})`.
    pub a: T,
    /// High atom `(2γ/Δβ)(e^η - 1)`.
    pub b: T,
    /// Weight on `a` when the experiment is binary.
    pub w: T,
    /// Whether `a < 1 < b`, i.e. the mean sits inside the non-concave region.
    pub binary: bool,
}

impl<T: Scalar> ClosedFormKink<T> {
    /// `-w log a - (1-w) log b`, scaled by `2γ`.
    pub fn cost(&self, gamma: T) -> T {
        let two_gamma = T::of(2.0) * gamma;
        -two_gamma * (self.w * self.a.ln() + (T::one() - self.w) * self.b.ln())
    }
}

pub fn closed_form_single_kink<T: Scalar>(delta_beta: T, kappa: T, gamma: T) -> Result<ClosedFormKink<T>> {
    for (name, v) in [("delta_beta", delta_beta), ("kappa", kappa), ("gamma", gamma)] {
        if !(v > T::zero() && v.is_finite()) {
            return invalid(format!("{name} must be positive, got {v}"));
        }
    }
    let two_gamma = T::of(2.0) * gamma;
    let eta = delta_beta * kappa / two_gamma;
    if eta > T::of(700.0) {
        return Err(Error::Overflow(format!(
            "eta = {eta} exceeds 700; rescale gamma or the slope change"
        )));
    }
    let scale = two_gamma / delta_beta;
    let a = -scale * (-eta).exp_m1();
    let b = scale * eta.exp_m1();
    Ok(ClosedFormKink {
        eta,
        a,
        b,
        w: kink_weight(eta, kappa),
        binary: a < T::one() && T::one() < b,
    })
}
