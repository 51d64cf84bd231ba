//! Cancellation-free pieces of the entropy closed form.

use crate::scalar::Scalar;

/// `e^x - 1 - x`.
pub fn expm1_minus_x<T: Scalar>(x: T) -> T {
    if x.abs() < T::of(1e-2) {
        // Horner form of x²/2! + ... + x⁸/8!
        let mut acc = T::zero();
        let mut fact = T::of(40320.0);
        for k in (2..=8).rev() {
            acc = acc * x + T::one() / fact;
            fact = fact / T::of(k as f64);
        }
        acc * x * x
    } else {
        x.exp_m1() - x
    }
}

/// `e^x + e^{-x} - 2 = 4 sinh²(x/2)`.
pub fn cosh_gap<T: Scalar>(x: T) -> T {
    let s = (x * T::of(0.5)).sinh();
    T::of(4.0) * s * s
}

/// Weight on the low atom of the single-kink entropy solution.
///
/// `(κ(e^η - 1) - η) / (κ(e^η + e^{-η} - 2))`, with the `η → 0` limit `1/2`.
pub fn kink_weight<T: Scalar>(eta: T, kappa: T) -> T {
    if eta == T::zero() {
        return T::of(0.5);
    }
    if eta > T::of(30.0) {
        // Divide through by e^η.
        let e = (-eta).exp();
        let num = kappa * (T::one() - e) - eta * e;
        let den = kappa * (T::one() - e) * (T::one() - e);
        return num / den;
    }
    let num = (kappa - T::one()) * eta.exp_m1() + expm1_minus_x(eta);
    num / (kappa * cosh_gap(eta))
}

/// `log((1 - e^{-η}) / η)`, the log of the unit-κ low atom.
pub fn log_low_atom<T: Scalar>(eta: T) -> T {
    if eta < T::of(1e-2) {
        // (1 - e^{-η})/η - 1 = Σ_{k≥1} (-η)^k / (k+1)!
        let mut acc = T::zero();
        let mut fact = T::of(3628800.0);
        for k in (1..=9).rev() {
            acc = T::one() / fact - eta * acc;
            fact = fact / T::of((k + 1) as f64);
        }
        (-eta * acc).ln_1p()
    } else {
        (-(-eta).exp_m1() / eta).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm1_minus_x_matches_direct() {
        for &x in &[1e-8f64, 1e-4, 5e-3, 2e-2, 0.5, 3.0] {
            let direct = x.exp_m1() - x;
            let ours: f64 = expm1_minus_x(x);
            let exact = if x < 1e-3 {
                x * x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0)))
            } else {
                direct
            };
            assert!((ours - exact).abs() <= 1e-12 * exact.abs(), "{x}");
        }
    }

    #[test]
    fn log_low_atom_series_and_direct_agree() {
        for &eta in &[0.009f64, 0.0099, 0.011] {
            let direct = (-(-eta).exp_m1() / eta).ln();
            assert!((log_low_atom(eta) - direct).abs() < 1e-14);
        }
        let tiny: f64 = log_low_atom(1e-9);
        assert!((tiny + 0.5e-9).abs() < 1e-18);
    }
}
