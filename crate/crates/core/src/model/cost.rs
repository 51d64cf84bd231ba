//! Strictly convex information costs on likelihood ratios.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Cost `ψ(z)` of producing likelihood ratio `z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    rename_all = "snake_case",
    bound = "T: Scalar + Serialize + serde::de::DeserializeOwned"
)]
pub enum CostSpec<T> {
    /// `ψ(z) = -2γ log z`
    Entropy { gamma: T },
    /// `ψ(z) = -2γα log z`
    ScaledEntropy { gamma: T, alpha: T },
    /// Convex C¹ quadratic spline through tabulated `(z, ψ)` pairs.
    Tabulated(TabulatedCost<T>),
}

impl<T: Scalar> CostSpec<T> {
    pub fn entropy(gamma: T) -> Result<Self> {
        let c = CostSpec::Entropy { gamma };
        c.validate()?;
        Ok(c)
    }

    pub fn scaled_entropy(gamma: T, alpha: T) -> Result<Self> {
        let c = CostSpec::ScaledEntropy { gamma, alpha };
        c.validate()?;
        Ok(c)
    }

    pub fn tabulated(z: Vec<T>, psi: Vec<T>) -> Result<Self> {
        Ok(CostSpec::Tabulated(TabulatedCost::new(z, psi)?))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CostSpec::Entropy { gamma } => check_positive("gamma", *gamma),
            CostSpec::ScaledEntropy { gamma, alpha } => {
                check_positive("gamma", *gamma)?;
                check_positive("alpha", *alpha)
            }
            CostSpec::Tabulated(_) => Ok(()),
        }
    }

    /// Coefficient `c` in `ψ = -c log z` for the entropy variants.
    pub fn log_coefficient(&self) -> Option<T> {
        let two = T::of(2.0);
        match self {
            CostSpec::Entropy { gamma } => Some(two * *gamma),
            CostSpec::ScaledEntropy { gamma, alpha } => Some(two * *gamma * *alpha),
            CostSpec::Tabulated(_) => None,
        }
    }

    /// Checked evaluation; rejects `z <= 0` and non-finite input.
    pub fn value(&self, z: T) -> Result<T> {
        if !(z > T::zero()) || !z.is_finite() {
            return Err(Error::OutOfDomain {
                what: "z",
                value: z.as_f64(),
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        Ok(self.psi(z))
    }

    pub fn psi(&self, z: T) -> T {
        match self.log_coefficient() {
            Some(c) => -c * z.ln(),
            None => self.table().value(z),
        }
    }

    pub fn deriv(&self, z: T) -> T {
        match self.log_coefficient() {
            Some(c) => -c / z,
            None => self.table().deriv(z),
        }
    }

    /// Solves `ψ'(z) = y`; `None` when `y` exceeds every attainable slope.
    pub fn deriv_inverse(&self, y: T) -> Option<T> {
        match self.log_coefficient() {
            Some(c) => (y < T::zero()).then(|| -c / y),
            None => self.table().deriv_inverse(y),
        }
    }

    /// `argmax_{z in [lo, hi]} slope·z - ψ(z)`.
    pub fn best_response(&self, slope: T, lo: T, hi: T) -> T {
        match self.deriv_inverse(slope) {
            Some(z) if z.is_finite() => z.max(lo).min(hi),
            _ => hi,
        }
    }

    /// The cost multiplied by a positive factor.
    pub fn scaled(&self, factor: T) -> Self {
        match self {
            CostSpec::Entropy { gamma } => CostSpec::ScaledEntropy {
                gamma: *gamma,
                alpha: factor,
            },
            CostSpec::ScaledEntropy { gamma, alpha } => CostSpec::ScaledEntropy {
                gamma: *gamma,
                alpha: *alpha * factor,
            },
            CostSpec::Tabulated(t) => CostSpec::Tabulated(t.scaled(factor)),
        }
    }

    pub fn cast<U: Scalar>(&self) -> CostSpec<U> {
        let f = |x: T| U::of(x.as_f64());
        match self {
            CostSpec::Entropy { gamma } => CostSpec::Entropy { gamma: f(*gamma) },
            CostSpec::ScaledEntropy { gamma, alpha } => CostSpec::ScaledEntropy {
                gamma: f(*gamma),
                alpha: f(*alpha),
            },
            CostSpec::Tabulated(t) => CostSpec::Tabulated(t.cast()),
        }
    }

    fn table(&self) -> &TabulatedCost<T> {
        match self {
            CostSpec::Tabulated(t) => t,
            _ => unreachable!("entropy costs are handled in closed form"),
        }
    }
}

fn check_positive<T: Scalar>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be positive and finite, got {v}"))
    }
}

/// One quadratic piece `v + d·(z - a) + c·(z - a)²` starting at `a`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Segment<T> {
    a: T,
    v: T,
    d: T,
    c: T,
}

impl<T: Scalar> Segment<T> {
    fn value(&self, z: T) -> T {
        let t = z - self.a;
        self.v + t * (self.d + self.c * t)
    }

    fn deriv(&self, z: T) -> T {
        self.d + T::of(2.0) * self.c * (z - self.a)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawTable<T> {
    z: Vec<T>,
    psi: Vec<T>,
}

/// Shape-preserving interpolant of a strictly convex table.
///
/// Node slopes are averaged secants; each interval gets one extra knot so the
/// derivative is piecewise linear and increasing. Outside the table the end
/// quadratics are extended.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(
    try_from = "RawTable<T>",
    into = "RawTable<T>",
    bound = "T: Scalar + Serialize + serde::de::DeserializeOwned"
)]
pub struct TabulatedCost<T> {
    z: Vec<T>,
    psi: Vec<T>,
    segments: Vec<Segment<T>>,
}

impl<T: PartialEq> PartialEq for TabulatedCost<T> {
    fn eq(&self, other: &Self) -> bool {
        self.z == other.z && self.psi == other.psi
    }
}

impl<T: Scalar> TryFrom<RawTable<T>> for TabulatedCost<T> {
    type Error = Error;
    fn try_from(raw: RawTable<T>) -> Result<Self> {
        TabulatedCost::new(raw.z, raw.psi)
    }
}

impl<T: Scalar> From<TabulatedCost<T>> for RawTable<T> {
    fn from(t: TabulatedCost<T>) -> Self {
        RawTable { z: t.z, psi: t.psi }
    }
}

impl<T: Scalar> TabulatedCost<T> {
    pub fn new(z: Vec<T>, psi: Vec<T>) -> Result<Self> {
        if z.len() != psi.len() {
            return invalid("tabulated cost: z and psi lengths differ");
        }
        if z.len() < 3 {
            return invalid("tabulated cost needs at least 3 nodes");
        }
        if z.iter().chain(&psi).any(|v| !v.is_finite()) || z[0] <= T::zero() {
            return invalid("tabulated cost: nodes must be finite with z > 0");
        }
        if z.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("tabulated cost: z must be strictly increasing");
        }
        let n = z.len() - 1;
        let secant: Vec<T> = (0..n).map(|i| (psi[i + 1] - psi[i]) / (z[i + 1] - z[i])).collect();
        if secant.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("tabulated cost is not strictly convex");
        }
        let half = T::of(0.5);
        let mut d = vec![T::zero(); n + 1];
        d[0] = (T::of(3.0) * secant[0] - secant[1]) * half;
        d[n] = (T::of(3.0) * secant[n - 1] - secant[n - 2]) * half;
        for i in 1..n {
            d[i] = (secant[i - 1] + secant[i]) * half;
        }
        let mut segments = Vec::with_capacity(2 * n);
        for i in 0..n {
            let h = z[i + 1] - z[i];
            let sigma = (secant[i] - d[i]) / (d[i + 1] - d[i]);
            let knot = z[i] + (T::one() - sigma) * h;
            let left = Segment {
                a: z[i],
                v: psi[i],
                d: d[i],
                c: (secant[i] - d[i]) / (T::of(2.0) * (knot - z[i])),
            };
            let right = Segment {
                a: knot,
                v: left.value(knot),
                d: secant[i],
                c: (d[i + 1] - secant[i]) / (T::of(2.0) * (z[i + 1] - knot)),
            };
            segments.push(left);
            segments.push(right);
        }
        Ok(TabulatedCost { z, psi, segments })
    }

    pub fn nodes(&self) -> (&[T], &[T]) {
        (&self.z, &self.psi)
    }

    fn segment(&self, z: T) -> &Segment<T> {
        let i = self.segments.partition_point(|s| s.a <= z);
        &self.segments[i.saturating_sub(1)]
    }

    pub fn value(&self, z: T) -> T {
        self.segment(z).value(z)
    }

    pub fn deriv(&self, z: T) -> T {
        self.segment(z).deriv(z)
    }

    pub fn deriv_inverse(&self, y: T) -> Option<T> {
        let i = self.segments.partition_point(|s| s.d <= y);
        let s = &self.segments[i.saturating_sub(1)];
        Some(s.a + (y - s.d) / (T::of(2.0) * s.c))
    }

    fn scaled(&self, factor: T) -> Self {
        let psi = self.psi.iter().map(|&p| p * factor).collect();
        TabulatedCost::new(self.z.clone(), psi).expect("scaling keeps convexity")
    }

    fn cast<U: Scalar>(&self) -> TabulatedCost<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::of(x.as_f64())).collect();
        TabulatedCost::new(conv(&self.z), conv(&self.psi)).expect("cast keeps convexity")
    }
}
