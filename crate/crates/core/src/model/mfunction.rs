use crate::error::Result;
use crate::model::cost::CostSpec;
use crate::model::envelope::{AffinePiece, PolicyEnvelope};
use crate::scalar::Scalar;

/// Net pointwise value `M(z) = P(z) - ψ(z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MFunction<T> {
    pub envelope: PolicyEnvelope<T>,
    pub cost: CostSpec<T>,
}

impl<T: Scalar> MFunction<T> {
    pub fn new(envelope: PolicyEnvelope<T>, cost: CostSpec<T>) -> Result<Self> {
        cost.validate()?;
        Ok(MFunction { envelope, cost })
    }

    pub fn eval(&self, z: T) -> Result<T> {
        Ok(self.envelope.eval(z)? - self.cost.value(z)?)
    }

    pub fn eval_unchecked(&self, z: T) -> T {
        self.envelope.eval_unchecked(z) - self.cost.psi(z)
    }

    /// Value of envelope piece `k` net of cost, ignoring the other pieces.
    pub fn piece_value(&self, k: usize, z: T) -> T {
        self.envelope.pieces()[k].at(z) - self.cost.psi(z)
    }

    /// `(sup_z piece_k(z) - s z, argmax)` over the envelope domain.
    pub fn conjugate(&self, k: usize, s: T) -> (T, T) {
        let (lo, hi) = self.envelope.domain();
        let AffinePiece { intercept, slope } = self.envelope.pieces()[k];
        let z = self.cost.best_response(slope - s, lo, hi);
        (intercept + (slope - s) * z - self.cost.psi(z), z)
    }

    pub fn cast<U: Scalar>(&self) -> MFunction<U> {
        MFunction {
            envelope: self.envelope.cast(),
            cost: self.cost.cast(),
        }
    }
}
