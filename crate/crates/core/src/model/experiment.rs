use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::cost::CostSpec;
use crate::scalar::Scalar;

/// Atoms closer than this are merged.
pub const ATOM_MERGE_TOL: f64 = 1e-7;
/// Atoms lighter than this are dropped.
pub const ATOM_DROP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom<T> {
    pub z: T,
    pub weight: T,
}

impl<T> Atom<T> {
    pub fn new(z: T, weight: T) -> Self {
        Atom { z, weight }
    }
}

/// Finite distribution of likelihood ratios with a prescribed mean (one by default).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment<T> {
    atoms: Vec<Atom<T>>,
}

impl<T: Scalar> Experiment<T> {
    pub fn new(atoms: Vec<Atom<T>>) -> Result<Self> {
        Self::with_mean(atoms, T::one())
    }

    /// Validates and normalises: drops negligible weights, merges near atoms, sorts by `z`.
    pub fn with_mean(atoms: Vec<Atom<T>>, mean: T) -> Result<Self> {
        if atoms.is_empty() {
            return invalid("experiment has no atoms");
        }
        for a in &atoms {
            if !(a.z > T::zero() && a.z.is_finite()) {
                return invalid(format!("atom location {} is not a positive finite ratio", a.z));
            }
            if !(a.weight >= T::zero() && a.weight.is_finite()) {
                return invalid(format!("atom weight {} is negative or non-finite", a.weight));
            }
        }
        let total: T = atoms.iter().map(|a| a.weight).sum();
        if (total - T::one()).abs() > T::tol(1e-10) {
            return invalid(format!("weights sum to {total}, not 1"));
        }
        let m: T = atoms.iter().map(|a| a.weight * a.z).sum();
        if (m - mean).abs() > T::tol(1e-9) * (T::one() + mean.abs()) {
            return invalid(format!("experiment mean {m} differs from {mean}"));
        }

        let mut kept: Vec<Atom<T>> = atoms.into_iter().filter(|a| a.weight >= T::of(ATOM_DROP_TOL)).collect();
        if kept.is_empty() {
            return invalid("all atom weights are negligible");
        }
        kept.sort_by(|a, b| a.z.partial_cmp(&b.z).unwrap());
        let mut merged: Vec<Atom<T>> = Vec::with_capacity(kept.len());
        for a in kept {
            match merged.last_mut() {
                Some(last) if a.z - last.z <= T::of(ATOM_MERGE_TOL) => {
                    let w = last.weight + a.weight;
                    last.z = (last.z * last.weight + a.z * a.weight) / w;
                    last.weight = w;
                }
                _ => merged.push(a),
            }
        }
        let total: T = merged.iter().map(|a| a.weight).sum();
        for a in &mut merged {
            a.weight = a.weight / total;
        }
        Ok(Experiment { atoms: merged })
    }

    /// The uninformative experiment `δ_z`.
    pub fn degenerate(z: T) -> Self {
        Experiment {
            atoms: vec![Atom::new(z, T::one())],
        }
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.atoms.len() == 1
    }

    pub fn mean(&self) -> T {
        self.expect(|z| z)
    }

    pub fn expect(&self, f: impl Fn(T) -> T) -> T {
        self.atoms.iter().map(|a| a.weight * f(a.z)).sum()
    }

    /// `∫ ψ dF`.
    pub fn cost(&self, cost: &CostSpec<T>) -> Result<T> {
        let mut k = T::zero();
        for a in &self.atoms {
            k = k + a.weight * cost.value(a.z)?;
        }
        Ok(k)
    }
}
