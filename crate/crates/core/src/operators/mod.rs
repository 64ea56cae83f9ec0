//! Declarative operator specifications and their exact action on sparse
//! vectors.
//!
//! Backward shift convention: `(Tx)_n = w_{n+1} x_{n+1}`, so the coefficient
//! stored at index `m` moves to `m - 1` and picks up the factor `w_m`. On the
//! unilateral spaces the coefficient at index 0 is discarded.

mod field;
mod orbit;
mod view;
mod weights;

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{SparseVector, SpaceTag};

pub use field::{eigenvector_field, periodic_points, EigenField, FieldScan, PeriodicPoint, FIELD_TAIL_TOL, MAX_FIELD_TRUNC};
pub use orbit::{orbit, orbit_reference, VisitRecord, OVERFLOW_NORM};
pub use view::{log_weight_prefix, LogCoeff, LogVector, ShiftOrbitView};
pub use weights::{BrWeights, DesignSet, WeightSeq, WeightTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("vector support incompatible with the operator domain (index {0})")]
    IncompatibleDomain(i64),
    #[error("invalid weight {value} at index {index}")]
    InvalidWeight { index: i64, value: f64 },
    #[error("invalid operator spec: {0}")]
    InvalidSpec(String),
    #[error("eigenvector field does not converge: tail {tail:e} after {scanned} terms")]
    DivergentField { tail: f64, scanned: usize },
    #[error("eigenvalue {0} is not unimodular")]
    NotUnimodular(Complex64),
    #[error("horizon must be at least 1")]
    EmptyHorizon,
}

pub const DEFAULT_WEIGHT_BOUND: f64 = 1e12;

fn default_bound() -> f64 {
    DEFAULT_WEIGHT_BOUND
}

/// Weighted backward shift on `Z_+` or `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedShift {
    pub bilateral: bool,
    pub weights: WeightSeq,
    /// Every queried weight must lie in `(0, bound]`.
    #[serde(default = "default_bound")]
    pub bound: f64,
}

impl WeightedShift {
    pub fn unilateral(weights: WeightSeq) -> Self {
        WeightedShift { bilateral: false, weights, bound: DEFAULT_WEIGHT_BOUND }
    }

    pub fn bilateral(weights: WeightSeq) -> Self {
        WeightedShift { bilateral: true, weights, bound: DEFAULT_WEIGHT_BOUND }
    }

    pub fn constant(w: f64) -> Self {
        Self::unilateral(WeightSeq::constant(w))
    }

    pub fn weight(&self, k: i64) -> f64 {
        self.weights.weight(k)
    }

    fn apply(&self, v: &SparseVector) -> Result<SparseVector, OperatorError> {
        check_shift_domain(self, v)?;
        let out = v
            .entries()
            .iter()
            .filter(|(m, _)| self.bilateral || *m > 0)
            .map(|&(m, c)| {
                let w = self.weights.weight(m);
                if !(w.is_finite() && w > 0.0 && w <= self.bound) {
                    return Err(OperatorError::InvalidWeight { index: m, value: w });
                }
                Ok((m - 1, c * w))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SparseVector::from_sorted(out))
    }
}

pub(crate) fn check_shift_domain(s: &WeightedShift, v: &SparseVector) -> Result<(), OperatorError> {
    if !s.bilateral {
        if let Some((lo, _)) = v.support_bounds() {
            if lo < 0 {
                return Err(OperatorError::IncompatibleDomain(lo));
            }
        }
    }
    Ok(())
}

/// One summand of a direct sum: the sub-operator acts on indices
/// `[offset, offset + len)` (unbounded above when `len` is absent), with
/// local index 0 at `offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumPart {
    pub offset: i64,
    #[serde(default)]
    pub len: Option<u64>,
    pub op: OperatorSpec,
}

impl SumPart {
    fn contains(&self, i: i64) -> bool {
        i >= self.offset && self.len.is_none_or(|l| ((i - self.offset) as u64) < l)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum OperatorSpec {
    #[serde(rename = "shift")]
    Shift(WeightedShift),
    /// Diagonal operator multiplying coordinate `k` by `e^{2πi θ_k}`.
    #[serde(rename = "blocks")]
    Blocks { angles: Vec<f64> },
    #[serde(rename = "sum")]
    DirectSum { parts: Vec<SumPart> },
}

/// `e^{2πiθ}`, exact at quarter turns.
pub fn unit_phase(theta: f64) -> Complex64 {
    let t = theta.rem_euclid(1.0);
    if t == 0.0 {
        Complex64::new(1.0, 0.0)
    } else if t == 0.25 {
        Complex64::new(0.0, 1.0)
    } else if t == 0.5 {
        Complex64::new(-1.0, 0.0)
    } else if t == 0.75 {
        Complex64::new(0.0, -1.0)
    } else {
        Complex64::from_polar(1.0, TAU * t)
    }
}

impl OperatorSpec {
    pub fn shift(s: WeightedShift) -> Self {
        OperatorSpec::Shift(s)
    }

    /// Unweighted unilateral backward shift.
    pub fn backward_shift() -> Self {
        OperatorSpec::Shift(WeightedShift::constant(1.0))
    }

    pub fn blocks(angles: Vec<f64>) -> Self {
        OperatorSpec::Blocks { angles }
    }

    pub fn validate(&self) -> Result<(), OperatorError> {
        match self {
            OperatorSpec::Shift(s) => {
                s.weights.validate()?;
                if !(s.bound > 0.0) {
                    return Err(OperatorError::InvalidSpec("weight bound must be positive".into()));
                }
                Ok(())
            }
            OperatorSpec::Blocks { angles } => {
                if let Some(a) = angles.iter().find(|a| !(**a >= 0.0 && **a < 1.0)) {
                    return Err(OperatorError::InvalidSpec(format!("block angle {a} outside [0,1)")));
                }
                Ok(())
            }
            OperatorSpec::DirectSum { parts } => {
                let mut sorted: Vec<&SumPart> = parts.iter().collect();
                sorted.sort_by_key(|p| p.offset);
                for w in sorted.windows(2) {
                    match w[0].len {
                        Some(l) if w[0].offset + l as i64 <= w[1].offset => {}
                        _ => return Err(OperatorError::InvalidSpec("direct sum parts overlap".into())),
                    }
                }
                parts.iter().try_for_each(|p| p.op.validate())
            }
        }
    }

    /// Whether `v` lies in the operator's domain.
    pub fn check_domain(&self, v: &SparseVector) -> Result<(), OperatorError> {
        match self {
            OperatorSpec::Shift(s) => check_shift_domain(s, v),
            OperatorSpec::Blocks { angles } => match v.entries().iter().find(|(i, _)| *i < 0 || *i as usize >= angles.len()) {
                Some(&(i, _)) => Err(OperatorError::IncompatibleDomain(i)),
                None => Ok(()),
            },
            OperatorSpec::DirectSum { parts } => {
                for &(i, _) in v.entries() {
                    if !parts.iter().any(|p| p.contains(i)) {
                        return Err(OperatorError::IncompatibleDomain(i));
                    }
                }
                Ok(())
            }
        }
    }

    /// The natural space of the operator when it acts on sup-normed sequences.
    pub fn default_space(&self) -> SpaceTag {
        match self {
            OperatorSpec::Shift(s) if s.bilateral => SpaceTag::C0Bilateral,
            OperatorSpec::DirectSum { parts } if parts.iter().any(|p| p.offset < 0) => SpaceTag::C0Bilateral,
            _ => SpaceTag::C0Unilateral,
        }
    }

    pub fn as_shift(&self) -> Option<&WeightedShift> {
        match self {
            OperatorSpec::Shift(s) => Some(s),
            _ => None,
        }
    }
}

/// Exact action of the operator on a finitely supported vector.
pub fn apply(op: &OperatorSpec, v: &SparseVector) -> Result<SparseVector, OperatorError> {
    match op {
        OperatorSpec::Shift(s) => s.apply(v),
        OperatorSpec::Blocks { angles } => {
            op.check_domain(v)?;
            Ok(SparseVector::from_sorted(
                v.entries().iter().map(|&(i, c)| (i, c * unit_phase(angles[i as usize]))).collect(),
            ))
        }
        OperatorSpec::DirectSum { parts } => {
            op.check_domain(v)?;
            let mut out = Vec::with_capacity(v.len());
            for part in parts {
                let local = SparseVector::from_sorted_unchecked(
                    v.entries()
                        .iter()
                        .filter(|(i, _)| part.contains(*i))
                        .map(|&(i, c)| (i - part.offset, c))
                        .collect(),
                );
                if local.is_empty() {
                    continue;
                }
                let image = apply(&part.op, &local)?;
                out.extend(
                    image
                        .into_entries()
                        .into_iter()
                        .map(|(i, c)| (i + part.offset, c))
                        .filter(|(i, _)| part.contains(*i)),
                );
            }
            Ok(SparseVector::from_entries(out))
        }
    }
}

/// `T^n v` by repeated application.
pub fn apply_power(op: &OperatorSpec, v: &SparseVector, n: usize) -> Result<SparseVector, OperatorError> {
    let mut cur = v.clone();
    for _ in 0..n {
        cur = apply(op, &cur)?;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{combine, sub};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn unweighted_shift_moves_e1_to_e0() {
        let op = OperatorSpec::backward_shift();
        assert_eq!(apply(&op, &SparseVector::basis(1)).unwrap(), SparseVector::basis(0));
        assert!(apply(&op, &SparseVector::basis(0)).unwrap().is_empty());
    }

    #[test]
    fn unilateral_rejects_negative_support() {
        let op = OperatorSpec::backward_shift();
        assert_eq!(apply(&op, &SparseVector::basis(-1)), Err(OperatorError::IncompatibleDomain(-1)));
    }

    #[test]
    fn weights_two_geometric_vector_is_almost_eigen() {
        // E = sum_{n<=64} (i/2)^n e_n; T E - iE only differs in the top coordinate
        let op = OperatorSpec::shift(WeightedShift::constant(2.0));
        let lambda = c(0.0, 1.0);
        let mut z = c(1.0, 0.0);
        let mut entries = Vec::new();
        for n in 0..=64 {
            entries.push((n, z));
            z *= lambda / 2.0;
        }
        let e = SparseVector::from_entries(entries);
        let diff = combine(c(1.0, 0.0), &apply(&op, &e).unwrap(), -lambda, &e);
        assert!(diff.norm(&SpaceTag::C0Unilateral) <= 2f64.powi(-63));
    }

    #[test]
    fn quarter_turn_block() {
        let op = OperatorSpec::blocks(vec![0.25]);
        assert_eq!(apply(&op, &SparseVector::basis(0)).unwrap().entries(), &[(0, c(0.0, 1.0))]);
        assert!(apply(&op, &SparseVector::basis(1)).is_err());
    }

    #[test]
    fn bilateral_shift_crosses_zero() {
        let op = OperatorSpec::shift(WeightedShift::bilateral(WeightSeq::constant(3.0)));
        let v = apply(&op, &SparseVector::basis(0)).unwrap();
        assert_eq!(v.entries(), &[(-1, c(3.0, 0.0))]);
    }

    #[test]
    fn direct_sum_acts_per_part() {
        let op = OperatorSpec::DirectSum {
            parts: vec![
                SumPart { offset: 0, len: Some(2), op: OperatorSpec::blocks(vec![0.5, 0.25]) },
                SumPart { offset: 10, len: None, op: OperatorSpec::shift(WeightedShift::constant(2.0)) },
            ],
        };
        op.validate().unwrap();
        let v = SparseVector::from_real([(0, 1.0), (1, 1.0), (10, 1.0), (12, 1.0)]);
        let w = apply(&op, &v).unwrap();
        assert_eq!(w, SparseVector::from_entries([(0, c(-1.0, 0.0)), (1, c(0.0, 1.0)), (11, c(2.0, 0.0))]));
        assert!(apply(&op, &SparseVector::basis(5)).is_err());
    }

    #[test]
    fn overlapping_parts_rejected() {
        let op = OperatorSpec::DirectSum {
            parts: vec![
                SumPart { offset: 0, len: Some(3), op: OperatorSpec::blocks(vec![0.0; 3]) },
                SumPart { offset: 2, len: Some(3), op: OperatorSpec::blocks(vec![0.0; 3]) },
            ],
        };
        assert!(op.validate().is_err());
    }

    #[test]
    fn spec_json_shape() {
        let op = OperatorSpec::shift(WeightedShift::bilateral(WeightSeq::Table {
            default: 2.0,
            entries: vec![(-1, 0.5), (3, 4.0)],
        }));
        let s = serde_json::to_string(&op).unwrap();
        assert!(s.contains("\"variant\":\"shift\""));
        assert!(s.contains("\"kind\":\"table\""));
        assert!(s.contains("\"entries\":[[-1,0.5],[3,4.0]]"));
        let back: OperatorSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, op);
        let parsed: OperatorSpec =
            serde_json::from_str(r#"{"variant":"shift","bilateral":false,"weights":{"kind":"const","value":2.0}}"#).unwrap();
        assert_eq!(parsed, OperatorSpec::shift(WeightedShift::constant(2.0)));
    }

    #[test]
    fn apply_is_linear_on_a_fixed_pair() {
        let op = OperatorSpec::shift(WeightedShift::constant(2.0));
        let x = SparseVector::from_real([(0, 1.0), (3, -2.0)]);
        let y = SparseVector::from_real([(3, 1.0), (5, 0.5)]);
        let (a, b) = (c(0.5, 1.0), c(-2.0, 0.25));
        let lhs = apply(&op, &combine(a, &x, b, &y)).unwrap();
        let rhs = combine(a, &apply(&op, &x).unwrap(), b, &apply(&op, &y).unwrap());
        assert!(sub(&lhs, &rhs).norm(&SpaceTag::C0Unilateral) <= 1e-12);
    }
}
