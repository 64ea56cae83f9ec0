use num_complex::Complex64;
use serde::Serialize;

use super::{apply, apply_power, unit_phase, OperatorError, OperatorSpec, WeightedShift};
use crate::space::{combine, sub, SparseVector, SpaceTag};

/// Tail tolerance for deciding that an eigenvector field converges.
pub const FIELD_TAIL_TOL: f64 = 1e-12;
/// Largest default truncation of a field.
pub const MAX_FIELD_TRUNC: usize = 10_000;
const SCAN_LEN: usize = 2 * MAX_FIELD_TRUNC;

/// Coefficient moduli `1 / (w_1 ... w_n)` of the field and their suffix sums.
#[derive(Debug, Clone)]
pub struct FieldScan {
    /// `terms[n] = 1 / prod_{k=1}^n w_k`, `terms[0] = 1`.
    pub terms: Vec<f64>,
    /// `tails[n] = sum_{m > n} terms[m]` over the scanned range.
    pub tails: Vec<f64>,
}

impl FieldScan {
    pub fn new(s: &WeightedShift) -> Result<Self, OperatorError> {
        if s.bilateral {
            return Err(OperatorError::InvalidSpec("eigenvector fields are built for unilateral shifts".into()));
        }
        let mut terms = Vec::with_capacity(SCAN_LEN + 1);
        terms.push(1.0);
        let mut prod = 1.0f64;
        for k in 1..=SCAN_LEN as i64 {
            let w = s.weight(k);
            if !(w.is_finite() && w > 0.0 && w <= s.bound) {
                return Err(OperatorError::InvalidWeight { index: k, value: w });
            }
            prod *= w;
            let t = 1.0 / prod;
            terms.push(t);
            if t == 0.0 {
                break;
            }
        }
        let mut tails = vec![0.0; terms.len()];
        for n in (0..terms.len() - 1).rev() {
            tails[n] = tails[n + 1] + terms[n + 1];
        }
        Ok(FieldScan { terms, tails })
    }

    /// Smallest truncation with tail below [`FIELD_TAIL_TOL`], if any up to
    /// [`MAX_FIELD_TRUNC`].
    pub fn default_trunc(&self) -> Option<usize> {
        // a tail that has not died out by the end of the scan cannot be trusted
        let last = *self.terms.last().unwrap();
        if last != 0.0 && last * (SCAN_LEN as f64) >= FIELD_TAIL_TOL {
            return None;
        }
        (0..self.tails.len().min(MAX_FIELD_TRUNC + 1)).find(|&m| self.tails[m] < FIELD_TAIL_TOL)
    }

    pub fn term(&self, n: usize) -> f64 {
        self.terms.get(n).copied().unwrap_or(0.0)
    }
}

/// Truncated eigenvector field `E(λ) = sum_{n<=M} λ^n / (w_1...w_n) e_n`.
#[derive(Debug, Clone, Serialize)]
pub struct EigenField {
    #[serde(skip)]
    pub vector: SparseVector,
    pub lambda: (f64, f64),
    pub trunc: usize,
    /// Measured sup-norm of `T E - λ E`.
    pub residual: f64,
    /// Analytic bound `1 / (w_1...w_M)` on that residual.
    pub tail_bound: f64,
}

impl EigenField {
    pub fn eigenvalue(&self) -> Complex64 {
        Complex64::new(self.lambda.0, self.lambda.1)
    }
}

/// Builds the eigenvector field of a unilateral shift at a unimodular `λ`.
///
/// `trunc` defaults to the smallest `M` with coefficient tail below
/// [`FIELD_TAIL_TOL`]. Fails with `DivergentField` when no such `M` exists
/// up to [`MAX_FIELD_TRUNC`], whatever truncation was requested.
pub fn eigenvector_field(s: &WeightedShift, lambda: Complex64, trunc: Option<usize>) -> Result<EigenField, OperatorError> {
    if (lambda.norm() - 1.0).abs() > 1e-12 {
        return Err(OperatorError::NotUnimodular(lambda));
    }
    let scan = FieldScan::new(s)?;
    field_from_scan(s, &scan, lambda, trunc)
}

pub(crate) fn field_from_scan(
    s: &WeightedShift,
    scan: &FieldScan,
    lambda: Complex64,
    trunc: Option<usize>,
) -> Result<EigenField, OperatorError> {
    let Some(m_default) = scan.default_trunc() else {
        let n = scan.tails.len().min(MAX_FIELD_TRUNC);
        return Err(OperatorError::DivergentField { tail: scan.tails[n.saturating_sub(1)], scanned: n });
    };
    let m = trunc.unwrap_or(m_default);
    let mut entries = Vec::with_capacity(m + 1);
    let mut pow = Complex64::new(1.0, 0.0);
    for n in 0..=m {
        entries.push((n as i64, pow * scan.term(n)));
        pow *= lambda;
        if n % 64 == 63 {
            pow /= pow.norm();
        }
    }
    let vector = SparseVector::from_entries(entries);
    let op = OperatorSpec::Shift(s.clone());
    let image = apply(&op, &vector)?;
    let residual = combine(Complex64::new(1.0, 0.0), &image, -lambda, &vector).norm(&SpaceTag::C0Unilateral);
    Ok(EigenField {
        vector,
        lambda: (lambda.re, lambda.im),
        trunc: m,
        residual,
        tail_bound: scan.term(m),
    })
}

/// A point with `T^N v ≈ v`, together with the measured sup-norm residual.
#[derive(Debug, Clone)]
pub struct PeriodicPoint {
    pub vector: SparseVector,
    /// Eigenvalue angle `j / N` of the generating eigenvector.
    pub angle: f64,
    pub residual: f64,
}

/// Periodic points of period `period` built from unimodular eigenvectors:
/// basis vectors of blocks whose angle is a multiple of `1/period`, and the
/// fields `E(λ)` at the `period`-th roots of unity for shifts that admit
/// them. Empty when there are none.
pub fn periodic_points(op: &OperatorSpec, period: usize, trunc: Option<usize>) -> Result<Vec<PeriodicPoint>, OperatorError> {
    if period == 0 {
        return Err(OperatorError::InvalidSpec("period must be >= 1".into()));
    }
    let mut out = Vec::new();
    match op {
        OperatorSpec::Blocks { angles } => {
            for (k, &theta) in angles.iter().enumerate() {
                let q = theta * period as f64;
                if (q - q.round()).abs() <= 1e-12 {
                    let v = SparseVector::basis(k as i64);
                    let residual = residual_after(op, &v, period)?;
                    out.push(PeriodicPoint { vector: v, angle: theta, residual });
                }
            }
        }
        OperatorSpec::Shift(s) => {
            if s.bilateral {
                return Ok(out);
            }
            let scan = FieldScan::new(s)?;
            if scan.default_trunc().is_none() {
                return Ok(out);
            }
            for j in 0..period {
                let angle = j as f64 / period as f64;
                let f = field_from_scan(s, &scan, unit_phase(angle), trunc)?;
                let residual = residual_after(op, &f.vector, period)?;
                out.push(PeriodicPoint { vector: f.vector, angle, residual });
            }
        }
        OperatorSpec::DirectSum { parts } => {
            for part in parts {
                for p in periodic_points(&part.op, period, trunc)? {
                    let moved = SparseVector::from_entries(
                        p.vector.entries().iter().map(|&(i, c)| (i + part.offset, c)),
                    );
                    if op.check_domain(&moved).is_ok() {
                        let residual = residual_after(op, &moved, period)?;
                        out.push(PeriodicPoint { vector: moved, angle: p.angle, residual });
                    }
                }
            }
        }
    }
    Ok(out)
}

fn residual_after(op: &OperatorSpec, v: &SparseVector, n: usize) -> Result<f64, OperatorError> {
    Ok(sub(&apply_power(op, v, n)?, v).norm(&SpaceTag::C0Bilateral))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::WeightSeq;

    fn two() -> WeightedShift {
        WeightedShift::constant(2.0)
    }

    #[test]
    fn geometric_coefficients_for_lambda_one() {
        let f = eigenvector_field(&two(), Complex64::new(1.0, 0.0), Some(4)).unwrap();
        assert_eq!(f.vector, SparseVector::from_real([(0, 1.0), (1, 0.5), (2, 0.25), (3, 0.125), (4, 0.0625)]));
    }

    #[test]
    fn cube_root_residual_within_tail_bound() {
        let lambda = unit_phase(1.0 / 3.0);
        let f = eigenvector_field(&two(), lambda, Some(60)).unwrap();
        // analytic bound: only the top coordinate survives, of size 2^-60
        assert!(f.residual <= 2f64.powi(-60) * (1.0 + 1e-12));
        assert!(f.residual <= f.tail_bound * (1.0 + 1e-12));
    }

    #[test]
    fn unit_weights_diverge() {
        let s = WeightedShift::constant(1.0);
        assert!(matches!(
            eigenvector_field(&s, Complex64::new(1.0, 0.0), None),
            Err(OperatorError::DivergentField { .. })
        ));
    }

    #[test]
    fn slowly_growing_weights_still_converge() {
        let s = WeightedShift::constant(1.01);
        let f = eigenvector_field(&s, Complex64::new(0.0, 1.0), None).unwrap();
        assert!(f.trunc > 2000 && f.trunc <= MAX_FIELD_TRUNC);
    }

    #[test]
    fn non_unimodular_rejected() {
        assert!(matches!(
            eigenvector_field(&two(), Complex64::new(1.1, 0.0), None),
            Err(OperatorError::NotUnimodular(_))
        ));
    }

    #[test]
    fn default_trunc_for_weights_two() {
        let f = eigenvector_field(&two(), Complex64::new(1.0, 0.0), None).unwrap();
        // tail after M is 2^-M
        assert_eq!(f.trunc, 40);
    }

    #[test]
    fn block_periodic_points() {
        let op = OperatorSpec::blocks(vec![0.25]);
        let p4 = periodic_points(&op, 4, None).unwrap();
        assert_eq!(p4.len(), 1);
        assert_eq!(p4[0].vector, SparseVector::basis(0));
        assert_eq!(p4[0].residual, 0.0);
        assert!(periodic_points(&op, 3, None).unwrap().is_empty());
    }

    #[test]
    fn shift_fixed_point() {
        let op = OperatorSpec::shift(two());
        let pts = periodic_points(&op, 1, Some(64)).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].residual <= 2f64.powi(-63));
    }

    #[test]
    fn shift_fourth_roots() {
        let op = OperatorSpec::shift(two());
        let pts = periodic_points(&op, 4, Some(64)).unwrap();
        let angles: Vec<f64> = pts.iter().map(|p| p.angle).collect();
        assert_eq!(angles, vec![0.0, 0.25, 0.5, 0.75]);
        for p in &pts {
            // T^4 E - E lives on the top four coordinates: at most 2^-61
            assert!(p.residual <= 2f64.powi(-61), "{}", p.residual);
        }
        assert_eq!(pts[1].vector.get(1), Complex64::new(0.0, 0.5));
    }

    #[test]
    fn divergent_shift_has_no_periodic_points() {
        let op = OperatorSpec::shift(WeightedShift::unilateral(WeightSeq::constant(1.0)));
        assert!(periodic_points(&op, 2, None).unwrap().is_empty());
    }
}
