use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{apply, check_shift_domain, unit_phase, OperatorError, OperatorSpec, WeightedShift};
use crate::space::{SparseVector, SpaceTag, ZERO_DROP};

/// Norms above this stop the orbit and flag the record.
pub const OVERFLOW_NORM: f64 = 1e300;

const PAR_THRESHOLD: usize = 1 << 16;

/// Observable trace of `T^1 x0, ..., T^N x0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisitRecord {
    /// Number of recorded steps (`norms.len()`).
    pub horizon: usize,
    pub requested_horizon: usize,
    /// `norms[i - 1] = ||T^i x0||`.
    pub norms: Vec<f64>,
    pub tracked_indices: Vec<i64>,
    /// `tracked[i - 1][j]` is coordinate `tracked_indices[j]` of `T^i x0`.
    pub tracked: Vec<Vec<Complex64>>,
    pub x0_digest: String,
    /// Step at which the norm first exceeded [`OVERFLOW_NORM`]; the record
    /// stops just before it.
    pub overflow_at: Option<usize>,
}

impl VisitRecord {
    pub fn overflowed(&self) -> bool {
        self.overflow_at.is_some()
    }

    /// Builds a record from precomputed norms, applying the overflow cut.
    pub fn from_norms(norms: Vec<f64>, requested_horizon: usize, x0_digest: String) -> Self {
        let cut = norms.iter().position(|n| !(*n <= OVERFLOW_NORM));
        let (norms, overflow_at) = match cut {
            Some(k) => (norms[..k].to_vec(), Some(k + 1)),
            None => (norms, None),
        };
        VisitRecord {
            horizon: norms.len(),
            requested_horizon,
            norms,
            tracked_indices: Vec::new(),
            tracked: Vec::new(),
            x0_digest,
            overflow_at,
        }
    }
}

struct Recorder {
    norms: Vec<f64>,
    tracked_indices: Vec<i64>,
    tracked: Vec<Vec<Complex64>>,
    overflow_at: Option<usize>,
}

impl Recorder {
    fn new(horizon: usize, tracked_indices: &[i64]) -> Self {
        Recorder {
            norms: Vec::with_capacity(horizon),
            tracked_indices: tracked_indices.to_vec(),
            tracked: Vec::new(),
            overflow_at: None,
        }
    }

    /// Returns false once the orbit has overflowed.
    fn push(&mut self, step: usize, norm: f64, coords: impl FnOnce(&[i64]) -> Vec<Complex64>) -> bool {
        if !(norm <= OVERFLOW_NORM) {
            self.overflow_at = Some(step);
            return false;
        }
        self.norms.push(norm);
        if !self.tracked_indices.is_empty() {
            let c = coords(&self.tracked_indices);
            self.tracked.push(c);
        }
        true
    }

    fn finish(self, requested_horizon: usize, x0: &SparseVector) -> VisitRecord {
        VisitRecord {
            horizon: self.norms.len(),
            requested_horizon,
            norms: self.norms,
            tracked_indices: self.tracked_indices,
            tracked: self.tracked,
            x0_digest: x0.digest(),
            overflow_at: self.overflow_at,
        }
    }
}

/// Iterates the operator from `x0` and records the norm after each step.
///
/// Shifts and diagonal blocks are updated in place (an index offset plus a
/// multiply per live coefficient); the floating-point operations are the
/// same as repeated [`apply`], so the norms agree bit for bit with
/// [`orbit_reference`].
pub fn orbit(
    op: &OperatorSpec,
    x0: &SparseVector,
    horizon: usize,
    space: &SpaceTag,
    tracked: &[i64],
) -> Result<VisitRecord, OperatorError> {
    if horizon == 0 {
        return Err(OperatorError::EmptyHorizon);
    }
    op.check_domain(x0)?;
    let rec = Recorder::new(horizon, tracked);
    let rec = match op {
        OperatorSpec::Shift(s) => shift_orbit(s, x0, horizon, space, rec)?,
        OperatorSpec::Blocks { angles } => block_orbit(angles, x0, horizon, space, rec),
        OperatorSpec::DirectSum { .. } => generic_orbit(op, x0, horizon, space, rec)?,
    };
    Ok(rec.finish(horizon, x0))
}

fn shift_orbit(
    s: &WeightedShift,
    x0: &SparseVector,
    horizon: usize,
    space: &SpaceTag,
    mut rec: Recorder,
) -> Result<Recorder, OperatorError> {
    check_shift_domain(s, x0)?;
    let Some((lo, hi)) = x0.support_bounds() else {
        for t in 1..=horizon {
            rec.push(t, 0.0, |idx| vec![Complex64::new(0.0, 0.0); idx.len()]);
        }
        return Ok(rec);
    };
    let wlo = if s.bilateral { lo - horizon as i64 + 1 } else { 1 };
    let table = if wlo <= hi { Some(s.weights.table(wlo, hi, s.bound)?) } else { None };

    let mut orig: Vec<i64> = x0.entries().iter().map(|e| e.0).collect();
    let mut vals: Vec<Complex64> = x0.entries().iter().map(|e| e.1).collect();
    let mut start = 0usize;
    for t in 1..=horizon {
        let shift_before = (t - 1) as i64;
        if !s.bilateral {
            while start < orig.len() && orig[start] - shift_before <= 0 {
                start += 1;
            }
        }
        let live_orig = &orig[start..];
        let live = &mut vals[start..];
        let mut dropped = false;
        if let Some(table) = &table {
            if live.len() >= PAR_THRESHOLD {
                dropped = live
                    .par_iter_mut()
                    .zip(live_orig.par_iter())
                    .map(|(v, &o)| {
                        *v = *v * table.get(o - shift_before);
                        v.norm() < ZERO_DROP
                    })
                    .reduce(|| false, |a, b| a || b);
            } else {
                for (v, &o) in live.iter_mut().zip(live_orig) {
                    *v = *v * table.get(o - shift_before);
                    dropped |= v.norm() < ZERO_DROP;
                }
            }
        }
        if dropped {
            let mut k = start;
            for j in start..orig.len() {
                if vals[j].norm() >= ZERO_DROP {
                    orig[k] = orig[j];
                    vals[k] = vals[j];
                    k += 1;
                }
            }
            orig.truncate(k);
            vals.truncate(k);
        }
        let live = &vals[start..];
        let norm = live_norm(live, space);
        let (o, v, shift_now) = (&orig[start..], live, t as i64);
        let ok = rec.push(t, norm, |idx| {
            idx.iter()
                .map(|&i| match o.binary_search(&(i + shift_now)) {
                    Ok(k) => v[k],
                    Err(_) => Complex64::new(0.0, 0.0),
                })
                .collect()
        });
        if !ok {
            break;
        }
    }
    Ok(rec)
}

fn live_norm(vals: &[Complex64], space: &SpaceTag) -> f64 {
    if space.exponent().is_none() && vals.len() >= PAR_THRESHOLD {
        vals.par_iter().map(|v| v.norm()).reduce(|| 0.0, f64::max)
    } else {
        space.norm_of_moduli(vals.iter().map(|v| v.norm()))
    }
}

fn block_orbit(angles: &[f64], x0: &SparseVector, horizon: usize, space: &SpaceTag, mut rec: Recorder) -> Recorder {
    let idx: Vec<i64> = x0.entries().iter().map(|e| e.0).collect();
    let phases: Vec<Complex64> = idx.iter().map(|&i| unit_phase(angles[i as usize])).collect();
    let mut vals: Vec<Complex64> = x0.entries().iter().map(|e| e.1).collect();
    let mut alive: Vec<bool> = vec![true; vals.len()];
    for t in 1..=horizon {
        for ((v, p), a) in vals.iter_mut().zip(&phases).zip(alive.iter_mut()) {
            if *a {
                *v = *v * p;
                *a = v.norm() >= ZERO_DROP;
            }
        }
        let norm = space.norm_of_moduli(vals.iter().zip(&alive).filter(|(_, a)| **a).map(|(v, _)| v.norm()));
        let ok = rec.push(t, norm, |tr| {
            tr.iter()
                .map(|i| match idx.binary_search(i) {
                    Ok(k) if alive[k] => vals[k],
                    _ => Complex64::new(0.0, 0.0),
                })
                .collect()
        });
        if !ok {
            break;
        }
    }
    rec
}

fn generic_orbit(
    op: &OperatorSpec,
    x0: &SparseVector,
    horizon: usize,
    space: &SpaceTag,
    mut rec: Recorder,
) -> Result<Recorder, OperatorError> {
    let mut cur = x0.clone();
    for t in 1..=horizon {
        cur = apply(op, &cur)?;
        let c = &cur;
        if !rec.push(t, cur.norm(space), |idx| idx.iter().map(|&i| c.get(i)).collect()) {
            break;
        }
    }
    Ok(rec)
}

/// Slow path: materializes every iterate with [`apply`].
pub fn orbit_reference(
    op: &OperatorSpec,
    x0: &SparseVector,
    horizon: usize,
    space: &SpaceTag,
) -> Result<Vec<f64>, OperatorError> {
    let mut cur = x0.clone();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        cur = apply(op, &cur)?;
        out.push(cur.norm(space));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{eigenvector_field, WeightSeq};

    const C0: SpaceTag = SpaceTag::C0Unilateral;

    #[test]
    fn unweighted_shift_kills_basis_vector() {
        let op = OperatorSpec::backward_shift();
        let k = 7;
        let rec = orbit(&op, &SparseVector::basis(k), k as usize + 5, &C0, &[]).unwrap();
        let mut expect = vec![1.0; k as usize];
        expect.extend([0.0; 5]);
        assert_eq!(rec.norms, expect);
    }

    #[test]
    fn weights_two_grow_then_vanish() {
        let op = OperatorSpec::shift(WeightedShift::constant(2.0));
        let rec = orbit(&op, &SparseVector::basis(10), 15, &C0, &[0]).unwrap();
        for i in 1..=10 {
            assert_eq!(rec.norms[i - 1], 2f64.powi(i as i32));
        }
        assert!(rec.norms[10..].iter().all(|&n| n == 0.0));
        assert_eq!(rec.tracked[9][0].re, 1024.0);
    }

    #[test]
    fn fixed_point_orbit_is_flat() {
        let s = WeightedShift::constant(2.0);
        let field = eigenvector_field(&s, Complex64::new(1.0, 0.0), Some(200)).unwrap();
        let op = OperatorSpec::shift(s);
        let rec = orbit(&op, &field.vector, 100, &C0, &[]).unwrap();
        let n0 = field.vector.norm(&C0);
        assert!(rec.norms.iter().all(|n| (n - n0).abs() <= 1e-9 * n0));
    }

    #[test]
    fn overflow_truncates_and_flags() {
        let op = OperatorSpec::shift(WeightedShift::bilateral(WeightSeq::constant(1e10)));
        let rec = orbit(&op, &SparseVector::basis(0), 100, &SpaceTag::C0Bilateral, &[]).unwrap();
        assert_eq!(rec.overflow_at, Some(31));
        assert_eq!(rec.horizon, 30);
        assert_eq!(rec.requested_horizon, 100);
    }

    #[test]
    fn zero_horizon_is_an_error() {
        let op = OperatorSpec::backward_shift();
        assert_eq!(orbit(&op, &SparseVector::zero(), 0, &C0, &[]), Err(OperatorError::EmptyHorizon));
    }

    #[test]
    fn streaming_equals_reference_bitwise() {
        let op = OperatorSpec::shift(WeightedShift::bilateral(WeightSeq::Table {
            default: 1.3,
            entries: vec![(-5, 0.7), (0, 0.9), (4, 2.5)],
        }));
        let x0 = SparseVector::from_entries((-6..12).map(|i| (i, Complex64::new(1.0 / (i as f64 + 7.5), 0.3))));
        for space in [SpaceTag::C0Bilateral, SpaceTag::LpBilateral { p: 2.0 }, SpaceTag::LpBilateral { p: 1.5 }] {
            let fast = orbit(&op, &x0, 400, &space, &[]).unwrap();
            let slow = orbit_reference(&op, &x0, 400, &space).unwrap();
            assert_eq!(fast.norms, slow);
        }
    }

    #[test]
    fn tiny_coordinates_are_dropped_like_the_reference() {
        let op = OperatorSpec::shift(WeightedShift::bilateral(WeightSeq::constant(1e-5)));
        let x0 = SparseVector::from_real([(0, 1.0), (3, 1e-290)]);
        let fast = orbit(&op, &x0, 80, &SpaceTag::C0Bilateral, &[]).unwrap();
        let slow = orbit_reference(&op, &x0, 80, &SpaceTag::C0Bilateral).unwrap();
        assert_eq!(fast.norms, slow);
        assert_eq!(*fast.norms.last().unwrap(), 0.0);
    }
}
