//! Orbit evaluation for unilateral shifts with coefficients stored as
//! logarithms.
//!
//! A witness vector for a shift with weights 2 and horizon `10^5` has
//! coefficients near `2^{-100000}`, far below the `f64` range. The view keeps
//! `ln|x_n|` and evaluates `(T^t x)_k = x_{k+t} * w_{k+1} ... w_{k+t}` as
//! `exp(b_{k+t} - S(k))`, where `S` is the prefix sum of `ln w` and
//! `b_n = ln|x_n| + S(n)`. No iterate is ever materialized.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{OperatorError, WeightedShift};
use crate::space::{SparseVector, SpaceTag, ZERO_DROP};

/// One coefficient `exp(log_mod) * phase`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogCoeff {
    pub index: i64,
    pub log_mod: f64,
    /// Unit complex number.
    pub phase: (f64, f64),
}

impl LogCoeff {
    pub fn new(index: i64, value: Complex64) -> Self {
        let m = value.norm();
        LogCoeff { index, log_mod: m.ln(), phase: (value.re / m, value.im / m) }
    }

    pub fn from_log(index: i64, log_mod: f64, phase: Complex64) -> Self {
        LogCoeff { index, log_mod, phase: (phase.re, phase.im) }
    }

    pub fn phase(&self) -> Complex64 {
        Complex64::new(self.phase.0, self.phase.1)
    }

    pub fn value(&self) -> Complex64 {
        self.phase() * self.log_mod.exp()
    }
}

/// Sparse vector with log-magnitude coefficients, sorted by index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LogVector {
    entries: Vec<LogCoeff>,
}

impl LogVector {
    /// Sorts by index; later duplicates are rejected.
    pub fn new(mut entries: Vec<LogCoeff>) -> Result<Self, OperatorError> {
        entries.retain(|c| c.log_mod.is_finite() || c.log_mod == f64::INFINITY);
        entries.sort_by_key(|c| c.index);
        if let Some(w) = entries.windows(2).find(|w| w[0].index == w[1].index) {
            return Err(OperatorError::InvalidSpec(format!("duplicate index {} in log vector", w[0].index)));
        }
        Ok(LogVector { entries })
    }

    pub fn from_sparse(v: &SparseVector) -> Self {
        LogVector { entries: v.entries().iter().map(|&(i, c)| LogCoeff::new(i, c)).collect() }
    }

    /// Coefficients that fit in `f64` above the zero-drop threshold.
    pub fn to_sparse(&self) -> SparseVector {
        SparseVector::from_entries(
            self.entries
                .iter()
                .map(|c| (c.index, c.value()))
                .filter(|(_, v)| v.norm() >= ZERO_DROP && v.norm().is_finite()),
        )
    }

    pub fn entries(&self) -> &[LogCoeff] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for c in &self.entries {
            h.update(c.index.to_le_bytes());
            h.update(c.log_mod.to_bits().to_le_bytes());
            h.update(c.phase.0.to_bits().to_le_bytes());
            h.update(c.phase.1.to_bits().to_le_bytes());
        }
        hex::encode(&h.finalize()[..16])
    }
}

/// `S(k) = sum_{j=1}^k ln w_j` for `k = 0..=top`, every weight above 1.
///
/// Compensated summation keeps `S(k)` within a few ulps, so coefficients
/// built as `exp(-S(k))` stay accurate relative to the true weight products.
pub fn log_weight_prefix(s: &WeightedShift, top: usize) -> Result<Vec<f64>, OperatorError> {
    let mut prefix = Vec::with_capacity(top + 1);
    prefix.push(0.0);
    let (mut acc, mut comp) = (0.0f64, 0.0f64);
    for k in 1..=top as i64 {
        let w = s.weight(k);
        if !(w.is_finite() && w > 1.0 && w <= s.bound) {
            return Err(OperatorError::InvalidWeight { index: k, value: w });
        }
        let y = w.ln() - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
        prefix.push(acc);
    }
    Ok(prefix)
}

/// Random-access view of `T^t x` for a unilateral shift with weights > 1.
pub struct ShiftOrbitView {
    /// `prefix[k] = sum_{j=1}^k ln w_j`.
    prefix: Vec<f64>,
    indices: Vec<usize>,
    potential: Vec<f64>,
    phases: Vec<Complex64>,
    /// `suffix_max[j] = max_{i >= j} potential[i]`.
    suffix_max: Vec<f64>,
}

impl ShiftOrbitView {
    pub fn new(s: &WeightedShift, x: &LogVector) -> Result<Self, OperatorError> {
        if s.bilateral {
            return Err(OperatorError::InvalidSpec("log orbit view needs a unilateral shift".into()));
        }
        if let Some(c) = x.entries.first() {
            if c.index < 0 {
                return Err(OperatorError::IncompatibleDomain(c.index));
            }
        }
        let top = x.entries.last().map_or(0, |c| c.index as usize);
        let prefix = log_weight_prefix(s, top)?;
        let indices: Vec<usize> = x.entries.iter().map(|c| c.index as usize).collect();
        let potential: Vec<f64> = x.entries.iter().map(|c| c.log_mod + prefix[c.index as usize]).collect();
        let phases = x.entries.iter().map(|c| c.phase()).collect();
        let mut suffix_max = potential.clone();
        for j in (0..suffix_max.len().saturating_sub(1)).rev() {
            suffix_max[j] = suffix_max[j].max(suffix_max[j + 1]);
        }
        Ok(ShiftOrbitView { prefix, indices, potential, phases, suffix_max })
    }

    fn first_at_or_after(&self, n: usize) -> usize {
        self.indices.partition_point(|&i| i < n)
    }

    /// `ln |(T^t x)_k|`, `-inf` for a zero coordinate.
    pub fn log_coordinate(&self, t: usize, k: usize) -> f64 {
        match self.indices.binary_search(&(k + t)) {
            Ok(j) => self.potential[j] - self.prefix[k],
            Err(_) => f64::NEG_INFINITY,
        }
    }

    pub fn coordinate(&self, t: usize, k: usize) -> Complex64 {
        match self.indices.binary_search(&(k + t)) {
            Ok(j) => self.phases[j] * (self.potential[j] - self.prefix[k]).exp(),
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Log of the norm of the coordinates `k >= k0` of `T^t x`.
    pub fn log_norm_from(&self, t: usize, k0: usize, space: &SpaceTag) -> f64 {
        let start = self.first_at_or_after(t + k0);
        let n = self.indices.len();
        match space.exponent() {
            None => {
                let mut best = f64::NEG_INFINITY;
                for j in start..n {
                    // prefix is increasing, so later entries can only win
                    // through a larger potential
                    if self.suffix_max[j] - self.prefix[self.indices[j] - t] <= best {
                        break;
                    }
                    best = best.max(self.potential[j] - self.prefix[self.indices[j] - t]);
                }
                best
            }
            Some(p) => {
                if start == n {
                    return f64::NEG_INFINITY;
                }
                let mut terms = Vec::new();
                let mut top = f64::NEG_INFINITY;
                for j in start..n {
                    let bound = self.suffix_max[j] - self.prefix[self.indices[j] - t];
                    let remaining = (n - j) as f64;
                    if p * (bound - top) + remaining.ln() < -40.0 {
                        break;
                    }
                    let v = self.potential[j] - self.prefix[self.indices[j] - t];
                    top = top.max(v);
                    terms.push(v);
                }
                let s: f64 = terms.iter().map(|v| (p * (v - top)).exp()).sum();
                top + s.ln() / p
            }
        }
    }

    pub fn log_norm(&self, t: usize, space: &SpaceTag) -> f64 {
        self.log_norm_from(t, 0, space)
    }

    pub fn norm(&self, t: usize, space: &SpaceTag) -> f64 {
        self.log_norm(t, space).exp()
    }

    /// `||T^t x - y||` for a target supported on `[0, L)`.
    pub fn distance_to(&self, t: usize, y: &SparseVector, space: &SpaceTag) -> f64 {
        let len = y.support_bounds().map_or(0, |(_, hi)| hi.max(-1) + 1) as usize;
        let head = (0..len).map(|k| (self.coordinate(t, k) - y.get(k as i64)).norm());
        let tail = self.log_norm_from(t, len, space).exp();
        match space.exponent() {
            None => head.fold(tail, f64::max),
            Some(_) => {
                let mut mods: Vec<f64> = head.collect();
                mods.push(tail);
                space.norm_of_moduli(mods)
            }
        }
    }

    /// Norms of `T^1 x .. T^horizon x`.
    pub fn norms(&self, horizon: usize, space: &SpaceTag) -> Vec<f64> {
        use rayon::prelude::*;
        (1..=horizon).into_par_iter().map(|t| self.norm(t, space)).collect()
    }
}
