//! Sparse complex vectors over integer indices and the sequence-space norms
//! (`c_0` and `ℓ^p`, unilateral or bilateral) they are measured in.

use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Entries with modulus below this are dropped by every normalization pass.
///
/// Much smaller than machine epsilon on purpose: weight products can amplify
/// coordinates of size `1e-200` back to order one.
pub const ZERO_DROP: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("index {0} is negative but the space is unilateral")]
    NegativeIndex(i64),
    #[error("lp exponent must be >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("non-finite coefficient at index {0}")]
    NonFinite(i64),
    #[error("malformed vector json: {0}")]
    Json(String),
}

/// The ambient sequence space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SpaceTag {
    #[serde(rename = "c0-bilateral")]
    C0Bilateral,
    #[serde(rename = "c0-unilateral")]
    C0Unilateral,
    #[serde(rename = "lp-unilateral")]
    LpUnilateral { p: f64 },
    #[serde(rename = "lp-bilateral")]
    LpBilateral { p: f64 },
}

impl SpaceTag {
    pub fn lp_unilateral(p: f64) -> Result<Self, SpaceError> {
        check_exponent(p)?;
        Ok(SpaceTag::LpUnilateral { p })
    }

    pub fn lp_bilateral(p: f64) -> Result<Self, SpaceError> {
        check_exponent(p)?;
        Ok(SpaceTag::LpBilateral { p })
    }

    pub fn is_bilateral(&self) -> bool {
        matches!(self, SpaceTag::C0Bilateral | SpaceTag::LpBilateral { .. })
    }

    /// `None` for the sup-norm spaces.
    pub fn exponent(&self) -> Option<f64> {
        match *self {
            SpaceTag::LpUnilateral { p } | SpaceTag::LpBilateral { p } => Some(p),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), SpaceError> {
        match self.exponent() {
            Some(p) => check_exponent(p),
            None => Ok(()),
        }
    }

    /// Checks that `v` lives in this space (no negative indices on the
    /// unilateral kinds).
    pub fn admits(&self, v: &SparseVector) -> Result<(), SpaceError> {
        self.validate()?;
        if !self.is_bilateral() {
            if let Some(&(i, _)) = v.entries.first() {
                if i < 0 {
                    return Err(SpaceError::NegativeIndex(i));
                }
            }
        }
        Ok(())
    }

    /// Norm of a sequence of moduli, in index order.
    ///
    /// The summation order is fixed so that every code path computing a norm
    /// from the same coefficients gets the same bits.
    pub fn norm_of_moduli<I: IntoIterator<Item = f64>>(&self, moduli: I) -> f64 {
        match self.exponent() {
            None => moduli.into_iter().fold(0.0, f64::max),
            Some(p) => {
                let mods: Vec<f64> = moduli.into_iter().collect();
                lp_norm(&mods, p)
            }
        }
    }
}

fn check_exponent(p: f64) -> Result<(), SpaceError> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(SpaceError::InvalidExponent(p))
    }
}

fn lp_norm(mods: &[f64], p: f64) -> f64 {
    let scale = mods.iter().copied().fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    if !scale.is_finite() {
        return f64::INFINITY;
    }
    let sum: f64 = if p == 2.0 {
        mods.iter().map(|m| (m / scale) * (m / scale)).sum()
    } else {
        mods.iter().map(|m| (m / scale).powf(p)).sum()
    };
    if p == 2.0 {
        scale * sum.sqrt()
    } else {
        scale * sum.powf(1.0 / p)
    }
}

/// Inclusive integer window `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub lo: i64,
    pub hi: i64,
}

impl Window {
    pub fn new(lo: i64, hi: i64) -> Self {
        Window { lo, hi }
    }

    pub fn contains(&self, i: i64) -> bool {
        self.lo <= i && i <= self.hi
    }

    pub fn len(&self) -> usize {
        if self.hi < self.lo {
            0
        } else {
            (self.hi - self.lo + 1) as usize
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Restricts the window to the nonnegative indices when the space is
    /// unilateral.
    pub fn clamp_to(&self, space: &SpaceTag) -> Window {
        if space.is_bilateral() {
            *self
        } else {
            Window::new(self.lo.max(0), self.hi)
        }
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }
}

/// Finitely supported complex sequence; entries sorted by index, no
/// duplicates, no entry below [`ZERO_DROP`].
#[derive(Clone, Default, PartialEq)]
pub struct SparseVector {
    entries: Vec<(i64, Complex64)>,
}

impl fmt::Debug for SparseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.entries.iter().map(|(i, c)| (i, c)))
            .finish()
    }
}

impl SparseVector {
    pub fn zero() -> Self {
        SparseVector { entries: Vec::new() }
    }

    /// The canonical basis vector `e_i`.
    pub fn basis(i: i64) -> Self {
        SparseVector {
            entries: vec![(i, Complex64::new(1.0, 0.0))],
        }
    }

    /// Builds a vector from arbitrary `(index, value)` pairs; repeated
    /// indices are summed.
    pub fn from_entries<I: IntoIterator<Item = (i64, Complex64)>>(iter: I) -> Self {
        let mut raw: Vec<(i64, Complex64)> = iter.into_iter().collect();
        raw.sort_by_key(|&(i, _)| i);
        let mut entries: Vec<(i64, Complex64)> = Vec::with_capacity(raw.len());
        for (i, c) in raw {
            match entries.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => entries.push((i, c)),
            }
        }
        entries.retain(|(_, c)| c.norm() >= ZERO_DROP);
        SparseVector { entries }
    }

    pub fn from_real<I: IntoIterator<Item = (i64, f64)>>(iter: I) -> Self {
        Self::from_entries(iter.into_iter().map(|(i, r)| (i, Complex64::new(r, 0.0))))
    }

    /// Wraps entries the caller guarantees are sorted, unique and above the
    /// drop threshold.
    pub(crate) fn from_sorted_unchecked(entries: Vec<(i64, Complex64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        SparseVector { entries }
    }

    /// Like `from_sorted_unchecked` but applies the zero drop.
    pub(crate) fn from_sorted(mut entries: Vec<(i64, Complex64)>) -> Self {
        entries.retain(|(_, c)| c.norm() >= ZERO_DROP);
        Self::from_sorted_unchecked(entries)
    }

    pub fn entries(&self) -> &[(i64, Complex64)] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<(i64, Complex64)> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: i64) -> Complex64 {
        match self.entries.binary_search_by_key(&i, |&(j, _)| j) {
            Ok(k) => self.entries[k].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Smallest and largest stored index.
    pub fn support_bounds(&self) -> Option<(i64, i64)> {
        Some((self.entries.first()?.0, self.entries.last()?.0))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_sorted(self.entries.iter().map(|&(i, v)| (i, v * c)).collect())
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    pub fn norm(&self, space: &SpaceTag) -> f64 {
        space.norm_of_moduli(self.entries.iter().map(|(_, c)| c.norm()))
    }

    /// Coefficients on `window`, re/im interleaved, zeros filled in.
    pub fn flatten(&self, window: Window) -> Vec<f64> {
        let mut out = vec![0.0; 2 * window.len()];
        for &(i, c) in &self.entries {
            if window.contains(i) {
                let k = (i - window.lo) as usize;
                out[2 * k] = c.re;
                out[2 * k + 1] = c.im;
            }
        }
        out
    }

    /// Stable hex digest of the exact coefficient bits.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for &(i, c) in &self.entries {
            h.update(i.to_le_bytes());
            h.update(c.re.to_bits().to_le_bytes());
            h.update(c.im.to_bits().to_le_bytes());
        }
        hex::encode(&h.finalize()[..16])
    }

    /// Total order on vectors used for multiset comparisons.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.entries.iter().zip(other.entries.iter()) {
            let o = a
                .0
                .cmp(&b.0)
                .then(a.1.re.total_cmp(&b.1.re))
                .then(a.1.im.total_cmp(&b.1.im));
            if o != Ordering::Equal {
                return o;
            }
        }
        self.entries.len().cmp(&other.entries.len())
    }
}

/// `alpha * x + beta * y` with the zero drop applied.
pub fn combine(alpha: Complex64, x: &SparseVector, beta: Complex64, y: &SparseVector) -> SparseVector {
    let (a, b) = (&x.entries, &y.entries);
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&(ia, ca)), Some(&(ib, cb))) => match ia.cmp(&ib) {
                Ordering::Less => {
                    i += 1;
                    (ia, alpha * ca)
                }
                Ordering::Greater => {
                    j += 1;
                    (ib, beta * cb)
                }
                Ordering::Equal => {
                    i += 1;
                    j += 1;
                    (ia, alpha * ca + beta * cb)
                }
            },
            (Some(&(ia, ca)), None) => {
                i += 1;
                (ia, alpha * ca)
            }
            (None, Some(&(ib, cb))) => {
                j += 1;
                (ib, beta * cb)
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    SparseVector::from_sorted(out)
}

pub fn add(x: &SparseVector, y: &SparseVector) -> SparseVector {
    let one = Complex64::new(1.0, 0.0);
    combine(one, x, one, y)
}

pub fn sub(x: &SparseVector, y: &SparseVector) -> SparseVector {
    combine(Complex64::new(1.0, 0.0), x, Complex64::new(-1.0, 0.0), y)
}

/// Result of projecting onto a window.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub vector: SparseVector,
    /// Norm of the removed part.
    pub dropped: f64,
}

pub fn truncate(v: &SparseVector, window: Window, space: &SpaceTag) -> Truncation {
    let (kept, removed): (Vec<_>, Vec<_>) = v.entries.iter().partition(|(i, _)| window.contains(*i));
    let dropped = space.norm_of_moduli(removed.iter().map(|(_, c)| c.norm()));
    Truncation {
        vector: SparseVector::from_sorted_unchecked(kept),
        dropped,
    }
}

/// JSON form `{"space": tag, "entries": [[index, re, im], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedVector {
    pub space: SpaceTag,
    pub entries: Vec<(i64, f64, f64)>,
}

impl TaggedVector {
    pub fn new(v: &SparseVector, space: SpaceTag) -> Self {
        TaggedVector {
            space,
            entries: v.entries.iter().map(|&(i, c)| (i, c.re, c.im)).collect(),
        }
    }

    pub fn into_vector(self) -> Result<(SparseVector, SpaceTag), SpaceError> {
        let mut seen: Option<i64> = None;
        for &(i, re, im) in &self.entries {
            if !re.is_finite() || !im.is_finite() {
                return Err(SpaceError::NonFinite(i));
            }
            if seen.is_some_and(|s| s >= i) {
                return Err(SpaceError::Json(format!("entries not strictly sorted at index {i}")));
            }
            seen = Some(i);
        }
        let v = SparseVector::from_entries(
            self.entries.into_iter().map(|(i, re, im)| (i, Complex64::new(re, im))),
        );
        self.space.admits(&v)?;
        Ok((v, self.space))
    }
}

pub fn to_json(v: &SparseVector, space: SpaceTag) -> String {
    serde_json::to_string(&TaggedVector::new(v, space)).expect("finite coefficients serialize")
}

pub fn from_json(s: &str) -> Result<(SparseVector, SpaceTag), SpaceError> {
    let t: TaggedVector = serde_json::from_str(s).map_err(|e| SpaceError::Json(e.to_string()))?;
    t.into_vector()
}
