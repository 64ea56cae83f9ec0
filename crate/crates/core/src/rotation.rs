//! Irrational rotation of the circle `[0, 1)` and a fat Cantor set.
//!
//! All intervals are half-open `[lo, hi)`; an interval that wraps past 1 is
//! split at 0. Rotations by irrational angles are uniquely ergodic, which is
//! why the empirical visit frequency of a set whose boundary is null has a
//! deterministic limit, the Lebesgue measure of the set.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::steinhaus::{rational_dependence, SteinhausError};

pub const MAX_DEPTH: u32 = 30;
pub const ESCAPE_BUDGET: u64 = 10_000_000;
const FIXED_SHIFT: i32 = 120;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RotationError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("angle satisfies the integer relation {0:?}")]
    RationalAngle(Vec<i64>),
    #[error("{0} rotated intervals exceed the budget")]
    BudgetExceeded(u64),
    #[error(transparent)]
    Steinhaus(#[from] SteinhausError),
}

/// A subset of the circle with decidable membership.
pub trait CircleSet {
    fn contains(&self, x: f64) -> bool;
    fn measure(&self) -> f64;
}

/// Complement of a circle set.
pub struct Complement<'a, S: CircleSet>(pub &'a S);

impl<S: CircleSet> CircleSet for Complement<'_, S> {
    fn contains(&self, x: f64) -> bool {
        !self.0.contains(x)
    }

    fn measure(&self) -> f64 {
        1.0 - self.0.measure()
    }
}

fn to_fixed(x: f64) -> u128 {
    // exact for x >= 2^-67; scaling by a power of two does not round
    (x * 2f64.powi(FIXED_SHIFT)) as u128
}

fn from_fixed(v: u128) -> f64 {
    v as f64 * 2f64.powi(-FIXED_SHIFT)
}

/// Sorted, pairwise disjoint, non-adjacent half-open intervals in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet::default()
    }

    pub fn full() -> Self {
        IntervalSet { intervals: vec![(0.0, 1.0)] }
    }

    /// Normalizes arbitrary intervals inside `[0, 1]`: drops empty ones,
    /// sorts, and merges overlapping or touching ones.
    pub fn from_intervals(mut iv: Vec<(f64, f64)>) -> Result<Self, RotationError> {
        if let Some(&(a, b)) = iv.iter().find(|(a, b)| !(0.0 <= *a && *a <= *b && *b <= 1.0)) {
            return Err(RotationError::InvalidInput(format!("interval [{a}, {b}) outside the circle")));
        }
        iv.retain(|(a, b)| a < b);
        iv.sort_by(|x, y| x.0.total_cmp(&y.0));
        Ok(IntervalSet { intervals: merge_sorted(iv) })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Image under `x -> x + t mod 1`.
    pub fn rotate(&self, t: f64) -> IntervalSet {
        let t = t.rem_euclid(1.0);
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        for &(a, b) in &self.intervals {
            let lo = (a + t).rem_euclid(1.0);
            let mut hi = (b + t).rem_euclid(1.0);
            if hi == 0.0 {
                hi = 1.0;
            }
            if lo < hi {
                out.push((lo, hi));
            } else {
                out.push((lo, 1.0));
                if hi > 0.0 {
                    out.push((0.0, hi));
                }
            }
        }
        out.sort_by(|x, y| x.0.total_cmp(&y.0));
        IntervalSet { intervals: merge_sorted(out) }
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let (a, b) = (&self.intervals, &other.intervals);
        let mut merged = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 <= b[j].0) {
                merged.push(a[i]);
                i += 1;
            } else {
                merged.push(b[j]);
                j += 1;
            }
        }
        IntervalSet { intervals: merge_sorted(merged) }
    }
}

fn merge_sorted(iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

impl CircleSet for IntervalSet {
    fn contains(&self, x: f64) -> bool {
        let k = self.intervals.partition_point(|iv| iv.1 <= x);
        self.intervals.get(k).is_some_and(|&(a, b)| a <= x && x < b)
    }

    /// Sum of lengths, accumulated exactly in fixed point and rounded once.
    fn measure(&self) -> f64 {
        from_fixed(self.intervals.iter().map(|&(a, b)| to_fixed(b) - to_fixed(a)).sum())
    }
}

/// One construction level: every remaining piece loses its middle `gap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CantorLevel {
    pub removed_count: u64,
    pub gap: f64,
    /// Length of each remaining piece after this level.
    pub piece: f64,
}

/// Middle-interval removal with level masses
/// `m_j = (1 - target) 2^{-j} / (1 - 2^{-depth})`, so the remaining measure
/// is `target` up to rounding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FatCantorSet {
    pub target: f64,
    pub depth: u32,
    pub levels: Vec<CantorLevel>,
    pub lebesgue_measure: f64,
}

pub fn fat_cantor(target: f64, depth: u32) -> Result<FatCantorSet, RotationError> {
    if !(target > 0.0 && target < 1.0) {
        return Err(RotationError::InvalidInput(format!("target measure {target} outside (0,1)")));
    }
    if depth > MAX_DEPTH {
        return Err(RotationError::InvalidInput(format!("depth {depth} above {MAX_DEPTH}")));
    }
    let norm = 1.0 - 2f64.powi(-(depth as i32));
    let mut levels = Vec::with_capacity(depth as usize);
    let mut piece = 1.0;
    let mut removed = 0.0;
    for j in 1..=depth {
        let count = 1u64 << (j - 1);
        let mass = (1.0 - target) * 2f64.powi(-(j as i32)) / norm;
        let gap = mass / count as f64;
        piece = (piece - gap) / 2.0;
        removed += gap * count as f64;
        levels.push(CantorLevel { removed_count: count, gap, piece });
    }
    Ok(FatCantorSet { target, depth, levels, lebesgue_measure: 1.0 - removed })
}

impl FatCantorSet {
    /// Number of removed intervals, `2^depth - 1`.
    pub fn removed_count(&self) -> u64 {
        (1u64 << self.depth) - 1
    }

    /// Length of the longest interval inside the set; every piece of the
    /// final level has this length, so the set is nowhere dense at scale
    /// `2^{-depth}`.
    pub fn longest_component(&self) -> f64 {
        self.levels.last().map_or(1.0, |l| l.piece)
    }

    /// Removed intervals `[lo, hi)` with their recorded lengths, in
    /// increasing order of position.
    pub fn removed_intervals(&self) -> impl Iterator<Item = ((f64, f64), f64)> + '_ {
        enum Frame {
            Node(usize, f64),
            Gap((f64, f64), f64),
        }
        let mut stack = vec![Frame::Node(0, 0.0)];
        std::iter::from_fn(move || loop {
            match stack.pop()? {
                Frame::Gap(iv, len) => return Some((iv, len)),
                Frame::Node(j, a) => {
                    let Some(lvl) = self.levels.get(j) else { continue };
                    let lo = a + lvl.piece;
                    let hi = lo + lvl.gap;
                    stack.push(Frame::Node(j + 1, hi));
                    stack.push(Frame::Gap((lo, hi), lvl.gap));
                    stack.push(Frame::Node(j + 1, a));
                }
            }
        })
    }

    /// The remaining pieces `[a, a + piece)` as an interval set.
    pub fn as_interval_set(&self) -> IntervalSet {
        let mut starts = vec![0.0f64];
        for lvl in &self.levels {
            let mut next = Vec::with_capacity(starts.len() * 2);
            for &a in &starts {
                next.push(a);
                next.push(a + lvl.piece + lvl.gap);
            }
            starts = next;
        }
        let len = self.longest_component();
        IntervalSet { intervals: merge_sorted(starts.into_iter().map(|a| (a, (a + len).min(1.0))).collect()) }
    }
}

impl CircleSet for FatCantorSet {
    /// Descends the construction tree.
    fn contains(&self, x: f64) -> bool {
        if !(0.0..1.0).contains(&x) {
            return false;
        }
        let mut a = 0.0;
        for lvl in &self.levels {
            let lo = a + lvl.piece;
            let hi = lo + lvl.gap;
            if x < lo {
                continue;
            }
            if x < hi {
                return false;
            }
            a = hi;
        }
        x < a + self.longest_component()
    }

    fn measure(&self) -> f64 {
        self.lebesgue_measure
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitStats {
    pub n: u64,
    pub visits: u64,
    pub frequency: f64,
    pub discrepancy: f64,
}

/// Visits of `x0 + nθ mod 1`, `n = 1..=N`, to `set`.
pub fn rotation_orbit_stats<S: CircleSet + Sync>(theta: f64, x0: f64, set: &S, n: u64) -> Result<OrbitStats, RotationError> {
    if let Some(m) = rational_dependence(&[theta], 50, 1e-9)? {
        return Err(RotationError::RationalAngle(m));
    }
    Ok(rotation_orbit_stats_unchecked(theta, x0, set, n))
}

pub fn rotation_orbit_stats_unchecked<S: CircleSet + Sync>(theta: f64, x0: f64, set: &S, n: u64) -> OrbitStats {
    let visits: u64 = (1..=n)
        .into_par_iter()
        .filter(|&k| set.contains((x0 + k as f64 * theta).rem_euclid(1.0)))
        .count() as u64;
    let frequency = if n == 0 { 0.0 } else { visits as f64 / n as f64 };
    OrbitStats { n, visits, frequency, discrepancy: (frequency - set.measure()).abs() }
}

/// `m(⋃_{|j|<=k} (C - jθ))` for `k = 0..=N`.
pub fn escape_union_measure(theta: f64, set: &IntervalSet, n: u64) -> Result<Vec<f64>, RotationError> {
    let work = n.saturating_mul(set.len() as u64);
    if work > ESCAPE_BUDGET {
        return Err(RotationError::BudgetExceeded(work));
    }
    let mut union = set.clone();
    let mut out = Vec::with_capacity(n as usize + 1);
    out.push(union.measure());
    for k in 1..=n {
        let t = (k as f64 * theta).rem_euclid(1.0);
        union = union.union(&set.rotate(-t)).union(&set.rotate(t));
        out.push(union.measure());
    }
    Ok(out)
}

pub fn escape_csv(measures: &[f64]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "union_measure"]).unwrap();
    for (k, m) in measures.iter().enumerate() {
        w.write_record([k.to_string(), m.to_string()]).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}
