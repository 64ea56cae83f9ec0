//! Steinhaus measures, periodic measures and their approximation by
//! measures supported on finitely many periodic orbits.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::measures::{EmpiricalMeasure, MeasureError};
use crate::operators::{apply, apply_power, eigenvector_field, unit_phase, OperatorError, OperatorSpec, WeightedShift};
use crate::seed::rng_for;
use crate::space::{combine, sub, SparseVector, SpaceTag, TaggedVector, Window};

/// Relative eigen-residual accepted for eigenvector data.
pub const EIGEN_TOL: f64 = 1e-9;
/// Relative residual accepted for `T^N a = a`.
pub const PERIOD_TOL: f64 = 1e-6;
pub const DEPENDENCE_BOUND: i64 = 20;
pub const DEPENDENCE_TOL: f64 = 1e-9;
pub const ENUMERATION_BUDGET: u64 = 10_000_000;
pub const MAX_NU_ATOMS: u64 = 1_000_000;

pub const SQRT2_MINUS_1: f64 = std::f64::consts::SQRT_2 - 1.0;
pub const SQRT3_MINUS_1: f64 = 0.732_050_807_568_877_2;
pub const GOLDEN_FRACTION: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteinhausError {
    #[error("eigen-residual {residual:e} above tolerance")]
    ResidualTooLarge { residual: f64 },
    #[error("T^N a differs from a by {residual:e}")]
    NotPeriodic { residual: f64 },
    #[error("{period} is not a common period (residual {residual:e})")]
    NotCommonPeriod { period: usize, residual: f64 },
    #[error("angles satisfy the integer relation {0:?}")]
    DependentAngles(Vec<i64>),
    #[error("{0} atoms exceed the limit")]
    TooManyAtoms(u64),
    #[error("no n <= {0} meets the tolerance")]
    NotFound(u64),
    #[error("search box of {0} points exceeds the budget")]
    BudgetExceeded(u64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Order of an eigenvalue on the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenOrder {
    Finite(u64),
    Irrational,
}

impl Serialize for EigenOrder {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            EigenOrder::Finite(q) => s.serialize_u64(*q),
            EigenOrder::Irrational => s.serialize_str("irrational"),
        }
    }
}

/// Denominator of `theta` if it is within `1e-10` of a fraction with
/// denominator at most `10^6`, found along the continued-fraction
/// convergents.
pub fn rational_order(theta: f64) -> EigenOrder {
    let theta = theta.rem_euclid(1.0);
    let (mut q_prev, mut q) = (0u64, 1u64);
    let mut x = theta;
    for _ in 0..64 {
        if q > 1_000_000 {
            break;
        }
        let dev = q as f64 * theta;
        if (dev - dev.round()).abs() <= 1e-10 {
            return EigenOrder::Finite(q);
        }
        let frac = x - x.floor();
        if frac == 0.0 {
            break;
        }
        x = 1.0 / frac;
        let a = x.floor() as u64;
        let next = a.saturating_mul(q).saturating_add(q_prev);
        q_prev = q;
        q = next;
    }
    EigenOrder::Irrational
}

/// A unimodular eigenvector `Tv ≈ e^{2πiθ} v`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenvectorData {
    #[serde(serialize_with = "ser_vector")]
    pub vector: SparseVector,
    pub angle: f64,
    /// `||Tv - λv||_∞ / ||v||_∞`.
    pub residual: f64,
    pub order: EigenOrder,
}

fn ser_vector<S: Serializer>(v: &SparseVector, s: S) -> Result<S::Ok, S::Error> {
    TaggedVector::new(v, SpaceTag::C0Bilateral).entries.serialize(s)
}

impl EigenvectorData {
    /// Measures the residual of `vector` as an eigenvector at `angle`.
    pub fn measure(op: &OperatorSpec, vector: SparseVector, angle: f64) -> Result<Self, SteinhausError> {
        let lambda = unit_phase(angle);
        let image = apply(op, &vector)?;
        let sup = vector.norm(&SpaceTag::C0Bilateral);
        if sup == 0.0 {
            return Err(SteinhausError::InvalidInput("zero vector".into()));
        }
        let residual = combine(Complex64::new(1.0, 0.0), &image, -lambda, &vector).norm(&SpaceTag::C0Bilateral) / sup;
        Ok(EigenvectorData { vector, angle, residual, order: rational_order(angle) })
    }

    /// Truncated eigenvector field of a unilateral shift.
    pub fn field(s: &WeightedShift, angle: f64, trunc: Option<usize>) -> Result<Self, SteinhausError> {
        let f = eigenvector_field(s, unit_phase(angle), trunc)?;
        Self::measure(&OperatorSpec::Shift(s.clone()), f.vector, angle)
    }

    /// Basis vector `e_k` of a block-diagonal operator.
    pub fn block(op: &OperatorSpec, k: usize) -> Result<Self, SteinhausError> {
        let OperatorSpec::Blocks { angles } = op else {
            return Err(SteinhausError::InvalidInput("block eigenvectors need a block operator".into()));
        };
        let angle = *angles.get(k).ok_or_else(|| SteinhausError::InvalidInput(format!("no block {k}")))?;
        Self::measure(op, SparseVector::basis(k as i64), angle)
    }

    pub fn eigenvalue(&self) -> Complex64 {
        unit_phase(self.angle)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Least common multiple of the finite orders, `None` if any is irrational.
pub fn common_period(eigvecs: &[EigenvectorData]) -> Option<u64> {
    eigvecs.iter().try_fold(1u64, |acc, e| match e.order {
        EigenOrder::Finite(q) => Some(acc / gcd(acc, q) * q),
        EigenOrder::Irrational => None,
    })
}

fn check_residuals(eigvecs: &[EigenvectorData]) -> Result<(), SteinhausError> {
    if eigvecs.is_empty() {
        return Err(SteinhausError::InvalidInput("no eigenvectors".into()));
    }
    match eigvecs.iter().find(|e| !(e.residual <= EIGEN_TOL)) {
        Some(e) => Err(SteinhausError::ResidualTooLarge { residual: e.residual }),
        None => Ok(()),
    }
}

/// `n` draws of `sum_j χ_j x_j` with independent uniform phases `χ_j`.
pub fn sample_steinhaus(
    eigvecs: &[EigenvectorData],
    n: usize,
    seed: u64,
    space: &SpaceTag,
    window: Window,
) -> Result<EmpiricalMeasure, SteinhausError> {
    check_residuals(eigvecs)?;
    if n == 0 {
        return Err(SteinhausError::InvalidInput("need at least one sample".into()));
    }
    let mut rng = rng_for(seed, 0);
    let atoms = (0..n)
        .map(|_| {
            eigvecs.iter().fold(SparseVector::zero(), |acc, e| {
                let chi = unit_phase(rng.gen::<f64>());
                combine(Complex64::new(1.0, 0.0), &acc, chi, &e.vector)
            })
        })
        .collect();
    Ok(EmpiricalMeasure::uniform(atoms, space.clone(), window)?)
}

/// Uniform measure on the orbit `a, Ta, ..., T^{N-1} a` of a point with
/// `T^N a = a`.
pub fn periodic_measure(
    op: &OperatorSpec,
    a: &SparseVector,
    period: usize,
    space: &SpaceTag,
    window: Window,
) -> Result<EmpiricalMeasure, SteinhausError> {
    if period == 0 {
        return Err(SteinhausError::InvalidInput("period must be >= 1".into()));
    }
    let atoms = orbit_atoms(op, a, period)?;
    let back = apply(op, atoms.last().unwrap())?;
    let residual = sub(&back, a).norm(space);
    if !(residual <= PERIOD_TOL * a.norm(space)) {
        return Err(SteinhausError::NotPeriodic { residual });
    }
    Ok(EmpiricalMeasure::uniform(atoms, space.clone(), window)?)
}

fn orbit_atoms(op: &OperatorSpec, a: &SparseVector, len: usize) -> Result<Vec<SparseVector>, OperatorError> {
    let mut atoms = Vec::with_capacity(len);
    atoms.push(a.clone());
    for _ in 1..len {
        let next = apply(op, atoms.last().unwrap())?;
        atoms.push(next);
    }
    Ok(atoms)
}

/// Powers `λ^0 .. λ^{n-1}` by repeated multiplication, renormalized to
/// modulus one every 64 steps.
fn unit_powers(lambda: Complex64, n: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n);
    let mut p = Complex64::new(1.0, 0.0);
    for k in 0..n {
        out.push(p);
        p *= lambda;
        if k % 64 == 63 {
            p /= p.norm();
        }
    }
    out
}

/// The measure
/// `ν_N = N^{-s} sum_{n_1..n_s < N} Q^{-1} sum_{j<Q} δ_{T^j(λ_1^{n_1} u_1 + ... + λ_s^{n_s} u_s)}`
/// with `λ_k = e^{2πi θ_k}` for the free angles `θ_k`. Atoms are ordered by
/// the index tuple, then by `j`.
#[allow(clippy::too_many_arguments)]
pub fn periodic_approximation(
    op: &OperatorSpec,
    us: &[EigenvectorData],
    lambda_free: &[f64],
    q: usize,
    n: usize,
    space: &SpaceTag,
    window: Window,
) -> Result<EmpiricalMeasure, SteinhausError> {
    let s = us.len();
    if s == 0 || s != lambda_free.len() {
        return Err(SteinhausError::InvalidInput("one free angle per eigenvector".into()));
    }
    if q == 0 || n == 0 {
        return Err(SteinhausError::InvalidInput("Q and N must be >= 1".into()));
    }
    for u in us {
        if !matches!(u.order, EigenOrder::Finite(_)) {
            return Err(SteinhausError::InvalidInput("eigenvectors must have finite order".into()));
        }
        let residual = sub(&apply_power(op, &u.vector, q)?, &u.vector).norm(space);
        if !(residual <= PERIOD_TOL * u.vector.norm(space)) {
            return Err(SteinhausError::NotCommonPeriod { period: q, residual });
        }
    }
    if let Some(m) = rational_dependence(lambda_free, DEPENDENCE_BOUND, DEPENDENCE_TOL)? {
        return Err(SteinhausError::DependentAngles(m));
    }
    let tuples = (n as u64).checked_pow(s as u32).unwrap_or(u64::MAX);
    let total = tuples.saturating_mul(q as u64);
    if total > MAX_NU_ATOMS {
        return Err(SteinhausError::TooManyAtoms(total));
    }
    let powers: Vec<Vec<Complex64>> = lambda_free.iter().map(|&t| unit_powers(unit_phase(t), n)).collect();
    let blocks: Vec<Vec<SparseVector>> = (0..tuples)
        .into_par_iter()
        .map(|t| {
            let mut rest = t;
            let mut idx = vec![0usize; s];
            for k in (0..s).rev() {
                idx[k] = (rest % n as u64) as usize;
                rest /= n as u64;
            }
            let base = us.iter().zip(&idx).enumerate().fold(SparseVector::zero(), |acc, (k, (u, &i))| {
                combine(Complex64::new(1.0, 0.0), &acc, powers[k][i], &u.vector)
            });
            orbit_atoms(op, &base, q)
        })
        .collect::<Result<_, _>>()?;
    let atoms: Vec<SparseVector> = blocks.into_iter().flatten().collect();
    Ok(EmpiricalMeasure::uniform(atoms, space.clone(), window)?)
}

/// One-line search record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KroneckerHit {
    pub n: u64,
    pub max_deviation: f64,
    pub scanned: u64,
}

impl KroneckerHit {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap()
    }
}

/// `max_k |e^{2πi n θ_k} - μ_k|`.
pub fn kronecker_deviation(angles: &[f64], targets: &[Complex64], n: u64) -> f64 {
    angles
        .iter()
        .zip(targets)
        .map(|(&t, &mu)| {
            let turns = (n as f64 * t).rem_euclid(1.0);
            (unit_phase(turns) - mu).norm()
        })
        .fold(0.0, f64::max)
}

/// Smallest `n` in `[1, max_n]` with every `e^{2πi n θ_k}` within `eps` of
/// its target, after checking the angles for small integer relations.
pub fn kronecker_search(angles: &[f64], targets: &[Complex64], eps: f64, max_n: u64) -> Result<KroneckerHit, SteinhausError> {
    if let Some(m) = rational_dependence(angles, DEPENDENCE_BOUND, DEPENDENCE_TOL)? {
        return Err(SteinhausError::DependentAngles(m));
    }
    kronecker_search_unchecked(angles, targets, eps, max_n)
}

/// Linear scan without the independence check.
pub fn kronecker_search_unchecked(angles: &[f64], targets: &[Complex64], eps: f64, max_n: u64) -> Result<KroneckerHit, SteinhausError> {
    if angles.is_empty() || angles.len() != targets.len() {
        return Err(SteinhausError::InvalidInput("one target per angle".into()));
    }
    if !(eps > 0.0) {
        return Err(SteinhausError::InvalidInput("eps must be positive".into()));
    }
    for n in 1..=max_n {
        let d = kronecker_deviation(angles, targets, n);
        if d < eps {
            return Ok(KroneckerHit { n, max_deviation: d, scanned: n });
        }
    }
    Err(SteinhausError::NotFound(max_n))
}

fn dist_to_integer(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Lexicographically first integer vector `m ≠ 0` with `|m_k| <= M`, first
/// nonzero entry positive, and `sum m_k θ_k` within `tol` of an integer.
///
/// Up to four angles the box is split in two halves that are matched
/// through their sorted fractional sums; beyond that the box is scanned.
pub fn rational_dependence(angles: &[f64], bound: i64, tol: f64) -> Result<Option<Vec<i64>>, SteinhausError> {
    let s = angles.len();
    if s == 0 || bound < 1 {
        return Err(SteinhausError::InvalidInput("need angles and a bound >= 1".into()));
    }
    let side = (2 * bound + 1) as u64;
    if s <= 4 {
        let h1 = s / 2;
        let cost = side.checked_pow((s - h1) as u32).unwrap_or(u64::MAX);
        if cost > ENUMERATION_BUDGET {
            return Err(SteinhausError::BudgetExceeded(cost));
        }
        Ok(meet_in_middle(angles, bound, tol, h1))
    } else {
        let cost = side.checked_pow(s as u32).unwrap_or(u64::MAX);
        if cost > ENUMERATION_BUDGET {
            return Err(SteinhausError::BudgetExceeded(cost));
        }
        let mut m = vec![-bound; s];
        loop {
            if normalized(&m) && dist_to_integer(dot(&m, angles)) <= tol {
                return Ok(Some(m));
            }
            if !next_lex(&mut m, bound) {
                return Ok(None);
            }
        }
    }
}

fn dot(m: &[i64], angles: &[f64]) -> f64 {
    m.iter().zip(angles).map(|(&k, &t)| k as f64 * t).sum()
}

/// Nonzero with first nonzero entry positive.
fn normalized(m: &[i64]) -> bool {
    m.iter().find(|&&k| k != 0).is_some_and(|&k| k > 0)
}

fn next_lex(m: &mut [i64], bound: i64) -> bool {
    for k in (0..m.len()).rev() {
        if m[k] < bound {
            m[k] += 1;
            return true;
        }
        m[k] = -bound;
    }
    false
}

fn box_vectors(len: usize, bound: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut m = vec![-bound; len];
    loop {
        out.push(m.clone());
        if !next_lex(&mut m, bound) {
            return out;
        }
    }
}

fn meet_in_middle(angles: &[f64], bound: i64, tol: f64, h1: usize) -> Option<Vec<i64>> {
    let (a1, a2) = angles.split_at(h1);
    // second halves sorted by the fractional part of their sum
    let mut second: Vec<(f64, Vec<i64>)> = box_vectors(a2.len(), bound)
        .into_iter()
        .map(|m| (dot(&m, a2).rem_euclid(1.0), m))
        .collect();
    second.sort_by(|x, y| x.0.total_cmp(&y.0));
    let keys: Vec<f64> = second.iter().map(|x| x.0).collect();
    // zero first half comes first in lexicographic order among normalized vectors
    let mut firsts = vec![vec![0i64; h1]];
    firsts.extend(box_vectors(h1, bound).into_iter().filter(|m| normalized(m)));
    for m1 in firsts {
        let zero_head = m1.iter().all(|&k| k == 0);
        let want = (-dot(&m1, a1)).rem_euclid(1.0);
        let slack = tol + 1e-12;
        let mut best: Option<&Vec<i64>> = None;
        let mut consider = |lo: f64, hi: f64| {
            let start = keys.partition_point(|&k| k < lo);
            for (_, m2) in second[start..].iter().take_while(|(k, _)| *k <= hi) {
                if zero_head && !normalized(m2) {
                    continue;
                }
                let full: Vec<i64> = m1.iter().chain(m2).copied().collect();
                if dist_to_integer(dot(&full, angles)) <= tol && best.is_none_or(|b| m2 < b) {
                    best = Some(m2);
                }
            }
        };
        consider(want - slack, want + slack);
        if want - slack < 0.0 {
            consider(want - slack + 1.0, 1.0);
        }
        if want + slack > 1.0 {
            consider(0.0, want + slack - 1.0);
        }
        if let Some(m2) = best {
            return Some(m1.iter().chain(m2).copied().collect());
        }
    }
    None
}
