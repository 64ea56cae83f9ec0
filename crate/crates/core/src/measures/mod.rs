//! Empirical probability measures on sequence spaces.
//!
//! A measure is a finite weighted cloud of atoms. Distances between measures
//! are Wasserstein-1 distances of their projections onto a coordinate window
//! (re/im interleaved, Euclidean metric), which stand in for the weak
//! topology on the bounded sets handled here.

pub mod transport;

use std::borrow::Cow;
use std::cmp::Ordering;

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operators::{apply, orbit, OperatorError, OperatorSpec};
use crate::seed::rng_for;
use crate::space::{add, SparseVector, SpaceTag, TaggedVector, Window};

pub const DEFAULT_WINDOW: Window = Window { lo: -8, hi: 8 };
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
pub const MAX_PRODUCT_ATOMS: usize = 1_000_000;
pub const DEFAULT_SUBSAMPLE: usize = 100_000;
pub const MAX_EXACT_ATOMS: usize = 1024;
pub const DEFAULT_DIRECTIONS: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("atom {atom} not compatible with the space: {reason}")]
    IncompatibleAtom { atom: usize, reason: String },
    #[error("measures live on different spaces or windows")]
    SpaceMismatch,
    #[error("product of {atoms} atoms exceeds the full-product limit")]
    ProductTooLarge { atoms: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("orbit overflowed at step {0}")]
    OverflowDetected(usize),
    #[error("atoms are stored truncated; the operator image is not determined")]
    TruncatedAtoms,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Birkhoff measures remember their orbit so that their image can be
/// recomputed exactly from untruncated iterates.
#[derive(Debug, Clone, PartialEq)]
struct BirkhoffOrigin {
    op: OperatorSpec,
    x0: SparseVector,
    n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    atoms: Vec<SparseVector>,
    weights: Vec<f64>,
    /// Full-space norm of each stored (unscaled) atom.
    norms: Vec<f64>,
    space: SpaceTag,
    window: Window,
    /// Every atom is implicitly multiplied by `scale`.
    scale: f64,
    truncated: bool,
    origin: Option<BirkhoffOrigin>,
}

impl EmpiricalMeasure {
    pub fn new(atoms: Vec<SparseVector>, weights: Vec<f64>, space: SpaceTag, window: Window) -> Result<Self, MeasureError> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(MeasureError::InvalidWeights(format!("{} atoms, {} weights", atoms.len(), weights.len())));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(MeasureError::InvalidWeights(format!("weight {w} is not positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(MeasureError::InvalidWeights(format!("weights sum to {total}")));
        }
        for (k, a) in atoms.iter().enumerate() {
            space.admits(a).map_err(|e| MeasureError::IncompatibleAtom { atom: k, reason: e.to_string() })?;
        }
        let norms = atoms.iter().map(|a| a.norm(&space)).collect();
        Ok(EmpiricalMeasure { atoms, weights, norms, space, window, scale: 1.0, truncated: false, origin: None })
    }

    pub fn uniform(atoms: Vec<SparseVector>, space: SpaceTag, window: Window) -> Result<Self, MeasureError> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0 / n as f64; n], space, window)
    }

    pub fn dirac(x: SparseVector, space: SpaceTag, window: Window) -> Result<Self, MeasureError> {
        Self::new(vec![x], vec![1.0], space, window)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn space(&self) -> &SpaceTag {
        &self.space
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn is_uniform(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().all(|w| (w - w0).abs() <= 1e-12 * w0)
    }

    pub fn atom(&self, k: usize) -> Cow<'_, SparseVector> {
        if self.scale == 1.0 {
            Cow::Borrowed(&self.atoms[k])
        } else {
            Cow::Owned(self.atoms[k].scale_real(self.scale))
        }
    }

    pub fn atoms(&self) -> impl Iterator<Item = Cow<'_, SparseVector>> + '_ {
        (0..self.len()).map(|k| self.atom(k))
    }

    /// Norm of atom `k` in the full space (for truncated atoms, the norm of
    /// the iterate before truncation).
    pub fn atom_norm(&self, k: usize) -> f64 {
        self.scale * self.norms[k]
    }

    pub fn mean_norm(&self) -> f64 {
        self.scale * self.norms.iter().zip(&self.weights).map(|(n, w)| n * w).sum::<f64>()
    }

    /// Projection of atom `k` onto `window`, re/im interleaved.
    pub fn projected(&self, k: usize, window: Window) -> Vec<f64> {
        let mut v = self.atoms[k].flatten(window);
        if self.scale != 1.0 {
            v.iter_mut().for_each(|x| *x *= self.scale);
        }
        v
    }

    pub fn projections(&self, window: Window) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.projected(k, window)).collect()
    }

    /// Merges identical atoms and sorts them canonically.
    pub fn consolidated(&self) -> Vec<(SparseVector, f64)> {
        let mut pairs: Vec<(SparseVector, f64)> =
            self.atoms().zip(&self.weights).map(|(a, &w)| (a.into_owned(), w)).collect();
        pairs.sort_by(|a, b| a.0.canonical_cmp(&b.0));
        let mut out: Vec<(SparseVector, f64)> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match out.last_mut() {
                Some(last) if last.0 == a => last.1 += w,
                _ => out.push((a, w)),
            }
        }
        out
    }

    /// Equality as multisets of (atom, weight) pairs.
    pub fn same_multiset(&self, other: &EmpiricalMeasure) -> bool {
        let key = |m: &EmpiricalMeasure| {
            let mut v: Vec<(SparseVector, f64)> =
                m.atoms().zip(&m.weights).map(|(a, &w)| (a.into_owned(), w)).collect();
            v.sort_by(|a, b| a.0.canonical_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            v
        };
        self.len() == other.len() && key(self) == key(other)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&MeasureJson::from(self)).expect("finite measure serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, MeasureError> {
        let j: MeasureJson = serde_json::from_str(s).map_err(|e| MeasureError::ShapeMismatch(e.to_string()))?;
        let atoms = j
            .atoms
            .into_iter()
            .map(|entries| {
                TaggedVector { space: j.space.clone(), entries }
                    .into_vector()
                    .map(|(v, _)| v)
                    .map_err(|e| MeasureError::ShapeMismatch(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
        Self::new(atoms, j.weights, j.space, j.window)
    }

    pub fn summary(&self) -> MeasureSummary {
        MeasureSummary {
            atoms: self.len(),
            mean_norm: self.mean_norm(),
            max_norm: (0..self.len()).map(|k| self.atom_norm(k)).fold(0.0, f64::max),
        }
    }
}

/// JSON form `{space, window, atoms: [[[index, re, im], ...], ...], weights}`.
#[derive(Debug, Serialize, Deserialize)]
struct MeasureJson {
    space: SpaceTag,
    window: Window,
    atoms: Vec<Vec<(i64, f64, f64)>>,
    weights: Vec<f64>,
}

impl From<&EmpiricalMeasure> for MeasureJson {
    fn from(m: &EmpiricalMeasure) -> Self {
        MeasureJson {
            space: m.space.clone(),
            window: m.window,
            atoms: m.atoms().map(|a| a.entries().iter().map(|&(i, c)| (i, c.re, c.im)).collect()).collect(),
            weights: m.weights.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureSummary {
    pub atoms: usize,
    pub mean_norm: f64,
    pub max_norm: f64,
}

/// Writes one CSV row per labelled measure: label, atoms, mean_norm,
/// max_norm, defect.
pub fn summaries_csv(rows: &[(String, MeasureSummary, Option<f64>)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "atoms", "mean_norm", "max_norm", "defect"]).unwrap();
    for (label, s, defect) in rows {
        w.write_record([
            label.clone(),
            s.atoms.to_string(),
            s.mean_norm.to_string(),
            s.max_norm.to_string(),
            defect.map_or(String::new(), |d| d.to_string()),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// `μ_N = (1/N) sum_{n=1}^N δ_{T^n x0}` with atoms truncated to the
/// default window.
pub fn birkhoff_measure(op: &OperatorSpec, x0: &SparseVector, n: usize, space: &SpaceTag) -> Result<EmpiricalMeasure, MeasureError> {
    birkhoff_measure_in(op, x0, n, space, DEFAULT_WINDOW)
}

pub fn birkhoff_measure_in(
    op: &OperatorSpec,
    x0: &SparseVector,
    n: usize,
    space: &SpaceTag,
    window: Window,
) -> Result<EmpiricalMeasure, MeasureError> {
    if n == 0 {
        return Err(MeasureError::InvalidParameter("N must be >= 1".into()));
    }
    let window = window.clamp_to(space);
    let idx: Vec<i64> = window.indices().collect();
    let rec = orbit(op, x0, n, space, &idx)?;
    if let Some(step) = rec.overflow_at {
        return Err(MeasureError::OverflowDetected(step));
    }
    let atoms = rec
        .tracked
        .iter()
        .map(|coords| SparseVector::from_entries(idx.iter().copied().zip(coords.iter().copied())))
        .collect();
    Ok(EmpiricalMeasure {
        atoms,
        weights: vec![1.0 / n as f64; n],
        norms: rec.norms,
        space: space.clone(),
        window,
        scale: 1.0,
        truncated: true,
        origin: Some(BirkhoffOrigin { op: op.clone(), x0: x0.clone(), n }),
    })
}

/// Image of `μ` under `x -> η x`.
pub fn dilate(mu: &EmpiricalMeasure, eta: f64) -> Result<EmpiricalMeasure, MeasureError> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(MeasureError::InvalidParameter(format!("dilation factor {eta}")));
    }
    let mut out = mu.clone();
    out.scale = mu.scale * eta;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolutionMode {
    FullProduct,
    /// `n` pairs drawn independently, each factor by its weights.
    Subsample { n: usize, seed: u64 },
    /// Full product up to [`MAX_PRODUCT_ATOMS`], otherwise
    /// [`DEFAULT_SUBSAMPLE`] pairs.
    Auto { seed: u64 },
}

/// Law of `X + Y` for independent `X ~ μ`, `Y ~ ν`.
pub fn convolve(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, mode: ConvolutionMode) -> Result<EmpiricalMeasure, MeasureError> {
    if mu.space != nu.space || mu.window != nu.window {
        return Err(MeasureError::SpaceMismatch);
    }
    let product = mu.len().saturating_mul(nu.len());
    let mode = match mode {
        ConvolutionMode::Auto { seed } if product > MAX_PRODUCT_ATOMS => {
            ConvolutionMode::Subsample { n: DEFAULT_SUBSAMPLE, seed }
        }
        ConvolutionMode::Auto { .. } => ConvolutionMode::FullProduct,
        m => m,
    };
    let (atoms, weights) = match mode {
        ConvolutionMode::FullProduct => {
            if product > MAX_PRODUCT_ATOMS {
                return Err(MeasureError::ProductTooLarge { atoms: product });
            }
            let mut atoms = Vec::with_capacity(product);
            let mut weights = Vec::with_capacity(product);
            for (x, wx) in mu.atoms().zip(&mu.weights) {
                for (y, wy) in nu.atoms().zip(&nu.weights) {
                    atoms.push(add(&x, &y));
                    weights.push(wx * wy);
                }
            }
            (atoms, weights)
        }
        ConvolutionMode::Subsample { n, seed } => {
            if n == 0 {
                return Err(MeasureError::InvalidParameter("subsample size must be >= 1".into()));
            }
            let di = WeightedIndex::new(&mu.weights).map_err(|e| MeasureError::InvalidWeights(e.to_string()))?;
            let dj = WeightedIndex::new(&nu.weights).map_err(|e| MeasureError::InvalidWeights(e.to_string()))?;
            let mut rng = rng_for(seed, 0);
            let atoms = (0..n)
                .map(|_| {
                    let (i, j) = (di.sample(&mut rng), dj.sample(&mut rng));
                    add(&mu.atom(i), &nu.atom(j))
                })
                .collect();
            (atoms, vec![1.0 / n as f64; n])
        }
        ConvolutionMode::Auto { .. } => unreachable!(),
    };
    let norms = atoms.iter().map(|a| a.norm(&mu.space)).collect();
    Ok(EmpiricalMeasure {
        atoms,
        weights,
        norms,
        space: mu.space.clone(),
        window: mu.window,
        scale: 1.0,
        truncated: mu.truncated || nu.truncated,
        origin: None,
    })
}

/// Image measure `μ ∘ T^{-1}`.
///
/// Birkhoff measures are recomputed from `T x0`, so their image has atoms
/// `T^2 x0 .. T^{N+1} x0`; other truncated measures are rejected.
pub fn pushforward(op: &OperatorSpec, mu: &EmpiricalMeasure) -> Result<EmpiricalMeasure, MeasureError> {
    if let Some(o) = mu.origin.as_ref().filter(|o| &o.op == op) {
        let x1 = apply(op, &o.x0)?;
        let mut out = birkhoff_measure_in(op, &x1, o.n, &mu.space, mu.window)?;
        out.scale = mu.scale;
        return Ok(out);
    }
    if mu.truncated {
        return Err(MeasureError::TruncatedAtoms);
    }
    let atoms: Vec<SparseVector> = mu.atoms.iter().map(|a| apply(op, a)).collect::<Result<_, _>>()?;
    let norms = atoms.iter().map(|a| a.norm(&mu.space)).collect();
    Ok(EmpiricalMeasure { atoms, norms, origin: None, ..mu.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum W1Method {
    /// Optimal assignment between uniform clouds.
    Exact,
    Sliced { directions: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct W1Estimate {
    pub value: f64,
    /// Standard error of the sliced estimator; zero for exact mode.
    pub std_error: f64,
}

/// Wasserstein-1 distance of the projections of `μ` and `ν` onto `dims`.
///
/// Exact mode needs uniform weights and at most [`MAX_EXACT_ATOMS`] atoms
/// after both clouds are replicated to the least common multiple of their
/// sizes. Sliced mode averages the closed-form line distance over random
/// unit directions, which estimates the sliced distance, a lower proxy of
/// W1 up to a dimensional constant.
pub fn wasserstein1(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, dims: Window, method: W1Method) -> Result<W1Estimate, MeasureError> {
    let a = mu.projections(dims);
    let b = nu.projections(dims);
    match method {
        W1Method::Exact => {
            if !mu.is_uniform() || !nu.is_uniform() {
                return Err(MeasureError::ShapeMismatch("exact mode needs uniform weights".into()));
            }
            let l = lcm(a.len(), b.len());
            if l > MAX_EXACT_ATOMS {
                return Err(MeasureError::ShapeMismatch(format!(
                    "exact mode supports at most {MAX_EXACT_ATOMS} atoms, got {l} after replication"
                )));
            }
            let rep = |v: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
                let k = l / v.len();
                v.into_iter().flat_map(|p| std::iter::repeat(p).take(k)).collect()
            };
            Ok(W1Estimate { value: transport::exact_w1(&rep(a), &rep(b)), std_error: 0.0 })
        }
        W1Method::Sliced { directions, seed } => {
            if directions == 0 {
                return Err(MeasureError::InvalidParameter("need at least one direction".into()));
            }
            let (value, std_error) = transport::sliced_w1(&a, &mu.weights, &b, &nu.weights, directions, seed);
            Ok(W1Estimate { value, std_error })
        }
    }
}

/// Transport cost of the coupling that sends atom `k` of `μ` to atom
/// `assignment[k]` of `ν`; an upper bound for W1 between uniform clouds of
/// equal size.
pub fn assignment_cost(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, dims: Window, assignment: &[usize]) -> Result<f64, MeasureError> {
    if mu.len() != nu.len() || assignment.len() != mu.len() || !mu.is_uniform() || !nu.is_uniform() {
        return Err(MeasureError::ShapeMismatch("assignment needs two uniform clouds of equal size".into()));
    }
    let mut seen = vec![false; nu.len()];
    for &j in assignment {
        if j >= nu.len() || std::mem::replace(&mut seen[j], true) {
            return Err(MeasureError::ShapeMismatch("assignment is not a permutation".into()));
        }
    }
    let total: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| transport::euclidean(&mu.projected(i, dims), &nu.projected(j, dims)))
        .sum();
    Ok(total / mu.len() as f64)
}

/// Pairs the atoms of two equal-size clouds in order of the argument of
/// coordinate `index`.
pub fn angular_assignment(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, index: i64) -> Vec<usize> {
    let order = |m: &EmpiricalMeasure| {
        let mut ix: Vec<usize> = (0..m.len()).collect();
        let arg = |k: usize| {
            let a = m.atoms[k].get(index).arg();
            if a < 0.0 {
                a + std::f64::consts::TAU
            } else {
                a
            }
        };
        ix.sort_by(|&p, &q| arg(p).total_cmp(&arg(q)));
        ix
    };
    let (oa, ob) = (order(mu), order(nu));
    let mut assign = vec![0usize; mu.len()];
    for (i, j) in oa.into_iter().zip(ob) {
        assign[i] = j;
    }
    assign
}

pub fn invariance_defect(op: &OperatorSpec, mu: &EmpiricalMeasure, dims: Window, method: W1Method) -> Result<W1Estimate, MeasureError> {
    wasserstein1(mu, &pushforward(op, mu)?, dims, method)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkovReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Compares `μ(||x|| > α)` with `α^{-p} ∫ ||x||^p dμ`.
pub fn markov_tail_check(mu: &EmpiricalMeasure, p: f64, alpha: f64) -> Result<MarkovReport, MeasureError> {
    if !(p > 0.0 && alpha > 0.0) {
        return Err(MeasureError::InvalidParameter("p and alpha must be positive".into()));
    }
    let mut lhs = 0.0;
    let mut moment = 0.0;
    for k in 0..mu.len() {
        let n = mu.atom_norm(k);
        if n > alpha {
            lhs += mu.weights[k];
        }
        moment += mu.weights[k] * n.powf(p);
    }
    let rhs = moment / alpha.powf(p);
    Ok(MarkovReport { lhs, rhs, pass: lhs <= rhs + 1e-12 })
}

/// Fraction of the open balls `(center, radius)` that contain an atom, in
/// the projection metric of the measure's window.
pub fn support_coverage(mu: &EmpiricalMeasure, balls: &[(SparseVector, f64)]) -> f64 {
    if balls.is_empty() {
        return 0.0;
    }
    let pts = mu.projections(mu.window);
    let hit = balls
        .iter()
        .filter(|(c, r)| {
            let c = c.flatten(mu.window);
            pts.iter().any(|p| transport::euclidean(p, &c) < *r)
        })
        .count();
    hit as f64 / balls.len() as f64
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn lcm(a: usize, b: usize) -> usize {
    if a == 0 || b == 0 {
        0
    } else {
        a / gcd(a, b) * b
    }
}

/// Sorts `(atom, weight)` pairs canonically; helper for multiset checks.
pub fn canonical_pairs(mut v: Vec<(SparseVector, f64)>) -> Vec<(SparseVector, f64)> {
    v.sort_by(|a, b| a.0.canonical_cmp(&b.0).then(a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal)));
    v
}
