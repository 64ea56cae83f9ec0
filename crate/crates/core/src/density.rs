//! Density analytics for sets of visit times, and the estimator of
//! `c(T) = sup_R sup_x upper-dens N_T(x, B_R)`.
//!
//! Every density here is a finite-horizon estimate: the lower (upper)
//! density is replaced by the minimum (maximum) of the running ratio
//! `|S ∩ [1, n]| / n` over the tail window `n >= tail_fraction * horizon`.
//! The `c(T)` estimate is a lower bound of the true supremum (finitely many
//! sampled vectors, radii and steps); no procedure here certifies that a
//! sampled vector is hypercyclic.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::operators::{
    eigenvector_field, orbit, unit_phase, FieldScan, OperatorError, OperatorSpec, VisitRecord, WeightedShift,
};
use crate::seed::rng_for;
use crate::space::{SparseVector, SpaceTag, Window};

pub const DEFAULT_TAIL_FRACTION: f64 = 0.1;
pub const MIN_PROFILE_HORIZON: u64 = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("horizon {horizon} too short (need at least {needed})")]
    HorizonTooShort { horizon: u64, needed: u64 },
    #[error("invalid integer set: {0}")]
    InvalidSet(String),
    #[error("invalid estimator input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Strictly increasing naturals in `[1, horizon]`, with membership known up
/// to `horizon`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntegerSet {
    elements: Vec<u64>,
    horizon: u64,
}

impl IntegerSet {
    pub fn new(elements: Vec<u64>, horizon: u64) -> Result<Self, DensityError> {
        if elements.first() == Some(&0) {
            return Err(DensityError::InvalidSet("elements start at 1".into()));
        }
        if !elements.windows(2).all(|w| w[0] < w[1]) {
            return Err(DensityError::InvalidSet("elements must be strictly increasing".into()));
        }
        if elements.last().is_some_and(|&e| e > horizon) {
            return Err(DensityError::InvalidSet("element beyond horizon".into()));
        }
        Ok(IntegerSet { elements, horizon })
    }

    pub fn empty(horizon: u64) -> Self {
        IntegerSet { elements: Vec::new(), horizon }
    }

    pub fn from_predicate(horizon: u64, f: impl Fn(u64) -> bool) -> Self {
        IntegerSet { elements: (1..=horizon).filter(|&n| f(n)).collect(), horizon }
    }

    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, n: u64) -> bool {
        self.elements.binary_search(&n).is_ok()
    }

    /// `|S ∩ [1, n]|`.
    pub fn count_upto(&self, n: u64) -> usize {
        self.elements.partition_point(|&e| e <= n)
    }

    pub fn is_subset_of(&self, other: &IntegerSet) -> bool {
        self.elements.iter().all(|&e| other.contains(e))
    }

    pub fn intersection(&self, other: &IntegerSet) -> IntegerSet {
        IntegerSet {
            elements: self.elements.iter().copied().filter(|&e| other.contains(e)).collect(),
            horizon: self.horizon.min(other.horizon),
        }
    }

    /// Running ratios `r_n = |S ∩ [1, n]| / n` for `n = 1..=horizon`.
    pub fn running_ratio(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.horizon as usize);
        let mut count = 0usize;
        let mut it = self.elements.iter().peekable();
        for n in 1..=self.horizon {
            while it.peek().is_some_and(|&&e| e <= n) {
                it.next();
                count += 1;
            }
            out.push(count as f64 / n as f64);
        }
        out
    }
}

/// Finite-horizon lower/upper density estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityProfile {
    pub lower_est: f64,
    pub upper_est: f64,
    pub tail_start: u64,
    /// Where the tail minimum and maximum are attained.
    pub lower_at: u64,
    pub upper_at: u64,
    #[serde(skip)]
    pub running_ratio: Vec<f64>,
}

impl DensityProfile {
    pub fn final_ratio(&self) -> f64 {
        self.running_ratio.last().copied().unwrap_or(0.0)
    }
}

pub fn density_profile(s: &IntegerSet, tail_fraction: f64) -> Result<DensityProfile, DensityError> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(DensityError::InvalidInput(format!("tail fraction {tail_fraction} outside (0,1)")));
    }
    if s.horizon < MIN_PROFILE_HORIZON {
        return Err(DensityError::HorizonTooShort { horizon: s.horizon, needed: MIN_PROFILE_HORIZON });
    }
    let running_ratio = s.running_ratio();
    let tail_start = ((tail_fraction * s.horizon as f64).ceil() as u64).max(1);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lower_at, mut upper_at) = (tail_start, tail_start);
    for n in tail_start..=s.horizon {
        let r = running_ratio[(n - 1) as usize];
        if r < lo {
            lo = r;
            lower_at = n;
        }
        if r > hi {
            hi = r;
            upper_at = n;
        }
    }
    Ok(DensityProfile { lower_est: lo, upper_est: hi, tail_start, lower_at, upper_at, running_ratio })
}

/// `N_T(x, B_R)` up to the requested horizon; steps lost to overflow count
/// as non-visits.
pub fn visit_set(record: &VisitRecord, radius: f64) -> IntegerSet {
    visit_set_where(record, |n| n <= radius)
}

/// Visits to the annulus `{inner < ||.|| <= outer}`.
pub fn annulus_visit_set(record: &VisitRecord, inner: f64, outer: f64) -> IntegerSet {
    visit_set_where(record, |n| inner < n && n <= outer)
}

fn visit_set_where(record: &VisitRecord, pred: impl Fn(f64) -> bool) -> IntegerSet {
    let elements = record
        .norms
        .iter()
        .enumerate()
        .filter(|(_, &n)| pred(n))
        .map(|(i, _)| i as u64 + 1)
        .collect();
    IntegerSet { elements, horizon: record.requested_horizon as u64 }
}

/// `⋃_{r=0}^{N} (S - r)` up to `horizon - N`.
pub fn shifted_union(s: &IntegerSet, shift: u64) -> Result<IntegerSet, DensityError> {
    if s.horizon <= shift.saturating_mul(10) {
        return Err(DensityError::HorizonTooShort { horizon: s.horizon, needed: shift * 10 + 1 });
    }
    let h = s.horizon - shift;
    let mut elements = Vec::new();
    let mut j = 0usize;
    for m in 1..=h {
        while j < s.elements.len() && s.elements[j] < m {
            j += 1;
        }
        if j < s.elements.len() && s.elements[j] <= m + shift {
            elements.push(m);
        }
    }
    Ok(IntegerSet { elements, horizon: h })
}

pub fn shifted_union_density(s: &IntegerSet, shift: u64, tail_fraction: f64) -> Result<DensityProfile, DensityError> {
    density_profile(&shifted_union(s, shift)?, tail_fraction)
}

/// How initial vectors are drawn for [`estimate_c`].
#[derive(Debug, Clone, PartialEq)]
pub enum Sampler {
    Fixed(SparseVector),
    /// `x0 = sum_j χ_j E(e^{2πiθ_j})` with independent Steinhaus `χ_j`, for a
    /// unilateral shift with convergent eigenvector fields. The orbit is
    /// evaluated in closed form, `T^n x0 = sum_j χ_j λ_j^n E(λ_j)`.
    SteinhausSeries { angles: Vec<f64> },
    /// `x_0` with modulus uniform in `[anchor_min, anchor_max]`; every other
    /// index `k` of `window` gets a coefficient uniform in the disc of radius
    /// `spread * 2^{-max(k, 0)}`.
    Anchored { window: Window, anchor_min: f64, anchor_max: f64, spread: f64 },
}

impl Sampler {
    /// Initial vector of trial `trial`; `None` for the series sampler, whose
    /// orbit is never materialized.
    pub fn initial_vector(&self, seed: u64, trial: usize) -> Option<SparseVector> {
        match self {
            Sampler::Fixed(x0) => Some(x0.clone()),
            Sampler::Anchored { window, anchor_min, anchor_max, spread } => {
                let mut rng = rng_for(seed, trial as u64);
                Some(Self::draw_anchored(&mut rng, *window, *anchor_min, *anchor_max, *spread))
            }
            Sampler::SteinhausSeries { .. } => None,
        }
    }

    fn draw_anchored<R: Rng>(rng: &mut R, window: Window, amin: f64, amax: f64, spread: f64) -> SparseVector {
        let mut entries = Vec::with_capacity(window.len());
        for k in window.indices() {
            let phase = unit_phase(rng.gen::<f64>());
            let modulus = if k == 0 {
                amin + (amax - amin) * rng.gen::<f64>()
            } else {
                spread * 2f64.powi(-(k.max(0) as i32)) * rng.gen::<f64>().sqrt()
            };
            entries.push((k, phase * modulus));
        }
        SparseVector::from_entries(entries)
    }
}

/// Closed-form orbit of a finite Steinhaus series of eigenvector fields.
///
/// Coordinates beyond the field truncation carry less than `1e-12` of each
/// field's coefficient mass and are ignored.
pub struct EigenSeriesOrbit {
    coeffs: Vec<Complex64>,
    lambdas: Vec<Complex64>,
    /// `lam_pow[j][k] = λ_j^k`.
    lam_pow: Vec<Vec<Complex64>>,
    terms: Vec<f64>,
}

impl EigenSeriesOrbit {
    pub fn new(s: &WeightedShift, angles: &[f64], coeffs: Vec<Complex64>) -> Result<Self, DensityError> {
        if angles.len() != coeffs.len() || angles.is_empty() {
            return Err(DensityError::InvalidInput("one coefficient per eigen-direction".into()));
        }
        let scan = FieldScan::new(s)?;
        // surfaces DivergentField
        let m = eigenvector_field(s, Complex64::new(1.0, 0.0), None)?.trunc;
        let lambdas: Vec<Complex64> = angles.iter().map(|&a| unit_phase(a)).collect();
        let lam_pow = lambdas
            .iter()
            .map(|&l| {
                let mut p = Complex64::new(1.0, 0.0);
                (0..=m)
                    .map(|_| {
                        let cur = p;
                        p *= l;
                        cur
                    })
                    .collect()
            })
            .collect();
        Ok(EigenSeriesOrbit { coeffs, lambdas, lam_pow, terms: scan.terms[..=m].to_vec() })
    }

    /// The initial vector, truncated.
    pub fn initial_vector(&self) -> SparseVector {
        let state = self.coeffs.clone();
        SparseVector::from_entries((0..self.terms.len()).map(|k| (k as i64, self.coordinate(&state, k))))
    }

    fn coordinate(&self, state: &[Complex64], k: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (z, pw) in state.iter().zip(&self.lam_pow) {
            acc += z * pw[k];
        }
        acc * self.terms[k]
    }

    /// Norms of `T^1 x0 .. T^horizon x0`.
    pub fn norms(&self, horizon: usize, space: &SpaceTag) -> Vec<f64> {
        let moduli: Vec<f64> = self.coeffs.iter().map(|c| c.norm()).collect();
        let mass: f64 = moduli.iter().sum();
        let mut state = self.coeffs.clone();
        let mut out = Vec::with_capacity(horizon);
        for n in 1..=horizon {
            for ((z, l), m) in state.iter_mut().zip(&self.lambdas).zip(&moduli) {
                *z *= l;
                if n % 64 == 0 {
                    *z *= m / z.norm();
                }
            }
            let norm = match space.exponent() {
                None => {
                    let mut best = 0.0f64;
                    for k in 0..self.terms.len() {
                        if self.terms[k] * mass <= best {
                            break;
                        }
                        best = best.max(self.coordinate(&state, k).norm());
                    }
                    best
                }
                Some(_) => space.norm_of_moduli((0..self.terms.len()).map(|k| self.coordinate(&state, k).norm())),
            };
            out.push(norm);
        }
        out
    }
}

/// One (trial, radius) cell of the estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRadius {
    pub trial: usize,
    pub seed: u64,
    pub radius: f64,
    pub upper_est: f64,
    pub lower_est: f64,
    /// Where the tail maximum of the running ratio sits.
    pub upper_at: u64,
    pub overflow: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CEstimate {
    pub value: f64,
    pub per_trial: Vec<TrialRadius>,
    pub radii: Vec<f64>,
    pub horizon: usize,
}

impl CEstimate {
    /// Upper estimates for one trial, in radius order.
    pub fn trial_row(&self, trial: usize) -> Vec<f64> {
        self.per_trial.iter().filter(|r| r.trial == trial).map(|r| r.upper_est).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["trial", "seed", "radius", "upper_est", "lower_est", "overflow_flag"]).unwrap();
        for r in &self.per_trial {
            w.write_record([
                r.trial.to_string(),
                r.seed.to_string(),
                r.radius.to_string(),
                r.upper_est.to_string(),
                r.lower_est.to_string(),
                (r.overflow as u8).to_string(),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

/// Samples `trials` initial vectors, runs their orbits and reports the
/// largest upper visit density to any of the balls `B_R`.
///
/// Trials run in parallel; trial `t` draws from a generator seeded by
/// `(seed, t)`, so the result does not depend on the worker count.
pub fn estimate_c(
    op: &OperatorSpec,
    sampler: &Sampler,
    radii: &[f64],
    horizon: usize,
    trials: usize,
    space: &SpaceTag,
    seed: u64,
) -> Result<CEstimate, DensityError> {
    if trials == 0 {
        return Err(DensityError::InvalidInput("trials must be >= 1".into()));
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(DensityError::InvalidInput("radii must be a nonempty list of positive reals".into()));
    }
    if (horizon as u64) < MIN_PROFILE_HORIZON {
        return Err(DensityError::HorizonTooShort { horizon: horizon as u64, needed: MIN_PROFILE_HORIZON });
    }
    let rows: Vec<Vec<TrialRadius>> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<Vec<TrialRadius>, DensityError> {
            let trial_seed = crate::seed::derive_seed(seed, trial as u64);
            let record = match sampler {
                Sampler::Fixed(_) | Sampler::Anchored { .. } => {
                    let x0 = sampler.initial_vector(seed, trial).unwrap();
                    orbit(op, &x0, horizon, space, &[])?
                }
                Sampler::SteinhausSeries { angles } => {
                    let s = op.as_shift().ok_or_else(|| {
                        DensityError::InvalidInput("Steinhaus series sampler needs a shift".into())
                    })?;
                    let mut rng = rng_for(seed, trial as u64);
                    let coeffs = angles.iter().map(|_| unit_phase(rng.gen::<f64>())).collect();
                    let series = EigenSeriesOrbit::new(s, angles, coeffs)?;
                    VisitRecord::from_norms(series.norms(horizon, space), horizon, series.initial_vector().digest())
                }
            };
            radii
                .iter()
                .map(|&radius| {
                    let prof = density_profile(&visit_set(&record, radius), DEFAULT_TAIL_FRACTION)?;
                    Ok(TrialRadius {
                        trial,
                        seed: trial_seed,
                        radius,
                        upper_est: prof.upper_est,
                        lower_est: prof.lower_est,
                        upper_at: prof.upper_at,
                        overflow: record.overflowed(),
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let per_trial: Vec<TrialRadius> = rows.into_iter().flatten().collect();
    let value = per_trial.iter().map(|r| r.upper_est).fold(0.0, f64::max);
    Ok(CEstimate { value, per_trial, radii: radii.to_vec(), horizon })
}
