//! Explicit witness vectors for weighted backward shifts and the designed
//! bilateral shift whose orbits cannot spend more than `1 - dens(A)` of
//! their time in a small ball.
//!
//! Certificates state finite-horizon facts only: densities are tail-window
//! estimates and norm bounds are checked at every step up to the horizon.
//! None of them certifies an asymptotic property such as frequent
//! hypercyclicity.
//!
//! Witness vectors for shifts with weights above 1 have coefficients far
//! below the `f64` range, so they are stored as [`LogVector`]s and their
//! orbits are evaluated through [`ShiftOrbitView`].

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{
    density_profile, estimate_c, DensityError, IntegerSet, Sampler, DEFAULT_TAIL_FRACTION,
};
use crate::operators::{
    log_weight_prefix, orbit, BrWeights, DesignSet, LogCoeff, LogVector, OperatorError, OperatorSpec, ShiftOrbitView, WeightSeq,
    WeightedShift,
};
use crate::space::{SparseVector, SpaceTag, TaggedVector, Window};

pub const MAX_SCHEDULE_SETS: usize = 20;
pub const MAX_WITNESS_DEPTH: u32 = 40;
/// Largest horizon a witness certificate scans.
pub const MAX_WITNESS_HORIZON: u64 = 1 << 26;
pub const MAX_BR_HORIZON: u64 = 1_000_000;
pub const DENSITY_SLACK: f64 = 0.01;
pub const CERTIFICATE_SCHEMA: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WitnessError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("schedule too tight: {0}")]
    ScheduleTooTight(String),
    #[error("horizon {0} exceeds the scan limit")]
    HorizonTooLarge(u64),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// How a schedule was generated; stored in certificates so the schedule can
/// be rebuilt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ScheduleSpec {
    Dyadic { sets: usize, horizon: u64 },
    /// `A_p = {n >= start : n mod modulus ∈ classes[p]}`.
    Residues { modulus: u64, classes: Vec<Vec<u64>>, start: u64, horizon: u64 },
    Explicit { sets: Vec<Vec<u64>>, densities: Vec<f64>, horizon: u64 },
}

/// Disjoint sets of scheduled visit times with declared densities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub spec: ScheduleSpec,
    pub sets: Vec<IntegerSet>,
    pub declared_density: Vec<f64>,
    /// Smallest difference of two elements of `A_p` (`None` below two
    /// elements).
    pub min_gap_within: Vec<Option<u64>>,
    /// Smallest `|a - b|` over `a ∈ A_p`, `b ∈ A_q`, `p != q`.
    pub min_gap_across: Vec<Vec<Option<u64>>>,
}

fn min_gap_between(a: &[u64], b: &[u64]) -> Option<u64> {
    let (mut i, mut j) = (0, 0);
    let mut best: Option<u64> = None;
    while i < a.len() && j < b.len() {
        let d = a[i].abs_diff(b[j]);
        best = Some(best.map_or(d, |x| x.min(d)));
        if a[i] < b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    best
}

impl Schedule {
    pub fn from_spec(spec: ScheduleSpec) -> Result<Self, WitnessError> {
        let (sets, declared) = match &spec {
            ScheduleSpec::Dyadic { sets: p, horizon } => {
                if *p > MAX_SCHEDULE_SETS {
                    return Err(WitnessError::InvalidInput(format!("at most {MAX_SCHEDULE_SETS} sets")));
                }
                let sets = (1..=*p as u32)
                    .map(|p| {
                        let m = 1u64 << p;
                        let r = 1u64 << (p - 1);
                        let start = p as u64 * (1u64 << (p + 1));
                        let first = start + (r + m - start % m) % m;
                        IntegerSet::new((first..=*horizon).step_by(m as usize).collect(), *horizon)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let dens = (1..=*p as i32).map(|p| 2f64.powi(-p)).collect();
                (sets, dens)
            }
            ScheduleSpec::Residues { modulus, classes, start, horizon } => {
                if *modulus == 0 || classes.len() > MAX_SCHEDULE_SETS {
                    return Err(WitnessError::InvalidInput("bad residue schedule".into()));
                }
                let sets = classes
                    .iter()
                    .map(|cl| {
                        IntegerSet::new(
                            ((*start).max(1)..=*horizon).filter(|n| cl.contains(&(n % modulus))).collect(),
                            *horizon,
                        )
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let dens = classes
                    .iter()
                    .map(|cl| {
                        let mut c: Vec<u64> = cl.iter().map(|r| r % modulus).collect();
                        c.sort_unstable();
                        c.dedup();
                        c.len() as f64 / *modulus as f64
                    })
                    .collect();
                (sets, dens)
            }
            ScheduleSpec::Explicit { sets, densities, horizon } => {
                if sets.len() != densities.len() || sets.len() > MAX_SCHEDULE_SETS {
                    return Err(WitnessError::InvalidInput("one declared density per set".into()));
                }
                let sets = sets
                    .iter()
                    .map(|s| IntegerSet::new(s.clone(), *horizon))
                    .collect::<Result<Vec<_>, _>>()?;
                (sets, densities.clone())
            }
        };
        let min_gap_within = sets
            .iter()
            .map(|s| s.elements().windows(2).map(|w| w[1] - w[0]).min())
            .collect();
        let min_gap_across = sets
            .iter()
            .enumerate()
            .map(|(p, a)| {
                sets.iter()
                    .enumerate()
                    .map(|(q, b)| if p == q { None } else { min_gap_between(a.elements(), b.elements()) })
                    .collect()
            })
            .collect();
        Ok(Schedule { spec, sets, declared_density: declared, min_gap_within, min_gap_across })
    }

    pub fn from_residues(modulus: u64, classes: Vec<Vec<u64>>, start: u64, horizon: u64) -> Result<Self, WitnessError> {
        Self::from_spec(ScheduleSpec::Residues { modulus, classes, start, horizon })
    }

    pub fn horizon(&self) -> u64 {
        match &self.spec {
            ScheduleSpec::Dyadic { horizon, .. }
            | ScheduleSpec::Residues { horizon, .. }
            | ScheduleSpec::Explicit { horizon, .. } => *horizon,
        }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Pairwise disjointness, from the across-gaps.
    pub fn is_disjoint(&self) -> bool {
        self.min_gap_across.iter().flatten().all(|g| g.is_none_or(|g| g > 0))
    }

    /// Every placement `(n, p)` in increasing order of `n`.
    pub fn placements(&self) -> Vec<(u64, usize)> {
        let mut all: Vec<(u64, usize)> = self
            .sets
            .iter()
            .enumerate()
            .flat_map(|(p, s)| s.elements().iter().map(move |&n| (n, p)))
            .collect();
        all.sort_unstable();
        all
    }
}

/// `A_p = {n <= horizon : n ≡ 2^{p-1} mod 2^p, n >= p 2^{p+1}}` for
/// `p = 1..=P`.
pub fn dyadic_schedule(sets: usize, horizon: u64) -> Result<Schedule, WitnessError> {
    Schedule::from_spec(ScheduleSpec::Dyadic { sets, horizon })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub label: String,
    pub measured: f64,
    pub bound: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl Claim {
    pub fn at_most(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        Claim { label: label.into(), measured, bound, relation: Relation::AtMost, pass: measured <= bound }
    }

    pub fn at_least(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        Claim { label: label.into(), measured, bound, relation: Relation::AtLeast, pass: measured >= bound }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessKind {
    Fhc,
    DistNull,
    DistIrregular,
    BrInequality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessCertificate {
    pub kind: WitnessKind,
    pub horizon: u64,
    pub claims: Vec<Claim>,
    pub pass: bool,
}

impl WitnessCertificate {
    fn new(kind: WitnessKind, horizon: u64, claims: Vec<Claim>) -> Self {
        let pass = claims.iter().all(|c| c.pass);
        WitnessCertificate { kind, horizon, claims, pass }
    }

    pub fn claim(&self, label_prefix: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.label.starts_with(label_prefix))
    }
}

/// Sampling of initial vectors for the designed-shift certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrSampling {
    pub trials: usize,
    pub seed: u64,
    pub radius: f64,
    pub anchor_min: f64,
    pub anchor_max: f64,
    pub spread: f64,
    pub window: Window,
}

impl Default for BrSampling {
    fn default() -> Self {
        BrSampling {
            trials: 32,
            seed: 2026,
            radius: 0.99,
            anchor_min: 1.0,
            anchor_max: 2.0,
            spread: 0.25,
            window: Window::new(-8, 8),
        }
    }
}

/// Construction parameters, enough to rebuild every claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WitnessParams {
    Fhc { targets: Vec<Vec<(i64, f64, f64)>>, schedule: ScheduleSpec, eps: f64 },
    DistNull { growth: u64, depth: u32 },
    DistIrregular { depth: u32 },
    BrInequality { design: DesignSet, rho: f64, horizon: u64, sampling: BrSampling },
}

/// Everything needed to re-derive a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateBundle {
    pub schema: u32,
    pub operator: OperatorSpec,
    pub space: SpaceTag,
    #[serde(default)]
    pub vector: Option<LogVector>,
    pub params: WitnessParams,
    pub certificate: WitnessCertificate,
}

impl CertificateBundle {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, WitnessError> {
        serde_json::from_str(s).map_err(|e| WitnessError::InvalidInput(e.to_string()))
    }
}

fn unilateral_shift(op: &OperatorSpec) -> Result<&WeightedShift, WitnessError> {
    match op.as_shift() {
        Some(s) if !s.bilateral => Ok(s),
        _ => Err(WitnessError::InvalidInput("witness vectors need a unilateral weighted shift".into())),
    }
}

fn log_prefix(s: &WeightedShift, top: u64) -> Result<Vec<f64>, WitnessError> {
    Ok(log_weight_prefix(s, top as usize)?)
}

fn target_len(y: &SparseVector) -> Result<u64, WitnessError> {
    match y.support_bounds() {
        None => Ok(0),
        Some((lo, _)) if lo < 0 => Err(WitnessError::InvalidInput("targets live on [0, L)".into())),
        Some((_, hi)) => Ok(hi as u64 + 1),
    }
}

fn view_norms(view: &ShiftOrbitView, horizon: u64, space: &SpaceTag) -> Vec<f64> {
    view.norms(horizon as usize, space)
}

/// Places, for each `p` and `n ∈ A_p`, the target `y_p` divided by the
/// weight products at indices `n..n+L_p`, so that `T^n x0` agrees with
/// `y_p` on `[0, L_p)`. The rest of `T^n x0` consists of later blocks,
/// each damped by at least `λ_min^{-gap}`.
pub fn build_fhc_vector(
    s: &WeightedShift,
    targets: &[SparseVector],
    schedule: &Schedule,
    eps: f64,
    space: &SpaceTag,
) -> Result<CertificateBundle, WitnessError> {
    if s.bilateral {
        return Err(WitnessError::InvalidInput("unilateral shift expected".into()));
    }
    if !(eps > 0.0) {
        return Err(WitnessError::InvalidInput("eps must be positive".into()));
    }
    if targets.len() != schedule.len() {
        return Err(WitnessError::InvalidInput("one schedule set per target".into()));
    }
    if !schedule.is_disjoint() {
        return Err(WitnessError::ScheduleTooTight("schedule sets overlap".into()));
    }
    let lens: Vec<u64> = targets.iter().map(target_len).collect::<Result<_, _>>()?;
    let placements = schedule.placements();
    let top = placements.last().map_or(0, |&(n, p)| n + lens[p]);
    let prefix = log_prefix(s, top)?;

    // a block must leave [0, L) before the next one arrives
    for w in placements.windows(2) {
        let ((n, p), (m, _)) = (w[0], w[1]);
        if m - n < lens[p] {
            return Err(WitnessError::ScheduleTooTight(format!(
                "block at {n} has length {} but the next placement is at {m}",
                lens[p]
            )));
        }
    }
    let min_gap = placements.windows(2).map(|w| w[1].0 - w[0].0).min();
    if let Some(g) = min_gap {
        let lam_min = (1..=top as usize).map(|k| prefix[k] - prefix[k - 1]).fold(f64::INFINITY, f64::min);
        let ymax = targets.iter().map(|y| y.norm(space)).fold(0.0, f64::max);
        let decay = (-(g as f64) * lam_min).exp();
        let predicted = match space.exponent() {
            None => ymax * decay,
            Some(p) => ymax * decay / (1.0 - (-p * lam_min).exp()).powf(1.0 / p),
        };
        if predicted > eps {
            return Err(WitnessError::ScheduleTooTight(format!(
                "interference bound {predicted:e} exceeds eps {eps:e}"
            )));
        }
    }

    let mut coeffs = Vec::new();
    for &(n, p) in &placements {
        for &(k, c) in targets[p].entries() {
            let k = k as u64;
            let log_mod = c.norm().ln() - (prefix[(n + k) as usize] - prefix[k as usize]);
            coeffs.push(LogCoeff::from_log((n + k) as i64, log_mod, c / c.norm()));
        }
    }
    let x = LogVector::new(coeffs)?;
    let certificate = certify_fhc(s, &x, targets, schedule, eps, space)?;
    Ok(CertificateBundle {
        schema: CERTIFICATE_SCHEMA,
        operator: OperatorSpec::Shift(s.clone()),
        space: space.clone(),
        vector: Some(x),
        params: WitnessParams::Fhc {
            targets: targets.iter().map(|y| TaggedVector::new(y, space.clone()).entries).collect(),
            schedule: schedule.spec.clone(),
            eps,
        },
        certificate,
    })
}

pub fn certify_fhc(
    s: &WeightedShift,
    x: &LogVector,
    targets: &[SparseVector],
    schedule: &Schedule,
    eps: f64,
    space: &SpaceTag,
) -> Result<WitnessCertificate, WitnessError> {
    let view = ShiftOrbitView::new(s, x)?;
    let mut claims = Vec::new();
    for (p, (set, y)) in schedule.sets.iter().zip(targets).enumerate() {
        let declared = schedule.declared_density[p];
        let prof = density_profile(set, DEFAULT_TAIL_FRACTION)?;
        claims.push(Claim::at_least(format!("A_{} lower density", p + 1), prof.lower_est, declared - DENSITY_SLACK));
        claims.push(Claim::at_most(
            format!("A_{} density deviation from {declared}", p + 1),
            (prof.lower_est - declared).abs().max((prof.upper_est - declared).abs()),
            DENSITY_SLACK,
        ));
        let worst = set
            .elements()
            .par_iter()
            .map(|&n| view.distance_to(n as usize, y, space))
            .reduce(|| 0.0, f64::max);
        claims.push(Claim::at_most(format!("A_{} max ||T^n x - y||", p + 1), worst, eps));
    }
    Ok(WitnessCertificate::new(WitnessKind::Fhc, schedule.horizon(), claims))
}

fn check_depth(depth: u32) -> Result<(), WitnessError> {
    if !(2..=MAX_WITNESS_DEPTH).contains(&depth) {
        return Err(WitnessError::InvalidInput(format!("depth must lie in [2, {MAX_WITNESS_DEPTH}]")));
    }
    Ok(())
}

fn null_horizon(growth: u64, depth: u32) -> Result<u64, WitnessError> {
    if growth < 4 {
        return Err(WitnessError::InvalidInput("window growth must be >= 4".into()));
    }
    check_depth(depth)?;
    match growth.checked_pow(depth) {
        Some(h) if h <= MAX_WITNESS_HORIZON => Ok(h),
        other => Err(WitnessError::HorizonTooLarge(other.unwrap_or(u64::MAX))),
    }
}

/// Windows `[b_r, b_{r+1})` with `b_r = g^r`; the orbit carries one spike
/// per window that reaches coordinate 0 with modulus `r` at time `b_r` and
/// leaves immediately after, so the norm stays tiny for most of every
/// window.
pub fn build_dist_null_vector(s: &WeightedShift, growth: u64, depth: u32, space: &SpaceTag) -> Result<CertificateBundle, WitnessError> {
    let horizon = null_horizon(growth, depth)?;
    if s.bilateral {
        return Err(WitnessError::InvalidInput("unilateral shift expected".into()));
    }
    let prefix = log_prefix(s, horizon)?;
    let coeffs = (1..=depth)
        .map(|r| {
            let q = growth.pow(r);
            LogCoeff::from_log(q as i64, (r as f64).ln() - prefix[q as usize], Complex64::new(1.0, 0.0))
        })
        .collect();
    let x = LogVector::new(coeffs)?;
    let certificate = certify_dist_null(s, &x, growth, depth, space)?;
    Ok(CertificateBundle {
        schema: CERTIFICATE_SCHEMA,
        operator: OperatorSpec::Shift(s.clone()),
        space: space.clone(),
        vector: Some(x),
        params: WitnessParams::DistNull { growth, depth },
        certificate,
    })
}

/// Small-norm threshold `0.1` used for the null-set density claim.
pub const NULL_SMALL: f64 = 0.1;
pub const ANNULUS: (f64, f64) = (1.0, 2.0);
pub const ANNULUS_BOUND: f64 = 0.05;

pub fn certify_dist_null(s: &WeightedShift, x: &LogVector, growth: u64, depth: u32, space: &SpaceTag) -> Result<WitnessCertificate, WitnessError> {
    let horizon = null_horizon(growth, depth)?;
    let view = ShiftOrbitView::new(s, x)?;
    let norms = view_norms(&view, horizon, space);
    let window_of = |i: u64| {
        // largest r with g^r <= i, at least 1
        let mut r = 1u32;
        while r < depth && growth.pow(r + 1) <= i {
            r += 1;
        }
        r
    };
    let bound = 1.0 - 2.0 / depth as f64;
    let d = IntegerSet::from_predicate(horizon, |i| norms[i as usize - 1] <= 1.0 / window_of(i) as f64);
    let small = IntegerSet::from_predicate(horizon, |i| norms[i as usize - 1] <= NULL_SMALL);
    let annulus = IntegerSet::from_predicate(horizon, |i| {
        let n = norms[i as usize - 1];
        ANNULUS.0 < n && n <= ANNULUS.1
    });
    let claims = vec![
        Claim::at_least("D upper density (||T^i x|| <= 1/r on window r)", density_profile(&d, DEFAULT_TAIL_FRACTION)?.upper_est, bound),
        Claim::at_least(
            format!("upper density of ||T^i x|| <= {NULL_SMALL}"),
            density_profile(&small, DEFAULT_TAIL_FRACTION)?.upper_est,
            bound,
        ),
        Claim::at_most(
            "annulus 1 < ||T^i x|| <= 2 lower density",
            density_profile(&annulus, DEFAULT_TAIL_FRACTION)?.lower_est,
            ANNULUS_BOUND,
        ),
    ];
    Ok(WitnessCertificate::new(WitnessKind::DistNull, horizon, claims))
}

/// Log-modulus of the orbit values in growth regimes, `2^64`; decay
/// regimes use the reciprocal.
const REGIME_AMPLITUDE: f64 = 64.0 * std::f64::consts::LN_2;
const REGIME_GROWTH: u64 = 4;

fn irregular_horizon(depth: u32) -> Result<u64, WitnessError> {
    check_depth(depth)?;
    match REGIME_GROWTH.checked_pow(depth) {
        Some(h) if h <= MAX_WITNESS_HORIZON => Ok(h),
        other => Err(WitnessError::HorizonTooLarge(other.unwrap_or(u64::MAX))),
    }
}

/// Regime `k` is `[4^k, 4^{k+1})`: decay for even `k`, growth for odd `k`.
fn regime_of(i: u64) -> u32 {
    let mut k = 0;
    while REGIME_GROWTH.pow(k + 1) <= i {
        k += 1;
    }
    k
}

/// Alternating regimes: spikes whose orbit values are `2^{-64}` (decay)
/// or `2^{64}` (growth) when they reach coordinate 0, spaced so that in a
/// growth regime the next spike is always close enough to keep the norm
/// above `depth`.
pub fn build_dist_irregular_vector(s: &WeightedShift, depth: u32, space: &SpaceTag) -> Result<CertificateBundle, WitnessError> {
    let horizon = irregular_horizon(depth)?;
    if s.bilateral {
        return Err(WitnessError::InvalidInput("unilateral shift expected".into()));
    }
    let prefix = log_prefix(s, horizon)?;
    let room = REGIME_AMPLITUDE - (depth as f64).ln() - std::f64::consts::LN_2;
    // largest spike distance that keeps a growth value above the threshold
    let reach = prefix.iter().take_while(|&&v| v <= room).count().max(1) as u64;
    let mut coeffs = Vec::new();
    for k in 0..depth {
        let (lo, hi) = (REGIME_GROWTH.pow(k), REGIME_GROWTH.pow(k + 1).min(horizon + 1));
        let b = if k % 2 == 0 { -REGIME_AMPLITUDE } else { REGIME_AMPLITUDE };
        let mut n = lo;
        while n < hi {
            coeffs.push(LogCoeff::from_log(n as i64, b - prefix[n as usize], Complex64::new(1.0, 0.0)));
            n += reach;
        }
    }
    let x = LogVector::new(coeffs)?;
    let certificate = certify_dist_irregular(s, &x, depth, space)?;
    Ok(CertificateBundle {
        schema: CERTIFICATE_SCHEMA,
        operator: OperatorSpec::Shift(s.clone()),
        space: space.clone(),
        vector: Some(x),
        params: WitnessParams::DistIrregular { depth },
        certificate,
    })
}

pub fn certify_dist_irregular(s: &WeightedShift, x: &LogVector, depth: u32, space: &SpaceTag) -> Result<WitnessCertificate, WitnessError> {
    let horizon = irregular_horizon(depth)?;
    let view = ShiftOrbitView::new(s, x)?;
    let norms = view_norms(&view, horizon, space);
    let (lo_thr, hi_thr) = (1.0 / depth as f64, depth as f64);
    let a = IntegerSet::from_predicate(horizon, |i| norms[i as usize - 1] <= lo_thr);
    let b = IntegerSet::from_predicate(horizon, |i| norms[i as usize - 1] >= hi_thr);
    let bound = 1.0 - 2.0 / depth as f64;
    let mut claims = vec![
        Claim::at_least("A upper density (||T^i x|| <= 1/depth)", density_profile(&a, DEFAULT_TAIL_FRACTION)?.upper_est, bound),
        Claim::at_least("B upper density (||T^i x|| >= depth)", density_profile(&b, DEFAULT_TAIL_FRACTION)?.upper_est, bound),
        Claim::at_most("|A ∩ B|", a.intersection(&b).len() as f64, 0.0),
    ];
    // extremes over the last regime of each kind
    for (kind, parity) in [("decay", 0u32), ("growth", 1u32)] {
        let Some(k) = (0..depth).rev().find(|k| k % 2 == parity) else { continue };
        let (lo, hi) = (REGIME_GROWTH.pow(k), REGIME_GROWTH.pow(k + 1).min(horizon + 1));
        let window = lo..hi;
        if parity == 0 {
            let steps: Vec<f64> = a.elements().iter().filter(|i| window.contains(i)).map(|&i| norms[i as usize - 1]).collect();
            if !steps.is_empty() {
                let max = steps.iter().copied().fold(0.0, f64::max);
                claims.push(Claim::at_most(format!("final {kind} regime [{lo}, {hi}): max norm on A"), max, lo_thr));
            }
        } else {
            let steps: Vec<f64> = b.elements().iter().filter(|i| window.contains(i)).map(|&i| norms[i as usize - 1]).collect();
            if !steps.is_empty() {
                let min = steps.iter().copied().fold(f64::INFINITY, f64::min);
                claims.push(Claim::at_least(format!("final {kind} regime [{lo}, {hi}): min norm on B"), min, hi_thr));
            }
        }
    }
    debug_assert!(regime_of(horizon.saturating_sub(1).max(1)) < depth);
    Ok(WitnessCertificate::new(WitnessKind::DistIrregular, horizon, claims))
}

/// Bilateral shift with positive-side weights 2 and negative-side weights
/// making `P_i = w_{-i+1} ... w_0` equal to 1 on `A` and `ρ^{dist(i, A)}`
/// off it. Since `(T^i x)_{-i} = P_i x_0`, every orbit with `|x_0| >= 1`
/// stays outside the open unit ball at the times in `A`.
pub fn br_operator(design: DesignSet, rho: f64) -> OperatorSpec {
    OperatorSpec::Shift(WeightedShift::bilateral(WeightSeq::BrDesigned(BrWeights { a: design, rho, positive: 2.0 })))
}

pub fn build_br_shift(design: DesignSet, rho: f64, horizon: u64, sampling: BrSampling) -> Result<CertificateBundle, WitnessError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(WitnessError::InvalidInput("off-design decay must lie in (0,1)".into()));
    }
    if horizon == 0 || horizon > MAX_BR_HORIZON {
        return Err(WitnessError::HorizonTooLarge(horizon));
    }
    let op = br_operator(design.clone(), rho);
    op.validate()?;
    let certificate = certify_br(&op, &design, horizon, &sampling)?;
    Ok(CertificateBundle {
        schema: CERTIFICATE_SCHEMA,
        operator: op,
        space: SpaceTag::C0Bilateral,
        vector: None,
        params: WitnessParams::BrInequality { design, rho, horizon, sampling },
        certificate,
    })
}

/// Lower density of the design set: exact for residue classes, a
/// finite-horizon estimate otherwise.
pub fn design_density(design: &DesignSet, horizon: u64) -> Result<f64, WitnessError> {
    match design.residue_density() {
        Some(d) => Ok(d),
        None => {
            let set = IntegerSet::from_predicate(horizon, |i| design.contains(i));
            Ok(density_profile(&set, DEFAULT_TAIL_FRACTION)?.lower_est)
        }
    }
}

pub fn br_sampler(sampling: &BrSampling) -> Sampler {
    Sampler::Anchored {
        window: sampling.window,
        anchor_min: sampling.anchor_min,
        anchor_max: sampling.anchor_max,
        spread: sampling.spread,
    }
}

pub fn certify_br(op: &OperatorSpec, design: &DesignSet, horizon: u64, sampling: &BrSampling) -> Result<WitnessCertificate, WitnessError> {
    let space = SpaceTag::C0Bilateral;
    let sampler = br_sampler(sampling);
    let d = design_density(design, horizon)?;
    let a_times: Vec<u64> = (1..=horizon).filter(|&i| design.contains(i)).collect();
    // min over samples and i ∈ A of ||T^i x|| - |x_0|; samples with x_0 = 0
    // carry no bound
    let margins: Vec<Option<f64>> = (0..sampling.trials)
        .into_par_iter()
        .map(|t| -> Result<Option<f64>, WitnessError> {
            let x = sampler.initial_vector(sampling.seed, t).expect("anchored sampler");
            let x0 = x.get(0).norm();
            if x0 == 0.0 {
                return Ok(None);
            }
            let rec = orbit(op, &x, horizon as usize, &space, &[])?;
            if rec.overflowed() {
                return Err(WitnessError::InvalidInput(format!("orbit of sample {t} overflowed")));
            }
            Ok(Some(a_times.iter().map(|&i| rec.norms[i as usize - 1] - x0).fold(f64::INFINITY, f64::min)))
        })
        .collect::<Result<_, _>>()?;
    let checked = margins.iter().flatten().count();
    let worst = margins.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let est = estimate_c(op, &sampler, &[sampling.radius], horizon as usize, sampling.trials, &space, sampling.seed)?;
    let mut claims = Vec::new();
    if checked > 0 && worst.is_finite() {
        claims.push(Claim::at_least(
            format!("min over {checked} samples and i in A of ||T^i x|| - |x_0|"),
            worst,
            0.0,
        ));
    }
    claims.push(Claim::at_most(
        format!("c estimate at R = {}", sampling.radius),
        est.value,
        1.0 - d + 2.0 * DENSITY_SLACK,
    ));
    Ok(WitnessCertificate::new(WitnessKind::BrInequality, horizon, claims))
}

/// Outcome of re-deriving a certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    /// The recomputed certificate equals the stored one exactly.
    pub agrees: bool,
    pub recomputed: WitnessCertificate,
}

fn need_vector(b: &CertificateBundle) -> Result<&LogVector, WitnessError> {
    b.vector.as_ref().ok_or_else(|| WitnessError::InvalidInput("certificate carries no vector".into()))
}

/// Recomputes every claim of `bundle` from its operator, vector and
/// parameters.
pub fn verify_bundle(bundle: &CertificateBundle) -> Result<VerifyReport, WitnessError> {
    if bundle.schema != CERTIFICATE_SCHEMA {
        return Err(WitnessError::InvalidInput(format!("unsupported schema {}", bundle.schema)));
    }
    let recomputed = match &bundle.params {
        WitnessParams::Fhc { targets, schedule, eps } => {
            let s = unilateral_shift(&bundle.operator)?;
            let ys: Vec<SparseVector> = targets
                .iter()
                .map(|entries| {
                    TaggedVector { space: bundle.space.clone(), entries: entries.clone() }
                        .into_vector()
                        .map(|(v, _)| v)
                        .map_err(|e| WitnessError::InvalidInput(e.to_string()))
                })
                .collect::<Result<_, _>>()?;
            let sched = Schedule::from_spec(schedule.clone())?;
            certify_fhc(s, need_vector(bundle)?, &ys, &sched, *eps, &bundle.space)?
        }
        WitnessParams::DistNull { growth, depth } => {
            certify_dist_null(unilateral_shift(&bundle.operator)?, need_vector(bundle)?, *growth, *depth, &bundle.space)?
        }
        WitnessParams::DistIrregular { depth } => {
            certify_dist_irregular(unilateral_shift(&bundle.operator)?, need_vector(bundle)?, *depth, &bundle.space)?
        }
        WitnessParams::BrInequality { design, rho, horizon, sampling } => {
            let expect = br_operator(design.clone(), *rho);
            if expect != bundle.operator {
                return Err(WitnessError::InvalidInput("operator does not match the design parameters".into()));
            }
            certify_br(&bundle.operator, design, *horizon, sampling)?
        }
    };
    Ok(VerifyReport { agrees: recomputed == bundle.certificate, recomputed })
}
