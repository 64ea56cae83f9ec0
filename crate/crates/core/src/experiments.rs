//! Named experiments, their configuration and the pass/fail report each
//! one produces.
//!
//! A run is a pure function of its resolved [`Params`]: artifacts and the
//! JSON summary are byte-identical across runs and worker counts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{estimate_c, Sampler};
use crate::measures::{
    convolve, dilate, invariance_defect, markov_tail_check, pushforward, summaries_csv, wasserstein1, ConvolutionMode,
    EmpiricalMeasure, W1Method, DEFAULT_WINDOW,
};
use crate::operators::{DesignSet, OperatorSpec, WeightedShift};
use crate::rotation::{escape_csv, escape_union_measure, fat_cantor, rotation_orbit_stats};
use crate::space::{SparseVector, SpaceTag};
use crate::steinhaus::{
    kronecker_deviation, kronecker_search, periodic_approximation, periodic_measure, rational_dependence,
    sample_steinhaus, EigenvectorData, DEPENDENCE_BOUND, DEPENDENCE_TOL, GOLDEN_FRACTION, SQRT2_MINUS_1, SQRT3_MINUS_1,
};
use crate::witnesses::{
    build_br_shift, build_dist_irregular_vector, build_dist_null_vector, build_fhc_vector, br_sampler, BrSampling,
    CertificateBundle, Claim, Schedule, MAX_BR_HORIZON, MAX_WITNESS_DEPTH, MAX_WITNESS_HORIZON,
};

pub const REPORT_SCHEMA: u32 = 1;
pub const DEFAULT_SEED: u64 = 2026;
pub const DEFAULT_OUTPUT: &str = "ergolin-out";
pub const MAX_TRIALS: usize = 4096;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Run(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn run_err(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Run(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    CErgodic,
    CBrBound,
    DistNull,
    DistIrregular,
    FhcVisits,
    NuNConvergence,
    Kronecker,
    RotationEscape,
    MeasureOpsSuite,
}

/// Which optional fields an experiment takes, with their defaults.
#[derive(Debug, Clone, Default)]
struct Defaults {
    horizon: Option<(u64, u64)>,
    trials: Option<usize>,
    radii: Option<Vec<f64>>,
    eps: Option<f64>,
    depth: Option<u32>,
    operator: bool,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::CErgodic,
        Experiment::CBrBound,
        Experiment::DistNull,
        Experiment::DistIrregular,
        Experiment::FhcVisits,
        Experiment::NuNConvergence,
        Experiment::Kronecker,
        Experiment::RotationEscape,
        Experiment::MeasureOpsSuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::CErgodic => "c-ergodic",
            Experiment::CBrBound => "c-br-bound",
            Experiment::DistNull => "dist-null",
            Experiment::DistIrregular => "dist-irregular",
            Experiment::FhcVisits => "fhc-visits",
            Experiment::NuNConvergence => "nu-n-convergence",
            Experiment::Kronecker => "kronecker",
            Experiment::RotationEscape => "rotation-escape",
            Experiment::MeasureOpsSuite => "measure-ops-suite",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    pub fn anchor(self) -> &'static str {
        match self {
            Experiment::CErgodic => "Theorem th4: \"then c(T)=1\"",
            Experiment::CBrBound => "Theorem th3 proof: \"c(T)\\leq 1-\\underline{\\rm dens} (A)<1\"",
            Experiment::DistNull => "Prop. distrib0: \"along some set $D_x$\"; Prop. FHCmeager",
            Experiment::DistIrregular => "Theorem th5 / §1.3: \"both having upper density 1\"",
            Experiment::FhcVisits => "§1.1: FHC definition, \"has positive lower density\"",
            Experiment::NuNConvergence => "Fact closure2: \"By the (multi-dimensional) Weyl equidistribution theorem\"",
            Experiment::Kronecker => "Fact factomega: \"apply Kronecker's theorem to find\"; Fact factind",
            Experiment::RotationEscape => "§1.2: \"nowhere dense compact subset\", \"$m(X)=0$\"",
            Experiment::MeasureOpsSuite => "§3 Claim claim0 (dilation), convolution; Fact Markov",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::CErgodic => "visit density of B_R for Steinhaus-series orbits of the weights-2 shift",
            Experiment::CBrBound => "designed bilateral shift: ||T^i x|| >= |x_0| on A and c estimate <= 1 - dens(A) + 0.02",
            Experiment::DistNull => "distributionally null witness and annulus obstruction",
            Experiment::DistIrregular => "distributionally irregular witness with alternating regimes",
            Experiment::FhcVisits => "two-target block witness on a residue schedule",
            Experiment::NuNConvergence => "W1 distance from the periodic approximations to a Steinhaus sample",
            Experiment::Kronecker => "minimal Kronecker return time and integer relations",
            Experiment::RotationEscape => "fat Cantor set, rotation visit frequency and escape-set growth",
            Experiment::MeasureOpsSuite => "exact identities of convolution, pushforward, dilation and W1",
        }
    }

    /// `(name, default, meaning)` for every tolerance the experiment checks.
    pub fn tolerances(self) -> &'static [(&'static str, f64, &'static str)] {
        match self {
            Experiment::CErgodic => &[
                ("min_c", 0.90, "lower bound on the c estimate"),
                ("max_decrease", 0.01, "allowed drop when the horizon is multiplied by 4"),
            ],
            Experiment::CBrBound => &[("max_c", 0.52, "upper bound on the c estimate")],
            Experiment::DistNull => &[
                ("min_null_density", 0.80, "upper density of small-norm steps"),
                ("max_annulus_density", 0.05, "lower density of annulus visits"),
            ],
            Experiment::DistIrregular => &[("min_density", 0.75, "upper density of both regimes")],
            Experiment::FhcVisits => &[("density_slack", 0.01, "allowed deviation from the declared densities")],
            Experiment::NuNConvergence => &[("max_final_w1", 0.05, "W1 bound at the largest N")],
            Experiment::Kronecker => &[],
            Experiment::RotationEscape => &[
                ("measure_tol", 1.0 / (1u64 << 20) as f64, "distance of the Cantor measure from its target"),
                ("max_discrepancy", 0.01, "visit-frequency discrepancy"),
                ("min_escape", 0.99, "escape-union measure at k = 200"),
            ],
            Experiment::MeasureOpsSuite => &[
                ("max_defect", 1e-10, "invariance defect of the periodic measure"),
                ("metric_tol", 1e-9, "slack in the W1 pseudometric axioms"),
            ],
        }
    }

    fn defaults(self) -> Defaults {
        let d = Defaults::default();
        match self {
            Experiment::CErgodic => Defaults {
                horizon: Some((100_000, 2_500_000)),
                trials: Some(16),
                radii: Some(vec![8.0]),
                operator: true,
                ..d
            },
            Experiment::CBrBound => Defaults {
                horizon: Some((100_000, MAX_BR_HORIZON)),
                trials: Some(32),
                radii: Some(vec![0.99]),
                ..d
            },
            Experiment::DistNull => Defaults { depth: Some(10), operator: true, ..d },
            Experiment::DistIrregular => Defaults { depth: Some(8), operator: true, ..d },
            Experiment::FhcVisits => Defaults {
                horizon: Some((100_000, MAX_WITNESS_HORIZON)),
                eps: Some(1e-6),
                operator: true,
                ..d
            },
            Experiment::NuNConvergence => d,
            Experiment::Kronecker => Defaults { horizon: Some((1_000_000, 100_000_000)), eps: Some(0.05), ..d },
            Experiment::RotationEscape => Defaults { horizon: Some((1_000_000, 100_000_000)), ..d },
            Experiment::MeasureOpsSuite => d,
        }
    }
}

/// One experiment configuration as read from a file or from flags; every
/// field is optional so the two layers can be merged.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    /// Path to a JSON operator spec replacing the default weighted shift.
    pub operator: Option<PathBuf>,
    pub horizon: Option<u64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub radii: Option<Vec<f64>>,
    pub output: Option<PathBuf>,
    pub eps: Option<f64>,
    pub depth: Option<u32>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ExperimentError> {
        toml::from_str(s).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.into(), source })?;
        Self::from_toml_str(&text)
    }

    /// Values set in `top` win; tolerance maps are merged key by key.
    pub fn overlay(self, top: ExperimentConfig) -> ExperimentConfig {
        let mut tolerances = self.tolerances;
        tolerances.extend(top.tolerances);
        ExperimentConfig {
            experiment: top.experiment.or(self.experiment),
            operator: top.operator.or(self.operator),
            horizon: top.horizon.or(self.horizon),
            trials: top.trials.or(self.trials),
            seed: top.seed.or(self.seed),
            radii: top.radii.or(self.radii),
            output: top.output.or(self.output),
            eps: top.eps.or(self.eps),
            depth: top.depth.or(self.depth),
            tolerances,
        }
    }

    /// Validates and fills defaults.
    pub fn resolve(&self) -> Result<Plan, ExperimentError> {
        let cfg_err = |m: String| ExperimentError::Config(m);
        let name = self.experiment.as_deref().ok_or_else(|| cfg_err("no experiment named".into()))?;
        let experiment = Experiment::parse(name).ok_or_else(|| cfg_err(format!("unknown experiment `{name}`")))?;
        let d = experiment.defaults();
        fn pick<T: Clone>(field: &str, given: &Option<T>, default: Option<T>, exp: Experiment) -> Result<Option<T>, ExperimentError> {
            match (given, default) {
                (Some(_), None) => Err(ExperimentError::Config(format!("`{field}` does not apply to {}", exp.name()))),
                (Some(v), Some(_)) => Ok(Some(v.clone())),
                (None, dflt) => Ok(dflt),
            }
        }
        let horizon = match (self.horizon, d.horizon) {
            (Some(_), None) => return Err(cfg_err(format!("`horizon` does not apply to {name}"))),
            (Some(h), Some((_, max))) if !(10..=max).contains(&h) => {
                return Err(cfg_err(format!("horizon must lie in [10, {max}], got {h}")))
            }
            (Some(h), Some(_)) => Some(h),
            (None, dflt) => dflt.map(|(h, _)| h),
        };
        let trials = pick("trials", &self.trials, d.trials, experiment)?;
        if let Some(t) = trials {
            if !(1..=MAX_TRIALS).contains(&t) {
                return Err(cfg_err(format!("trials must lie in [1, {MAX_TRIALS}], got {t}")));
            }
        }
        let radii = pick("radii", &self.radii, d.radii, experiment)?;
        if let Some(r) = &radii {
            if r.is_empty() || r.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(cfg_err("radii must be a nonempty list of positive reals".into()));
            }
        }
        let eps = pick("eps", &self.eps, d.eps, experiment)?;
        if let Some(e) = eps {
            if !(e.is_finite() && e > 0.0 && e < 1.0) {
                return Err(cfg_err(format!("eps must lie in (0, 1), got {e}")));
            }
        }
        let depth = pick("depth", &self.depth, d.depth, experiment)?;
        if let Some(k) = depth {
            if !(2..=MAX_WITNESS_DEPTH).contains(&k) {
                return Err(cfg_err(format!("depth must lie in [2, {MAX_WITNESS_DEPTH}], got {k}")));
            }
        }
        let operator = match (&self.operator, d.operator) {
            (Some(_), false) => return Err(cfg_err(format!("`operator` does not apply to {name}"))),
            (Some(path), true) => Some(load_shift(path)?),
            (None, _) => None,
        };
        let known = experiment.tolerances();
        let mut tolerances: BTreeMap<String, f64> = known.iter().map(|(k, v, _)| (k.to_string(), *v)).collect();
        for (k, v) in &self.tolerances {
            if !known.iter().any(|(n, _, _)| n == k) {
                return Err(cfg_err(format!("unknown tolerance `{k}` for {name}")));
            }
            if !(v.is_finite() && *v >= 0.0) {
                return Err(cfg_err(format!("tolerance `{k}` must be a finite nonnegative number")));
            }
            tolerances.insert(k.clone(), *v);
        }
        Ok(Plan {
            experiment,
            output: self.output.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)),
            params: Params {
                seed: self.seed.unwrap_or(DEFAULT_SEED),
                horizon,
                trials,
                radii,
                eps,
                depth,
                operator,
                tolerances,
            },
        })
    }
}

fn load_shift(path: &Path) -> Result<OperatorSpec, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.into(), source })?;
    let op: OperatorSpec = serde_json::from_str(&text)
        .map_err(|e| ExperimentError::Config(format!("operator file {}: {e}", path.display())))?;
    op.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
    match op.as_shift() {
        Some(s) if !s.bilateral => Ok(op),
        _ => Err(ExperimentError::Config("operator must be a unilateral weighted shift".into())),
    }
}

/// Fully resolved parameters; recorded verbatim in the summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSpec>,
    pub tolerances: BTreeMap<String, f64>,
}

impl Params {
    fn tol(&self, key: &str) -> f64 {
        self.tolerances[key]
    }

    fn shift_or(&self, w: f64) -> WeightedShift {
        self.operator
            .as_ref()
            .and_then(|op| op.as_shift().cloned())
            .unwrap_or_else(|| WeightedShift::constant(w))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub experiment: Experiment,
    pub output: PathBuf,
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn new(name: &str, contents: String) -> Self {
        Artifact { name: name.into(), contents }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub experiment: Experiment,
    pub anchor: String,
    pub params: Params,
    pub checks: Vec<Claim>,
    pub pass: bool,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Human-readable pass/fail table.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment  {}", self.experiment.name());
        let _ = writeln!(s, "anchor      {}", self.anchor);
        s.push_str(&render_claims(&self.checks));
        let _ = writeln!(s, "result      {}", if self.pass { "PASS" } else { "FAIL" });
        s
    }
}

pub fn render_claims(claims: &[Claim]) -> String {
    let mut s = String::new();
    for c in claims {
        let rel = match c.relation {
            crate::witnesses::Relation::AtMost => "<=",
            crate::witnesses::Relation::AtLeast => ">=",
        };
        let _ = writeln!(
            s,
            "  {}  {}: {:.6e} {rel} {:.6e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.label,
            c.measured,
            c.bound
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    pub artifacts: Vec<Artifact>,
}

impl RunOutput {
    /// Writes `summary.json` and every artifact under `dir/<experiment>/`.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf, ExperimentError> {
        let dir = dir.join(self.report.experiment.name());
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ExperimentError::Io { path, source }
        };
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        for a in &self.artifacts {
            let p = dir.join(&a.name);
            std::fs::write(&p, &a.contents).map_err(io(&p))?;
        }
        let p = dir.join("summary.json");
        std::fs::write(&p, self.report.to_json()).map_err(io(&p))?;
        Ok(dir)
    }
}

pub fn run(plan: &Plan) -> Result<RunOutput, ExperimentError> {
    let p = &plan.params;
    let (checks, artifacts) = match plan.experiment {
        Experiment::CErgodic => c_ergodic(p)?,
        Experiment::CBrBound => c_br_bound(p)?,
        Experiment::DistNull => dist_null(p)?,
        Experiment::DistIrregular => dist_irregular(p)?,
        Experiment::FhcVisits => fhc_visits(p)?,
        Experiment::NuNConvergence => nu_n_convergence(p)?,
        Experiment::Kronecker => kronecker(p)?,
        Experiment::RotationEscape => rotation_escape(p)?,
        Experiment::MeasureOpsSuite => measure_ops_suite(p)?,
    };
    let pass = checks.iter().all(|c| c.pass);
    Ok(RunOutput {
        report: RunReport {
            schema: REPORT_SCHEMA,
            experiment: plan.experiment,
            anchor: plan.experiment.anchor().into(),
            params: p.clone(),
            checks,
            pass,
            artifacts: artifacts.iter().map(|a| a.name.clone()).collect(),
        },
        artifacts,
    })
}

type Outcome = Result<(Vec<Claim>, Vec<Artifact>), ExperimentError>;

/// Fractional parts of `sqrt(k)` for eight squarefree `k`.
pub fn ergodic_angles() -> Vec<f64> {
    [2u32, 3, 5, 6, 7, 10, 11, 13].iter().map(|&k| (k as f64).sqrt().fract()).collect()
}

pub const ERGODIC_SPACE: SpaceTag = SpaceTag::LpUnilateral { p: 2.0 };
pub const LONG_HORIZON_FACTOR: u64 = 4;

fn c_ergodic(p: &Params) -> Outcome {
    let op = OperatorSpec::Shift(p.shift_or(2.0));
    let sampler = Sampler::SteinhausSeries { angles: ergodic_angles() };
    let (h, trials, radii) = (p.horizon.unwrap(), p.trials.unwrap(), p.radii.as_deref().unwrap());
    let short = estimate_c(&op, &sampler, radii, h as usize, trials, &ERGODIC_SPACE, p.seed).map_err(run_err)?;
    let long_h = h * LONG_HORIZON_FACTOR;
    let long = estimate_c(&op, &sampler, radii, long_h as usize, trials, &ERGODIC_SPACE, p.seed).map_err(run_err)?;
    let checks = vec![
        Claim::at_least(format!("c estimate at horizon {h}"), short.value, p.tol("min_c")),
        Claim::at_most(
            format!("decrease from horizon {h} to {long_h}"),
            short.value - long.value,
            p.tol("max_decrease"),
        ),
    ];
    Ok((checks, vec![Artifact::new("c_estimate.csv", short.to_csv()), Artifact::new("c_estimate_long.csv", long.to_csv())]))
}

fn bundle_json(b: &CertificateBundle) -> String {
    serde_json::to_string(b).expect("certificate serializes") + "\n"
}

fn c_br_bound(p: &Params) -> Outcome {
    let design = DesignSet::Residues { modulus: 2, residues: vec![1] };
    let sampling = BrSampling {
        trials: p.trials.unwrap(),
        seed: p.seed,
        radius: p.radii.as_ref().unwrap()[0],
        ..BrSampling::default()
    };
    let h = p.horizon.unwrap();
    let bundle = build_br_shift(design, 0.5, h, sampling.clone()).map_err(run_err)?;
    let radii = p.radii.as_deref().unwrap();
    let est = estimate_c(&bundle.operator, &br_sampler(&sampling), radii, h as usize, sampling.trials, &SpaceTag::C0Bilateral, p.seed)
        .map_err(run_err)?;
    let mut checks = bundle.certificate.claims.clone();
    checks.push(Claim::at_most(format!("c estimate over radii {radii:?}"), est.value, p.tol("max_c")));
    Ok((checks, vec![Artifact::new("certificate.json", bundle_json(&bundle)), Artifact::new("c_estimate.csv", est.to_csv())]))
}

fn dist_null(p: &Params) -> Outcome {
    let s = p.shift_or(2.0);
    let b = build_dist_null_vector(&s, 4, p.depth.unwrap(), &SpaceTag::C0Unilateral).map_err(run_err)?;
    let c = &b.certificate.claims;
    let checks = vec![
        c[0].clone(),
        Claim::at_least(c[1].label.clone(), c[1].measured, p.tol("min_null_density")),
        Claim::at_most(c[2].label.clone(), c[2].measured, p.tol("max_annulus_density")),
    ];
    Ok((checks, vec![Artifact::new("certificate.json", bundle_json(&b))]))
}

fn dist_irregular(p: &Params) -> Outcome {
    let s = p.shift_or(2.0);
    let b = build_dist_irregular_vector(&s, p.depth.unwrap(), &SpaceTag::C0Unilateral).map_err(run_err)?;
    let min = p.tol("min_density");
    let checks = b
        .certificate
        .claims
        .iter()
        .map(|c| {
            if c.label.contains("upper density") {
                Claim::at_least(c.label.clone(), c.measured, min)
            } else {
                c.clone()
            }
        })
        .collect();
    Ok((checks, vec![Artifact::new("certificate.json", bundle_json(&b))]))
}

/// Targets `e_0` and `e_0 + e_1` on `n ≡ 2, 3 (mod 4)` and `n ≡ 0 (mod 4)`.
pub fn fhc_setup(horizon: u64) -> Result<(Vec<SparseVector>, Schedule), ExperimentError> {
    let targets = vec![SparseVector::basis(0), SparseVector::from_real([(0, 1.0), (1, 1.0)])];
    let schedule = Schedule::from_residues(4, vec![vec![2, 3], vec![0]], 1, horizon).map_err(run_err)?;
    Ok((targets, schedule))
}

pub const FHC_WEIGHT: f64 = 16_777_216.0;

fn fhc_visits(p: &Params) -> Outcome {
    let s = p.shift_or(FHC_WEIGHT);
    let (targets, schedule) = fhc_setup(p.horizon.unwrap())?;
    let b = build_fhc_vector(&s, &targets, &schedule, p.eps.unwrap(), &SpaceTag::C0Unilateral).map_err(run_err)?;
    let slack = p.tol("density_slack");
    let checks = b
        .certificate
        .claims
        .iter()
        .map(|c| {
            if c.label.contains("deviation") {
                Claim::at_most(c.label.clone(), c.measured, slack)
            } else if c.label.contains("lower density") {
                Claim::at_least(c.label.clone(), c.measured, c.bound + crate::witnesses::DENSITY_SLACK - slack)
            } else {
                c.clone()
            }
        })
        .collect();
    Ok((checks, vec![Artifact::new("certificate.json", bundle_json(&b))]))
}

pub const NU_NS: [usize; 3] = [10, 50, 200];
pub const NU_SAMPLE: usize = 800;

/// `W1(ν_N, Steinhaus sample)` for the rotation by a quarter turn with free
/// angle `√2 − 1`, one value per `N`.
pub fn nu_n_distances(ns: &[usize], sample: usize, seed: u64) -> Result<Vec<f64>, ExperimentError> {
    let op = OperatorSpec::blocks(vec![0.25]);
    let space = op.default_space();
    let window = DEFAULT_WINDOW.clamp_to(&space);
    let u = EigenvectorData::block(&op, 0).map_err(run_err)?;
    let reference = sample_steinhaus(std::slice::from_ref(&u), sample, seed, &space, window).map_err(run_err)?;
    ns.iter()
        .map(|&n| {
            let nu = periodic_approximation(&op, std::slice::from_ref(&u), &[SQRT2_MINUS_1], 4, n, &space, window)
                .map_err(run_err)?;
            Ok(wasserstein1(&nu, &reference, window, W1Method::Exact).map_err(run_err)?.value)
        })
        .collect()
}

fn nu_n_convergence(p: &Params) -> Outcome {
    let d = nu_n_distances(&NU_NS, NU_SAMPLE, p.seed)?;
    let mut checks: Vec<Claim> = d
        .windows(2)
        .zip(NU_NS.windows(2))
        .map(|(w, n)| Claim::at_most(format!("W1 at N={} minus W1 at N={}", n[1], n[0]), w[1] - w[0], 0.0))
        .collect();
    checks.push(Claim::at_most(format!("W1 at N={}", NU_NS[2]), d[2], p.tol("max_final_w1")));
    let mut csv = String::from("n,atoms,w1\n");
    for (n, w) in NU_NS.iter().zip(&d) {
        let _ = writeln!(csv, "{n},{},{w}", n * 4);
    }
    Ok((checks, vec![Artifact::new("w1.csv", csv)]))
}

/// The three integer-relation cases: `(1/2)`, `(θ, 1 − θ)` and
/// `(√2 − 1, √3 − 1)`.
pub fn dependence_cases() -> Vec<(&'static str, Vec<f64>, bool)> {
    vec![
        ("half", vec![0.5], true),
        ("complementary", vec![SQRT2_MINUS_1, 1.0 - SQRT2_MINUS_1], true),
        ("quadratic-pair", vec![SQRT2_MINUS_1, SQRT3_MINUS_1], false),
    ]
}

fn kronecker(p: &Params) -> Outcome {
    let eps = p.eps.unwrap();
    let one = [Complex64::new(1.0, 0.0)];
    let hit = kronecker_search(&[GOLDEN_FRACTION], &one, eps, p.horizon.unwrap()).map_err(run_err)?;
    let earlier = (1..hit.n).map(|n| kronecker_deviation(&[GOLDEN_FRACTION], &one, n)).fold(f64::INFINITY, f64::min);
    let mut checks = vec![
        Claim::at_most(format!("deviation at n = {}", hit.n), hit.max_deviation, eps),
        Claim::at_least("smallest deviation before n", earlier, eps),
    ];
    let mut csv = String::from("case,angles,relation\n");
    for (label, angles, planted) in dependence_cases() {
        let rel = rational_dependence(&angles, DEPENDENCE_BOUND, DEPENDENCE_TOL).map_err(run_err)?;
        let found = rel.is_some() as u8 as f64;
        checks.push(if planted {
            Claim::at_least(format!("relation found for {label}"), found, 1.0)
        } else {
            Claim::at_most(format!("relation found for {label}"), found, 0.0)
        });
        let rel_s = rel.map_or("none".to_string(), |m| m.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "));
        let ang_s = angles.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(csv, "{label},{ang_s},{rel_s}");
    }
    Ok((checks, vec![Artifact::new("hit.json", hit.to_json() + "\n"), Artifact::new("dependence.csv", csv)]))
}

pub const ESCAPE_DEPTH: u32 = 12;
pub const ESCAPE_STEPS: u64 = 200;

fn rotation_escape(p: &Params) -> Outcome {
    let c = fat_cantor(0.5, 20).map_err(run_err)?;
    let removed = compensated_sum(c.removed_intervals().map(|(_, len)| len));
    let n = p.horizon.unwrap();
    let stats = rotation_orbit_stats(SQRT2_MINUS_1, 0.0, &c, n).map_err(run_err)?;
    let small = fat_cantor(0.5, ESCAPE_DEPTH).map_err(run_err)?.as_interval_set();
    let esc = escape_union_measure(SQRT2_MINUS_1, &small, ESCAPE_STEPS).map_err(run_err)?;
    let drops = esc.windows(2).filter(|w| w[1] < w[0]).count();
    let checks = vec![
        Claim::at_most("|m(C) - 0.5|", (c.lebesgue_measure - 0.5).abs(), p.tol("measure_tol")),
        Claim::at_most("|1 - sum of removed lengths - m(C)|", (1.0 - removed - c.lebesgue_measure).abs(), 1e-15),
        Claim::at_most(format!("visit discrepancy at N = {n}"), stats.discrepancy, p.tol("max_discrepancy")),
        Claim::at_most("decreasing steps of the escape union", drops as f64, 0.0),
        Claim::at_least(format!("escape union at k = {ESCAPE_STEPS}"), *esc.last().unwrap(), p.tol("min_escape")),
    ];
    let stats_json = serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n";
    Ok((checks, vec![Artifact::new("escape.csv", escape_csv(&esc)), Artifact::new("orbit.json", stats_json)]))
}

/// Kahan summation.
fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let y = x - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn random_cloud(n: usize, seed: u64, space: SpaceTag) -> Result<EmpiricalMeasure, ExperimentError> {
    use rand::Rng;
    let mut rng = crate::seed::rng_for(seed, 0);
    let atoms = (0..n)
        .map(|_| SparseVector::from_entries((0..4).map(|k| (k, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))))
        .collect();
    EmpiricalMeasure::uniform(atoms, space, DEFAULT_WINDOW.clamp_to(&space)).map_err(run_err)
}

fn measure_ops_suite(p: &Params) -> Outcome {
    let space = SpaceTag::C0Unilateral;
    let window = DEFAULT_WINDOW.clamp_to(&space);
    let shift = OperatorSpec::Shift(WeightedShift::constant(2.0));
    let blocks = OperatorSpec::blocks(vec![0.25, 0.5, 1.0 / 3.0]);
    let mu = random_cloud(12, crate::seed::derive_seed(p.seed, 1), space)?;
    let nu = random_cloud(9, crate::seed::derive_seed(p.seed, 2), space)?;
    let rho = random_cloud(15, crate::seed::derive_seed(p.seed, 3), space)?;
    let delta0 = EmpiricalMeasure::dirac(SparseVector::zero(), space, window).map_err(run_err)?;
    let mut checks = Vec::new();
    let flag = |b: bool| b as u8 as f64;

    let conv0 = convolve(&mu, &delta0, ConvolutionMode::FullProduct).map_err(run_err)?;
    checks.push(Claim::at_least("mu * delta_0 equals mu", flag(conv0.same_multiset(&mu)), 1.0));

    let lhs = pushforward(&shift, &convolve(&mu, &nu, ConvolutionMode::FullProduct).map_err(run_err)?).map_err(run_err)?;
    let rhs = convolve(&pushforward(&shift, &mu).map_err(run_err)?, &pushforward(&shift, &nu).map_err(run_err)?, ConvolutionMode::FullProduct)
        .map_err(run_err)?;
    checks.push(Claim::at_least("T(mu * nu) equals T mu * T nu", flag(lhs.same_multiset(&rhs)), 1.0));

    let a = SparseVector::from_entries([(0, Complex64::new(0.7, 0.1)), (1, Complex64::new(-0.3, 0.0)), (2, Complex64::new(0.0, 0.5))]);
    let per = periodic_measure(&blocks, &a, 12, &space, window).map_err(run_err)?;
    let defect = invariance_defect(&blocks, &per, window, W1Method::Exact).map_err(run_err)?.value;
    checks.push(Claim::at_most("invariance defect of the period-12 measure", defect, p.tol("max_defect")));

    let twice = dilate(&dilate(&mu, 0.5).map_err(run_err)?, 3.0).map_err(run_err)?;
    let once = dilate(&mu, 1.5).map_err(run_err)?;
    checks.push(Claim::at_most(
        "max |(mu^0.5)^3 - mu^1.5| over atoms",
        max_abs_diff(&twice.projections(window).concat(), &once.projections(window).concat()),
        0.0,
    ));

    let u = EigenvectorData::block(&blocks, 0).map_err(run_err)?;
    let v = EigenvectorData::block(&blocks, 2).map_err(run_err)?;
    let stein = sample_steinhaus(&[u, v], 64, p.seed, &space, window).map_err(run_err)?;
    let corpus: Vec<(String, &EmpiricalMeasure)> = vec![
        ("mu".into(), &mu),
        ("nu".into(), &nu),
        ("rho".into(), &rho),
        ("delta_0".into(), &delta0),
        ("mu*nu".into(), &lhs),
        ("periodic".into(), &per),
        ("dilated".into(), &twice),
        ("steinhaus".into(), &stein),
    ];
    let mut worst_markov = f64::NEG_INFINITY;
    for (_, m) in &corpus {
        for pw in [1.0, 2.0] {
            for alpha in [0.5, 1.0, 2.0] {
                let r = markov_tail_check(m, pw, alpha).map_err(run_err)?;
                worst_markov = worst_markov.max(r.lhs - r.rhs);
            }
        }
    }
    checks.push(Claim::at_most("max over corpus of tail mass minus Markov bound", worst_markov, 1e-12));

    let w = |x: &EmpiricalMeasure, y: &EmpiricalMeasure| -> Result<f64, ExperimentError> {
        Ok(wasserstein1(x, y, window, W1Method::Exact).map_err(run_err)?.value)
    };
    let (d_mn, d_nm, d_nr, d_mr) = (w(&mu, &nu)?, w(&nu, &mu)?, w(&nu, &rho)?, w(&mu, &rho)?);
    let tol = p.tol("metric_tol");
    checks.push(Claim::at_most("W1(mu, mu)", w(&mu, &mu)?, tol));
    checks.push(Claim::at_most("|W1(mu, nu) - W1(nu, mu)|", (d_mn - d_nm).abs(), tol));
    checks.push(Claim::at_most("W1(mu, rho) - W1(mu, nu) - W1(nu, rho)", d_mr - d_mn - d_nr, tol));

    let rows: Vec<(String, _, Option<f64>)> = corpus
        .iter()
        .map(|(label, m)| (label.clone(), m.summary(), (label == "periodic").then_some(defect)))
        .collect();
    Ok((checks, vec![Artifact::new("summaries.csv", summaries_csv(&rows))]))
}

/// Catalog entry as printed by `list`.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub anchor: &'static str,
    pub description: &'static str,
    pub tolerances: BTreeMap<&'static str, f64>,
}

pub fn catalog() -> Vec<CatalogEntry> {
    Experiment::ALL
        .iter()
        .map(|e| CatalogEntry {
            name: e.name(),
            anchor: e.anchor(),
            description: e.description(),
            tolerances: e.tolerances().iter().map(|(k, v, _)| (*k, *v)).collect(),
        })
        .collect()
}

pub fn catalog_json() -> String {
    #[derive(Serialize)]
    struct Catalog {
        schema: u32,
        experiments: Vec<CatalogEntry>,
    }
    serde_json::to_string_pretty(&Catalog { schema: REPORT_SCHEMA, experiments: catalog() }).expect("catalog serializes")
        + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(name: &str) -> ExperimentConfig {
        ExperimentConfig { experiment: Some(name.into()), ..Default::default() }
    }

    #[test]
    fn catalog_has_nine_entries_in_fixed_order() {
        let names: Vec<&str> = catalog().iter().map(|e| e.name).collect();
        assert_eq!(names.len(), 9);
        assert_eq!(names[0], "c-ergodic");
        assert_eq!(names[8], "measure-ops-suite");
        assert!(catalog().iter().all(|e| !e.anchor.is_empty()));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("experiment = \"kronecker\"\nbogus = 1\n").is_err());
        let c = ExperimentConfig::from_toml_str("experiment = \"kronecker\"\n[tolerances]\nnope = 1.0\n").unwrap();
        assert!(matches!(c.resolve(), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn validation_errors() {
        let mut c = cfg("c-br-bound");
        c.trials = Some(0);
        assert!(c.resolve().is_err());
        let mut c = cfg("kronecker");
        c.trials = Some(3);
        assert!(c.resolve().is_err(), "trials do not apply");
        let mut c = cfg("c-ergodic");
        c.radii = Some(vec![1.0, -1.0]);
        assert!(c.resolve().is_err());
        assert!(cfg("no-such").resolve().is_err());
        assert!(ExperimentConfig::default().resolve().is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let file = ExperimentConfig::from_toml_str("experiment = \"kronecker\"\nseed = 5\neps = 0.1\n[tolerances]\n").unwrap();
        let flags = ExperimentConfig { eps: Some(0.2), ..Default::default() };
        let plan = file.overlay(flags).resolve().unwrap();
        assert_eq!(plan.params.seed, 5);
        assert_eq!(plan.params.eps, Some(0.2));
        assert_eq!(plan.params.horizon, Some(1_000_000));
    }

    #[test]
    fn kronecker_experiment_finds_89() {
        let out = run(&cfg("kronecker").resolve().unwrap()).unwrap();
        assert!(out.report.pass, "{}", out.report.render());
        assert!(out.artifacts[0].contents.starts_with("{\"n\":89,"));
        assert!(out.artifacts[1].contents.contains("half,0.5,2\n"));
        assert!(out.artifacts[1].contents.contains("complementary,") && out.artifacts[1].contents.ends_with("none\n"));
    }

    #[test]
    fn measure_suite_passes_and_is_deterministic() {
        let plan = cfg("measure-ops-suite").resolve().unwrap();
        let a = run(&plan).unwrap();
        assert!(a.report.pass, "{}", a.report.render());
        assert_eq!(a, run(&plan).unwrap());
    }

    #[test]
    fn failing_tolerance_flips_the_result() {
        let mut c = cfg("dist-null");
        c.depth = Some(3);
        c.tolerances.insert("min_null_density".into(), 0.999);
        let out = run(&c.resolve().unwrap()).unwrap();
        assert!(!out.report.pass);
        assert_eq!(out.report.checks.iter().filter(|c| !c.pass).count(), 1);
    }
}
