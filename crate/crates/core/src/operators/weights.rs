use serde::{Deserialize, Serialize};

use super::OperatorError;

/// Index set driving the designed negative-side weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum DesignSet {
    /// `{n >= 1 : n mod modulus ∈ residues}`.
    #[serde(rename = "residues")]
    Residues { modulus: u64, residues: Vec<u64> },
    /// Explicit strictly increasing elements (all >= 1).
    #[serde(rename = "explicit")]
    Explicit { elements: Vec<u64> },
}

impl DesignSet {
    pub fn contains(&self, i: u64) -> bool {
        if i == 0 {
            return false;
        }
        match self {
            DesignSet::Residues { modulus, residues } => residues.contains(&(i % modulus)),
            DesignSet::Explicit { elements } => elements.binary_search(&i).is_ok(),
        }
    }

    /// Distance from `i` to the set, with 0 counted as an anchor so the
    /// distance is always finite.
    pub fn distance(&self, i: u64) -> u64 {
        if i == 0 || self.contains(i) {
            return 0;
        }
        match self {
            DesignSet::Residues { modulus, residues } => {
                let m = *modulus;
                let r = i % m;
                let mut best = i;
                for &res in residues {
                    let res = res % m;
                    let up = (res + m - r) % m;
                    let down = (r + m - res) % m;
                    best = best.min(up);
                    if down < i {
                        best = best.min(down);
                    }
                }
                best
            }
            DesignSet::Explicit { elements } => {
                let pos = elements.partition_point(|&e| e < i);
                let mut best = i;
                if pos < elements.len() {
                    best = best.min(elements[pos] - i);
                }
                if pos > 0 {
                    best = best.min(i - elements[pos - 1]);
                }
                best
            }
        }
    }

    /// Exact density of a residue class; `None` for explicit sets.
    pub fn residue_density(&self) -> Option<f64> {
        match self {
            DesignSet::Residues { modulus, residues } => {
                let mut r: Vec<u64> = residues.iter().map(|x| x % modulus).collect();
                r.sort_unstable();
                r.dedup();
                Some(r.len() as f64 / *modulus as f64)
            }
            DesignSet::Explicit { .. } => None,
        }
    }

    fn validate(&self) -> Result<(), OperatorError> {
        match self {
            DesignSet::Residues { modulus, residues } => {
                if *modulus == 0 || residues.is_empty() {
                    return Err(OperatorError::InvalidSpec("empty residue class".into()));
                }
            }
            DesignSet::Explicit { elements } => {
                if elements.first() == Some(&0) || !elements.windows(2).all(|w| w[0] < w[1]) {
                    return Err(OperatorError::InvalidSpec(
                        "explicit design set must be strictly increasing and >= 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Weights of the designed bilateral shift: positive side constant, negative
/// side arranged so the partial products `P_i = w_{-i+1} ... w_0` equal 1 on
/// the design set and `rho^{dist(i, A)}` off it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrWeights {
    pub a: DesignSet,
    pub rho: f64,
    pub positive: f64,
}

impl BrWeights {
    /// `P_i` for `i >= 0`.
    pub fn partial_product(&self, i: u64) -> f64 {
        if self.a.contains(i) || i == 0 {
            1.0
        } else {
            self.rho.powi(self.a.distance(i).min(i32::MAX as u64) as i32)
        }
    }

    fn weight(&self, k: i64) -> f64 {
        if k >= 1 {
            self.positive
        } else {
            let i = (-k) as u64;
            self.partial_product(i + 1) / self.partial_product(i)
        }
    }
}

/// Weight sequence `k -> w_k` of a backward shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum WeightSeq {
    #[serde(rename = "const")]
    Const { value: f64 },
    /// Explicit `[index, value]` pairs; every other index gets `default`.
    #[serde(rename = "table")]
    Table { default: f64, entries: Vec<(i64, f64)> },
    #[serde(rename = "br-designed")]
    BrDesigned(BrWeights),
}

impl WeightSeq {
    pub fn constant(value: f64) -> Self {
        WeightSeq::Const { value }
    }

    pub fn weight(&self, k: i64) -> f64 {
        match self {
            WeightSeq::Const { value } => *value,
            WeightSeq::Table { default, entries } => {
                match entries.binary_search_by_key(&k, |&(i, _)| i) {
                    Ok(pos) => entries[pos].1,
                    Err(_) => *default,
                }
            }
            WeightSeq::BrDesigned(br) => br.weight(k),
        }
    }

    /// Lower bound on the weights if one is known in closed form.
    pub fn infimum(&self) -> Option<f64> {
        match self {
            WeightSeq::Const { value } => Some(*value),
            WeightSeq::Table { default, entries } => {
                Some(entries.iter().map(|e| e.1).fold(*default, f64::min))
            }
            WeightSeq::BrDesigned(_) => None,
        }
    }

    pub(crate) fn validate(&self) -> Result<(), OperatorError> {
        let ok = |w: f64| w.is_finite() && w > 0.0;
        match self {
            WeightSeq::Const { value } => {
                if !ok(*value) {
                    return Err(OperatorError::InvalidWeight { index: 0, value: *value });
                }
            }
            WeightSeq::Table { default, entries } => {
                if !ok(*default) {
                    return Err(OperatorError::InvalidWeight { index: 0, value: *default });
                }
                if !entries.windows(2).all(|w| w[0].0 < w[1].0) {
                    return Err(OperatorError::InvalidSpec("table weights must be sorted by index".into()));
                }
                if let Some(&(index, value)) = entries.iter().find(|e| !ok(e.1)) {
                    return Err(OperatorError::InvalidWeight { index, value });
                }
            }
            WeightSeq::BrDesigned(br) => {
                br.a.validate()?;
                if !(br.rho > 0.0 && br.rho < 1.0) || !ok(br.positive) {
                    return Err(OperatorError::InvalidSpec("br weights need rho in (0,1) and positive > 0".into()));
                }
            }
        }
        Ok(())
    }

    /// Weights materialized over `[lo, hi]`, checked against `bound`.
    pub fn table(&self, lo: i64, hi: i64, bound: f64) -> Result<WeightTable, OperatorError> {
        let mut values = Vec::with_capacity((hi - lo + 1).max(0) as usize);
        for k in lo..=hi {
            let w = self.weight(k);
            if !(w.is_finite() && w > 0.0 && w <= bound) {
                return Err(OperatorError::InvalidWeight { index: k, value: w });
            }
            values.push(w);
        }
        Ok(WeightTable { lo, values })
    }
}

/// Read-only cache of weights over a contiguous index range.
#[derive(Debug, Clone)]
pub struct WeightTable {
    lo: i64,
    values: Vec<f64>,
}

impl WeightTable {
    #[inline]
    pub fn get(&self, k: i64) -> f64 {
        self.values[(k - self.lo) as usize]
    }

    pub fn range(&self) -> (i64, i64) {
        (self.lo, self.lo + self.values.len() as i64 - 1)
    }
}
