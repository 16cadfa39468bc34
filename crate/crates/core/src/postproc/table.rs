use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;
use crate::localdeco::{correlator_matrix, required_observables, LocalObservable};
use crate::qstate::{expectation, DensityMatrix};

/// Measured values ⟨A⊗A⟩ for A ∈ {P_α, X_αβ, Y_αβ}; may be partial while a
/// schedule is being executed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrelationTable {
    pub d: usize,
    pub p: BTreeMap<usize, f64>,
    pub x: BTreeMap<(usize, usize), f64>,
    pub y: BTreeMap<(usize, usize), f64>,
    pub shots_per_turn: Option<u64>,
}

impl CorrelationTable {
    pub fn new(d: usize) -> Self {
        CorrelationTable {
            d,
            ..Default::default()
        }
    }

    /// Exact table of a density matrix, computed by dense expectation values.
    pub fn exact(rho: &DensityMatrix) -> Result<Self> {
        let d = rho.d();
        let mut t = CorrelationTable::new(d);
        for obs in required_observables(d) {
            t.insert(obs, expectation(&correlator_matrix(obs, d)?, rho)?);
        }
        Ok(t)
    }

    pub fn insert(&mut self, obs: LocalObservable, value: f64) {
        match obs {
            LocalObservable::P(a) => self.p.insert(a, value),
            LocalObservable::X(a, b) => self.x.insert((a, b), value),
            LocalObservable::Y(a, b) => self.y.insert((a, b), value),
        };
    }

    pub fn get(&self, obs: LocalObservable) -> Option<f64> {
        match obs {
            LocalObservable::P(a) => self.p.get(&a),
            LocalObservable::X(a, b) => self.x.get(&(a, b)),
            LocalObservable::Y(a, b) => self.y.get(&(a, b)),
        }
        .copied()
    }

    /// Absorbs the entries of `other`; entries present in both take `other`'s value.
    pub fn merge(&mut self, other: &CorrelationTable) -> Result<()> {
        if other.d != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: other.d,
            });
        }
        self.p.extend(&other.p);
        self.x.extend(&other.x);
        self.y.extend(&other.y);
        Ok(())
    }

    /// Labels of the entries still absent, in `p[α]`, `x(α,β)`, `y(α,β)` form (1-based).
    pub fn missing(&self) -> Vec<String> {
        required_observables(self.d)
            .into_iter()
            .filter(|&o| self.get(o).is_none())
            .map(|o| match o {
                LocalObservable::P(a) => format!("p[{}]", a + 1),
                LocalObservable::X(a, b) => format!("x({},{})", a + 1, b + 1),
                LocalObservable::Y(a, b) => format!("y({},{})", a + 1, b + 1),
            })
            .collect()
    }

    pub fn ensure_complete(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidDimension(self.d));
        }
        let missing = self.missing();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingEntries(missing))
        }
    }

    pub fn to_file(&self) -> CorrelationTableFile {
        let key = |&(a, b): &(usize, usize)| format!("{},{}", a + 1, b + 1);
        CorrelationTableFile {
            d: self.d,
            p: (0..self.d).map(|a| self.p.get(&a).copied()).collect(),
            x: self.x.iter().map(|(k, v)| (key(k), *v)).collect(),
            y: self.y.iter().map(|(k, v)| (key(k), *v)).collect(),
            shots_per_turn: self.shots_per_turn,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        json::to_string(&self.to_file())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CorrelationTableFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.try_into()
    }
}

/// On-disk form `{ "d", "p": [..], "x": {"1,2": v}, "y": {..}, "shots_per_turn"? }`.
/// Absent projector entries are written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTableFile {
    pub d: usize,
    pub p: Vec<Option<f64>>,
    pub x: BTreeMap<String, f64>,
    pub y: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots_per_turn: Option<u64>,
}

fn parse_pair(key: &str, d: usize) -> Result<(usize, usize)> {
    let bad = || Error::Parse(format!("bad pair key `{key}`: expected \"i,j\" with 1 ≤ i < j ≤ {d}"));
    let (i, j) = key.split_once(',').ok_or_else(bad)?;
    let i: usize = i.trim().parse().map_err(|_| bad())?;
    let j: usize = j.trim().parse().map_err(|_| bad())?;
    if i == 0 || i >= j || j > d {
        return Err(bad());
    }
    Ok((i - 1, j - 1))
}

impl TryFrom<CorrelationTableFile> for CorrelationTable {
    type Error = Error;

    fn try_from(file: CorrelationTableFile) -> Result<Self> {
        let d = file.d;
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        if file.p.len() > d {
            return Err(Error::Parse(format!("p has {} entries for d = {d}", file.p.len())));
        }
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse(format!("non-finite value for {what}")))
            }
        };
        let mut t = CorrelationTable::new(d);
        t.shots_per_turn = file.shots_per_turn;
        for (a, v) in file.p.iter().enumerate() {
            if let Some(v) = v {
                t.p.insert(a, finite(*v, "p")?);
            }
        }
        for (k, v) in &file.x {
            t.x.insert(parse_pair(k, d)?, finite(*v, k)?);
        }
        for (k, v) in &file.y {
            t.y.insert(parse_pair(k, d)?, finite(*v, k)?);
        }
        Ok(t)
    }
}
