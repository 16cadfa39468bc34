//! Local observables P_α, X_αβ, Y_αβ, the d²-term local decompositions of F
//! and G, and the measurement schedule that groups commuting observables
//! into as few experimental turns as possible.
//!
//! Channel indices are 0-based in memory and 1-based in every serialized
//! form.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;
use crate::linalg::{ComplexMatrix, I, ONE};
use crate::qstate::WitnessKind;

/// A single-site observable. Pair indices satisfy α < β.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LocalObservable {
    P(usize),
    X(usize, usize),
    Y(usize, usize),
}

impl LocalObservable {
    pub fn projector(alpha: usize) -> Self {
        LocalObservable::P(alpha)
    }

    /// X on the unordered pair {α, β}, stored in canonical order.
    pub fn x(alpha: usize, beta: usize) -> Result<Self> {
        let (a, b) = canonical_pair(alpha, beta)?;
        Ok(LocalObservable::X(a, b))
    }

    /// Y on the pair, stored in canonical order. Y_βα = −Y_αβ, so the sign of
    /// a reversed request is dropped; Y⊗Y does not depend on it.
    pub fn y(alpha: usize, beta: usize) -> Result<Self> {
        let (a, b) = canonical_pair(alpha, beta)?;
        Ok(LocalObservable::Y(a, b))
    }

    /// Channels the observable acts on.
    pub fn support(&self) -> Vec<usize> {
        match *self {
            LocalObservable::P(a) => vec![a],
            LocalObservable::X(a, b) | LocalObservable::Y(a, b) => vec![a, b],
        }
    }

    pub fn is_edge(&self) -> bool {
        !matches!(self, LocalObservable::P(_))
    }

    fn max_index(&self) -> usize {
        self.support().into_iter().max().unwrap_or(0)
    }

    fn check(&self, d: usize) -> Result<()> {
        match *self {
            LocalObservable::X(a, b) | LocalObservable::Y(a, b) if a >= b => Err(
                Error::InvalidObservable(format!("{self}: pair indices must satisfy α < β")),
            ),
            _ if self.max_index() >= d => Err(Error::InvalidObservable(format!(
                "{self}: channel index exceeds d = {d}"
            ))),
            _ => Ok(()),
        }
    }
}

fn canonical_pair(alpha: usize, beta: usize) -> Result<(usize, usize)> {
    if alpha == beta {
        return Err(Error::InvalidObservable(format!(
            "pair observable needs distinct channels, got ({}, {})",
            alpha + 1,
            beta + 1
        )));
    }
    Ok((alpha.min(beta), alpha.max(beta)))
}

impl fmt::Display for LocalObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LocalObservable::P(a) => write!(f, "P({})", a + 1),
            LocalObservable::X(a, b) => write!(f, "X({},{})", a + 1, b + 1),
            LocalObservable::Y(a, b) => write!(f, "Y({},{})", a + 1, b + 1),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ObservableRecord {
    tag: String,
    i: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    j: Option<usize>,
}

impl Serialize for LocalObservable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rec = match *self {
            LocalObservable::P(a) => ObservableRecord { tag: "P".into(), i: a + 1, j: None },
            LocalObservable::X(a, b) => ObservableRecord { tag: "X".into(), i: a + 1, j: Some(b + 1) },
            LocalObservable::Y(a, b) => ObservableRecord { tag: "Y".into(), i: a + 1, j: Some(b + 1) },
        };
        rec.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LocalObservable {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rec = ObservableRecord::deserialize(de)?;
        if rec.i == 0 || rec.j == Some(0) {
            return Err(D::Error::custom("channel indices are 1-based"));
        }
        let pair = |j: Option<usize>| {
            j.map(|j| (rec.i - 1, j - 1))
                .ok_or_else(|| D::Error::custom(format!("{} observable needs field `j`", rec.tag)))
        };
        // Reversed or repeated pair indices are kept as given so that
        // schedule validation can report them.
        match rec.tag.as_str() {
            "P" => Ok(LocalObservable::P(rec.i - 1)),
            "X" => pair(rec.j).map(|(a, b)| LocalObservable::X(a, b)),
            "Y" => pair(rec.j).map(|(a, b)| LocalObservable::Y(a, b)),
            other => Err(D::Error::custom(format!("unknown observable tag `{other}`"))),
        }
    }
}

/// The d×d Hermitian matrix of an observable.
pub fn observable_matrix(obs: LocalObservable, d: usize) -> Result<ComplexMatrix> {
    obs.check(d)?;
    let mut m = ComplexMatrix::zeros(d, d);
    match obs {
        LocalObservable::P(a) => m[(a, a)] = ONE,
        LocalObservable::X(a, b) => {
            m[(a, b)] = ONE;
            m[(b, a)] = ONE;
        }
        LocalObservable::Y(a, b) => {
            m[(a, b)] = I;
            m[(b, a)] = -I;
        }
    }
    Ok(m)
}

/// The bipartite observable obs ⊗ obs.
pub fn correlator_matrix(obs: LocalObservable, d: usize) -> Result<ComplexMatrix> {
    let m = observable_matrix(obs, d)?;
    Ok(m.kronecker(&m))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionTerm {
    pub coefficient: f64,
    pub observable: LocalObservable,
}

/// F (or G) = Σ coefficient · obs ⊗ obs with the ordered-pair double sum
/// folded onto α < β: weight 1 for P, 1/2 for X, ±1/2 for Y.
pub fn decomposition_terms(kind: WitnessKind, d: usize) -> Result<Vec<DecompositionTerm>> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let y_weight = match kind {
        WitnessKind::Werner => 0.5,
        WitnessKind::Isotropic => -0.5,
    };
    let mut terms: Vec<DecompositionTerm> = (0..d)
        .map(|a| DecompositionTerm { coefficient: 1.0, observable: LocalObservable::P(a) })
        .collect();
    for a in 0..d {
        for b in a + 1..d {
            terms.push(DecompositionTerm { coefficient: 0.5, observable: LocalObservable::X(a, b) });
            terms.push(DecompositionTerm { coefficient: y_weight, observable: LocalObservable::Y(a, b) });
        }
    }
    Ok(terms)
}

/// Observables commute (and so do their squares obs⊗obs) iff their index
/// sets are disjoint, or they are the same observable.
pub fn commutes(a: LocalObservable, b: LocalObservable) -> bool {
    if a == b {
        return true;
    }
    let sa = a.support();
    b.support().iter().all(|i| !sa.contains(i))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnColor {
    /// X pairs, possibly with projectors.
    Red,
    /// Y pairs, possibly with projectors.
    Blue,
    /// Projectors only.
    Green,
    Mixed,
}

impl TurnColor {
    pub fn of(observables: &[LocalObservable]) -> Self {
        let has_x = observables.iter().any(|o| matches!(o, LocalObservable::X(..)));
        let has_y = observables.iter().any(|o| matches!(o, LocalObservable::Y(..)));
        let has_p = observables.iter().any(|o| matches!(o, LocalObservable::P(_)));
        match (has_x, has_y, has_p) {
            (true, false, _) => TurnColor::Red,
            (false, true, _) => TurnColor::Blue,
            (false, false, true) => TurnColor::Green,
            _ => TurnColor::Mixed,
        }
    }
}

/// One experimental setting: observables measured simultaneously.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub color: TurnColor,
    pub observables: Vec<LocalObservable>,
}

impl Turn {
    pub fn new(mut observables: Vec<LocalObservable>) -> Self {
        observables.sort();
        Turn { color: TurnColor::of(&observables), observables }
    }

    /// Rejects turns whose observables overlap or fall outside 0..d.
    pub fn check(&self, d: usize) -> Result<()> {
        for o in &self.observables {
            o.check(d)?;
        }
        for (i, a) in self.observables.iter().enumerate() {
            for b in &self.observables[i + 1..] {
                if a == b || !commutes(*a, *b) {
                    return Err(Error::InvalidSchedule(format!("{a} and {b} share a channel")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSchedule {
    pub d: usize,
    pub turns: Vec<Turn>,
}

impl MeasurementSchedule {
    pub fn to_json(&self) -> Result<String> {
        json::to_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Pairs {a, b} ⊂ 0..n with a + b ≡ 2t (mod n), n odd; t itself is left unmatched.
fn circle_matching(n: usize, t: usize) -> Vec<(usize, usize)> {
    let target = (2 * t) % n;
    (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|&(a, b)| (a + b) % n == target)
        .collect()
}

/// Round-robin schedule: 2d turns for odd d, 2d − 1 for even d.
pub fn schedule(d: usize) -> Result<MeasurementSchedule> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let mut turns = Vec::with_capacity(2 * d);
    if d % 2 == 1 {
        for t in 0..d {
            let mut obs: Vec<LocalObservable> = circle_matching(d, t)
                .into_iter()
                .map(|(a, b)| LocalObservable::X(a, b))
                .collect();
            obs.push(LocalObservable::P(t));
            turns.push(Turn::new(obs));
        }
        for t in 0..d {
            let obs = circle_matching(d, t)
                .into_iter()
                .map(|(a, b)| LocalObservable::Y(a, b))
                .collect();
            turns.push(Turn::new(obs));
        }
    } else {
        let n = d - 1;
        let center = d - 1;
        let edges = |t: usize| {
            let mut e = circle_matching(n, t);
            e.push((t, center));
            e
        };
        for t in 0..n {
            turns.push(Turn::new(edges(t).into_iter().map(|(a, b)| LocalObservable::X(a, b)).collect()));
        }
        for t in 0..n {
            turns.push(Turn::new(edges(t).into_iter().map(|(a, b)| LocalObservable::Y(a, b)).collect()));
        }
        turns.push(Turn::new((0..d).map(LocalObservable::P).collect()));
    }
    Ok(MeasurementSchedule { d, turns })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Observable indices out of range or pair not in canonical order.
    InvalidObservable { turn: usize, observable: LocalObservable, reason: String },
    EdgeAndEndpoint { turn: usize, edge: LocalObservable, vertex: LocalObservable },
    ConsecutiveEdges { turn: usize, first: LocalObservable, second: LocalObservable },
    RepeatedObservable { turn: usize, first_turn: usize, observable: LocalObservable },
    Missing { observable: LocalObservable },
    ColorMismatch { turn: usize, declared: TurnColor, actual: TurnColor },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Turns are reported 1-based.
        match self {
            Violation::InvalidObservable { turn, observable, reason } => {
                write!(f, "turn {}: invalid observable {observable}: {reason}", turn + 1)
            }
            Violation::EdgeAndEndpoint { turn, edge, vertex } => write!(
                f,
                "turn {}: edge and a vertex at one of its ends ({edge}, {vertex})",
                turn + 1
            ),
            Violation::ConsecutiveEdges { turn, first, second } => write!(
                f,
                "turn {}: two consecutive edges ({first}, {second})",
                turn + 1
            ),
            Violation::RepeatedObservable { turn, first_turn, observable } => write!(
                f,
                "turn {}: the same edge twice ({observable} already measured in turn {})",
                turn + 1,
                first_turn + 1
            ),
            Violation::Missing { observable } => write!(f, "missing coverage: {observable} never measured"),
            Violation::ColorMismatch { turn, declared, actual } => write!(
                f,
                "turn {}: declared color {declared:?} but contents are {actual:?}",
                turn + 1
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Every rule violation and coverage gap of a schedule; empty iff valid and complete.
pub fn validate_schedule(s: &MeasurementSchedule) -> ValidationReport {
    let d = s.d;
    let mut violations = Vec::new();
    let mut seen: BTreeMap<LocalObservable, usize> = BTreeMap::new();

    for (t, turn) in s.turns.iter().enumerate() {
        let actual = TurnColor::of(&turn.observables);
        if actual != turn.color {
            violations.push(Violation::ColorMismatch { turn: t, declared: turn.color, actual });
        }
        let mut usable = Vec::new();
        for &obs in &turn.observables {
            if let Err(Error::InvalidObservable(reason)) = obs.check(d) {
                violations.push(Violation::InvalidObservable { turn: t, observable: obs, reason });
                continue;
            }
            match seen.get(&obs) {
                Some(&first_turn) => violations.push(Violation::RepeatedObservable {
                    turn: t,
                    first_turn,
                    observable: obs,
                }),
                None => {
                    seen.insert(obs, t);
                }
            }
            usable.push(obs);
        }
        for (i, &a) in usable.iter().enumerate() {
            for &b in &usable[i + 1..] {
                if a == b || commutes(a, b) {
                    continue;
                }
                let v = match (a.is_edge(), b.is_edge()) {
                    (true, true) => Violation::ConsecutiveEdges { turn: t, first: a, second: b },
                    (true, false) => Violation::EdgeAndEndpoint { turn: t, edge: a, vertex: b },
                    (false, true) => Violation::EdgeAndEndpoint { turn: t, edge: b, vertex: a },
                    // Distinct projectors never share an index.
                    (false, false) => unreachable!(),
                };
                violations.push(v);
            }
        }
    }

    if d >= 1 {
        for term in required_observables(d) {
            if !seen.contains_key(&term) {
                violations.push(Violation::Missing { observable: term });
            }
        }
    }
    ValidationReport { violations }
}

/// All d² observables a complete schedule must measure.
pub fn required_observables(d: usize) -> Vec<LocalObservable> {
    let mut out: Vec<LocalObservable> = (0..d).map(LocalObservable::P).collect();
    for a in 0..d {
        for b in a + 1..d {
            out.push(LocalObservable::X(a, b));
            out.push(LocalObservable::Y(a, b));
        }
    }
    out
}
