use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::table::CorrelationTable;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, RealMatrix};
use crate::qstate::WitnessKind;

/// Which combination of ⟨X⊗X⟩ and ⟨Y⊗Y⟩ fills the off-diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    /// M⁺, quadratic forms give Tr[F(ξ)ρ].
    Plus,
    /// M⁻, quadratic forms give Tr[G(ξ)ρ].
    Minus,
}

impl From<WitnessKind> for Sign {
    fn from(kind: WitnessKind) -> Self {
        match kind {
            WitnessKind::Werner => Sign::Plus,
            WitnessKind::Isotropic => Sign::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

/// d×d real symmetric matrix of measured correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct MMatrix {
    sign: Sign,
    entries: RealMatrix,
}

impl MMatrix {
    /// Wraps an arbitrary symmetric matrix (used for synthetic inputs).
    pub fn from_entries(sign: Sign, entries: RealMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::NotSquare(entries.nrows(), entries.ncols()));
        }
        if !entries.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let asym = (&entries - entries.transpose()).amax();
        if asym > 0.0 {
            return Err(Error::InvariantViolation {
                invariant: "symmetric",
                deviation: asym,
                tolerance: 0.0,
            });
        }
        Ok(MMatrix { sign, entries })
    }

    pub fn d(&self) -> usize {
        self.entries.nrows()
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn entries(&self) -> &RealMatrix {
        &self.entries
    }
}

/// M_αα = ⟨P_α⊗P_α⟩, M_αβ = (⟨X⊗X⟩ ± ⟨Y⊗Y⟩)/4.
pub fn assemble_m(t: &CorrelationTable, sign: Sign) -> Result<MMatrix> {
    t.ensure_complete()?;
    let d = t.d;
    let s = match sign {
        Sign::Plus => 1.0,
        Sign::Minus => -1.0,
    };
    let mut m = DMatrix::zeros(d, d);
    for a in 0..d {
        m[(a, a)] = t.p[&a];
        for b in a + 1..d {
            let v = (t.x[&(a, b)] + s * t.y[&(a, b)]) / 4.0;
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    Ok(MMatrix { sign, entries: m })
}

/// ±1 vector ξ; canonical form has ξ₁ = +1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if let Some(v) = entries.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::Parse(format!("sign vector entry {v} is not ±1")));
        }
        Ok(SignVector(entries))
    }

    pub fn all_ones(d: usize) -> Self {
        SignVector(vec![1; d])
    }

    /// ξ with entry k (k ≥ 1) equal to −1 iff bit k−1 of `mask` is set.
    pub fn from_mask(d: usize, mask: u64) -> Self {
        SignVector(
            (0..d)
                .map(|k| if k > 0 && mask >> (k - 1) & 1 == 1 { -1 } else { 1 })
                .collect(),
        )
    }

    /// Position in the lexicographic order with +1 before −1 (canonical vectors only).
    pub fn lex_key(&self) -> u64 {
        let d = self.0.len();
        self.0
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &v)| v == -1)
            .fold(0u64, |acc, (k, _)| acc | 1 << (d - 1 - k))
    }

    /// ξ and −ξ define the same witness; pick the one with ξ₁ = +1.
    pub fn canonical(&self) -> Self {
        if self.0[0] == 1 {
            self.clone()
        } else {
            SignVector(self.0.iter().map(|v| -v).collect())
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| v as f64).collect()
    }

    /// Every canonical vector of length d, in lexicographic order.
    pub fn all_canonical(d: usize) -> impl Iterator<Item = SignVector> {
        (0..1u64 << (d - 1)).map(move |key| {
            SignVector((0..d).map(|k| if k > 0 && key >> (d - 1 - k) & 1 == 1 { -1 } else { 1 }).collect())
        })
    }
}

impl TryFrom<Vec<i8>> for SignVector {
    type Error = Error;
    fn try_from(v: Vec<i8>) -> Result<Self> {
        SignVector::new(v)
    }
}

impl From<SignVector> for Vec<i8> {
    fn from(v: SignVector) -> Self {
        v.0
    }
}

impl fmt::Display for SignVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<&str> = self.0.iter().map(|&v| if v > 0 { "+" } else { "-" }).collect();
        write!(f, "({})", s.join(""))
    }
}

/// ξᵀ M ξ.
pub fn quad_form(m: &MMatrix, xi: &SignVector) -> Result<f64> {
    let d = m.d();
    if xi.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: xi.len(),
        });
    }
    let s = xi.as_f64();
    Ok((0..d)
        .map(|a| s[a] * s.iter().enumerate().map(|(b, sb)| m.entries[(a, b)] * sb).sum::<f64>())
        .sum())
}

/// Σ_α M_αα ∓ Σ_{α≠β} |M_αβ| over ordered pairs: a lower bound on the
/// minimum (`Min`) or an upper bound on the maximum (`Max`) of ξᵀMξ.
pub fn diagnostic_bounds(m: &MMatrix, sense: Sense) -> f64 {
    let d = m.d();
    let diag: f64 = (0..d).map(|a| m.entries[(a, a)]).sum();
    let off: f64 = (0..d)
        .flat_map(|a| (0..d).filter(move |&b| b != a).map(move |b| (a, b)))
        .map(|(a, b)| m.entries[(a, b)].abs())
        .sum();
    match sense {
        Sense::Min => diag - off,
        Sense::Max => diag + off,
    }
}

/// (𝟙 ⊗ W(ξ)) Q (𝟙 ⊗ W(ξ))† for Q = F or G, W(ξ) = diag(ξ), by dense algebra.
pub fn phase_flipped_witness(kind: WitnessKind, xi: &SignVector) -> Result<ComplexMatrix> {
    let d = xi.len();
    let q = kind.operator(d)?;
    let w = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        xi.entries().iter().map(|&v| Complex64::new(v as f64, 0.0)),
    ));
    let lw = ComplexMatrix::identity(d, d).kronecker(&w);
    Ok(&lw * q * lw.adjoint())
}
