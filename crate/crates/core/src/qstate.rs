//! Bipartite qudit states on H_d ⊗ H_d, the swap operator F and the
//! unnormalized maximally-entangled projector G, the Werner and isotropic
//! families, and the U⊗U / U⊗U* twirling channels.
//!
//! Basis convention: the product vector |αβ⟩ (0-based α, β) sits at row
//! `α·d + β`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;
use crate::linalg::{self, pair_index, ComplexMatrix, ONE, ZERO};

/// Tolerance for structural checks (Hermiticity, trace, positivity, unitarity).
pub const STRUCTURAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WitnessKind {
    Werner,
    Isotropic,
}

impl WitnessKind {
    pub fn operator(self, d: usize) -> Result<ComplexMatrix> {
        match self {
            WitnessKind::Werner => swap_operator(d),
            WitnessKind::Isotropic => gproj_operator(d),
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::InvalidDimension(d))
    } else {
        Ok(())
    }
}

/// F = Σ_{αβ} |αβ⟩⟨βα|.
pub fn swap_operator(d: usize) -> Result<ComplexMatrix> {
    check_dim(d)?;
    let n = d * d;
    let mut f = ComplexMatrix::zeros(n, n);
    for a in 0..d {
        for b in 0..d {
            f[(pair_index(a, b, d), pair_index(b, a, d))] = ONE;
        }
    }
    Ok(f)
}

/// G = Σ_{αβ} |αα⟩⟨ββ|, d times the projector on the maximally entangled state.
pub fn gproj_operator(d: usize) -> Result<ComplexMatrix> {
    check_dim(d)?;
    let n = d * d;
    let mut g = ComplexMatrix::zeros(n, n);
    for a in 0..d {
        for b in 0..d {
            g[(pair_index(a, a, d), pair_index(b, b, d))] = ONE;
        }
    }
    Ok(g)
}

/// A validated bipartite density matrix of local dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    d: usize,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates shape, finiteness, Hermiticity, unit trace and positivity.
    pub fn new(d: usize, matrix: ComplexMatrix) -> Result<Self> {
        check_dim(d)?;
        let n = linalg::check_square(&matrix)?;
        if n != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: n,
            });
        }
        linalg::check_finite(&matrix)?;

        let herm = linalg::hermiticity_deviation(&matrix);
        if herm > STRUCTURAL_TOL {
            return Err(Error::InvariantViolation {
                invariant: "hermitian",
                deviation: herm,
                tolerance: STRUCTURAL_TOL,
            });
        }
        let tr = linalg::trace(&matrix);
        let tr_dev = (tr - ONE).norm();
        if tr_dev > STRUCTURAL_TOL {
            return Err(Error::InvariantViolation {
                invariant: "unit trace",
                deviation: tr_dev,
                tolerance: STRUCTURAL_TOL,
            });
        }
        let min_ev = linalg::hermitian_eigenvalues(&matrix)[0];
        if min_ev < -STRUCTURAL_TOL {
            return Err(Error::InvariantViolation {
                invariant: "positive semidefinite",
                deviation: -min_ev,
                tolerance: STRUCTURAL_TOL,
            });
        }
        Ok(DensityMatrix { d, matrix })
    }

    /// Pure state |ψ⟩⟨ψ| from an amplitude vector of length d² (normalized here).
    pub fn from_pure(d: usize, psi: &[Complex64]) -> Result<Self> {
        check_dim(d)?;
        if psi.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: psi.len(),
            });
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm <= 0.0 {
            return Err(Error::Numerical("state vector has zero or non-finite norm".into()));
        }
        let v = nalgebra::DVector::from_iterator(psi.len(), psi.iter().map(|z| z / norm));
        DensityMatrix::new(d, &v * v.adjoint())
    }

    pub fn maximally_mixed(d: usize) -> Result<Self> {
        check_dim(d)?;
        let n = d * d;
        Ok(DensityMatrix {
            d,
            matrix: linalg::identity(n).scale(1.0 / n as f64),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn to_json(&self) -> Result<String> {
        json::to_string(&DensityMatrixFile {
            d: self.d,
            matrix: json::encode_matrix(&self.matrix),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DensityMatrixFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.try_into()
    }
}

/// On-disk form `{ "d": int, "matrix": [[ [re, im], ... ], ...] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityMatrixFile {
    pub d: usize,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<DensityMatrixFile> for DensityMatrix {
    type Error = Error;

    fn try_from(file: DensityMatrixFile) -> Result<Self> {
        DensityMatrix::new(file.d, json::decode_matrix(&file.matrix)?)
    }
}

fn family_state(d: usize, param: f64, op: ComplexMatrix) -> DensityMatrix {
    let df = d as f64;
    let norm = df * (df * df - 1.0);
    let mut m = op.scale((param * df - 1.0) / norm);
    for i in 0..d * d {
        m[(i, i)] += Complex64::new((df - param) / norm, 0.0);
    }
    DensityMatrix { d, matrix: m }
}

/// ρ_W(f) = [(d − f)𝟙 + (fd − 1)F] / (d(d² − 1)), for f ∈ [−1, 1].
pub fn werner_state(d: usize, f: f64) -> Result<DensityMatrix> {
    check_dim(d)?;
    if !(-1.0..=1.0).contains(&f) {
        return Err(Error::OutOfRange {
            name: "f",
            value: f,
            min: -1.0,
            max: 1.0,
        });
    }
    Ok(family_state(d, f, swap_operator(d)?))
}

/// ρ_I(g) = [(d − g)𝟙 + (gd − 1)G] / (d(d² − 1)), for g ∈ [0, d].
pub fn isotropic_state(d: usize, g: f64) -> Result<DensityMatrix> {
    check_dim(d)?;
    if !(0.0..=d as f64).contains(&g) {
        return Err(Error::OutOfRange {
            name: "g",
            value: g,
            min: 0.0,
            max: d as f64,
        });
    }
    Ok(family_state(d, g, gproj_operator(d)?))
}

/// Tr[op·ρ] for a Hermitian operator.
pub fn expectation(op: &ComplexMatrix, rho: &DensityMatrix) -> Result<f64> {
    let n = linalg::check_square(op)?;
    if n != rho.matrix.nrows() {
        return Err(Error::DimensionMismatch {
            expected: rho.matrix.nrows(),
            found: n,
        });
    }
    let value = linalg::trace_product(op, &rho.matrix);
    if value.im.abs() >= STRUCTURAL_TOL {
        return Err(Error::NonHermitianOperator(value.im));
    }
    let herm = linalg::hermiticity_deviation(op);
    if herm > STRUCTURAL_TOL {
        return Err(Error::InvariantViolation {
            invariant: "hermitian operator",
            deviation: herm,
            tolerance: STRUCTURAL_TOL,
        });
    }
    Ok(value.re)
}

/// Closed-form U⊗U twirl: ρ ↦ ρ_W(Tr[F ρ]).
pub fn twirl_uu(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let f = expectation(&swap_operator(rho.d)?, rho)?;
    werner_state(rho.d, f.clamp(-1.0, 1.0))
}

/// Closed-form U⊗U* twirl: ρ ↦ ρ_I(Tr[G ρ]).
pub fn twirl_uustar(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let g = expectation(&gproj_operator(rho.d)?, rho)?;
    isotropic_state(rho.d, g.clamp(0.0, rho.d as f64))
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-distributed unitary drawn from `rng`: QR of a Ginibre matrix with the
/// phases of R's diagonal moved into Q.
pub fn haar_unitary_from_rng<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let z = DMatrix::from_fn(d, d, |_, _| complex_gaussian(rng));
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..d {
        let rcc = r[(c, c)];
        let phase = if rcc.norm() > 0.0 { rcc / rcc.norm() } else { ONE };
        for row in 0..d {
            q[(row, c)] *= phase;
        }
    }
    q
}

pub fn haar_unitary(d: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    haar_unitary_from_rng(d, &mut rng)
}

/// Sample average of (U⊗U)ρ(U⊗U)† (or U⊗U* when `conjugate`) over Haar draws.
pub fn twirl_monte_carlo(
    rho: &DensityMatrix,
    samples: usize,
    seed: u64,
    conjugate: bool,
) -> Result<DensityMatrix> {
    if samples == 0 {
        return Err(Error::OutOfRange {
            name: "samples",
            value: 0.0,
            min: 1.0,
            max: f64::INFINITY,
        });
    }
    let d = rho.d;
    let n = d * d;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut acc = ComplexMatrix::zeros(n, n);
    for _ in 0..samples {
        let u = haar_unitary_from_rng(d, &mut rng);
        let second = if conjugate { u.conjugate() } else { u.clone() };
        let k = u.kronecker(&second);
        acc += &k * &rho.matrix * k.adjoint();
    }
    acc.unscale_mut(samples as f64);
    // Average of unit-trace matrices; remove accumulated rounding in the trace.
    let tr = linalg::trace(&acc).re;
    acc.unscale_mut(tr);
    Ok(DensityMatrix { d, matrix: acc })
}

/// Ginibre-ensemble state of the requested rank: ρ = GG†/Tr(GG†), G of size d²×rank.
pub fn random_density_matrix(d: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    check_dim(d)?;
    let n = d * d;
    if rank < 1 || rank > n {
        return Err(Error::OutOfRange {
            name: "rank",
            value: rank as f64,
            min: 1.0,
            max: n as f64,
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, rank, |_, _| complex_gaussian(&mut rng));
    let mut m = &g * g.adjoint();
    let tr = linalg::trace(&m).re;
    m.unscale_mut(tr);
    // Restore exact Hermiticity lost to rounding.
    let m = (&m + m.adjoint()).scale(0.5);
    DensityMatrix::new(d, m)
}

/// Product basis state |αβ⟩⟨αβ| (0-based indices).
pub fn product_basis_state(d: usize, alpha: usize, beta: usize) -> Result<DensityMatrix> {
    check_dim(d)?;
    if alpha >= d || beta >= d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: alpha.max(beta) + 1,
        });
    }
    let n = d * d;
    let mut m = ComplexMatrix::from_element(n, n, ZERO);
    let i = pair_index(alpha, beta, d);
    m[(i, i)] = ONE;
    Ok(DensityMatrix { d, matrix: m })
}
