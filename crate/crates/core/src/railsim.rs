//! Two-photon multi-rail simulator.
//!
//! One photon enters each port, spread over d channels with joint amplitude
//! Φ_{αβ}. Each turn mixes channel pairs on 50:50 beam splitters (with a π/2
//! phase on the higher channel for Y pairs) and records channel-resolved
//! coincidences, from which the correlation table is estimated.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{self, decode_matrix, encode_matrix};
use crate::linalg::{derive_seed, hermitian_eigen, unitarity_deviation, ComplexMatrix, RealMatrix, I, ONE};
use crate::localdeco::{validate_schedule, LocalObservable, MeasurementSchedule, Turn};
use crate::postproc::CorrelationTable;
use crate::qstate::{DensityMatrix, STRUCTURAL_TOL};

/// Eigenvalues at or below this are dropped when a density matrix is
/// converted to an ensemble.
const EIGEN_FLOOR: f64 = 1e-12;
const NEGATIVE_PROB_TOL: f64 = 1e-12;

/// Pure two-photon state; Φ has unit Frobenius norm.
#[derive(Debug, Clone, PartialEq)]
pub struct RailState {
    d: usize,
    phi: ComplexMatrix,
}

impl RailState {
    pub fn new(d: usize, phi: ComplexMatrix) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        if phi.nrows() != d || phi.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: if phi.nrows() != d { phi.nrows() } else { phi.ncols() },
            });
        }
        if !phi.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let dev = (phi.norm() - 1.0).abs();
        if dev > STRUCTURAL_TOL {
            return Err(Error::InvariantViolation {
                invariant: "unit norm",
                deviation: dev,
                tolerance: STRUCTURAL_TOL,
            });
        }
        Ok(RailState { d, phi })
    }

    /// Φ = δ_{αβ}/√d.
    pub fn bell(d: usize) -> Result<Self> {
        let s = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
        RailState::new(d, ComplexMatrix::from_diagonal_element(d, d, s))
    }

    /// |αβ⟩ (0-based channels).
    pub fn product(d: usize, alpha: usize, beta: usize) -> Result<Self> {
        if alpha >= d || beta >= d {
            return Err(Error::DimensionMismatch { expected: d, found: alpha.max(beta) + 1 });
        }
        let mut phi = ComplexMatrix::zeros(d, d);
        phi[(alpha, beta)] = ONE;
        RailState::new(d, phi)
    }

    /// Reshapes a state vector ψ with ψ[α·d + β] = Φ_{αβ}.
    pub fn from_vector(d: usize, psi: &[Complex64]) -> Result<Self> {
        if psi.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, found: psi.len() });
        }
        RailState::new(d, ComplexMatrix::from_row_slice(d, d, psi))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn phi(&self) -> &ComplexMatrix {
        &self.phi
    }

    /// ρ_Φ = vec(Φ) vec(Φ)†.
    pub fn density_matrix(&self) -> Result<DensityMatrix> {
        let psi: Vec<Complex64> = self.phi.transpose().iter().copied().collect();
        DensityMatrix::from_pure(self.d, &psi)
    }

    pub fn to_json(&self) -> Result<String> {
        json::to_string(&RailStateFile { d: self.d, phi: encode_matrix(&self.phi) })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: RailStateFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        RailState::new(file.d, decode_matrix(&file.phi)?)
    }
}

/// On-disk form `{ "d", "phi": [[ [re, im], .. ], ..] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RailStateFile {
    pub d: usize,
    pub phi: Vec<Vec<[f64; 2]>>,
}

/// Finite mixture of pure rail states.
#[derive(Debug, Clone, PartialEq)]
pub struct RailEnsemble {
    d: usize,
    components: Vec<(f64, RailState)>,
}

impl RailEnsemble {
    pub fn new(components: Vec<(f64, RailState)>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::InvalidDistribution("empty ensemble".into()));
        };
        let d = first.1.d;
        if let Some((_, s)) = components.iter().find(|(_, s)| s.d != d) {
            return Err(Error::DimensionMismatch { expected: d, found: s.d });
        }
        if let Some((w, _)) = components.iter().find(|(w, _)| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidDistribution(format!("weight {w} is not positive")));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > STRUCTURAL_TOL {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        Ok(RailEnsemble { d, components })
    }

    /// Spectral decomposition of ρ; eigenvalues ≤ 1e−12 are dropped and the
    /// remaining weights renormalized.
    pub fn from_density_matrix(rho: &DensityMatrix) -> Result<Self> {
        let d = rho.d();
        let (values, vectors) = hermitian_eigen(rho.matrix());
        let mut components = Vec::new();
        for (k, &w) in values.iter().enumerate() {
            if w <= EIGEN_FLOOR {
                continue;
            }
            let col = vectors.column(k);
            let norm = col.norm();
            let psi: Vec<Complex64> = col.iter().map(|z| z / norm).collect();
            components.push((w, RailState::from_vector(d, &psi)?));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        for (w, _) in &mut components {
            *w /= total;
        }
        RailEnsemble::new(components)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn components(&self) -> &[(f64, RailState)] {
        &self.components
    }

    pub fn density_matrix(&self) -> Result<DensityMatrix> {
        let n = self.d * self.d;
        let mut m = ComplexMatrix::zeros(n, n);
        for (w, s) in &self.components {
            m += s.density_matrix()?.matrix().scale(*w);
        }
        DensityMatrix::new(self.d, m)
    }
}

impl From<RailState> for RailEnsemble {
    fn from(s: RailState) -> Self {
        RailEnsemble { d: s.d, components: vec![(1.0, s)] }
    }
}

/// Anything that yields coincidence probabilities under a port unitary.
pub trait RailSource: Sync {
    fn d(&self) -> usize;
    fn probabilities(&self, pu: &PortUnitary) -> Result<RealMatrix>;
}

impl RailSource for RailState {
    fn d(&self) -> usize {
        self.d
    }
    fn probabilities(&self, pu: &PortUnitary) -> Result<RealMatrix> {
        coincidence_probs(self, pu)
    }
}

impl RailSource for RailEnsemble {
    fn d(&self) -> usize {
        self.d
    }
    fn probabilities(&self, pu: &PortUnitary) -> Result<RealMatrix> {
        let mut acc = RealMatrix::zeros(self.d, self.d);
        for (w, s) in &self.components {
            acc += coincidence_probs(s, pu)? * *w;
        }
        Ok(acc)
    }
}

/// Interferometers applied to port A (U) and port B (V).
#[derive(Debug, Clone, PartialEq)]
pub struct PortUnitary {
    u: ComplexMatrix,
    v: ComplexMatrix,
}

impl PortUnitary {
    pub fn new(u: ComplexMatrix, v: ComplexMatrix) -> Result<Self> {
        for m in [&u, &v] {
            if m.nrows() != m.ncols() {
                return Err(Error::NotSquare(m.nrows(), m.ncols()));
            }
            let dev = unitarity_deviation(m);
            if dev > STRUCTURAL_TOL {
                return Err(Error::InvariantViolation {
                    invariant: "unitary",
                    deviation: dev,
                    tolerance: STRUCTURAL_TOL,
                });
            }
        }
        if u.nrows() != v.nrows() {
            return Err(Error::DimensionMismatch { expected: u.nrows(), found: v.nrows() });
        }
        Ok(PortUnitary { u, v })
    }

    pub fn identity(d: usize) -> Self {
        PortUnitary { u: ComplexMatrix::identity(d, d), v: ComplexMatrix::identity(d, d) }
    }

    pub fn u(&self) -> &ComplexMatrix {
        &self.u
    }

    pub fn v(&self) -> &ComplexMatrix {
        &self.v
    }
}

/// p(α, β) = |(U Φ Vᵀ)_{αβ}|².
pub fn coincidence_probs(s: &RailState, pu: &PortUnitary) -> Result<RealMatrix> {
    if pu.u.nrows() != s.d {
        return Err(Error::DimensionMismatch { expected: s.d, found: pu.u.nrows() });
    }
    let out = &pu.u * &s.phi * pu.v.transpose();
    Ok(out.map(|z| z.norm_sqr()))
}

/// Identical interferometer on both ports: a Hadamard block per X pair, a
/// Hadamard after diag(1, i) per Y pair, identity elsewhere.
pub fn turn_unitary(turn: &Turn, d: usize) -> Result<PortUnitary> {
    turn.check(d)?;
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut u = ComplexMatrix::identity(d, d);
    for obs in &turn.observables {
        let (a, b, phase) = match *obs {
            LocalObservable::P(_) => continue,
            LocalObservable::X(a, b) => (a, b, ONE),
            LocalObservable::Y(a, b) => (a, b, I),
        };
        u[(a, a)] = h;
        u[(a, b)] = h * phase;
        u[(b, a)] = h;
        u[(b, b)] = -h * phase;
    }
    Ok(PortUnitary { v: u.clone(), u })
}

/// Turn estimators from a coincidence distribution (exact or empirical).
fn estimates_from(turn: &Turn, d: usize, p: &RealMatrix) -> CorrelationTable {
    let mut t = CorrelationTable::new(d);
    for &obs in &turn.observables {
        let v = match obs {
            LocalObservable::P(a) => p[(a, a)],
            LocalObservable::X(a, b) | LocalObservable::Y(a, b) => {
                p[(a, a)] + p[(b, b)] - p[(a, b)] - p[(b, a)]
            }
        };
        t.insert(obs, v);
    }
    t
}

/// Infinite-statistics estimates for the observables of one turn.
pub fn estimate_exact<S: RailSource + ?Sized>(turn: &Turn, s: &S) -> Result<CorrelationTable> {
    let d = s.d();
    let pu = turn_unitary(turn, d)?;
    Ok(estimates_from(turn, d, &s.probabilities(&pu)?))
}

/// Multinomial draw of `shots` events over the d×d outcomes, as a chain of
/// conditional binomials in row-major order.
pub fn sample_counts(probs: &RealMatrix, shots: u64, seed: u64) -> Result<DMatrix<u64>> {
    if shots == 0 {
        return Err(Error::OutOfRange { name: "shots", value: 0.0, min: 1.0, max: f64::INFINITY });
    }
    let mut p: Vec<f64> = Vec::with_capacity(probs.len());
    for r in 0..probs.nrows() {
        for c in 0..probs.ncols() {
            let v = probs[(r, c)];
            if !v.is_finite() || v < -NEGATIVE_PROB_TOL {
                return Err(Error::InvalidDistribution(format!(
                    "probability {v} at ({}, {})",
                    r + 1,
                    c + 1
                )));
            }
            p.push(v.max(0.0));
        }
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > STRUCTURAL_TOL {
        return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; p.len()];
    let mut remaining = shots;
    let mut mass = total;
    for (i, &pi) in p.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == p.len() {
            counts[i] = remaining;
            break;
        }
        let q = if mass > 0.0 { (pi / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = Binomial::new(remaining, q)
            .map_err(|e| Error::Numerical(e.to_string()))?
            .sample(&mut rng);
        counts[i] = k;
        remaining -= k;
        mass -= pi;
    }
    Ok(DMatrix::from_row_slice(probs.nrows(), probs.ncols(), &counts))
}

/// Runs every turn of a valid, complete schedule. `shots_per_turn = 0`
/// returns the exact table; otherwise turn k samples with a seed derived
/// from (seed, k), so results do not depend on execution order.
pub fn run_experiment<S: RailSource + ?Sized>(
    s: &S,
    schedule: &MeasurementSchedule,
    shots_per_turn: u64,
    seed: u64,
) -> Result<CorrelationTable> {
    let d = s.d();
    if schedule.d != d {
        return Err(Error::DimensionMismatch { expected: d, found: schedule.d });
    }
    let report = validate_schedule(schedule);
    if !report.is_valid() {
        return Err(Error::InvalidSchedule(report.to_string()));
    }
    let partials: Vec<Result<CorrelationTable>> = schedule
        .turns
        .par_iter()
        .enumerate()
        .map(|(k, turn)| {
            if shots_per_turn == 0 {
                return estimate_exact(turn, s);
            }
            let pu = turn_unitary(turn, d)?;
            let probs = s.probabilities(&pu)?;
            let counts = sample_counts(&probs, shots_per_turn, derive_seed(seed, k as u64))?;
            let freq = counts.map(|c| c as f64 / shots_per_turn as f64);
            Ok(estimates_from(turn, d, &freq))
        })
        .collect();
    let mut table = CorrelationTable::new(d);
    for partial in partials {
        table.merge(&partial?)?;
    }
    table.shots_per_turn = Some(shots_per_turn);
    table.ensure_complete()?;
    Ok(table)
}

/// (1 − p)|Ψ⟩⟨Ψ| + p 𝟙/d², realized as the pure state plus all d² product
/// basis states with weight p/d² each. Zero-weight components are omitted.
pub fn depolarize(s: &RailState, p: f64) -> Result<RailEnsemble> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange { name: "p", value: p, min: 0.0, max: 1.0 });
    }
    let d = s.d;
    let mut components = Vec::new();
    if p < 1.0 {
        components.push((1.0 - p, s.clone()));
    }
    if p > 0.0 {
        let w = p / (d * d) as f64;
        for a in 0..d {
            for b in 0..d {
                components.push((w, RailState::product(d, a, b)?));
            }
        }
    }
    RailEnsemble::new(components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{b_iso, b_werner, DEFAULT_GRID_POINTS};
    use crate::localdeco::{correlator_matrix, required_observables, schedule};
    use crate::postproc::{assemble_m, entanglement_report, quad_form, Sign, SignVector};
    use crate::qstate::{expectation, gproj_operator, haar_unitary, swap_operator, werner_state};
    use crate::linalg::max_abs_diff;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_state(d: usize, seed: u64) -> RailState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut phi = ComplexMatrix::from_fn(d, d, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let n = phi.norm();
        phi.unscale_mut(n);
        RailState::new(d, phi).unwrap()
    }

    fn g_of(t: &CorrelationTable) -> f64 {
        let m = assemble_m(t, Sign::Minus).unwrap();
        quad_form(&m, &SignVector::all_ones(t.d)).unwrap()
    }

    #[test]
    fn rejects_bad_states() {
        assert!(RailState::new(2, ComplexMatrix::identity(2, 2)).is_err());
        assert!(RailState::new(2, ComplexMatrix::zeros(3, 3)).is_err());
        assert!(RailState::new(1, ComplexMatrix::identity(1, 1)).is_err());
        let s = RailState::bell(3).unwrap();
        assert!(RailEnsemble::new(vec![(0.5, s.clone())]).is_err());
        assert!(RailEnsemble::new(vec![(1.5, s.clone()), (-0.5, s.clone())]).is_err());
        assert!(RailEnsemble::new(vec![(0.5, s), (0.5, RailState::bell(2).unwrap())]).is_err());
        let bad_u = ComplexMatrix::from_element(2, 2, ONE);
        assert!(PortUnitary::new(bad_u, ComplexMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn bell_identity_probabilities() {
        for d in 2..6 {
            let p = coincidence_probs(&RailState::bell(d).unwrap(), &PortUnitary::identity(d)).unwrap();
            for a in 0..d {
                for b in 0..d {
                    let expected = if a == b { 1.0 / d as f64 } else { 0.0 };
                    assert_abs_diff_eq!(p[(a, b)], expected, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn product_state_factorizes() {
        let d = 3;
        let s = RailState::product(d, 0, 0).unwrap();
        let pu = PortUnitary::new(haar_unitary(d, 1), haar_unitary(d, 2)).unwrap();
        let p = coincidence_probs(&s, &pu).unwrap();
        for a in 0..d {
            for b in 0..d {
                let expected = pu.u()[(a, 0)].norm_sqr() * pu.v()[(b, 0)].norm_sqr();
                assert_abs_diff_eq!(p[(a, b)], expected, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn probabilities_are_conserved() {
        for k in 0..100u64 {
            let d = 2 + (k % 5) as usize;
            let s = random_state(d, k);
            let pu = PortUnitary::new(haar_unitary(d, 1000 + k), haar_unitary(d, 2000 + k)).unwrap();
            assert_abs_diff_eq!(coincidence_probs(&s, &pu).unwrap().sum(), 1.0, epsilon = 1e-9);
            let e = depolarize(&s, 0.3).unwrap();
            assert_abs_diff_eq!(e.probabilities(&pu).unwrap().sum(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn turn_unitary_blocks() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let t = Turn::new(vec![LocalObservable::x(0, 1).unwrap()]);
        let pu = turn_unitary(&t, 3).unwrap();
        let expected = ComplexMatrix::from_row_slice(
            3,
            3,
            &[h, h, 0.0, h, -h, 0.0, 0.0, 0.0, 1.0].map(|v| Complex64::new(v, 0.0)),
        );
        assert!(max_abs_diff(pu.u(), &expected) < 1e-15);
        assert_eq!(pu.u(), pu.v());

        let t = Turn::new(vec![LocalObservable::y(0, 1).unwrap()]);
        let pu = turn_unitary(&t, 2).unwrap();
        let had = ComplexMatrix::from_row_slice(2, 2, &[h, h, h, -h].map(|v| Complex64::new(v, 0.0)));
        let phase = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, I]));
        assert!(max_abs_diff(pu.u(), &(had * phase)) < 1e-15);

        assert_eq!(turn_unitary(&Turn::new(vec![]), 4).unwrap(), PortUnitary::identity(4));
        let clash = Turn::new(vec![LocalObservable::x(0, 1).unwrap(), LocalObservable::P(1)]);
        assert!(turn_unitary(&clash, 3).is_err());
    }

    #[test]
    fn bell_estimates() {
        let s = RailState::bell(2).unwrap();
        let x = estimate_exact(&Turn::new(vec![LocalObservable::x(0, 1).unwrap()]), &s).unwrap();
        assert_abs_diff_eq!(x.x[&(0, 1)], 1.0, epsilon = 1e-12);
        let y = estimate_exact(&Turn::new(vec![LocalObservable::y(0, 1).unwrap()]), &s).unwrap();
        assert_abs_diff_eq!(y.y[&(0, 1)], -1.0, epsilon = 1e-12);
        let p = estimate_exact(&Turn::new(vec![LocalObservable::P(0)]), &RailState::product(2, 0, 0).unwrap())
            .unwrap();
        assert_abs_diff_eq!(p.p[&0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn estimates_match_dense_oracle() {
        for k in 0..50u64 {
            let d = 2 + (k % 4) as usize;
            let s = random_state(d, 500 + k);
            let rho = s.density_matrix().unwrap();
            for obs in required_observables(d) {
                let est = estimate_exact(&Turn::new(vec![obs]), &s).unwrap().get(obs).unwrap();
                let dense = expectation(&correlator_matrix(obs, d).unwrap(), &rho).unwrap();
                assert_abs_diff_eq!(est, dense, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn exact_pipeline_reproduces_f_and_g() {
        for k in 0..20u64 {
            let d = 2 + (k % 5) as usize;
            let s = random_state(d, 900 + k);
            let rho = s.density_matrix().unwrap();
            let t = run_experiment(&s, &schedule(d).unwrap(), 0, 0).unwrap();
            let ones = SignVector::all_ones(d);
            let f = quad_form(&assemble_m(&t, Sign::Plus).unwrap(), &ones).unwrap();
            assert_abs_diff_eq!(f, expectation(&swap_operator(d).unwrap(), &rho).unwrap(), epsilon = 1e-9);
            assert_abs_diff_eq!(g_of(&t), expectation(&gproj_operator(d).unwrap(), &rho).unwrap(), epsilon = 1e-9);
            assert_eq!(t.shots_per_turn, Some(0));
        }
    }

    #[test]
    fn bell_pipeline_gives_g_equal_d() {
        for d in 2..7 {
            let t = run_experiment(&RailState::bell(d).unwrap(), &schedule(d).unwrap(), 0, 0).unwrap();
            assert_abs_diff_eq!(g_of(&t), d as f64, epsilon = 1e-10);
        }
    }

    #[test]
    fn werner_ensemble_report_matches_closed_form() {
        for (d, f) in [(2, -1.0), (3, -0.6), (4, -0.3), (3, 0.5)] {
            let e = RailEnsemble::from_density_matrix(&werner_state(d, f).unwrap()).unwrap();
            let t = run_experiment(&e, &schedule(d).unwrap(), 0, 0).unwrap();
            let r = entanglement_report(&t).unwrap();
            assert_abs_diff_eq!(r.bound_wer, b_werner(f).unwrap(), epsilon = 1e-9);
        }
    }

    #[test]
    fn ensemble_from_density_matrix_round_trip() {
        let rho = crate::qstate::random_density_matrix(3, 4, 8).unwrap();
        let e = RailEnsemble::from_density_matrix(&rho).unwrap();
        assert_eq!(e.components().len(), 4);
        assert!(max_abs_diff(e.density_matrix().unwrap().matrix(), rho.matrix()) < 1e-12);
    }

    #[test]
    fn depolarize_examples() {
        let bell = RailState::bell(2).unwrap();
        let e0 = depolarize(&bell, 0.0).unwrap();
        assert_eq!(e0.components(), &[(1.0, bell.clone())]);

        let sched = schedule(3).unwrap();
        let mixed = run_experiment(&depolarize(&random_state(3, 4), 1.0).unwrap(), &sched, 0, 0).unwrap();
        let mm = CorrelationTable::exact(&DensityMatrix::maximally_mixed(3).unwrap()).unwrap();
        for obs in required_observables(3) {
            assert_abs_diff_eq!(mixed.get(obs).unwrap(), mm.get(obs).unwrap(), epsilon = 1e-12);
        }

        let half = run_experiment(&depolarize(&bell, 0.5).unwrap(), &schedule(2).unwrap(), 0, 0).unwrap();
        assert_abs_diff_eq!(g_of(&half), 1.25, epsilon = 1e-12);
        let r = entanglement_report(&half).unwrap();
        assert_abs_diff_eq!(r.bound_iso, b_iso(1.25, 2, DEFAULT_GRID_POINTS).unwrap(), epsilon = 1e-12);

        assert!(depolarize(&bell, 1.5).is_err());
    }

    #[test]
    fn depolarized_table_is_convex_combination() {
        let s = random_state(3, 77);
        let p = 0.35;
        let sched = schedule(3).unwrap();
        let mix = run_experiment(&depolarize(&s, p).unwrap(), &sched, 0, 0).unwrap();
        let pure = run_experiment(&s, &sched, 0, 0).unwrap();
        let mm = CorrelationTable::exact(&DensityMatrix::maximally_mixed(3).unwrap()).unwrap();
        for obs in required_observables(3) {
            let expected = (1.0 - p) * pure.get(obs).unwrap() + p * mm.get(obs).unwrap();
            assert_abs_diff_eq!(mix.get(obs).unwrap(), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn sample_counts_contract() {
        let d = 4;
        let uniform = RealMatrix::from_element(d, d, 1.0 / (d * d) as f64);
        let shots = 1_000_000u64;
        let c = sample_counts(&uniform, shots, 3).unwrap();
        assert_eq!(c.sum(), shots);
        let p = 1.0 / 16.0;
        let sigma = (shots as f64 * p * (1.0 - p)).sqrt();
        for &k in c.iter() {
            assert!((k as f64 - shots as f64 * p).abs() < 5.0 * sigma);
        }
        let one = sample_counts(&uniform, 1, 9).unwrap();
        assert_eq!(one.sum(), 1);
        assert_eq!(one.iter().filter(|&&k| k == 1).count(), 1);
        assert_eq!(sample_counts(&uniform, 500, 7).unwrap(), sample_counts(&uniform, 500, 7).unwrap());

        let mut neg = uniform.clone();
        neg[(0, 0)] = -1e-6;
        neg[(0, 1)] += 1e-6 + p;
        assert!(matches!(sample_counts(&neg, 10, 0), Err(Error::InvalidDistribution(_))));
        let mut tiny = uniform.clone();
        tiny[(0, 0)] = -1e-13;
        tiny[(0, 1)] += p + 1e-13;
        let c = sample_counts(&tiny, 1000, 0).unwrap();
        assert_eq!(c[(0, 0)], 0);
        assert!(sample_counts(&uniform, 0, 0).is_err());
    }

    #[test]
    fn run_experiment_checks_inputs() {
        let s = RailState::bell(3).unwrap();
        assert!(matches!(
            run_experiment(&s, &schedule(4).unwrap(), 0, 0),
            Err(Error::DimensionMismatch { expected: 3, found: 4 })
        ));
        let mut partial = schedule(3).unwrap();
        partial.turns.pop();
        assert!(matches!(run_experiment(&s, &partial, 0, 0), Err(Error::InvalidSchedule(_))));
    }

    #[test]
    fn sampling_is_reproducible_and_thread_independent() {
        let s = random_state(4, 3);
        let sched = schedule(4).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = one.install(|| run_experiment(&s, &sched, 10_000, 42).unwrap());
        let b = run_experiment(&s, &sched, 10_000, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shots_per_turn, Some(10_000));
        assert_ne!(a, run_experiment(&s, &sched, 10_000, 43).unwrap());
    }

    #[test]
    fn bell_finite_shots_calibration() {
        let s = RailState::bell(2).unwrap();
        let sched = schedule(2).unwrap();
        let good = (0..100u64)
            .filter(|&seed| (g_of(&run_experiment(&s, &sched, 100_000, seed).unwrap()) - 2.0).abs() < 0.05)
            .count();
        assert!(good >= 95, "good = {good}");
    }

    #[test]
    fn error_shrinks_like_inverse_sqrt_shots() {
        let d = 3;
        let s = random_state(d, 12);
        let sched = schedule(d).unwrap();
        let exact = run_experiment(&s, &sched, 0, 0).unwrap();
        let rms = |shots: u64| {
            let mut acc = 0.0;
            let mut n = 0.0;
            for seed in 0..50u64 {
                let t = run_experiment(&s, &sched, shots, seed).unwrap();
                for obs in required_observables(d) {
                    acc += (t.get(obs).unwrap() - exact.get(obs).unwrap()).powi(2);
                    n += 1.0;
                }
            }
            (acc / n).sqrt()
        };
        let errs = [rms(1_000), rms(10_000), rms(100_000)];
        let target = 10f64.sqrt();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > target / 2.0 && ratio < target * 2.0, "ratio {ratio}");
        }
    }

    #[test]
    fn rail_state_json_round_trip() {
        let s = random_state(3, 2);
        let text = s.to_json().unwrap();
        assert!(text.contains("\"phi\""));
        assert_eq!(RailState::from_json(&text).unwrap(), s);
        assert!(RailState::from_json(r#"{"d":2,"phi":[[[1,0],[0,0]],[[0,0],[1,0]]]}"#).is_err());
    }
}
