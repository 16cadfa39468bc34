//! Optimization of ξᵀMξ over canonical sign vectors: exact Gray-code
//! enumeration for small d and single-spin-flip simulated annealing beyond.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::mmatrix::{quad_form, MMatrix, Sense, SignVector};
use crate::error::{Error, Result};
use crate::linalg::derive_seed;

/// Largest d handled by exhaustive enumeration (2^(d−1) vectors).
pub const ENUMERATION_LIMIT: usize = 24;
pub const DEFAULT_SWEEPS: usize = 200;
pub const DEFAULT_RESTARTS: usize = 32;

/// Work unit for enumeration; fixed so results never depend on the thread count.
const CHUNK_BITS: u32 = 12;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    value: f64,
    key: u64,
}

impl Candidate {
    /// Strictly better value wins; equal values fall back to the smaller key.
    fn better(self, other: Candidate, sense: Sense) -> Candidate {
        let prefer_self = match sense {
            Sense::Min => self.value < other.value,
            Sense::Max => self.value > other.value,
        };
        if prefer_self || (self.value == other.value && self.key < other.key) {
            self
        } else {
            other
        }
    }
}

fn gray(i: u64) -> u64 {
    i ^ (i >> 1)
}

/// Lexicographic key of the canonical vector whose entry k is flipped iff bit k−1 of `mask`.
fn mask_to_key(mask: u64, d: usize) -> u64 {
    (1..d)
        .filter(|k| mask >> (k - 1) & 1 == 1)
        .fold(0, |acc, k| acc | 1 << (d - 1 - k))
}

fn enumerate_chunk(m: &MMatrix, sense: Sense, start: u64, end: u64) -> Candidate {
    let d = m.d();
    let e = m.entries();
    let mut mask = gray(start);
    let mut xi: Vec<f64> = SignVector::from_mask(d, mask).as_f64();
    // field[k] = Σ_{j≠k} M_kj ξ_j
    let mut field: Vec<f64> = (0..d)
        .map(|k| (0..d).filter(|&j| j != k).map(|j| e[(k, j)] * xi[j]).sum())
        .collect();
    let mut value: f64 = (0..d).map(|k| e[(k, k)] + xi[k] * field[k]).sum();
    let mut best = Candidate { value, key: mask_to_key(mask, d) };

    for i in start + 1..end {
        let bit = i.trailing_zeros() as usize;
        let k = bit + 1;
        let old = xi[k];
        value -= 4.0 * old * field[k];
        xi[k] = -old;
        for (j, f) in field.iter_mut().enumerate() {
            if j != k {
                *f -= 2.0 * old * e[(j, k)];
            }
        }
        mask ^= 1 << bit;
        best = best.better(Candidate { value, key: mask_to_key(mask, d) }, sense);
    }
    best
}

/// Exhaustive optimum over all 2^(d−1) canonical vectors; ties go to the
/// lexicographically smallest vector (+1 before −1).
pub fn optimize_exact(m: &MMatrix, sense: Sense) -> Result<(f64, SignVector)> {
    let d = m.d();
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    if d > ENUMERATION_LIMIT {
        return Err(Error::EnumerationBudget { d, limit: ENUMERATION_LIMIT });
    }
    let total = 1u64 << (d - 1);
    let chunk = 1u64 << CHUNK_BITS;
    let n_chunks = total.div_ceil(chunk);
    let best = (0..n_chunks)
        .into_par_iter()
        .map(|c| enumerate_chunk(m, sense, c * chunk, ((c + 1) * chunk).min(total)))
        .reduce_with(|a, b| a.better(b, sense))
        .expect("at least one chunk");
    let xi = SignVector::all_canonical(d)
        .nth(best.key as usize)
        .expect("key within range");
    Ok((quad_form(m, &xi)?, xi))
}

/// f* = min_ξ ξᵀM⁺ξ by enumeration.
pub fn f_star_exact(mplus: &MMatrix) -> Result<(f64, SignVector)> {
    optimize_exact(mplus, Sense::Min)
}

/// g* = max_ξ ξᵀM⁻ξ by enumeration.
pub fn g_star_exact(mminus: &MMatrix) -> Result<(f64, SignVector)> {
    optimize_exact(mminus, Sense::Max)
}

fn anneal_once(m: &MMatrix, sense: Sense, seed: u64, sweeps: usize) -> Vec<f64> {
    let d = m.d();
    let e = m.entries();
    // Minimize s·ξᵀMξ.
    let s = match sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xi: Vec<f64> = (0..d).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let mut field: Vec<f64> = (0..d)
        .map(|k| (0..d).filter(|&j| j != k).map(|j| e[(k, j)] * xi[j]).sum())
        .collect();

    let flip = |k: usize, xi: &mut Vec<f64>, field: &mut Vec<f64>| {
        let old = xi[k];
        xi[k] = -old;
        for (j, f) in field.iter_mut().enumerate() {
            if j != k {
                *f -= 2.0 * old * e[(j, k)];
            }
        }
    };
    let delta = |k: usize, xi: &[f64], field: &[f64]| -4.0 * s * xi[k] * field[k];

    let t_hot = (0..d)
        .map(|k| 4.0 * (0..d).filter(|&j| j != k).map(|j| e[(k, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if t_hot > 0.0 && sweeps > 0 {
        let t_cold = t_hot * 1e-4;
        let ratio = if sweeps > 1 { (t_cold / t_hot).powf(1.0 / (sweeps - 1) as f64) } else { 1.0 };
        let mut temp = t_hot;
        for _ in 0..sweeps {
            for k in 0..d {
                let de = delta(k, &xi, &field);
                if de <= 0.0 || rng.random::<f64>() < (-de / temp).exp() {
                    flip(k, &mut xi, &mut field);
                }
            }
            temp *= ratio;
        }
    }
    // Greedy descent to a single-flip local optimum.
    loop {
        let mut improved = false;
        for k in 0..d {
            if delta(k, &xi, &field) < 0.0 {
                flip(k, &mut xi, &mut field);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    xi
}

/// Simulated-annealing search; the returned value is attained by the returned ξ.
pub fn star_heuristic(
    m: &MMatrix,
    sense: Sense,
    seed: u64,
    sweeps: usize,
    restarts: usize,
) -> Result<(f64, SignVector)> {
    let d = m.d();
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let start = SignVector::all_ones(d);
    let mut best = (quad_form(m, &start)?, start);
    let runs: Vec<SignVector> = (0..restarts as u64)
        .into_par_iter()
        .map(|r| {
            let xi = anneal_once(m, sense, derive_seed(seed, r), sweeps);
            SignVector::new(xi.iter().map(|&v| v as i8).collect())
                .expect("annealer keeps ±1 entries")
                .canonical()
        })
        .collect();
    for xi in runs {
        let value = quad_form(m, &xi)?;
        let current = Candidate { value: best.0, key: best.1.lex_key() };
        let cand = Candidate { value, key: xi.lex_key() };
        if cand.better(current, sense).key != current.key {
            best = (value, xi);
        }
    }
    Ok(best)
}
