//! Optimal entanglement-of-formation bounding functions for the Werner (F)
//! and isotropic (G) witnesses, in ebits.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Default number of uniform grid points on [1, d] for the isotropic hull.
pub const DEFAULT_GRID_POINTS: usize = 2049;

const CONVEXITY_TOL: f64 = 1e-12;

fn out_of_range(name: &'static str, value: f64, min: f64, max: f64) -> Error {
    Error::OutOfRange {
        name,
        value,
        min,
        max,
    }
}

/// h₂(y) = −y log₂ y − (1−y) log₂(1−y), with h₂(0) = h₂(1) = 0.
pub fn binary_entropy(y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(out_of_range("y", y, 0.0, 1.0));
    }
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    Ok(term(y) + term(1.0 - y))
}

/// Bounding function of the swap witness: h₂((1 + √(1 − x²))/2) for x ≤ 0, else 0.
pub fn b_werner(x: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(out_of_range("x", x, -1.0, 1.0));
    }
    if x > 0.0 {
        return Ok(0.0);
    }
    binary_entropy((1.0 + (1.0 - x * x).max(0.0).sqrt()) / 2.0)
}

fn check_iso_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::InvalidDimension(d))
    } else {
        Ok(())
    }
}

/// γ(x) = (√x + √((d−1)(d−x)))² / d², a probability in [1/d, 1] for x ∈ [1, d].
pub fn gamma_iso(x: f64, d: usize) -> Result<f64> {
    check_iso_dim(d)?;
    let df = d as f64;
    if !(1.0..=df).contains(&x) {
        return Err(out_of_range("x", x, 1.0, df));
    }
    let s = x.sqrt() + ((df - 1.0) * (df - x)).max(0.0).sqrt();
    Ok((s * s / (df * df)).clamp(0.0, 1.0))
}

/// The isotropic bounding expression before the convex hull:
/// 0 for x ≤ 1, h₂(γ) + (1 − γ) log₂(d − 1) otherwise.
pub fn b_iso_raw(x: f64, d: usize) -> Result<f64> {
    check_iso_dim(d)?;
    let df = d as f64;
    if !(0.0..=df).contains(&x) {
        return Err(out_of_range("x", x, 0.0, df));
    }
    if x <= 1.0 {
        return Ok(0.0);
    }
    let gamma = gamma_iso(x, d)?;
    Ok(binary_entropy(gamma)? + (1.0 - gamma) * (df - 1.0).log2())
}

/// Convex function given by linear interpolation between knots, held
/// constant outside the knot range.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearFunction {
    knots: Vec<(f64, f64)>,
}

impl PiecewiseLinearFunction {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidSamples("no knots".into()));
        }
        if let Some(w) = knots.windows(2).find(|w| w[1].0.partial_cmp(&w[0].0) != Some(Ordering::Greater)) {
            return Err(Error::InvalidSamples(format!(
                "x-values not strictly increasing at {} -> {}",
                w[0].0, w[1].0
            )));
        }
        let f = PiecewiseLinearFunction { knots };
        let worst = f.min_slope_increment();
        if worst < -CONVEXITY_TOL {
            return Err(Error::InvariantViolation {
                invariant: "convex",
                deviation: -worst,
                tolerance: CONVEXITY_TOL,
            });
        }
        Ok(f)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Smallest change in slope between consecutive segments (≥ 0 when convex).
    fn min_slope_increment(&self) -> f64 {
        let slopes: Vec<f64> = self
            .knots
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect();
        slopes
            .windows(2)
            .map(|s| s[1] - s[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let k = &self.knots;
        let (x0, y0) = k[0];
        let (xn, yn) = k[k.len() - 1];
        if x <= x0 {
            return y0;
        }
        if x >= xn {
            return yn;
        }
        // First knot with abscissa > x; 1 ≤ j ≤ len − 1 here.
        let j = k.partition_point(|&(kx, _)| kx <= x);
        let (xa, ya) = k[j - 1];
        let (xb, yb) = k[j];
        if x == xa {
            return ya;
        }
        let t = (x - xa) / (xb - xa);
        ya + t * (yb - ya)
    }
}

/// Lower convex envelope of the samples (monotone-chain lower hull).
pub fn convex_envelope(samples: &[(f64, f64)]) -> Result<PiecewiseLinearFunction> {
    if samples.len() < 2 {
        return Err(Error::InvalidSamples(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    if let Some(w) = samples.windows(2).find(|w| w[1].0.partial_cmp(&w[0].0) != Some(Ordering::Greater)) {
        return Err(Error::InvalidSamples(format!(
            "x-values not strictly increasing at {} -> {}",
            w[0].0, w[1].0
        )));
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(samples.len());
    for &p in samples {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let a = hull[hull.len() - 1];
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            // Drop `a` unless o → a → p turns strictly left.
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    PiecewiseLinearFunction::new(hull)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum HullPiece {
    /// The raw curve itself on [lo, hi].
    Curve { lo: f64, hi: f64 },
    /// A bridging line segment between two tangent points.
    Chord { a: (f64, f64), b: (f64, f64) },
}

/// Convex-hulled isotropic bounding function for a fixed dimension.
///
/// The hull is taken over a uniform grid on [1, d]. Runs of consecutive grid
/// knots mark where the raw curve is already convex and the curve is used
/// there directly; each bridging segment has its endpoints moved to the
/// exact tangent points (searched within one grid step of the knot).
#[derive(Debug, Clone)]
pub struct IsotropicBound {
    d: usize,
    hull: PiecewiseLinearFunction,
    pieces: Vec<HullPiece>,
}

/// Golden-section search for the maximizer of a unimodal function on [lo, hi].
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut e = lo + INV_PHI * (hi - lo);
    let (mut fc, mut fe) = (f(c), f(e));
    for _ in 0..200 {
        if hi - lo < 1e-15 * hi.abs().max(1.0) {
            break;
        }
        if fc >= fe {
            hi = e;
            e = c;
            fe = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = e;
            fc = fe;
            e = lo + INV_PHI * (hi - lo);
            fe = f(e);
        }
    }
    0.5 * (lo + hi)
}

impl IsotropicBound {
    pub fn new(d: usize, grid_points: usize) -> Result<Self> {
        check_iso_dim(d)?;
        if grid_points < 2 {
            return Err(Error::InvalidSamples(format!(
                "grid needs at least 2 points, got {grid_points}"
            )));
        }
        let df = d as f64;
        let step = (df - 1.0) / (grid_points - 1) as f64;
        let samples = (0..grid_points)
            .map(|i| {
                let x = if i + 1 == grid_points { df } else { 1.0 + step * i as f64 };
                b_iso_raw(x, d).map(|y| (x, y))
            })
            .collect::<Result<Vec<_>>>()?;
        let hull = convex_envelope(&samples)?;
        let pieces = Self::refine(d, step, hull.knots());
        Ok(IsotropicBound { d, hull, pieces })
    }

    fn refine(d: usize, step: f64, knots: &[(f64, f64)]) -> Vec<HullPiece> {
        let df = d as f64;
        let raw = |x: f64| b_iso_raw(x.clamp(1.0, df), d).unwrap_or(0.0);
        let mut pieces: Vec<HullPiece> = Vec::new();
        for w in knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b.0 - a.0 <= 1.5 * step {
                match pieces.last_mut() {
                    Some(HullPiece::Curve { hi, .. }) => *hi = b.0,
                    _ => pieces.push(HullPiece::Curve { lo: a.0, hi: b.0 }),
                }
                continue;
            }
            let (mut a, mut b) = (a, b);
            for _ in 0..3 {
                // Lower tangent from b: maximize the slope of (x, raw(x)) → b.
                if a.0 > 1.0 {
                    let lo = (a.0 - step).max(1.0);
                    let hi = (a.0 + step).min(b.0 - 0.5 * step);
                    let x = golden_max(|x| (b.1 - raw(x)) / (b.0 - x), lo, hi);
                    a = (x, raw(x));
                }
                // Lower tangent from a: minimize the slope of a → (x, raw(x)).
                if b.0 < df {
                    let lo = (b.0 - step).max(a.0 + 0.5 * step);
                    let hi = (b.0 + step).min(df);
                    let x = golden_max(|x| -(raw(x) - a.1) / (x - a.0), lo, hi);
                    b = (x, raw(x));
                }
            }
            if let Some(HullPiece::Curve { hi, .. }) = pieces.last_mut() {
                *hi = a.0;
            }
            pieces.push(HullPiece::Chord { a, b });
            if b.0 < df {
                pieces.push(HullPiece::Curve { lo: b.0, hi: b.0 });
            }
        }
        pieces
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// The hull over the raw grid samples, before tangent refinement.
    pub fn hull(&self) -> &PiecewiseLinearFunction {
        &self.hull
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        let raw = b_iso_raw(x, self.d)?;
        if x <= 1.0 {
            return Ok(0.0);
        }
        for piece in &self.pieces {
            if let HullPiece::Chord { a, b } = *piece {
                if x >= a.0 && x <= b.0 {
                    let t = (x - a.0) / (b.0 - a.0);
                    return Ok(raw.min(a.1 + t * (b.1 - a.1)));
                }
            }
        }
        Ok(raw)
    }
}

/// co[h₂(γ) + (1 − γ) log₂(d − 1)] for x > 1, 0 for x ≤ 1.
pub fn b_iso(x: f64, d: usize, grid_points: usize) -> Result<f64> {
    IsotropicBound::new(d, grid_points)?.evaluate(x)
}
