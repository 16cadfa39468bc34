use serde::{Deserialize, Serialize};

use super::mmatrix::{assemble_m, diagnostic_bounds, quad_form, Sense, Sign, SignVector};
use super::optimize::{
    optimize_exact, star_heuristic, DEFAULT_RESTARTS, DEFAULT_SWEEPS, ENUMERATION_LIMIT,
};
use super::table::CorrelationTable;
use crate::bounds::{b_werner, IsotropicBound, DEFAULT_GRID_POINTS};
use crate::error::{Error, Result};
use crate::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerMode {
    Exact,
    Heuristic,
    /// Exact up to the enumeration limit, heuristic above.
    #[default]
    Auto,
}

impl std::str::FromStr for OptimizerMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(OptimizerMode::Exact),
            "heuristic" => Ok(OptimizerMode::Heuristic),
            "auto" => Ok(OptimizerMode::Auto),
            other => Err(Error::Parse(format!(
                "unknown optimizer mode `{other}` (expected exact, heuristic or auto)"
            ))),
        }
    }
}

/// The optimizer that actually produced f_star and g_star.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerUsed {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub mode: OptimizerMode,
    pub seed: u64,
    pub sweeps: usize,
    pub restarts: usize,
    pub grid_points: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            mode: OptimizerMode::Auto,
            seed: 0,
            sweeps: DEFAULT_SWEEPS,
            restarts: DEFAULT_RESTARTS,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

/// Range diagnostics: f_star ≥ f_star_lower and g_star ≤ g_star_upper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub f_star_lower: f64,
    pub g_star_upper: f64,
}

/// Entanglement-of-formation lower bounds in ebits. `f`, `g`, `f_star` and
/// `g_star` are reported as measured; clamping only affects the bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub d: usize,
    pub f: f64,
    pub g: f64,
    pub f_star: f64,
    pub xi_f: SignVector,
    pub g_star: f64,
    pub xi_g: SignVector,
    /// b_werner(f_star).
    pub bound_wer: f64,
    /// b_iso(g_star).
    pub bound_iso: f64,
    pub bound_final: f64,
    /// b_werner(f), without sign optimization.
    pub bound_wer_plain: f64,
    /// b_iso(g), without sign optimization.
    pub bound_iso_plain: f64,
    pub optimizer: OptimizerUsed,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
}

impl BoundReport {
    pub fn to_json(&self) -> Result<String> {
        json::to_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn clamp_with_warning(name: &str, value: f64, lo: f64, hi: f64, warnings: &mut Vec<String>) -> f64 {
    if value < lo || value > hi {
        let c = value.clamp(lo, hi);
        warnings.push(format!("{name} = {value} outside [{lo}, {hi}], clamped to {c}"));
        c
    } else {
        value
    }
}

/// Report with default options (auto optimizer, seed 0).
pub fn entanglement_report(t: &CorrelationTable) -> Result<BoundReport> {
    entanglement_report_with(t, &ReportOptions::default())
}

pub fn entanglement_report_with(t: &CorrelationTable, opts: &ReportOptions) -> Result<BoundReport> {
    let mplus = assemble_m(t, Sign::Plus)?;
    let mminus = assemble_m(t, Sign::Minus)?;
    let d = t.d;
    let ones = SignVector::all_ones(d);
    let f = quad_form(&mplus, &ones)?;
    let g = quad_form(&mminus, &ones)?;

    let use_exact = match opts.mode {
        OptimizerMode::Exact => {
            if d > ENUMERATION_LIMIT {
                return Err(Error::EnumerationBudget { d, limit: ENUMERATION_LIMIT });
            }
            true
        }
        OptimizerMode::Heuristic => false,
        OptimizerMode::Auto => d <= ENUMERATION_LIMIT,
    };
    let ((f_star, xi_f), (g_star, xi_g), optimizer) = if use_exact {
        (
            optimize_exact(&mplus, Sense::Min)?,
            optimize_exact(&mminus, Sense::Max)?,
            OptimizerUsed::Exact,
        )
    } else {
        (
            star_heuristic(&mplus, Sense::Min, opts.seed, opts.sweeps, opts.restarts)?,
            star_heuristic(&mminus, Sense::Max, opts.seed, opts.sweeps, opts.restarts)?,
            OptimizerUsed::Heuristic,
        )
    };

    let df = d as f64;
    let mut warnings = Vec::new();
    let iso = IsotropicBound::new(d, opts.grid_points)?;
    let fc = clamp_with_warning("f_star", f_star, -1.0, 1.0, &mut warnings);
    let gc = clamp_with_warning("g_star", g_star, 0.0, df, &mut warnings);
    let bound_wer = b_werner(fc)?;
    let bound_iso = iso.evaluate(gc)?;
    let bound_wer_plain = b_werner(f.clamp(-1.0, 1.0))?;
    let bound_iso_plain = iso.evaluate(g.clamp(0.0, df))?;
    if optimizer == OptimizerUsed::Heuristic {
        warnings.push("heuristic optimizer: bound may be loose".to_string());
    }

    Ok(BoundReport {
        d,
        f,
        g,
        f_star,
        xi_f,
        g_star,
        xi_g,
        bound_wer,
        bound_iso,
        bound_final: bound_wer.max(bound_iso),
        bound_wer_plain,
        bound_iso_plain,
        optimizer,
        diagnostics: Diagnostics {
            f_star_lower: diagnostic_bounds(&mplus, Sense::Min),
            g_star_upper: diagnostic_bounds(&mminus, Sense::Max),
        },
        warnings,
    })
}
