//! From measured correlations to certified entanglement bounds.
//!
//! A [`CorrelationTable`] is assembled into the matrices M⁺ and M⁻, whose
//! quadratic forms over ±1 vectors give the phase-flipped witness values.
//! The report minimizes the F form, maximizes the G form and evaluates both
//! bounding functions.

mod mmatrix;
mod optimize;
mod report;
mod table;

pub use mmatrix::{
    assemble_m, diagnostic_bounds, phase_flipped_witness, quad_form, MMatrix, Sense, Sign,
    SignVector,
};
pub use optimize::{
    f_star_exact, g_star_exact, optimize_exact, star_heuristic, DEFAULT_RESTARTS, DEFAULT_SWEEPS,
    ENUMERATION_LIMIT,
};
pub use report::{
    entanglement_report, entanglement_report_with, BoundReport, Diagnostics, OptimizerMode,
    OptimizerUsed, ReportOptions,
};
pub use table::{CorrelationTable, CorrelationTableFile};
