//! Flow trace records and their CSV form.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Diagnostics recorded after a step. Norm columns are `NaN` when norms are
/// not requested; `ward_residual` covers the levels `n <= n_max - 2` that the
/// truncation leaves closed, `ward_residual_top` the level `n_max - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub w0_norm: f64,
    pub w1_norm: f64,
    pub high_norm: f64,
    pub composite: f64,
    pub ward_residual: f64,
    pub ward_residual_top: f64,
    pub transpose_residual: f64,
    pub w0_at_zero: f64,
    pub reality_residual: f64,
}

pub const TRACE_HEADER: &str = "t,w0_norm,w1_norm,high_norm,ward_residual,transpose_residual,w0_at_zero_norm,composite,ward_residual_top,reality_residual";

pub fn write_trace_csv<W: Write>(records: &[TraceRecord], mut out: W) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.t,
            r.w0_norm,
            r.w1_norm,
            r.high_norm,
            r.ward_residual,
            r.transpose_residual,
            r.w0_at_zero,
            r.composite,
            r.ward_residual_top,
            r.reality_residual
        )?;
    }
    Ok(())
}
