//! Solver reports and the per-iteration trace format.
//!
//! Traces are written as comma-separated text with a header row. Columns, in
//! order:
//!
//! | column | meaning |
//! |--------|---------|
//! | `iter` | iteration index, starting at 1 |
//! | `rho` | penalty in effect during the iteration (0 for Frank–Wolfe) |
//! | `mu` | proximal weight (0 for Frank–Wolfe) |
//! | `p_res` | primal residual (normalized for the non-convex criteria) |
//! | `d_res` / `y_dif` / `fw_gap` | dual residual, normalized y change, or Frank–Wolfe gap |
//! | `vio` | normalized capacity violation |
//! | `l_rho` | augmented Lagrangian (Frank–Wolfe: objective) |
//! | `obj` | problem objective at the iterate |

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Allocation, Metrics, SpectralEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIters,
    Error,
}

/// What the fifth trace column holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    /// Convex stopping rule; column is `d_res`.
    Convex,
    /// Non-convex stopping rule; column is `y_dif`.
    NonConvex,
    /// Frank–Wolfe; column is `fw_gap`.
    FrankWolfe,
}

impl TraceKind {
    pub fn second_column(self) -> &'static str {
        match self {
            TraceKind::Convex => "d_res",
            TraceKind::NonConvex => "y_dif",
            TraceKind::FrankWolfe => "fw_gap",
        }
    }

    fn from_column(name: &str) -> Option<Self> {
        match name {
            "d_res" => Some(TraceKind::Convex),
            "y_dif" => Some(TraceKind::NonConvex),
            "fw_gap" => Some(TraceKind::FrankWolfe),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub rho: f64,
    pub mu: f64,
    pub p_res: f64,
    /// `d_res`, `y_dif` or `fw_gap` depending on [`TraceKind`].
    pub second: f64,
    pub vio: f64,
    pub l_rho: f64,
    pub obj: f64,
}

/// One evaluation of the sufficient-decrease inequality between consecutive
/// iterates at a fixed penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub iter: usize,
    /// L(prev) − L(next) + ‖E_z‖²/ρ.
    pub lhs: f64,
    /// (μ − ρ‖R‖²)/2 ‖E_x‖² + (ρ/2)‖E_y‖².
    pub rhs: f64,
    pub slack: f64,
    pub scale: f64,
    pub ok: bool,
}

pub const AUDIT_RTOL: f64 = 1e-8;

impl AuditRecord {
    pub fn new(iter: usize, lhs: f64, rhs: f64, scale: f64) -> Self {
        let slack = lhs - rhs;
        Self {
            iter,
            lhs,
            rhs,
            slack,
            scale,
            ok: slack >= -AUDIT_RTOL * scale,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub checked: usize,
    /// Steps skipped because the penalty changed.
    pub skipped: usize,
    pub violations: Vec<AuditRecord>,
    /// Minimum of slack/scale over checked steps.
    pub min_relative_slack: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub records: Vec<AuditRecord>,
}

impl AuditSummary {
    pub fn push(&mut self, record: AuditRecord, keep: bool) {
        self.checked += 1;
        let rel = record.slack / record.scale;
        self.min_relative_slack = Some(self.min_relative_slack.map_or(rel, |m| m.min(rel)));
        if !record.ok {
            self.violations.push(record);
        }
        if keep {
            self.records.push(record);
        }
    }
}

/// Residuals of the optimality conditions at the last iterate, built from the
/// realized subproblem outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stationarity {
    /// ‖Rᵀ(ρ(yʲ − Rxʲ) + zʲ − zʲ⁺¹) − μ E_x‖: x-condition against the new multiplier.
    pub x_residual: f64,
    /// ‖z^{j+1} − zʲ − ρ(y^{j+1} − Rx^{j+1})‖: y-condition against the new multiplier.
    pub y_residual: f64,
    /// ‖y − Rx‖.
    pub consensus: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub spectral: Option<SpectralEstimate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub audit: Option<AuditSummary>,
    /// Running Σ‖E_z‖².
    pub sum_dz_sq: f64,
    /// max_j ‖zʲ‖.
    pub max_z_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stationarity: Option<Stationarity>,
    /// Count of LP pivots (Frank–Wolfe only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lp_pivots: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub scheme: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
    pub iterations: usize,
    pub x: Allocation,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// Load variable t (Frank–Wolfe) or the last y-search t.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metrics: Option<Metrics>,
    pub trace_kind: TraceKind,
    pub trace: Vec<TraceRecord>,
    pub diagnostics: Diagnostics,
}

impl SolveReport {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.trace.last()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }
}

pub fn trace_header(kind: TraceKind) -> String {
    format!("iter,rho,mu,p_res,{},vio,l_rho,obj", kind.second_column())
}

pub fn write_trace<W: Write>(mut out: W, kind: TraceKind, records: &[TraceRecord]) -> io::Result<()> {
    writeln!(out, "{}", trace_header(kind))?;
    for r in records {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.iter, r.rho, r.mu, r.p_res, r.second, r.vio, r.l_rho, r.obj
        )?;
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(input: R) -> Result<(TraceKind, Vec<TraceRecord>)> {
    let mut lines = input.lines();
    let bad = |line: usize, reason: String| Error::invalid("trace", line, reason);
    let header = lines
        .next()
        .ok_or_else(|| bad(0, "empty trace".into()))?
        .map_err(|e| bad(0, e.to_string()))?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() != 8 || cols[..4] != ["iter", "rho", "mu", "p_res"] || cols[5..] != ["vio", "l_rho", "obj"] {
        return Err(bad(0, format!("unexpected header {header:?}")));
    }
    let kind = TraceKind::from_column(cols[4]).ok_or_else(|| bad(0, format!("unknown column {}", cols[4])))?;

    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| bad(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 8 {
            return Err(bad(i + 1, format!("expected 8 fields, got {}", fields.len())));
        }
        let num = |j: usize| -> Result<f64> {
            fields[j]
                .parse::<f64>()
                .map_err(|e| bad(i + 1, format!("column {j}: {e}")))
        };
        records.push(TraceRecord {
            iter: fields[0].parse().map_err(|e| bad(i + 1, format!("iter: {e}")))?,
            rho: num(1)?,
            mu: num(2)?,
            p_res: num(3)?,
            second: num(4)?,
            vio: num(5)?,
            l_rho: num(6)?,
            obj: num(7)?,
        });
    }
    Ok((kind, records))
}
