//! Sparse binary routing matrix with row- and column-compressed views.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// L×P binary matrix; entry (l, p) is 1 iff path p traverses link l.
///
/// Columns keep the link order they were built with so that instance files
/// round-trip exactly. Rows are sorted by column index.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingMatrix {
    num_rows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl RoutingMatrix {
    /// Builds the matrix from per-column link lists.
    pub fn from_columns(num_rows: usize, columns: &[Vec<usize>]) -> Result<Self> {
        let mut col_ptr = Vec::with_capacity(columns.len() + 1);
        let mut row_idx = Vec::new();
        let mut row_counts = vec![0usize; num_rows];
        col_ptr.push(0);
        for (p, col) in columns.iter().enumerate() {
            if col.is_empty() {
                return Err(Error::invalid("paths", p, "path traverses no links"));
            }
            for (i, &l) in col.iter().enumerate() {
                if l >= num_rows {
                    return Err(Error::invalid(
                        "paths",
                        p,
                        format!("link index {l} out of range (L = {num_rows})"),
                    ));
                }
                if col[..i].contains(&l) {
                    return Err(Error::invalid(
                        "paths",
                        p,
                        format!("link index {l} repeated; routing entries must be binary"),
                    ));
                }
                row_counts[l] += 1;
                row_idx.push(l);
            }
            col_ptr.push(row_idx.len());
        }

        let mut row_ptr = Vec::with_capacity(num_rows + 1);
        row_ptr.push(0);
        for count in &row_counts {
            row_ptr.push(row_ptr.last().unwrap() + count);
        }
        let mut fill = row_ptr[..num_rows].to_vec();
        let mut col_idx = vec![0usize; row_idx.len()];
        for p in 0..columns.len() {
            for &l in &row_idx[col_ptr[p]..col_ptr[p + 1]] {
                col_idx[fill[l]] = p;
                fill[l] += 1;
            }
        }

        Ok(Self {
            num_rows,
            col_ptr,
            row_idx,
            row_ptr,
            col_idx,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn num_cols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Links traversed by path `p`, in construction order.
    pub fn column(&self, p: usize) -> &[usize] {
        &self.row_idx[self.col_ptr[p]..self.col_ptr[p + 1]]
    }

    /// Paths crossing link `l`, ascending.
    pub fn row(&self, l: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[l]..self.row_ptr[l + 1]]
    }

    pub fn get(&self, l: usize, p: usize) -> bool {
        self.column(p).contains(&l)
    }

    /// `out = R x`.
    pub fn mul_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.num_cols());
        debug_assert_eq!(out.len(), self.num_rows);
        for (l, o) in out.iter_mut().enumerate() {
            *o = self.row(l).iter().map(|&p| x[p]).sum();
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_rows];
        self.mul_into(x, &mut out);
        out
    }

    /// `out = Rᵀ v`.
    pub fn tmul_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.num_rows);
        debug_assert_eq!(out.len(), self.num_cols());
        for (p, o) in out.iter_mut().enumerate() {
            *o = self.column(p).iter().map(|&l| v[l]).sum();
        }
    }

    pub fn tmul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_cols()];
        self.tmul_into(v, &mut out);
        out
    }

    /// Dense row-major copy, for diagnostics and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.num_cols()]; self.num_rows];
        for p in 0..self.num_cols() {
            for &l in self.column(p) {
                dense[l][p] = 1.0;
            }
        }
        dense
    }
}

/// How the value of [`SpectralEstimate::norm_sq`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMethod {
    PowerIteration,
    /// Power iteration hit its cap; the value is ‖R‖_F², an upper bound.
    FrobeniusBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub norm_sq: f64,
    pub method: SpectralMethod,
    pub iterations: usize,
}

const POWER_ITER_CAP: usize = 10_000;
const POWER_ITER_RTOL: f64 = 1e-14;

/// Estimates ‖R‖₂² by power iteration on RᵀR.
pub fn spectral_norm_sq(routing: &RoutingMatrix) -> Result<SpectralEstimate> {
    spectral_norm_sq_capped(routing, POWER_ITER_CAP)
}

pub(crate) fn spectral_norm_sq_capped(
    routing: &RoutingMatrix,
    cap: usize,
) -> Result<SpectralEstimate> {
    let n = routing.num_cols();
    if n == 0 || routing.num_rows() == 0 {
        return Err(Error::Config("spectral norm of an empty matrix".into()));
    }

    // R is nonnegative, so its Perron vector is nonnegative and a positive
    // start always overlaps it. The ramp breaks exact symmetries.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 + 1.0) / (n as f64 * 7.0)).collect();
    normalize(&mut v);
    let mut rv = vec![0.0; routing.num_rows()];
    let mut w = vec![0.0; n];

    let mut prev = 0.0_f64;
    let mut stable = 0;
    for iter in 1..=cap {
        routing.mul_into(&v, &mut rv);
        // Rayleigh quotient of RᵀR at a unit vector.
        let lambda: f64 = rv.iter().map(|a| a * a).sum();
        routing.tmul_into(&rv, &mut w);
        let norm = normalize(&mut w);
        if norm == 0.0 {
            return Ok(SpectralEstimate {
                norm_sq: lambda,
                method: SpectralMethod::PowerIteration,
                iterations: iter,
            });
        }
        std::mem::swap(&mut v, &mut w);

        if (lambda - prev).abs() <= POWER_ITER_RTOL * lambda {
            stable += 1;
            if stable >= 3 {
                return Ok(SpectralEstimate {
                    norm_sq: lambda,
                    method: SpectralMethod::PowerIteration,
                    iterations: iter,
                });
            }
        } else {
            stable = 0;
        }
        prev = lambda;
    }

    log::warn!("power iteration did not settle in {cap} iterations; using Frobenius bound");
    Ok(SpectralEstimate {
        norm_sq: routing.nnz() as f64,
        method: SpectralMethod::FrobeniusBound,
        iterations: cap,
    })
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|a| *a /= norm);
    }
    norm
}
