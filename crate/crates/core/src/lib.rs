//! Bandwidth allocation and path selection for WANs with per-flow path
//! cardinality caps.
//!
//! Two linearized-proximal ADMM drivers are provided: [`admm::solve_num`] for
//! the convex utility-maximization problem and [`admm::solve_mopc`] for the
//! multi-objective problem with `‖x_k‖₀ ≤ w_k`. A Frank–Wolfe baseline over a
//! linear relaxation lives in [`baseline`], and [`gen`] builds seeded
//! synthetic instances.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod baseline;
pub mod cubicroot;
pub mod error;
pub mod gen;
pub mod model;
pub mod prox;
pub mod search;
pub mod report;
pub mod utility;

pub use error::{Error, Result};
pub use model::{Allocation, Metrics, ProblemInstance};
