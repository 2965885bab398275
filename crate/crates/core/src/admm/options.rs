use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemInstance;

/// Penalty update rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum RhoSchedule {
    /// Adaptive rule on the convex path, increasing(1.5, 100) otherwise.
    Auto,
    /// Double ρ when p_res > 10·d_res, halve it when d_res > 10·p_res.
    Adaptive,
    /// Multiply ρ by `factor` after every `period` iterations, up to
    /// 1e8·ρ₀.
    Increasing { factor: f64, period: usize },
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Init {
    /// Every coordinate at c_min / (2P).
    Uniform,
    /// Coordinates drawn from c_min / (2P) · [0.5, 1.5).
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Initial penalty. `None` picks [`AUTO_RHO_FACTOR`]·max(α, 1)/‖c‖²,
    /// which follows the problem's units: scaling rates and capacities by λ
    /// scales the penalty term by λ².
    pub rho0: Option<f64>,
    /// μ = mu_factor · ρ · ‖R‖₂².
    pub mu_factor: f64,
    /// Multiplier step length on the convex path.
    pub gamma: f64,
    pub max_iters: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Capacity-violation tolerance of the convex criteria.
    pub eps_tol: f64,
    pub eps_tol1: f64,
    pub eps_tol2: f64,
    pub rho_schedule: RhoSchedule,
    /// The adaptive rule is only consulted every `adapt_period` iterations.
    pub adapt_period: usize,
    pub audit_decrease: bool,
    /// Keep every audit record in the report, not only violations.
    pub keep_audit_records: bool,
    pub init: Init,
    /// Abort when |L_ρ| exceeds this multiple of max(1, |L_ρ⁰|).
    pub divergence_factor: f64,
    /// A capped run that stops at `max_iters` with normalized violation above
    /// this value is reported as an error.
    pub max_final_vio: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rho0: None,
            mu_factor: 1.1,
            gamma: 1.618,
            max_iters: 1500,
            eps_abs: 1e-4,
            eps_rel: 1e-4,
            eps_tol: 1e-10,
            eps_tol1: 1e-4,
            eps_tol2: 1e-10,
            rho_schedule: RhoSchedule::Auto,
            adapt_period: DEFAULT_ADAPT_PERIOD,
            audit_decrease: false,
            keep_audit_records: false,
            init: Init::Uniform,
            divergence_factor: 1e12,
            max_final_vio: 1e-3,
        }
    }
}

pub const DEFAULT_INCREASE_FACTOR: f64 = 1.5;
pub const DEFAULT_INCREASE_PERIOD: usize = 100;
pub const RHO_CEILING_FACTOR: f64 = 1e8;
pub const DEFAULT_ADAPT_PERIOD: usize = 50;
pub const AUTO_RHO_FACTOR: f64 = 0.3;

impl SolveOptions {
    pub fn initial_rho(&self, instance: &ProblemInstance) -> f64 {
        self.rho0.unwrap_or_else(|| {
            let c_sq: f64 = instance.capacities().iter().map(|c| c * c).sum();
            AUTO_RHO_FACTOR * instance.alpha().max(1.0) / c_sq
        })
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if let Some(rho0) = self.rho0 {
            if !(rho0 > 0.0 && rho0.is_finite()) {
                return bad("rho0 must be positive");
            }
        }
        if !(self.mu_factor > 1.0 && self.mu_factor.is_finite()) {
            return bad("mu_factor must exceed 1");
        }
        if !(self.gamma > 0.0 && self.gamma < 2.0) {
            return bad("gamma must lie in (0, 2)");
        }
        for (name, v) in [
            ("eps_abs", self.eps_abs),
            ("eps_rel", self.eps_rel),
            ("eps_tol", self.eps_tol),
            ("eps_tol1", self.eps_tol1),
            ("eps_tol2", self.eps_tol2),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.adapt_period == 0 {
            return bad("adapt_period must be at least 1");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        match self.rho_schedule {
            RhoSchedule::Increasing { factor, period } if !(factor > 1.0) || period == 0 => {
                bad("increasing schedule needs factor > 1 and period >= 1")
            }
            _ => Ok(()),
        }
    }
}
