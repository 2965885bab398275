//! The per-flow utility U(t) = β log t − s/t and the objective pieces built
//! on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityParams {
    pub beta: f64,
    pub size: f64,
}

impl UtilityParams {
    /// Accepts β ≥ 0 so that the degenerate delay-only utility −s/t can be
    /// studied; instances always carry β > 0.
    pub fn new(beta: f64, size: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::Domain {
                what: "utility",
                detail: format!("beta must be finite and >= 0, got {beta}"),
            });
        }
        if !(size.is_finite() && size > 0.0) {
            return Err(Error::Domain {
                what: "utility",
                detail: format!("flow size must be positive, got {size}"),
            });
        }
        Ok(Self { beta, size })
    }

    pub fn for_flow(instance: &ProblemInstance, k: usize) -> Self {
        Self {
            beta: instance.beta(),
            size: instance.flow_sizes()[k],
        }
    }

    /// U(t) for t > 0, without the domain check.
    #[inline]
    pub fn value_unchecked(&self, t: f64) -> f64 {
        self.beta * t.ln() - self.size / t
    }

    /// U′(t) = β/t + s/t² for t > 0, without the domain check.
    #[inline]
    pub fn grad_unchecked(&self, t: f64) -> f64 {
        (self.beta + self.size / t) / t
    }
}

fn check_positive(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "utility",
            detail: format!("argument must be positive, got {t}"),
        })
    }
}

pub fn utility_value(p: &UtilityParams, t: f64) -> Result<f64> {
    check_positive(t)?;
    Ok(p.value_unchecked(t))
}

pub fn utility_grad(p: &UtilityParams, t: f64) -> Result<f64> {
    check_positive(t)?;
    Ok(p.grad_unchecked(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    /// Utility maximization under capacities; y ≤ c.
    Num,
    /// Utility plus α·load with cardinality caps; 0 ≤ y ≤ c.
    Mopc,
}

/// −Σ_k U_k(‖x_k‖₁).
pub fn negative_utility(instance: &ProblemInstance, x: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (k, t) in instance.flow_totals(x).into_iter().enumerate() {
        if !(t > 0.0) {
            return Err(Error::ZeroRateFlow { flow: k });
        }
        total -= UtilityParams::for_flow(instance, k).value_unchecked(t);
    }
    Ok(total)
}

/// α max_l y_l / c_l.
pub fn load_term(instance: &ProblemInstance, y: &[f64]) -> f64 {
    let worst = y
        .iter()
        .zip(instance.capacities())
        .map(|(y, c)| y / c)
        .fold(f64::NEG_INFINITY, f64::max);
    instance.alpha() * worst
}

/// L_ρ(x, y; z). The indicator functions of the feasible sets are treated as
/// preconditions: a point outside them is an error rather than +∞.
pub fn augmented_lagrangian(
    instance: &ProblemInstance,
    x: &[f64],
    y: &[f64],
    z: &[f64],
    rho: f64,
    kind: ProblemKind,
) -> Result<f64> {
    let (p, l) = (instance.num_paths(), instance.num_links());
    for (what, got, expected) in [("x", x.len(), p), ("y", y.len(), l), ("z", z.len(), l)] {
        if got != expected {
            return Err(Error::Dimension { what, got, expected });
        }
    }
    if let Some(i) = x.iter().position(|v| !(*v >= 0.0)) {
        return Err(Error::Domain {
            what: "x >= 0",
            detail: format!("x[{i}] = {}", x[i]),
        });
    }
    let caps = instance.capacities();
    for (i, (&yl, &cl)) in y.iter().zip(caps).enumerate() {
        let ok = match kind {
            ProblemKind::Num => yl <= cl,
            ProblemKind::Mopc => (0.0..=cl).contains(&yl),
        };
        if !ok {
            let set = match kind {
                ProblemKind::Num => "y <= c",
                ProblemKind::Mopc => "0 <= y <= c",
            };
            return Err(Error::Domain {
                what: set,
                detail: format!("y[{i}] = {yl}, c = {cl}"),
            });
        }
    }

    let mut value = negative_utility(instance, x)?;
    if kind == ProblemKind::Mopc {
        value += load_term(instance, y);
    }
    let rx = instance.routing().mul(x);
    let mut inner = 0.0;
    let mut sq = 0.0;
    for l in 0..y.len() {
        let r = y[l] - rx[l];
        inner += z[l] * r;
        sq += r * r;
    }
    Ok(value + inner + 0.5 * rho * sq)
}
