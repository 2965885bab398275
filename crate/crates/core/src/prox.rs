//! Per-flow x-subproblems and the link-level y-subproblems.
//!
//! Every x-block subproblem has the form
//!
//! ```text
//! minimize  −U(Σ_i x_i) + (μ/2)‖x − ν‖²   over x ≥ 0, ‖x‖₀ ≤ w
//! ```
//!
//! Its solution keeps the `w` largest entries of ν (stable order), shifts
//! them by a common ζ > 0 and clips at zero, with ζ fixed by
//! μζ = U′(Σ_i max(0, ν_i + ζ)).

use crate::cubicroot::{max_real_root, solve_breakpoint_cubic, Cubic};
use crate::error::{Error, Result};
use crate::search::minimize_bounded;
use crate::utility::UtilityParams;

#[derive(Debug, Clone, Copy)]
pub struct ProxInput<'a> {
    /// Linearized target ν_k.
    pub nu: &'a [f64],
    pub mu: f64,
    pub params: UtilityParams,
    pub cap: usize,
}

impl ProxInput<'_> {
    fn validate(&self) -> Result<()> {
        if self.nu.is_empty() {
            return Err(Error::Domain {
                what: "prox",
                detail: "empty block".into(),
            });
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Domain {
                what: "prox",
                detail: format!("mu must be positive, got {}", self.mu),
            });
        }
        if let Some(i) = self.nu.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain {
                what: "prox",
                detail: format!("nu[{i}] is not finite"),
            });
        }
        if self.cap == 0 || self.cap > self.nu.len() {
            return Err(Error::Domain {
                what: "prox",
                detail: format!("cap {} outside 1..={}", self.cap, self.nu.len()),
            });
        }
        Ok(())
    }

    /// Subproblem objective −U(Σx) + (μ/2)‖x − ν‖²; +∞ when Σx ≤ 0.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let total: f64 = x.iter().sum();
        if !(total > 0.0) {
            return f64::INFINITY;
        }
        let dist: f64 = x.iter().zip(self.nu).map(|(a, b)| (a - b) * (a - b)).sum();
        -self.params.value_unchecked(total) + 0.5 * self.mu * dist
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxSolution {
    pub x: Vec<f64>,
    /// Common shift applied to the kept entries.
    pub zeta: f64,
    /// Number of leading sorted entries entering the cubic, i.e. the
    /// bracket `(−ν_(active), −ν_(active+1)]` found by the breakpoint scan.
    pub active: usize,
}

/// Indices of `values` sorted descending; equal values keep index order.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

/// Solves the shift equation on a descending-sorted slice.
///
/// Scans candidates ζ = −v_i (i ≥ 1) for the first where μζ ≥ U′ of the
/// implied total; the root then lies in the preceding interval and only the
/// entries before `i` are positive.
fn shift_for_sorted(sorted: &[f64], mu: f64, params: &UtilityParams) -> Result<(f64, usize)> {
    let n = sorted.len();
    let mut active = n;
    let mut prefix = sorted[0];
    for i in 1..n {
        let cand = -sorted[i];
        if cand > 0.0 {
            // Σ_{j<i} (v_j − v_i): the total rate if ζ sat at this breakpoint.
            let total = prefix - i as f64 * sorted[i];
            if total > 0.0 && mu * cand >= params.grad_unchecked(total) {
                active = i;
                break;
            }
        }
        prefix += sorted[i];
    }
    let partial: f64 = sorted[..active].iter().sum();
    let zeta = solve_breakpoint_cubic(mu, params.beta, params.size, partial, active)?;
    Ok((zeta, active))
}

fn prox_top(input: &ProxInput<'_>, keep: usize) -> Result<ProxSolution> {
    let order = descending_order(input.nu);
    let sorted: Vec<f64> = order[..keep].iter().map(|&i| input.nu[i]).collect();
    let (zeta, active) = shift_for_sorted(&sorted, input.mu, &input.params)?;
    let mut x = vec![0.0; input.nu.len()];
    for &i in &order[..keep] {
        x[i] = (input.nu[i] + zeta).max(0.0);
    }
    if x.iter().all(|v| *v == 0.0) {
        // Rounding pushed the only kept entry to zero; ζ sits just above −ν.
        return Err(Error::Numerical(format!(
            "prox produced an all-zero block (zeta = {zeta}, nu_max = {})",
            sorted[0]
        )));
    }
    Ok(ProxSolution { x, zeta, active })
}

/// Block without an effective cap.
pub fn prox_no_card(input: &ProxInput<'_>) -> Result<ProxSolution> {
    let cap = input.nu.len();
    ProxInput { cap, ..*input }.validate()?;
    prox_top(input, cap)
}

/// Block with cap 1: a single positive entry at the largest ν (lowest index on
/// ties), equal to the largest root of μa³ − μν a² − βa − s.
pub fn prox_card_one(input: &ProxInput<'_>) -> Result<ProxSolution> {
    input.validate()?;
    if input.cap != 1 {
        return Err(Error::Domain {
            what: "prox_card_one",
            detail: format!("cap must be 1, got {}", input.cap),
        });
    }
    let best = descending_order(input.nu)[0];
    let nu = input.nu[best];
    let (mu, beta, s) = (input.mu, input.params.beta, input.params.size);
    let mut a = max_real_root(&Cubic::new(mu, -mu * nu, -beta, -s)?);
    if !(a > 0.0) {
        a = nu + solve_breakpoint_cubic(mu, beta, s, nu, 1)?;
    }
    if !(a > 0.0) {
        return Err(Error::Numerical(format!("no positive root for cap-one block (nu = {nu})")));
    }
    let mut x = vec![0.0; input.nu.len()];
    x[best] = a;
    Ok(ProxSolution {
        x,
        zeta: a - nu,
        active: 1,
    })
}

/// Block with 1 < cap < P: only the `cap` largest ν entries may be positive.
pub fn prox_card_w(input: &ProxInput<'_>) -> Result<ProxSolution> {
    input.validate()?;
    if !(input.cap > 1 && input.cap < input.nu.len()) {
        return Err(Error::Domain {
            what: "prox_card_w",
            detail: format!("need 1 < cap < {}, got {}", input.nu.len(), input.cap),
        });
    }
    prox_top(input, input.cap)
}

/// Dispatches on the cap the way the cardinality-constrained driver does.
pub fn prox_block(input: &ProxInput<'_>) -> Result<ProxSolution> {
    if input.cap == 1 {
        prox_card_one(input)
    } else if input.cap < input.nu.len() {
        prox_card_w(input)
    } else {
        prox_no_card(input)
    }
}

/// Projection onto {y ≤ c}; there is no lower clamp.
pub fn project_y_num(theta: &[f64], capacities: &[f64]) -> Result<Vec<f64>> {
    if theta.len() != capacities.len() {
        return Err(Error::Dimension {
            what: "theta",
            got: theta.len(),
            expected: capacities.len(),
        });
    }
    Ok(theta.iter().zip(capacities).map(|(t, c)| t.min(*c)).collect())
}

#[derive(Debug, Clone, Copy)]
pub struct YProxInput<'a> {
    /// θ = Rx − z/ρ.
    pub theta: &'a [f64],
    pub capacities: &'a [f64],
    pub alpha: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct YSolution {
    pub t: f64,
    pub y: Vec<f64>,
    pub evals: usize,
}

pub const Y_SEARCH_XTOL: f64 = 1e-8;
pub const Y_SEARCH_MAX_EVALS: usize = 500;

impl YProxInput<'_> {
    fn validate(&self) -> Result<()> {
        if self.theta.len() != self.capacities.len() {
            return Err(Error::Dimension {
                what: "theta",
                got: self.theta.len(),
                expected: self.capacities.len(),
            });
        }
        if !(self.rho > 0.0) || !(self.alpha >= 0.0) {
            return Err(Error::Domain {
                what: "y-subproblem",
                detail: format!("rho={}, alpha={}", self.rho, self.alpha),
            });
        }
        if self.capacities.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::Domain {
                what: "y-subproblem",
                detail: "capacities must be positive".into(),
            });
        }
        Ok(())
    }

    /// y(t): θ clamped to [0, min(c, t·c)].
    pub fn y_at(&self, t: f64) -> Vec<f64> {
        self.theta
            .iter()
            .zip(self.capacities)
            .map(|(&th, &c)| th.min(c.min(t * c)).max(0.0))
            .collect()
    }

    /// Φ(t) = αt + (ρ/2)‖y(t) − θ‖².
    pub fn phi(&self, t: f64) -> f64 {
        let mut sq = 0.0;
        for (&th, &c) in self.theta.iter().zip(self.capacities) {
            let y = th.min(c.min(t * c)).max(0.0);
            sq += (y - th) * (y - th);
        }
        self.alpha * t + 0.5 * self.rho * sq
    }
}

/// Minimizes αt + (ρ/2)‖y − θ‖² over 0 ≤ y ≤ t·c, 0 ≤ t ≤ 1 by a 1-D
/// search on the convex reduced function Φ.
pub fn solve_y_mopc(input: &YProxInput<'_>) -> Result<YSolution> {
    input.validate()?;
    if input.alpha == 0.0 {
        let y = input.y_at(1.0);
        let t = y
            .iter()
            .zip(input.capacities)
            .map(|(y, c)| y / c)
            .fold(0.0, f64::max);
        return Ok(YSolution { t, y, evals: 0 });
    }

    let found = minimize_bounded(|t| input.phi(t), 0.0, 1.0, Y_SEARCH_XTOL, Y_SEARCH_MAX_EVALS);
    let mut best = (found.x, found.fx);
    for t in [0.0, 1.0] {
        let f = input.phi(t);
        if f < best.1 {
            best = (t, f);
        }
    }

    // Φ is quadratic between breakpoints θ_l/c_l; jump to the stationary
    // point of the piece holding the current best.
    let t0 = best.0;
    let (mut num, mut den) = (0.0, 0.0);
    for (&th, &c) in input.theta.iter().zip(input.capacities) {
        if th > t0 * c {
            num += c * th;
            den += c * c;
        }
    }
    if den > 0.0 {
        let cand = ((num - input.alpha / input.rho) / den).clamp(0.0, 1.0);
        let f = input.phi(cand);
        if f < best.1 {
            best = (cand, f);
        }
    }

    Ok(YSolution {
        t: best.0,
        y: input.y_at(best.0),
        evals: found.evals + 2,
    })
}
