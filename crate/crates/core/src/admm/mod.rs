//! Linearized-proximal ADMM for the utility-maximization problem (NUM) and
//! the cardinality-constrained multi-objective problem (MOPC).
//!
//! Both drivers split `y = Rx` and iterate
//!
//! ```text
//! ν      = x + (ρ/μ) Rᵀ(y − Rx + z/ρ)
//! x⁺_k   = prox of −U_k over the block's feasible set, around ν_k
//! y⁺     = argmin_y g(y) + (ρ/2)‖y − Rx⁺ + z/ρ‖²
//! z⁺     = z + γρ(y⁺ − Rx⁺)
//! ```
//!
//! with μ = mu_factor·ρ·‖R‖₂² so that the linearization majorizes the
//! coupling term.

mod options;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use options::{Init, RhoSchedule, SolveOptions, AUTO_RHO_FACTOR, DEFAULT_ADAPT_PERIOD};
use options::{DEFAULT_INCREASE_FACTOR, DEFAULT_INCREASE_PERIOD, RHO_CEILING_FACTOR};

use crate::baseline::project_cardinality;
use crate::error::{Error, Result};
use crate::model::{compute_metrics, spectral_norm_sq, Allocation, ProblemInstance};
use crate::prox::{project_y_num, prox_block, prox_no_card, solve_y_mopc, ProxInput, YProxInput};
use crate::report::{
    AuditRecord, AuditSummary, Diagnostics, SolveReport, Stationarity, Status, TraceKind, TraceRecord,
};
use crate::utility::{augmented_lagrangian, load_term, negative_utility, ProblemKind, UtilityParams};

/// Iterate of the method together with the last successive differences.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub rho: f64,
    /// Penalty the run started from; caps the increasing schedule.
    pub rho0: f64,
    pub mu: f64,
    pub iter: usize,
    pub last_dx: Vec<f64>,
    pub last_dy: Vec<f64>,
    pub last_dz: Vec<f64>,
}

/// Which stopping rule applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criteria {
    Convex,
    NonConvex,
}

impl Criteria {
    pub fn trace_kind(self) -> TraceKind {
        match self {
            Criteria::Convex => TraceKind::Convex,
            Criteria::NonConvex => TraceKind::NonConvex,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// ‖y − Rx‖, divided by max(√L, ‖y‖) under the non-convex rule.
    pub p_res: f64,
    /// ‖ρRᵀ(yʲ − yʲ⁻¹)‖.
    pub d_res: f64,
    /// ‖max(Rx − c, 0)‖ / max(√L, ‖c‖).
    pub vio: f64,
    /// ‖yʲ − yʲ⁻¹‖ / max(√L, ‖yʲ⁻¹‖).
    pub y_dif: f64,
    /// Convex thresholds √L·ε_abs + ε_rel·max(‖y‖, ‖Rx‖) and
    /// √P·ε_abs + ε_rel·‖Rᵀz‖, as computed with the options given.
    pub eps_pri: f64,
    pub eps_dual: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// Normalized capacity violation of `rx`.
pub fn violation(instance: &ProblemInstance, rx: &[f64]) -> f64 {
    let c = instance.capacities();
    let over: f64 = rx.iter().zip(c).map(|(r, c)| (r - c).max(0.0).powi(2)).sum();
    over.sqrt() / (instance.num_links() as f64).sqrt().max(norm(c))
}

pub fn compute_residuals(
    state: &AdmmState,
    instance: &ProblemInstance,
    criteria: Criteria,
    opts: &SolveOptions,
) -> Residuals {
    let routing = instance.routing();
    let rx = routing.mul(&state.x);
    let sqrt_l = (instance.num_links() as f64).sqrt();
    let sqrt_p = (instance.num_paths() as f64).sqrt();

    let gap: Vec<f64> = state.y.iter().zip(&rx).map(|(y, r)| y - r).collect();
    let raw_p = norm(&gap);
    let y_norm = norm(&state.y);
    let p_res = match criteria {
        Criteria::Convex => raw_p,
        Criteria::NonConvex => raw_p / sqrt_l.max(y_norm),
    };

    let scaled_dy: Vec<f64> = state.last_dy.iter().map(|d| state.rho * d).collect();
    let d_res = norm(&routing.tmul(&scaled_dy));

    let y_prev: Vec<f64> = state.y.iter().zip(&state.last_dy).map(|(y, d)| y - d).collect();
    let y_dif = norm(&state.last_dy) / sqrt_l.max(norm(&y_prev));

    let eps_pri = sqrt_l * opts.eps_abs + opts.eps_rel * y_norm.max(norm(&rx));
    let eps_dual = sqrt_p * opts.eps_abs + opts.eps_rel * norm(&routing.tmul(&state.z));

    Residuals {
        p_res,
        d_res,
        vio: violation(instance, &rx),
        y_dif,
        eps_pri,
        eps_dual,
    }
}

impl Residuals {
    pub fn converged(&self, criteria: Criteria, opts: &SolveOptions) -> bool {
        match criteria {
            Criteria::Convex => {
                self.p_res <= self.eps_pri && self.d_res <= self.eps_dual && self.vio <= opts.eps_tol
            }
            Criteria::NonConvex => {
                self.p_res <= opts.eps_tol1 && self.y_dif <= opts.eps_tol1 && self.vio <= opts.eps_tol2
            }
        }
    }

    fn second(&self, criteria: Criteria) -> f64 {
        match criteria {
            Criteria::Convex => self.d_res,
            Criteria::NonConvex => self.y_dif,
        }
    }
}

fn resolve_schedule(schedule: RhoSchedule, criteria: Criteria) -> RhoSchedule {
    match (schedule, criteria) {
        (RhoSchedule::Auto, Criteria::Convex) => RhoSchedule::Adaptive,
        (RhoSchedule::Auto, Criteria::NonConvex) => RhoSchedule::Increasing {
            factor: DEFAULT_INCREASE_FACTOR,
            period: DEFAULT_INCREASE_PERIOD,
        },
        (s, _) => s,
    }
}

/// Applies the penalty rule after iteration `state.iter` and recomputes μ.
/// Returns whether ρ changed. `z` is stored unscaled, so it needs no
/// rescaling.
pub fn update_rho(
    state: &mut AdmmState,
    residuals: &Residuals,
    opts: &SolveOptions,
    criteria: Criteria,
    norm_r_sq: f64,
) -> bool {
    let old = state.rho;
    let rho = match resolve_schedule(opts.rho_schedule, criteria) {
        RhoSchedule::Adaptive if state.iter.is_multiple_of(opts.adapt_period) => {
            if residuals.p_res > 10.0 * residuals.d_res {
                old * 2.0
            } else if residuals.d_res > 10.0 * residuals.p_res {
                old / 2.0
            } else {
                old
            }
        }
        RhoSchedule::Increasing { factor, period } => {
            let ceiling = RHO_CEILING_FACTOR * state.rho0;
            if state.iter > 0 && state.iter.is_multiple_of(period) && old < ceiling {
                (old * factor).min(ceiling)
            } else {
                old
            }
        }
        _ => old,
    };
    state.rho = rho;
    state.mu = opts.mu_factor * rho * norm_r_sq;
    rho != old
}

/// Evaluates the sufficient-decrease inequality
/// `L(prev) − L(next) + ‖E_z‖²/ρ ≥ (μ − ρ‖R‖²)/2 ‖E_x‖² + (ρ/2)‖E_y‖²`
/// between consecutive iterates produced with the same ρ and μ.
pub fn audit_decrease(
    prev: &AdmmState,
    next: &AdmmState,
    instance: &ProblemInstance,
    kind: ProblemKind,
    norm_r_sq: f64,
) -> Result<AuditRecord> {
    if prev.rho != next.rho || prev.mu != next.mu {
        return Err(Error::Config("decrease audit needs a fixed rho and mu".into()));
    }
    let (rho, mu) = (next.rho, next.mu);
    let l_prev = augmented_lagrangian(instance, &prev.x, &prev.y, &prev.z, rho, kind)?;
    let l_next = augmented_lagrangian(instance, &next.x, &next.y, &next.z, rho, kind)?;
    Ok(decrease_record(next.iter, l_prev, l_next, next, rho, mu, norm_r_sq))
}

fn decrease_record(
    iter: usize,
    l_prev: f64,
    l_next: f64,
    next: &AdmmState,
    rho: f64,
    mu: f64,
    norm_r_sq: f64,
) -> AuditRecord {
    let lhs = l_prev - l_next + norm_sq(&next.last_dz) / rho;
    let rhs = 0.5 * (mu - rho * norm_r_sq) * norm_sq(&next.last_dx) + 0.5 * rho * norm_sq(&next.last_dy);
    let scale = l_prev.abs().max(l_next.abs()).max(1.0);
    AuditRecord::new(iter, lhs, rhs, scale)
}

fn initial_x(instance: &ProblemInstance, init: Init, kind: ProblemKind) -> Vec<f64> {
    let base = instance.min_capacity() / (2.0 * instance.num_paths() as f64);
    let x: Vec<f64> = match init {
        Init::Uniform => vec![base; instance.num_paths()],
        Init::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..instance.num_paths())
                .map(|_| base * rng.gen_range(0.5..1.5))
                .collect()
        }
    };
    match kind {
        ProblemKind::Num => x,
        ProblemKind::Mopc => project_cardinality(instance, &x),
    }
}

pub fn solve_num(instance: &ProblemInstance, opts: &SolveOptions) -> Result<SolveReport> {
    run(instance, opts, ProblemKind::Num, "num")
}

/// Convex path when every flow is uncapped, non-convex path otherwise.
pub fn solve_mopc(instance: &ProblemInstance, opts: &SolveOptions) -> Result<SolveReport> {
    let scheme = if instance.is_uncapped() { "cvx-mopc" } else { "mopc" };
    run(instance, opts, ProblemKind::Mopc, scheme)
}

fn x_update(
    instance: &ProblemInstance,
    kind: ProblemKind,
    nu: &[f64],
    mu: f64,
    out: &mut [f64],
) -> Result<()> {
    for k in 0..instance.num_flows() {
        let block = instance.block(k);
        let input = ProxInput {
            nu: &nu[block.clone()],
            mu,
            params: UtilityParams::for_flow(instance, k),
            cap: instance.cardinality_caps()[k],
        };
        let sol = match kind {
            ProblemKind::Num => prox_no_card(&input)?,
            ProblemKind::Mopc => prox_block(&input)?,
        };
        out[block].copy_from_slice(&sol.x);
    }
    Ok(())
}

fn objective(instance: &ProblemInstance, kind: ProblemKind, x: &[f64], rx: &[f64]) -> Result<f64> {
    let mut value = negative_utility(instance, x)?;
    if kind == ProblemKind::Mopc {
        value += load_term(instance, rx);
    }
    Ok(value)
}

fn run(instance: &ProblemInstance, opts: &SolveOptions, kind: ProblemKind, scheme: &str) -> Result<SolveReport> {
    opts.validate()?;
    let routing = instance.routing();
    let spectral = spectral_norm_sq(routing)?;
    let norm_r_sq = spectral.norm_sq;
    let criteria = if kind == ProblemKind::Num || instance.is_uncapped() {
        Criteria::Convex
    } else {
        Criteria::NonConvex
    };
    // The decrease argument for the capped problem assumes the plain
    // multiplier step.
    let gamma = match criteria {
        Criteria::Convex => opts.gamma,
        Criteria::NonConvex => 1.0,
    };
    let caps = instance.capacities();
    let (num_l, num_p) = (instance.num_links(), instance.num_paths());

    let x0 = initial_x(instance, opts.init, kind);
    let rx0 = routing.mul(&x0);
    let y0: Vec<f64> = rx0
        .iter()
        .zip(caps)
        .map(|(r, c)| match kind {
            ProblemKind::Num => r.min(*c),
            ProblemKind::Mopc => r.clamp(0.0, *c),
        })
        .collect();
    let rho0 = opts.initial_rho(instance);
    let mut state = AdmmState {
        x: x0,
        y: y0,
        z: vec![0.0; num_l],
        rho: rho0,
        rho0,
        mu: opts.mu_factor * rho0 * norm_r_sq,
        iter: 0,
        last_dx: vec![0.0; num_p],
        last_dy: vec![0.0; num_l],
        last_dz: vec![0.0; num_l],
    };

    let l0 = augmented_lagrangian(instance, &state.x, &state.y, &state.z, state.rho, kind)?;
    let ceiling = opts.divergence_factor * l0.abs().max(1.0);
    let mut l_curr = l0;
    let mut rho_changed = false;

    let mut trace = Vec::with_capacity(opts.max_iters.min(1 << 16));
    let mut audit = opts.audit_decrease.then(AuditSummary::default);
    let mut sum_dz_sq = 0.0;
    let mut max_z_norm = 0.0_f64;
    let mut stationarity = None;
    let mut last_t = None;
    let mut status = Status::MaxIters;
    let mut message = None;

    let mut rx = rx0;
    let mut nu = vec![0.0; num_p];
    let mut x_new = vec![0.0; num_p];

    while state.iter < opts.max_iters {
        let (rho, mu) = (state.rho, state.mu);

        let resid: Vec<f64> = (0..num_l)
            .map(|l| state.y[l] - rx[l] + state.z[l] / rho)
            .collect();
        let q = routing.tmul(&resid);
        for p in 0..num_p {
            nu[p] = state.x[p] + (rho / mu) * q[p];
        }

        if let Err(e) = x_update(instance, kind, &nu, mu, &mut x_new) {
            status = Status::Error;
            message = Some(format!("x-update failed at iteration {}: {e}", state.iter + 1));
            break;
        }
        let rx_new = routing.mul(&x_new);
        let theta: Vec<f64> = (0..num_l).map(|l| rx_new[l] - state.z[l] / rho).collect();
        let y_new = match kind {
            ProblemKind::Num => project_y_num(&theta, caps)?,
            ProblemKind::Mopc => {
                let sol = solve_y_mopc(&YProxInput {
                    theta: &theta,
                    capacities: caps,
                    alpha: instance.alpha(),
                    rho,
                })?;
                last_t = Some(sol.t);
                sol.y
            }
        };
        let z_new: Vec<f64> = (0..num_l)
            .map(|l| state.z[l] + gamma * rho * (y_new[l] - rx_new[l]))
            .collect();

        let next = AdmmState {
            last_dx: x_new.iter().zip(&state.x).map(|(a, b)| a - b).collect(),
            last_dy: y_new.iter().zip(&state.y).map(|(a, b)| a - b).collect(),
            last_dz: z_new.iter().zip(&state.z).map(|(a, b)| a - b).collect(),
            x: x_new.clone(),
            y: y_new,
            z: z_new,
            rho,
            rho0: state.rho0,
            mu,
            iter: state.iter + 1,
        };

        // Optimality-condition residuals with the realized subproblem outputs.
        let xs: Vec<f64> = (0..num_l)
            .map(|l| rho * (state.y[l] - rx[l]) - next.last_dz[l])
            .collect();
        let x_cond: Vec<f64> = routing
            .tmul(&xs)
            .iter()
            .zip(&next.last_dx)
            .map(|(a, d)| a - mu * d)
            .collect();
        let y_cond: Vec<f64> = (0..num_l)
            .map(|l| next.last_dz[l] - rho * (next.y[l] - rx_new[l]))
            .collect();
        let consensus: Vec<f64> = (0..num_l).map(|l| next.y[l] - rx_new[l]).collect();
        stationarity = Some(Stationarity {
            x_residual: norm(&x_cond),
            y_residual: norm(&y_cond),
            consensus: norm(&consensus),
        });

        let l_next = augmented_lagrangian(instance, &next.x, &next.y, &next.z, rho, kind)?;
        if let Some(summary) = audit.as_mut() {
            if rho_changed {
                summary.skipped += 1;
            } else {
                let record = decrease_record(next.iter, l_curr, l_next, &next, rho, mu, norm_r_sq);
                summary.push(record, opts.keep_audit_records);
            }
        }

        sum_dz_sq += norm_sq(&next.last_dz);
        max_z_norm = max_z_norm.max(norm(&next.z));

        let residuals = compute_residuals(&next, instance, criteria, opts);
        trace.push(TraceRecord {
            iter: next.iter,
            rho,
            mu,
            p_res: residuals.p_res,
            second: residuals.second(criteria),
            vio: residuals.vio,
            l_rho: l_next,
            obj: objective(instance, kind, &next.x, &rx_new)?,
        });

        state = next;
        rx = rx_new;
        l_curr = l_next;

        if !l_next.is_finite() || l_next.abs() > ceiling {
            status = Status::Error;
            message = Some(format!(
                "augmented Lagrangian diverged at iteration {}: |L| = {:e} exceeds {:e}",
                state.iter,
                l_next.abs(),
                ceiling
            ));
            break;
        }
        if residuals.converged(criteria, opts) {
            status = Status::Converged;
            break;
        }

        rho_changed = update_rho(&mut state, &residuals, opts, criteria, norm_r_sq);
        if rho_changed {
            // L must be re-evaluated at the new penalty for the next audit.
            l_curr = augmented_lagrangian(instance, &state.x, &state.y, &state.z, state.rho, kind)?;
        }
    }

    if status == Status::MaxIters && kind == ProblemKind::Mopc {
        let vio = violation(instance, &rx);
        if vio > opts.max_final_vio {
            status = Status::Error;
            message = Some(format!(
                "final capacity violation {vio:e} exceeds {:e}",
                opts.max_final_vio
            ));
        }
    }

    let metrics = compute_metrics(instance, &state.x).ok();
    Ok(SolveReport {
        scheme: scheme.to_string(),
        status,
        message,
        iterations: state.iter,
        x: Allocation::from_vec_unchecked(state.x),
        y: state.y,
        z: state.z,
        t: last_t,
        metrics,
        trace_kind: criteria.trace_kind(),
        trace,
        diagnostics: Diagnostics {
            spectral: Some(spectral),
            audit,
            sum_dz_sq,
            max_z_norm,
            stationarity,
            lp_pivots: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Flow, Link};

    fn single(c: f64, s: f64, alpha: f64) -> ProblemInstance {
        ProblemInstance::new(
            vec![Link { id: 0, capacity_bps: c }],
            vec![Flow { id: 0, size_bits: s, cardinality_cap: 1, paths: vec![vec![0]] }],
            alpha,
            0.05,
        )
        .unwrap()
    }

    fn state_with(x: Vec<f64>, y: Vec<f64>, dy: Vec<f64>) -> AdmmState {
        let (p, l) = (x.len(), y.len());
        AdmmState {
            x,
            y,
            z: vec![0.0; l],
            rho: 1.0,
            rho0: 1.0,
            mu: 2.0,
            iter: 1,
            last_dx: vec![0.0; p],
            last_dy: dy,
            last_dz: vec![0.0; l],
        }
    }

    #[test]
    fn residuals_vanish_at_consensus_and_rest() {
        let inst = single(10.0, 5.0, 0.0);
        let s = state_with(vec![3.0], vec![3.0], vec![0.0]);
        let opts = SolveOptions::default();
        for criteria in [Criteria::Convex, Criteria::NonConvex] {
            let r = compute_residuals(&s, &inst, criteria, &opts);
            assert_eq!(r.p_res, 0.0);
            assert_eq!(r.d_res, 0.0);
            assert_eq!(r.y_dif, 0.0);
            assert_eq!(r.vio, 0.0);
        }
        let over = state_with(vec![12.0], vec![10.0], vec![1.0]);
        let r = compute_residuals(&over, &inst, Criteria::Convex, &opts);
        assert_eq!(r.p_res, 2.0);
        assert_eq!(r.vio, 2.0 / 10.0);
        assert_eq!(r.d_res, 1.0);
        assert_eq!(r.y_dif, 1.0 / 9.0);
    }

    #[test]
    fn adaptive_rule() {
        let opts = SolveOptions { rho_schedule: RhoSchedule::Adaptive, adapt_period: 1, ..Default::default() };
        let mut s = state_with(vec![1.0], vec![1.0], vec![0.0]);
        let mk = |p, d| Residuals { p_res: p, d_res: d, vio: 0.0, y_dif: 0.0, eps_pri: 0.0, eps_dual: 0.0 };
        assert!(!update_rho(&mut s, &mk(1.0, 1.0), &opts, Criteria::Convex, 1.0));
        assert_eq!(s.rho, 1.0);
        assert!(update_rho(&mut s, &mk(100.0, 1.0), &opts, Criteria::Convex, 1.0));
        assert_eq!(s.rho, 2.0);
        assert_eq!(s.mu, 1.1 * 2.0);
        assert!(update_rho(&mut s, &mk(1.0, 100.0), &opts, Criteria::Convex, 1.0));
        assert_eq!(s.rho, 1.0);
    }

    #[test]
    fn increasing_schedule_counts() {
        let opts = SolveOptions::default();
        let mut s = state_with(vec![1.0], vec![1.0], vec![0.0]);
        let r = Residuals { p_res: 1.0, d_res: 1.0, vio: 0.0, y_dif: 0.0, eps_pri: 0.0, eps_dual: 0.0 };
        let mut increases = 0;
        for it in 1..=300 {
            s.iter = it;
            if update_rho(&mut s, &r, &opts, Criteria::NonConvex, 3.0) {
                increases += 1;
            }
            assert!(s.mu > s.rho * 3.0);
        }
        assert_eq!(increases, 3);
        assert!((s.rho - 1.5f64.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn increasing_schedule_stops_at_ceiling() {
        let opts = SolveOptions {
            rho_schedule: RhoSchedule::Increasing { factor: 1e3, period: 1 },
            ..Default::default()
        };
        let mut s = state_with(vec![1.0], vec![1.0], vec![0.0]);
        let r = Residuals { p_res: 1.0, d_res: 1.0, vio: 0.0, y_dif: 0.0, eps_pri: 0.0, eps_dual: 0.0 };
        for it in 1..=10 {
            s.iter = it;
            update_rho(&mut s, &r, &opts, Criteria::NonConvex, 1.0);
        }
        assert_eq!(s.rho, 1e8);
    }

    #[test]
    fn stationary_iterate_audits_to_zero() {
        let inst = single(10.0, 5.0, 500.0);
        let s = state_with(vec![2.0], vec![2.0], vec![0.0]);
        let rec = audit_decrease(&s, &s, &inst, ProblemKind::Mopc, 1.0).unwrap();
        assert_eq!(rec.lhs, 0.0);
        assert_eq!(rec.rhs, 0.0);
        assert!(rec.ok);
        let mut other = s.clone();
        other.rho = 2.0;
        assert!(audit_decrease(&s, &other, &inst, ProblemKind::Mopc, 1.0).is_err());
    }

    #[test]
    fn single_link_num_saturates() {
        let inst = single(10.0, 5.0, 0.0);
        let report = solve_num(&inst, &SolveOptions { max_iters: 20_000, ..Default::default() }).unwrap();
        assert!((report.x.as_slice()[0] - 10.0).abs() <= 1e-3, "{:?}", report.x);
        assert_ne!(report.status, Status::Error);
    }

    #[test]
    fn single_link_mopc_matches_scalar_root() {
        let inst = single(10.0, 5.0, 500.0);
        let report = solve_mopc(&inst, &SolveOptions::default()).unwrap();
        let expect = (0.05 + (0.05f64 * 0.05 + 4.0 * 50.0 * 5.0).sqrt()) / 100.0;
        assert!((report.x.as_slice()[0] - expect).abs() <= 1e-3, "{:?} {:?}", report.x, report.status);
    }
}
