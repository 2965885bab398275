//! Frank–Wolfe baseline on the convex model with a load variable `t`:
//!
//! ```text
//! min  −Σ_k U_k(‖x_k‖₁) + α t
//! s.t. Rx ≤ t c,  0 ≤ t ≤ 1,  x ≥ 0,
//!      Σ_i x_{k,i} / ĉ_{k,i} ≤ w_k      (relaxed variant only)
//! ```
//!
//! where ĉ_{k,i} is the bottleneck capacity of path i. The linear oracle is a
//! small dense simplex.

use serde::{Deserialize, Serialize};

use crate::admm::violation;
use crate::error::{Error, Result};
use crate::model::{compute_metrics, Allocation, ProblemInstance};
use crate::report::{Diagnostics, SolveReport, Status, TraceKind, TraceRecord};
use crate::utility::UtilityParams;

/// Fraction of the smallest bottleneck capacity below which a flow total is
/// not allowed to fall during a step.
pub const FLOW_FLOOR_FACTOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct RelaxedInstance {
    pub base: ProblemInstance,
    /// Bottleneck capacity of every path, in path order.
    pub bottleneck_caps: Vec<f64>,
    /// Whether the linearized cardinality rows are part of the polytope.
    pub cardinality_rows: bool,
}

/// Convex relaxation with the linearized cardinality rows.
pub fn build_relaxed(instance: &ProblemInstance) -> RelaxedInstance {
    let caps = instance.capacities();
    let routing = instance.routing();
    let bottleneck_caps = (0..instance.num_paths())
        .map(|p| {
            routing
                .column(p)
                .iter()
                .map(|&l| caps[l])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    RelaxedInstance {
        base: instance.clone(),
        bottleneck_caps,
        cardinality_rows: true,
    }
}

/// Same polytope without the cardinality rows, i.e. the plain convex model.
pub fn build_convex(instance: &ProblemInstance) -> RelaxedInstance {
    RelaxedInstance {
        cardinality_rows: false,
        ..build_relaxed(instance)
    }
}

/// Vertex returned by [`lmo`].
#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub x: Vec<f64>,
    pub t: f64,
    /// Value of the linear form at the vertex.
    pub value: f64,
    pub pivots: usize,
}

/// Dense simplex for `min cᵀu  s.t.  Au ≤ b, u ≥ 0` with `b ≥ 0`, so the
/// slack basis is feasible from the start. Bland's rule for both choices.
struct Tableau {
    rows: usize,
    cols: usize,
    /// rows × (cols + rows) coefficients followed by the rhs, row-major.
    data: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
}

const PIVOT_TOL: f64 = 1e-9;
const LMO_FEAS_TOL: f64 = 1e-7;

impl Tableau {
    fn width(&self) -> usize {
        self.cols + self.rows + 1
    }

    fn new(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Self {
        let rows = a.len();
        let cols = c.len();
        let width = cols + rows + 1;
        let mut data = vec![0.0; rows * width];
        for (i, row) in a.iter().enumerate() {
            data[i * width..i * width + cols].copy_from_slice(row);
            data[i * width + cols + i] = 1.0;
            data[i * width + width - 1] = b[i];
        }
        let mut cost = vec![0.0; width];
        cost[..cols].copy_from_slice(c);
        Tableau {
            rows,
            cols,
            data,
            cost,
            basis: (cols..cols + rows).collect(),
        }
    }

    fn solve(&mut self, max_pivots: usize) -> Result<usize> {
        let width = self.width();
        let scale = self.cost[..self.cols].iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut pivots = 0;
        loop {
            let Some(enter) = (0..width - 1).find(|&j| self.cost[j] < -PIVOT_TOL * scale) else {
                return Ok(pivots);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.data[i * width + enter];
                if a > PIVOT_TOL {
                    // Round-off can push a degenerate rhs just below zero; a
                    // negative ratio would move the objective uphill.
                    let ratio = self.data[i * width + width - 1].max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            if ratio < best || (ratio == best && self.basis[i] < self.basis[r]) {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return Err(Error::Numerical("linear oracle is unbounded".into()));
            };
            self.pivot(row, enter);
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::Numerical(format!("simplex exceeded {max_pivots} pivots")));
            }
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.width();
        let p = self.data[row * width + col];
        for v in &mut self.data[row * width..(row + 1) * width] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.data[row * width..(row + 1) * width].to_vec();
        for i in 0..self.rows {
            if i == row {
                continue;
            }
            let f = self.data[i * width + col];
            if f != 0.0 {
                for (v, pv) in self.data[i * width..(i + 1) * width].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.data[i * width + col] = 0.0;
            }
        }
        let f = self.cost[col];
        if f != 0.0 {
            for (v, pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.cost[col] = 0.0;
        }
        for i in 0..self.rows {
            let rhs = &mut self.data[i * width + width - 1];
            if *rhs < 0.0 {
                *rhs = 0.0;
            }
        }
        self.basis[row] = col;
    }

    fn primal(&self) -> Vec<f64> {
        let width = self.width();
        let mut u = vec![0.0; self.cols];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.cols {
                u[b] = self.data[i * width + width - 1].max(0.0);
            }
        }
        u
    }
}

/// Minimizes `grad_x·x + grad_t·t` over the polytope of `relaxed`.
///
/// Internally every path variable is rescaled by its bottleneck capacity and
/// every capacity row by its link capacity, so the tableau is O(1) even with
/// capacities in the 1e9..1e11 range.
pub fn lmo(relaxed: &RelaxedInstance, grad_x: &[f64], grad_t: f64) -> Result<Vertex> {
    let inst = &relaxed.base;
    let (num_p, num_l) = (inst.num_paths(), inst.num_links());
    if grad_x.len() != num_p {
        return Err(Error::Dimension { what: "gradient", got: grad_x.len(), expected: num_p });
    }
    if !grad_t.is_finite() || grad_x.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical("non-finite gradient passed to the linear oracle".into()));
    }
    let chat = &relaxed.bottleneck_caps;
    let caps = inst.capacities();
    let cols = num_p + 1;
    let mut a = Vec::with_capacity(num_l + inst.num_flows() + 1);
    let mut b = Vec::with_capacity(a.capacity());
    for l in 0..num_l {
        let mut row = vec![0.0; cols];
        for &p in inst.routing().row(l) {
            row[p] = chat[p] / caps[l];
        }
        row[num_p] = -1.0;
        a.push(row);
        b.push(0.0);
    }
    if relaxed.cardinality_rows {
        for k in 0..inst.num_flows() {
            let mut row = vec![0.0; cols];
            for p in inst.block(k) {
                row[p] = 1.0;
            }
            a.push(row);
            b.push(inst.cardinality_caps()[k] as f64);
        }
    }
    let mut t_row = vec![0.0; cols];
    t_row[num_p] = 1.0;
    a.push(t_row);
    b.push(1.0);

    let mut cost: Vec<f64> = grad_x.iter().zip(chat).map(|(g, c)| g * c).collect();
    cost.push(grad_t);

    let mut tableau = Tableau::new(&a, &b, &cost);
    let max_pivots = 50 * (a.len() + cols).max(100);
    let pivots = tableau.solve(max_pivots)?;
    let u = tableau.primal();
    let x: Vec<f64> = u[..num_p].iter().zip(chat).map(|(u, c)| u * c).collect();
    let t = u[num_p].min(1.0);
    let worst_row = a
        .iter()
        .zip(&b)
        .map(|(row, b)| row.iter().zip(&u).map(|(a, u)| a * u).sum::<f64>() - b)
        .fold(0.0, f64::max);
    if worst_row > LMO_FEAS_TOL {
        return Err(Error::Numerical(format!(
            "linear oracle vertex violates a row by {worst_row:e}"
        )));
    }
    let value = grad_x.iter().zip(&x).map(|(g, x)| g * x).sum::<f64>() + grad_t * t;
    Ok(Vertex { x, t, value, pivots })
}

/// Keeps the `w_k` largest entries of every flow block (lowest index wins
/// ties) and zeroes the rest.
pub fn project_cardinality(instance: &ProblemInstance, x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    for k in 0..instance.num_flows() {
        let block = instance.block(k);
        let cap = instance.cardinality_caps()[k];
        let vals = &x[block.clone()];
        let mut idx: Vec<usize> = (0..vals.len()).collect();
        idx.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
        for &i in &idx[cap..] {
            out[block.start + i] = 0.0;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// η_m = 2/(m+2).
    Harmonic,
    /// Exact minimization along the segment by bisection on the derivative.
    LineSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwOptions {
    pub step: StepRule,
    pub max_iters: usize,
    /// Stop once the duality gap is at most `gap_rtol·|f| + gap_atol`.
    pub gap_rtol: f64,
    pub gap_atol: f64,
}

impl Default for FwOptions {
    fn default() -> Self {
        FwOptions {
            step: StepRule::LineSearch,
            max_iters: 20_000,
            gap_rtol: 1e-6,
            gap_atol: 1e-12,
        }
    }
}

impl FwOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if !(self.gap_rtol >= 0.0 && self.gap_atol >= 0.0) {
            return Err(Error::Config("gap tolerances must be nonnegative".into()));
        }
        Ok(())
    }
}

struct Smooth<'a> {
    inst: &'a ProblemInstance,
    params: Vec<UtilityParams>,
}

impl<'a> Smooth<'a> {
    fn new(inst: &'a ProblemInstance) -> Self {
        let params = (0..inst.num_flows()).map(|k| UtilityParams::for_flow(inst, k)).collect();
        Smooth { inst, params }
    }

    fn value(&self, totals: &[f64], t: f64) -> f64 {
        let u: f64 = self.params.iter().zip(totals).map(|(p, &s)| p.value_unchecked(s)).sum();
        -u + self.inst.alpha() * t
    }

    /// Derivative of the objective along (D, Dt) at totals S + ηD.
    fn slope(&self, totals: &[f64], dir: &[f64], dt: f64, eta: f64) -> f64 {
        let mut d = self.inst.alpha() * dt;
        for ((p, &s), &ds) in self.params.iter().zip(totals).zip(dir) {
            if ds != 0.0 {
                d -= p.grad_unchecked(s + eta * ds) * ds;
            }
        }
        d
    }
}

fn load_of(inst: &ProblemInstance, x: &[f64]) -> f64 {
    inst.routing()
        .mul(x)
        .iter()
        .zip(inst.capacities())
        .map(|(r, c)| r / c)
        .fold(0.0, f64::max)
}

/// Runs Frank–Wolfe. `t` is tightened to the realized load after every step,
/// which keeps the iterate feasible and never increases the objective.
pub fn fw_solve(relaxed: &RelaxedInstance, opts: &FwOptions) -> Result<SolveReport> {
    opts.validate()?;
    let inst = &relaxed.base;
    let num_p = inst.num_paths();
    let smooth = Smooth::new(inst);
    let floor = FLOW_FLOOR_FACTOR * relaxed.bottleneck_caps.iter().copied().fold(f64::INFINITY, f64::min);
    let scheme = if relaxed.cardinality_rows { "fw-relaxed" } else { "fw" };

    let mut x = vec![inst.min_capacity() / (2.0 * num_p as f64); num_p];
    let mut t = load_of(inst, &x);
    let mut totals = inst.flow_totals(&x);
    let mut f = smooth.value(&totals, t);

    let mut trace = Vec::new();
    let mut pivots = 0;
    let mut status = Status::MaxIters;
    let mut message = None;
    let mut iterations = 0;
    let mut grad = vec![0.0; num_p];

    for m in 0..opts.max_iters {
        for k in 0..inst.num_flows() {
            let g = -smooth.params[k].grad_unchecked(totals[k]);
            grad[inst.block(k)].fill(g);
        }
        let grad_t = inst.alpha();
        let vertex = match lmo(relaxed, &grad, grad_t) {
            Ok(v) => v,
            Err(e) => {
                status = Status::Error;
                message = Some(format!("linear oracle failed at iteration {}: {e}", m + 1));
                break;
            }
        };
        pivots += vertex.pivots;
        let current = grad.iter().zip(&x).map(|(g, x)| g * x).sum::<f64>() + grad_t * t;
        let gap = (current - vertex.value).max(0.0);
        iterations = m + 1;

        let done = gap <= opts.gap_rtol * f.abs() + opts.gap_atol;
        if !done {
            let v_totals = inst.flow_totals(&vertex.x);
            let dir: Vec<f64> = v_totals.iter().zip(&totals).map(|(v, s)| v - s).collect();
            let dt = vertex.t - t;
            let mut eta_max = 1.0_f64;
            for (&s, &d) in totals.iter().zip(&dir) {
                if d < 0.0 && s + d < floor {
                    eta_max = eta_max.min(((s - floor) / -d).max(0.0));
                }
            }
            let eta = match opts.step {
                StepRule::Harmonic => (2.0 / (m as f64 + 2.0)).min(eta_max),
                StepRule::LineSearch => {
                    if smooth.slope(&totals, &dir, dt, eta_max) <= 0.0 {
                        eta_max
                    } else {
                        let (mut lo, mut hi) = (0.0, eta_max);
                        for _ in 0..100 {
                            let mid = 0.5 * (lo + hi);
                            if smooth.slope(&totals, &dir, dt, mid) > 0.0 {
                                hi = mid;
                            } else {
                                lo = mid;
                            }
                            if hi - lo <= 1e-15 * hi {
                                break;
                            }
                        }
                        lo
                    }
                }
            };
            for (xi, vi) in x.iter_mut().zip(&vertex.x) {
                *xi += eta * (vi - *xi);
            }
            totals = inst.flow_totals(&x);
            t = load_of(inst, &x);
            f = smooth.value(&totals, t);
        }

        let rx = inst.routing().mul(&x);
        trace.push(TraceRecord {
            iter: iterations,
            rho: 0.0,
            mu: 0.0,
            p_res: 0.0,
            second: gap,
            vio: violation(inst, &rx),
            l_rho: f,
            obj: f,
        });
        if !f.is_finite() {
            status = Status::Error;
            message = Some(format!("objective became non-finite at iteration {iterations}"));
            break;
        }
        if done {
            status = Status::Converged;
            break;
        }
    }

    let y = inst.routing().mul(&x);
    let metrics = compute_metrics(inst, &x).ok();
    Ok(SolveReport {
        scheme: scheme.to_string(),
        status,
        message,
        iterations,
        x: Allocation::from_vec_unchecked(x),
        y,
        z: Vec::new(),
        t: Some(t),
        metrics,
        trace_kind: TraceKind::FrankWolfe,
        trace,
        diagnostics: Diagnostics {
            lp_pivots: Some(pivots),
            ..Diagnostics::default()
        },
    })
}

/// The four baseline variants exposed to the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    Convex,
    Relaxed,
    ConvexProjected,
    RelaxedProjected,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::Convex => "fw",
            Baseline::Relaxed => "fw-relaxed",
            Baseline::ConvexProjected => "fw-projected",
            Baseline::RelaxedProjected => "fw-relaxed-projected",
        }
    }

    fn relaxed(self) -> bool {
        matches!(self, Baseline::Relaxed | Baseline::RelaxedProjected)
    }

    fn projected(self) -> bool {
        matches!(self, Baseline::ConvexProjected | Baseline::RelaxedProjected)
    }
}

/// Solves the chosen baseline. Projected variants zero all but the `w_k`
/// largest paths of the Frank–Wolfe solution without re-optimizing.
pub fn run_baseline(instance: &ProblemInstance, which: Baseline, opts: &FwOptions) -> Result<SolveReport> {
    let relaxed = if which.relaxed() { build_relaxed(instance) } else { build_convex(instance) };
    let mut report = fw_solve(&relaxed, opts)?;
    report.scheme = which.name().to_string();
    if which.projected() {
        let x = project_cardinality(instance, report.x.as_slice());
        report.y = instance.routing().mul(&x);
        report.t = Some(load_of(instance, &x));
        report.metrics = compute_metrics(instance, &x).ok();
        if report.metrics.is_none() && report.status != Status::Error {
            report.status = Status::Error;
            report.message = Some("projection left a flow with zero rate".into());
        }
        report.x = Allocation::from_vec_unchecked(x);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Flow, Link};

    fn fig2() -> ProblemInstance {
        let links = [10.0, 4.0, 7.0, 3.0, 9.0]
            .iter()
            .enumerate()
            .map(|(i, &c)| Link { id: i as u64, capacity_bps: c })
            .collect();
        let flows = vec![
            Flow { id: 0, size_bits: 5.0, cardinality_cap: 1, paths: vec![vec![0, 1], vec![2]] },
            Flow { id: 1, size_bits: 8.0, cardinality_cap: 1, paths: vec![vec![2, 4], vec![3]] },
        ];
        ProblemInstance::new(links, flows, 500.0, 0.05).unwrap()
    }

    #[test]
    fn bottleneck_caps_are_path_minima() {
        let r = build_relaxed(&fig2());
        assert_eq!(r.bottleneck_caps, vec![4.0, 7.0, 7.0, 3.0]);
        assert!(r.cardinality_rows);
        assert!(!build_convex(&fig2()).cardinality_rows);
    }

    #[test]
    fn positive_gradient_gives_origin() {
        let r = build_relaxed(&fig2());
        let v = lmo(&r, &[1.0, 2.0, 3.0, 4.0], 1.0).unwrap();
        assert_eq!(v.x, vec![0.0; 4]);
        assert_eq!(v.t, 0.0);
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn single_path_gradient_saturates_bottleneck() {
        let r = build_convex(&fig2());
        // Only path 3 (link 3, c = 3) is attractive; t is free.
        let v = lmo(&r, &[0.0, 0.0, 0.0, -1.0], 0.0).unwrap();
        assert!((v.x[3] - 3.0).abs() < 1e-12);
        assert!((v.value + 3.0).abs() < 1e-12);
        // The cardinality row caps x/ĉ at w = 1, which is the same point here.
        let v = lmo(&build_relaxed(&fig2()), &[0.0, 0.0, 0.0, -1.0], 0.0).unwrap();
        assert!((v.x[3] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn cardinality_row_binds() {
        // Both paths of flow 0 are attractive; the row x0/4 + x1/7 ≤ 1 forces a
        // choice, the convex polytope allows both.
        let g = [-1.0, -1.0, 0.0, 0.0];
        let relaxed = lmo(&build_relaxed(&fig2()), &g, 0.0).unwrap();
        let convex = lmo(&build_convex(&fig2()), &g, 0.0).unwrap();
        assert!((relaxed.value + 7.0).abs() < 1e-12, "{relaxed:?}");
        assert!((convex.value + 11.0).abs() < 1e-12, "{convex:?}");
    }

    #[test]
    fn projection_keeps_top_entries() {
        let inst = ProblemInstance::new(
            vec![Link { id: 0, capacity_bps: 10.0 }],
            vec![Flow { id: 0, size_bits: 1.0, cardinality_cap: 2, paths: vec![vec![0], vec![0], vec![0]] }],
            0.0,
            0.05,
        )
        .unwrap();
        assert_eq!(project_cardinality(&inst, &[3.0, 1.0, 2.0]), vec![3.0, 0.0, 2.0]);
        assert_eq!(project_cardinality(&inst, &[1.0, 1.0, 1.0]), vec![1.0, 1.0, 0.0]);
        assert_eq!(project_cardinality(&inst.uncapped(), &[3.0, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn scalar_relaxed_optimum() {
        let inst = ProblemInstance::new(
            vec![Link { id: 0, capacity_bps: 10.0 }],
            vec![Flow { id: 0, size_bits: 5.0, cardinality_cap: 1, paths: vec![vec![0]] }],
            500.0,
            0.05,
        )
        .unwrap();
        let report = fw_solve(&build_relaxed(&inst), &FwOptions::default()).unwrap();
        // −U′(x) + α/c = 0  ⇔  50x² − 0.05x − 5 = 0.
        let expect = (0.05 + (0.05f64.powi(2) + 1000.0).sqrt()) / 100.0;
        assert!((report.x.as_slice()[0] - expect).abs() < 1e-4, "{:?}", report.x);
        let gaps: Vec<f64> = report.trace.iter().map(|r| r.second).collect();
        assert!(gaps.iter().all(|g| *g >= 0.0));
    }

    #[test]
    fn harmonic_rule_also_descends() {
        let inst = fig2();
        let opts = FwOptions { step: StepRule::Harmonic, max_iters: 2000, ..Default::default() };
        let report = fw_solve(&build_convex(&inst), &opts).unwrap();
        let objs: Vec<f64> = report.trace.iter().map(|r| r.obj).collect();
        assert!(objs.last().unwrap() < &objs[0]);
    }
}
