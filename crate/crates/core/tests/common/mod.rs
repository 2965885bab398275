//! Independent reference solvers shared by the integration tests. None of
//! them reuse library numerics beyond plain data access.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use bwalloc::gen::{generate_instance, GenConfig};
use bwalloc::model::{Flow, Link, ProblemInstance};

pub fn dense_routing(inst: &ProblemInstance) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(inst.num_links(), inst.num_paths());
    for p in 0..inst.num_paths() {
        for &l in inst.routing().column(p) {
            r[(l, p)] = 1.0;
        }
    }
    r
}

pub fn svd_norm_sq(r: &DMatrix<f64>) -> f64 {
    let s = r.clone().svd(false, false).singular_values;
    let m = s.iter().cloned().fold(0.0, f64::max);
    m * m
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Real roots of `a3 r³ + a2 r² + a1 r + a0` from the companion matrix.
pub fn companion_real_roots(a3: f64, a2: f64, a1: f64, a0: f64) -> Vec<f64> {
    let m = DMatrix::from_row_slice(3, 3, &[-a2 / a3, -a1 / a3, -a0 / a3, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let eig = m.complex_eigenvalues();
    let scale = eig.iter().map(|z| z.re.hypot(z.im)).fold(1.0, f64::max);
    eig.iter().filter(|z| z.im.abs() <= 1e-7 * scale).map(|z| z.re).collect()
}

/// −U(t) with U = β log t − s/t.
pub fn neg_utility(beta: f64, size: f64, t: f64) -> f64 {
    size / t - beta * t.ln()
}

fn neg_utility_grad(beta: f64, size: f64, t: f64) -> f64 {
    -size / (t * t) - beta / t
}

/// Minimizes (μ/2)‖x − ν‖² − U(Σx) over x ≥ 0 with ‖x‖₀ ≤ cap by
/// enumerating supports and running projected gradient with Armijo
/// backtracking on each restricted problem.
pub fn prox_oracle(nu: &[f64], mu: f64, beta: f64, size: f64, cap: usize) -> f64 {
    let p = nu.len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << p) {
        if mask.count_ones() as usize > cap {
            continue;
        }
        let support: Vec<usize> = (0..p).filter(|i| mask & (1 << i) != 0).collect();
        let outside: f64 = (0..p).filter(|i| mask & (1 << i) == 0).map(|i| nu[i] * nu[i]).sum();
        let sub: Vec<f64> = support.iter().map(|&i| nu[i]).collect();
        let value = restricted_prox(&sub, mu, beta, size) + 0.5 * mu * outside;
        best = best.min(value);
    }
    best
}

fn restricted_prox(nu: &[f64], mu: f64, beta: f64, size: f64) -> f64 {
    let f = |x: &[f64]| -> f64 {
        let s: f64 = x.iter().sum();
        if s <= 0.0 {
            return f64::INFINITY;
        }
        let d: f64 = x.iter().zip(nu).map(|(a, b)| (a - b) * (a - b)).sum();
        0.5 * mu * d + neg_utility(beta, size, s)
    };
    let floor = nu.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut x: Vec<f64> = nu.iter().map(|v| v.max(1e-3 * floor)).collect();
    let mut fx = f(&x);
    let mut step = 1.0 / mu;
    for _ in 0..20_000 {
        let s: f64 = x.iter().sum();
        let gu = neg_utility_grad(beta, size, s);
        let g: Vec<f64> = x.iter().zip(nu).map(|(a, b)| mu * (a - b) + gu).collect();
        step *= 2.0;
        let mut moved = false;
        for _ in 0..200 {
            let cand: Vec<f64> = x.iter().zip(&g).map(|(a, g)| (a - step * g).max(0.0)).collect();
            let fc = f(&cand);
            let dist: f64 = cand.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            if fc <= fx - dist / (2.0 * step) * 0.5 && fc.is_finite() {
                let change = dist.sqrt();
                x = cand;
                fx = fc;
                moved = change > 1e-15 * floor;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    fx
}

/// Grid search with spacing 1e-5 on [0, 1] followed by golden-section
/// refinement around the best grid point.
pub fn phi_oracle(phi: impl Fn(f64) -> f64) -> (f64, f64) {
    let n = 100_000;
    let mut best = (0.0, phi(0.0));
    for i in 1..=n {
        let t = i as f64 / n as f64;
        let v = phi(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    let (mut a, mut b) = ((best.0 - 1e-5).max(0.0), (best.0 + 1e-5).min(1.0));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if phi(c) < phi(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let t = 0.5 * (a + b);
    if phi(t) < best.1 {
        (t, phi(t))
    } else {
        best
    }
}

/// Which convex model [`barrier_oracle`] solves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Model {
    /// min −ΣU s.t. Rx ≤ c, x ≥ 0.
    Num,
    /// min −ΣU + αt s.t. Rx ≤ tc, 0 ≤ t ≤ 1, x ≥ 0, optionally with
    /// Σ_i x_{k,i}/ĉ_{k,i} ≤ w_k.
    Load { cardinality_rows: bool },
}

pub struct BarrierSolution {
    pub x: Vec<f64>,
    pub t: f64,
    pub objective: f64,
}

/// Log-barrier Newton method on dense matrices.
pub fn barrier_oracle(inst: &ProblemInstance, model: Model) -> BarrierSolution {
    let r = dense_routing(inst);
    let (nl, np) = (inst.num_links(), inst.num_paths());
    let has_t = !matches!(model, Model::Num);
    let n = np + usize::from(has_t);
    let caps = inst.capacities();

    // Rows a_i·v ≤ b_i, including x ≥ 0 and the t bounds.
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for l in 0..nl {
        let mut a = DVector::zeros(n);
        for p in 0..np {
            a[p] = r[(l, p)] / caps[l];
        }
        if has_t {
            a[np] = -1.0;
            rows.push((a, 0.0));
        } else {
            rows.push((a, 1.0));
        }
    }
    if let Model::Load { cardinality_rows: true } = model {
        for k in 0..inst.num_flows() {
            let mut a = DVector::zeros(n);
            for p in inst.block(k) {
                let chat = inst.routing().column(p).iter().map(|&l| caps[l]).fold(f64::INFINITY, f64::min);
                a[p] = 1.0 / chat;
            }
            rows.push((a, inst.cardinality_caps()[k] as f64));
        }
    }
    for i in 0..n {
        let mut a = DVector::zeros(n);
        a[i] = -1.0;
        rows.push((a, 0.0));
    }
    if has_t {
        let mut a = DVector::zeros(n);
        a[np] = 1.0;
        rows.push((a, 1.0));
    }

    let sizes = inst.flow_sizes().to_vec();
    let beta = inst.beta();
    let alpha = inst.alpha();
    let blocks: Vec<_> = (0..inst.num_flows()).map(|k| inst.block(k)).collect();
    let objective = |v: &DVector<f64>| -> f64 {
        let mut f = 0.0;
        for (k, b) in blocks.iter().enumerate() {
            let s: f64 = b.clone().map(|p| v[p]).sum();
            f += neg_utility(beta, sizes[k], s);
        }
        if has_t {
            f += alpha * v[np];
        }
        f
    };
    let barrier = |v: &DVector<f64>, tau: f64| -> f64 {
        let mut phi = tau * objective(v);
        for (a, b) in &rows {
            let slack = b - a.dot(v);
            if slack <= 0.0 {
                return f64::INFINITY;
            }
            phi -= slack.ln();
        }
        phi
    };

    let mut v = DVector::from_element(n, inst.min_capacity() / (4.0 * np as f64));
    if has_t {
        v[np] = 0.5;
    }
    let mut tau = 1.0;
    let m = rows.len() as f64;
    'outer: loop {
        for _ in 0..200 {
            let mut g = DVector::zeros(n);
            let mut h = DMatrix::zeros(n, n);
            for (k, b) in blocks.iter().enumerate() {
                let s: f64 = b.clone().map(|p| v[p]).sum();
                let d1 = neg_utility_grad(beta, sizes[k], s);
                let d2 = 2.0 * sizes[k] / (s * s * s) + beta / (s * s);
                for p in b.clone() {
                    g[p] += tau * d1;
                    for q in b.clone() {
                        h[(p, q)] += tau * d2;
                    }
                }
            }
            if has_t {
                g[np] += tau * alpha;
            }
            for (a, b) in &rows {
                let slack = b - a.dot(&v);
                g += a / slack;
                h += a * a.transpose() / (slack * slack);
            }
            let step = match h.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => match h.clone().lu().solve(&(-&g)) {
                    Some(step) => step,
                    // Conditioning has run out; the iterate is already at the
                    // accuracy the callers compare against.
                    None => break 'outer,
                },
            };
            let decrement = -g.dot(&step);
            if decrement / 2.0 <= 1e-14 {
                break;
            }
            let phi0 = barrier(&v, tau);
            let mut eta = 1.0;
            loop {
                let cand = &v + eta * &step;
                let phi = barrier(&cand, tau);
                if phi <= phi0 - 0.25 * eta * decrement {
                    v = cand;
                    break;
                }
                eta *= 0.5;
                if eta < 1e-20 {
                    break;
                }
            }
            if eta < 1e-20 {
                break;
            }
        }
        let f = objective(&v);
        if m / tau <= 1e-9 * f.abs().max(1.0) {
            break;
        }
        tau *= 8.0;
    }
    let x: Vec<f64> = (0..np).map(|p| v[p]).collect();
    let t = if has_t { v[np] } else { 0.0 };
    BarrierSolution { objective: objective(&v), x, t }
}

/// Minimum of `c·v` over `A v ≤ b, v ≥ 0` by enumerating all vertices.
/// Only usable on tiny problems.
pub fn vertex_lp_oracle(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> f64 {
    let n = c.len();
    let mut cons: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().cloned()).collect();
    for i in 0..n {
        let mut row = vec![0.0; n];
        row[i] = -1.0;
        cons.push((row, 0.0));
    }
    let mut best = f64::INFINITY;
    let mut pick = Vec::with_capacity(n);
    enumerate(&cons, n, 0, &mut pick, &mut |idx: &[usize]| {
        let m = DMatrix::from_fn(n, n, |i, j| cons[idx[i]].0[j]);
        let rhs = DVector::from_fn(n, |i, _| cons[idx[i]].1);
        let Some(sol) = m.lu().solve(&rhs) else { return };
        if sol.iter().any(|v| !v.is_finite()) {
            return;
        }
        let feasible = cons.iter().all(|(row, bound)| {
            let lhs: f64 = row.iter().zip(sol.iter()).map(|(a, x)| a * x).sum();
            lhs <= bound + 1e-9 * (1.0 + bound.abs())
        });
        if feasible {
            let value: f64 = c.iter().zip(sol.iter()).map(|(c, x)| c * x).sum();
            best = best.min(value);
        }
    });
    best
}

fn enumerate(
    cons: &[(Vec<f64>, f64)],
    n: usize,
    start: usize,
    pick: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if pick.len() == n {
        visit(pick);
        return;
    }
    for i in start..cons.len() {
        pick.push(i);
        enumerate(cons, n, i + 1, pick, visit);
        pick.pop();
    }
}

/// Small random instance from the generator with every knob drawn from
/// `rng`.
pub fn random_instance(rng: &mut impl Rng, max_links: usize, max_flows: usize, max_paths: usize) -> ProblemInstance {
    let num_links = rng.gen_range(3..=max_links);
    let cfg = GenConfig {
        num_flows: rng.gen_range(1..=max_flows),
        num_links,
        paths_per_flow: (1, max_paths),
        path_length: (1, 3.min(num_links)),
        ..GenConfig::desk(rng.gen())
    };
    generate_instance(&cfg).expect("generator config is valid")
}

pub fn link(id: u64, c: f64) -> Link {
    Link { id, capacity_bps: c }
}

pub fn flow(id: u64, s: f64, w: usize, paths: Vec<Vec<usize>>) -> Flow {
    Flow { id, size_bits: s, cardinality_cap: w, paths }
}

/// The two-flow example topology used throughout the docs.
pub fn fig2(alpha: f64) -> ProblemInstance {
    ProblemInstance::new(
        vec![link(0, 10.0), link(1, 4.0), link(2, 7.0), link(3, 3.0), link(4, 9.0)],
        vec![
            flow(0, 5.0, 1, vec![vec![0, 1], vec![2]]),
            flow(1, 8.0, 1, vec![vec![2, 4], vec![3]]),
        ],
        alpha,
        0.05,
    )
    .unwrap()
}

/// Relative difference with a floor of 1 on the scale.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
