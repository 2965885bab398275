//! Bounded scalar minimization: golden-section search with parabolic
//! interpolation (Brent).

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMin {
    pub x: f64,
    pub fx: f64,
    pub evals: usize,
}

const GOLDEN: f64 = 0.381_966_011_250_105_1; // (3 − √5)/2

/// Minimizes `f` on `[a, b]`. Terminates when the bracket around the best
/// point is within `2·(xtol + √ε·|x|)`, or after `max_evals` evaluations.
///
/// Interior points only are sampled; callers that care about the endpoints
/// compare against them afterwards.
pub fn minimize_bounded<F>(mut f: F, a: f64, b: f64, xtol: f64, max_evals: usize) -> ScalarMin
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let sqrt_eps = f64::EPSILON.sqrt();

    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut evals = 1;
    let mut d = 0.0_f64;
    let mut e = 0.0_f64;

    while evals < max_evals {
        let xm = 0.5 * (a + b);
        let tol1 = sqrt_eps * x.abs() + xtol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }

        let mut golden = true;
        if e.abs() > tol1 {
            // Parabola through (v, fv), (w, fw), (x, fx).
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLDEN * e;
        }

        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        evals += 1;

        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }

    ScalarMin { x, fx, evals }
}
