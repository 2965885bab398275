//! Largest real root of a real cubic.

use crate::error::{Error, Result};

/// a3·r³ + a2·r² + a1·r + a0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cubic {
    pub a3: f64,
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
}

impl Cubic {
    pub fn new(a3: f64, a2: f64, a1: f64, a0: f64) -> Result<Self> {
        let scale = a2.abs().max(a1.abs()).max(a0.abs());
        let finite = [a3, a2, a1, a0].iter().all(|a| a.is_finite());
        if !finite || a3 == 0.0 || a3.abs() <= 1e-300 * scale {
            return Err(Error::Domain {
                what: "cubic",
                detail: format!("leading coefficient {a3} is zero or negligible"),
            });
        }
        Ok(Self { a3, a2, a1, a0 })
    }

    pub fn eval(&self, r: f64) -> f64 {
        ((self.a3 * r + self.a2) * r + self.a1) * r + self.a0
    }

    pub fn derivative(&self, r: f64) -> f64 {
        (3.0 * self.a3 * r + 2.0 * self.a2) * r + self.a1
    }

    /// Largest magnitude among the four terms at `r`; residuals are judged
    /// relative to it.
    pub fn term_scale(&self, r: f64) -> f64 {
        let r2 = r * r;
        (self.a3 * r2 * r)
            .abs()
            .max((self.a2 * r2).abs())
            .max((self.a1 * r).abs())
            .max(self.a0.abs())
    }
}

/// Largest real root, from the trigonometric or Cardano form followed by a
/// Newton polish.
pub fn max_real_root(c: &Cubic) -> f64 {
    // Monic form r³ + b r² + d r + e, then depressed u³ + p u + q with r = u − b/3.
    let b = c.a2 / c.a3;
    let d = c.a1 / c.a3;
    let e = c.a0 / c.a3;
    let shift = b / 3.0;
    let p = d - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * d / 3.0 + e;

    let half_q = q / 2.0;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;

    let u = if p == 0.0 {
        (-q).cbrt()
    } else if disc <= 0.0 {
        // Three real roots (p < 0); the largest uses the principal angle.
        let m = (-third_p).sqrt();
        let cos_arg = (-half_q / (m * m * m)).clamp(-1.0, 1.0);
        2.0 * m * (cos_arg.acos() / 3.0).cos()
    } else {
        // One real root. Pick the sign that avoids cancellation.
        let s = disc.sqrt();
        let a = -(half_q + s.copysign(half_q)).cbrt();
        if a == 0.0 {
            0.0
        } else {
            a - third_p / a
        }
    };

    polish(c, u - shift)
}

fn polish(c: &Cubic, mut r: f64) -> f64 {
    let mut res = c.eval(r).abs();
    // One Newton step normally suffices; a couple more cover roots that sit
    // next to a near-double root, where the closed form loses digits.
    for _ in 0..4 {
        let dv = c.derivative(r);
        if dv == 0.0 || !dv.is_finite() {
            break;
        }
        let next = r - c.eval(r) / dv;
        let next_res = c.eval(next).abs();
        if !(next_res < res) {
            break;
        }
        r = next;
        res = next_res;
        if res <= 1e-15 * c.term_scale(r) {
            break;
        }
    }
    r
}

/// Largest ζ solving μζ(S + mζ)² = β(S + mζ) + s, where S is the sum of the
/// `m` kept entries of the shifted vector.
///
/// The root always satisfies S + mζ > 0 and ζ > 0: the difference of the two
/// sides is negative at max(0, −S/m) and grows without bound.
pub fn solve_breakpoint_cubic(mu: f64, beta: f64, size: f64, partial_sum: f64, m: usize) -> Result<f64> {
    if !(mu > 0.0) || !(beta >= 0.0) || !(size > 0.0) || m == 0 || !partial_sum.is_finite() {
        return Err(Error::Domain {
            what: "breakpoint cubic",
            detail: format!("mu={mu}, beta={beta}, s={size}, S={partial_sum}, m={m}"),
        });
    }
    let mf = m as f64;
    let s_sum = partial_sum;
    let cubic = Cubic::new(
        mu * mf * mf,
        2.0 * mu * s_sum * mf,
        mu * s_sum * s_sum - beta * mf,
        -(beta * s_sum + size),
    )?;

    let g = |zeta: f64| {
        let u = s_sum + mf * zeta;
        mu * zeta * u * u - beta * u - size
    };
    let dg = |zeta: f64| {
        let u = s_sum + mf * zeta;
        mu * u * u + 2.0 * mu * zeta * u * mf - beta * mf
    };

    let mut zeta = max_real_root(&cubic);
    // Polish on the factored form, which does not suffer the cancellation
    // of the expanded coefficients when S is large.
    for _ in 0..4 {
        let dv = dg(zeta);
        if !(dv > 0.0) {
            break;
        }
        let next = zeta - g(zeta) / dv;
        if !(g(next).abs() < g(zeta).abs()) {
            break;
        }
        zeta = next;
    }

    let floor = (-s_sum / mf).max(0.0);
    if zeta > floor && zeta.is_finite() {
        return Ok(zeta);
    }

    // The closed form lost the root to rounding; bracket it directly.
    let mut lo = floor;
    let mut hi = floor.max(1.0);
    while g(hi) <= 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Numerical(format!(
                "breakpoint cubic has no admissible root (mu={mu}, beta={beta}, s={size}, S={s_sum}, m={m})"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if hi > floor {
        Ok(hi)
    } else {
        Err(Error::Numerical(format!(
            "breakpoint cubic root not above {floor} (mu={mu}, beta={beta}, s={size}, S={s_sum}, m={m})"
        )))
    }
}
