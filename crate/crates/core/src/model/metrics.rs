use serde::{Deserialize, Serialize};

use super::ProblemInstance;
use crate::error::{Error, Result};

/// Performance measures of an allocation.
///
/// `delay` is the total completion time Σ s_k/‖x_k‖₁ in seconds, `fairness`
/// is β Σ log‖x_k‖₁, `load` the worst link utilization, and
/// `obj = delay − fairness + α·load`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub delay: f64,
    pub fairness: f64,
    pub load: f64,
    pub obj: f64,
}

impl Metrics {
    pub fn from_parts(delay: f64, fairness: f64, load: f64, alpha: f64) -> Self {
        Self {
            delay,
            fairness,
            load,
            obj: delay - fairness + alpha * load,
        }
    }

    /// |obj − (delay − fairness + α·load)|.
    pub fn identity_gap(&self, alpha: f64) -> f64 {
        (self.obj - (self.delay - self.fairness + alpha * self.load)).abs()
    }
}

/// Worst-case link utilization max_l (Rx)_l / c_l.
pub fn max_utilization(instance: &ProblemInstance, x: &[f64]) -> f64 {
    let rx = instance.routing().mul(x);
    rx.iter()
        .zip(instance.capacities())
        .map(|(r, c)| r / c)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn compute_metrics(instance: &ProblemInstance, x: &[f64]) -> Result<Metrics> {
    if x.len() != instance.num_paths() {
        return Err(Error::Dimension {
            what: "allocation",
            got: x.len(),
            expected: instance.num_paths(),
        });
    }
    let totals = instance.flow_totals(x);
    let mut delay = 0.0;
    let mut log_sum = 0.0;
    for (k, (&total, &size)) in totals.iter().zip(instance.flow_sizes()).enumerate() {
        if !(total > 0.0) {
            return Err(Error::ZeroRateFlow { flow: k });
        }
        delay += size / total;
        log_sum += total.ln();
    }
    let fairness = instance.beta() * log_sum;
    let load = max_utilization(instance, x);
    Ok(Metrics::from_parts(delay, fairness, load, instance.alpha()))
}
