//! Problem instances, allocations and performance metrics.

mod io;
mod metrics;
mod routing;

use std::collections::HashMap;
use std::ops::Range;

pub use io::{load_instance, parse_instance, save_instance, to_canonical_string, InstanceFile};
pub use metrics::{compute_metrics, max_utilization, Metrics};
pub use routing::{spectral_norm_sq, RoutingMatrix, SpectralEstimate, SpectralMethod};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: u64,
    /// bits/sec
    pub capacity_bps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub id: u64,
    pub size_bits: f64,
    pub cardinality_cap: usize,
    /// Each path is a list of link indices (positions in the link list).
    pub paths: Vec<Vec<usize>>,
}

/// A validated network instance: links, flows with candidate paths, and the
/// objective weights.
///
/// The columns of the routing matrix are grouped per flow: flow `k` owns the
/// contiguous range [`ProblemInstance::block`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    link_ids: Vec<u64>,
    capacities: Vec<f64>,
    flow_ids: Vec<u64>,
    flow_sizes: Vec<f64>,
    caps: Vec<usize>,
    offsets: Vec<usize>,
    routing: RoutingMatrix,
    alpha: f64,
    beta: f64,
    warnings: Vec<String>,
}

impl ProblemInstance {
    pub fn new(links: Vec<Link>, flows: Vec<Flow>, alpha: f64, beta: f64) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::invalid("links", 0, "instance has no links"));
        }
        if flows.is_empty() {
            return Err(Error::invalid("flows", 0, "instance has no flows"));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::invalid("weights.alpha", 0, format!("must be finite and >= 0, got {alpha}")));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid("weights.beta", 0, format!("must be finite and > 0, got {beta}")));
        }

        let mut seen = HashMap::new();
        for (l, link) in links.iter().enumerate() {
            if !(link.capacity_bps.is_finite() && link.capacity_bps > 0.0) {
                return Err(Error::invalid(
                    "links.capacity_bps",
                    l,
                    format!("capacity must be positive, got {}", link.capacity_bps),
                ));
            }
            if seen.insert(link.id, l).is_some() {
                return Err(Error::invalid("links.id", l, format!("duplicate link id {}", link.id)));
            }
        }

        let mut flow_seen = HashMap::new();
        let mut columns = Vec::new();
        let mut offsets = vec![0];
        let mut warnings = Vec::new();
        for (k, flow) in flows.iter().enumerate() {
            if flow_seen.insert(flow.id, k).is_some() {
                return Err(Error::invalid("flows.id", k, format!("duplicate flow id {}", flow.id)));
            }
            if !(flow.size_bits.is_finite() && flow.size_bits > 0.0) {
                return Err(Error::invalid(
                    "flows.size_bits",
                    k,
                    format!("flow size must be positive, got {}", flow.size_bits),
                ));
            }
            let num_paths = flow.paths.len();
            if num_paths == 0 {
                return Err(Error::invalid("flows.paths", k, "flow has no paths"));
            }
            if flow.cardinality_cap == 0 {
                return Err(Error::invalid("flows.cardinality_cap", k, "cardinality cap must be at least 1"));
            }
            if flow.cardinality_cap > num_paths {
                return Err(Error::invalid(
                    "flows.cardinality_cap",
                    k,
                    format!(
                        "cardinality cap exceeds path count ({} > {num_paths})",
                        flow.cardinality_cap
                    ),
                ));
            }
            for (i, path) in flow.paths.iter().enumerate() {
                let mut sorted = path.clone();
                sorted.sort_unstable();
                let dup = flow.paths[..i].iter().any(|other| {
                    let mut o = other.clone();
                    o.sort_unstable();
                    o == sorted
                });
                if dup {
                    let msg = format!("flow {} path {i} repeats the link set of an earlier path", flow.id);
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
                columns.push(path.clone());
            }
            offsets.push(columns.len());
        }

        let routing = RoutingMatrix::from_columns(links.len(), &columns)?;

        Ok(Self {
            link_ids: links.iter().map(|l| l.id).collect(),
            capacities: links.iter().map(|l| l.capacity_bps).collect(),
            flow_ids: flows.iter().map(|f| f.id).collect(),
            flow_sizes: flows.iter().map(|f| f.size_bits).collect(),
            caps: flows.iter().map(|f| f.cardinality_cap).collect(),
            offsets,
            routing,
            alpha,
            beta,
            warnings,
        })
    }

    pub fn num_flows(&self) -> usize {
        self.flow_sizes.len()
    }

    pub fn num_links(&self) -> usize {
        self.capacities.len()
    }

    pub fn num_paths(&self) -> usize {
        self.routing.num_cols()
    }

    pub fn paths_per_flow(&self, k: usize) -> usize {
        self.offsets[k + 1] - self.offsets[k]
    }

    /// Column range of flow `k` in the routing matrix and allocation vector.
    pub fn block(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    pub fn flow_sizes(&self) -> &[f64] {
        &self.flow_sizes
    }

    pub fn cardinality_caps(&self) -> &[usize] {
        &self.caps
    }

    pub fn link_ids(&self) -> &[u64] {
        &self.link_ids
    }

    pub fn flow_ids(&self) -> &[u64] {
        &self.flow_ids
    }

    pub fn routing(&self) -> &RoutingMatrix {
        &self.routing
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Non-fatal findings from validation, such as duplicated path link-sets.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// True when no flow has an effective cardinality cap (`w_k = P_k` ∀k).
    pub fn is_uncapped(&self) -> bool {
        (0..self.num_flows()).all(|k| self.caps[k] == self.paths_per_flow(k))
    }

    pub fn min_capacity(&self) -> f64 {
        self.capacities.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn with_weights(&self, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::invalid("weights.alpha", 0, format!("must be finite and >= 0, got {alpha}")));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid("weights.beta", 0, format!("must be finite and > 0, got {beta}")));
        }
        Ok(Self {
            alpha,
            beta,
            ..self.clone()
        })
    }

    /// Copy with every cap lifted to its path count.
    pub fn uncapped(&self) -> Self {
        Self {
            caps: (0..self.num_flows()).map(|k| self.paths_per_flow(k)).collect(),
            ..self.clone()
        }
    }

    /// Per-flow totals ‖x_k‖₁ (plain sums; x ≥ 0 is assumed).
    pub fn flow_totals(&self, x: &[f64]) -> Vec<f64> {
        (0..self.num_flows())
            .map(|k| x[self.block(k)].iter().sum())
            .collect()
    }

    pub fn links(&self) -> Vec<Link> {
        self.link_ids
            .iter()
            .zip(&self.capacities)
            .map(|(&id, &capacity_bps)| Link { id, capacity_bps })
            .collect()
    }

    pub fn flows(&self) -> Vec<Flow> {
        (0..self.num_flows())
            .map(|k| Flow {
                id: self.flow_ids[k],
                size_bits: self.flow_sizes[k],
                cardinality_cap: self.caps[k],
                paths: self.block(k).map(|p| self.routing.column(p).to_vec()).collect(),
            })
            .collect()
    }
}

/// The concatenated rate vector `x`, grouped by flow blocks.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Allocation(Vec<f64>);

impl Allocation {
    pub fn new(instance: &ProblemInstance, x: Vec<f64>) -> Result<Self> {
        if x.len() != instance.num_paths() {
            return Err(Error::Dimension {
                what: "allocation",
                got: x.len(),
                expected: instance.num_paths(),
            });
        }
        if let Some(i) = x.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("x", i, format!("rate must be finite and >= 0, got {}", x[i])));
        }
        Ok(Self(x))
    }

    pub(crate) fn from_vec_unchecked(x: Vec<f64>) -> Self {
        Self(x)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn block<'a>(&'a self, instance: &ProblemInstance, k: usize) -> &'a [f64] {
        &self.0[instance.block(k)]
    }

    /// Number of strictly positive entries in flow `k`'s block.
    pub fn support_size(&self, instance: &ProblemInstance, k: usize) -> usize {
        self.block(instance, k).iter().filter(|v| **v > 0.0).count()
    }

    /// Exact check of ‖x_k‖₀ ≤ w_k for every flow.
    pub fn respects_caps(&self, instance: &ProblemInstance) -> bool {
        (0..instance.num_flows()).all(|k| self.support_size(instance, k) <= instance.cardinality_caps()[k])
    }
}
