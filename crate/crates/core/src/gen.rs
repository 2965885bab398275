//! Seeded synthetic instances.
//!
//! Link capacities are log-uniform, paths are random simple link lists, and
//! each flow's size is the sum of a random number of sub-flow sizes drawn
//! from a log-normal, Pareto, or user-supplied empirical distribution.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Flow, Link, ProblemInstance};

/// Piecewise-linear CDF through `(value, probability)` knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl EmpiricalCdf {
    /// Knots must have strictly increasing values, nondecreasing
    /// probabilities, start at probability 0 and end at 1. Values must be
    /// positive since they are flow sizes.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Config("empirical CDF needs at least two points".into()));
        }
        for (i, &(v, p)) in points.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid("cdf.value", i, "must be finite and positive"));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid("cdf.probability", i, "must lie in [0, 1]"));
            }
            if i > 0 {
                let (pv, pp) = points[i - 1];
                if v <= pv {
                    return Err(Error::invalid("cdf.value", i, "values must be strictly increasing"));
                }
                if p < pp {
                    return Err(Error::invalid("cdf.probability", i, "probabilities must be nondecreasing"));
                }
            }
        }
        if points[0].1 != 0.0 || points[points.len() - 1].1 != 1.0 {
            return Err(Error::Config("empirical CDF must run from probability 0 to 1".into()));
        }
        let (values, probs) = points.into_iter().unzip();
        Ok(EmpiricalCdf { values, probs })
    }

    /// Two columns (value, cumulative probability) separated by commas,
    /// tabs or spaces. Blank lines and `#` comments are skipped, as is a
    /// non-numeric header line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line
                .split([',', '\t', ' ', ';'])
                .filter(|f| !f.is_empty())
                .collect();
            if fields.len() != 2 {
                return Err(Error::invalid("cdf.line", n + 1, "expected two columns"));
            }
            match (fields[0].parse::<f64>(), fields[1].parse::<f64>()) {
                (Ok(v), Ok(p)) => points.push((v, p)),
                _ if points.is_empty() => continue,
                _ => return Err(Error::invalid("cdf.line", n + 1, "non-numeric field")),
            }
        }
        Self::new(points)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn cdf(&self, v: f64) -> f64 {
        let n = self.values.len();
        if v <= self.values[0] {
            return 0.0;
        }
        if v >= self.values[n - 1] {
            return 1.0;
        }
        let i = self.values.partition_point(|&a| a <= v);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        let (p0, p1) = (self.probs[i - 1], self.probs[i]);
        p0 + (p1 - p0) * (v - v0) / (v1 - v0)
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        // First knot whose probability reaches u; flat segments never match.
        let i = self.probs.partition_point(|&p| p < u).max(1).min(self.probs.len() - 1);
        let (p0, p1) = (self.probs[i - 1], self.probs[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        if p1 == p0 {
            v1
        } else {
            v0 + (v1 - v0) * (u - p0) / (p1 - p0)
        }
    }
}

impl Distribution<f64> for EmpiricalCdf {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.gen::<f64>())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SubflowSize {
    /// exp(N(mu, sigma²)).
    LogNormal { mu: f64, sigma: f64 },
    /// Pareto with minimum `scale` and tail index `shape`.
    Pareto { scale: f64, shape: f64 },
    Empirical { cdf: EmpiricalCdf },
}

enum Sampler {
    LogNormal(LogNormal<f64>),
    Pareto(Pareto<f64>),
    Empirical(EmpiricalCdf),
}

impl Sampler {
    fn new(dist: &SubflowSize) -> Result<Self> {
        let bad = |e: String| Error::Config(format!("sub-flow size distribution: {e}"));
        Ok(match dist {
            SubflowSize::LogNormal { mu, sigma } => {
                Sampler::LogNormal(LogNormal::new(*mu, *sigma).map_err(|e| bad(e.to_string()))?)
            }
            SubflowSize::Pareto { scale, shape } => {
                Sampler::Pareto(Pareto::new(*scale, *shape).map_err(|e| bad(e.to_string()))?)
            }
            SubflowSize::Empirical { cdf } => Sampler::Empirical(cdf.clone()),
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::LogNormal(d) => d.sample(rng),
            Sampler::Pareto(d) => d.sample(rng),
            Sampler::Empirical(d) => d.sample(rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub num_flows: usize,
    pub num_links: usize,
    /// Inclusive range of P_k.
    pub paths_per_flow: (usize, usize),
    /// Capacity range in bits per second.
    pub capacity: (f64, f64),
    /// Inclusive range of links per path.
    pub path_length: (usize, usize),
    /// Inclusive range of sub-flows aggregated into one flow.
    pub subflow_count: (usize, usize),
    pub subflow_size: SubflowSize,
    /// Cardinality caps and their weights; draws are clamped to P_k.
    pub cap_choices: Vec<(usize, f64)>,
    /// If set, the drawn P_k are rescaled to sum to this value (within the
    /// per-flow range).
    pub target_total_paths: Option<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

impl GenConfig {
    /// Wide-area network shape: 561 aggregated flows over
    /// 460 links, 4 to 100 paths per flow and about 19751 paths in total.
    /// Sub-flow sizes are synthetic; supply an empirical CDF to use real ones.
    pub fn wan(seed: u64) -> Self {
        GenConfig {
            num_flows: 561,
            num_links: 460,
            paths_per_flow: (4, 100),
            capacity: (1.024e9, 2.048e11),
            path_length: (2, 6),
            subflow_count: (1_000, 10_000),
            subflow_size: SubflowSize::LogNormal { mu: 13.8, sigma: 1.5 },
            cap_choices: vec![(1, 1.0), (2, 1.0), (3, 1.0)],
            target_total_paths: Some(19_751),
            alpha: 500.0,
            beta: 0.05,
            seed,
        }
    }

    /// Small instances that solve in milliseconds and keep the delay, fairness
    /// and load terms on comparable scales at α = 500.
    pub fn desk(seed: u64) -> Self {
        GenConfig {
            num_flows: 6,
            num_links: 16,
            paths_per_flow: (4, 8),
            capacity: (10.0, 100.0),
            path_length: (1, 3),
            subflow_count: (1, 4),
            subflow_size: SubflowSize::LogNormal { mu: 5.5, sigma: 0.5 },
            cap_choices: vec![(1, 1.0), (2, 1.0), (3, 1.0)],
            target_total_paths: None,
            alpha: 500.0,
            beta: 0.05,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: &str| Err(Error::Config(m.to_string()));
        if self.num_flows == 0 || self.num_links == 0 {
            return cfg("num_flows and num_links must be positive");
        }
        let (p0, p1) = self.paths_per_flow;
        if p0 == 0 || p0 > p1 {
            return cfg("paths_per_flow must satisfy 1 <= min <= max");
        }
        let (c0, c1) = self.capacity;
        if !(c0.is_finite() && c1.is_finite() && c0 > 0.0 && c0 <= c1) {
            return cfg("capacity range must satisfy 0 < min <= max");
        }
        let (l0, l1) = self.path_length;
        if l0 == 0 || l0 > l1 {
            return cfg("path_length must satisfy 1 <= min <= max");
        }
        if l1 > self.num_links {
            return Err(Error::Config(format!(
                "path length {l1} exceeds the number of links {}",
                self.num_links
            )));
        }
        let (n0, n1) = self.subflow_count;
        if n0 == 0 || n0 > n1 {
            return cfg("subflow_count must satisfy 1 <= min <= max");
        }
        if self.cap_choices.is_empty()
            || self.cap_choices.iter().any(|&(w, p)| w == 0 || !(p.is_finite() && p >= 0.0))
            || self.cap_choices.iter().all(|&(_, p)| p == 0.0)
        {
            return cfg("cap_choices needs positive caps and nonnegative weights, not all zero");
        }
        if let Some(total) = self.target_total_paths {
            if total < self.num_flows * p0 || total > self.num_flows * p1 {
                return cfg("target_total_paths is unreachable within paths_per_flow");
            }
        }
        Ok(())
    }
}

fn rescale_counts(counts: &mut [usize], target: usize, range: (usize, usize), rng: &mut ChaCha8Rng) {
    let sum: usize = counts.iter().sum();
    let factor = target as f64 / sum as f64;
    for c in counts.iter_mut() {
        *c = ((*c as f64 * factor).round() as usize).clamp(range.0, range.1);
    }
    let mut sum: usize = counts.iter().sum();
    while sum != target {
        let k = rng.gen_range(0..counts.len());
        if sum < target && counts[k] < range.1 {
            counts[k] += 1;
            sum += 1;
        } else if sum > target && counts[k] > range.0 {
            counts[k] -= 1;
            sum -= 1;
        }
    }
}

const DISTINCT_PATH_ATTEMPTS: usize = 64;

pub fn generate_instance(cfg: &GenConfig) -> Result<ProblemInstance> {
    cfg.validate()?;
    let sampler = Sampler::new(&cfg.subflow_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let (lc0, lc1) = (cfg.capacity.0.ln(), cfg.capacity.1.ln());
    let links: Vec<Link> = (0..cfg.num_links)
        .map(|l| {
            let c = if lc0 == lc1 { cfg.capacity.0 } else { rng.gen_range(lc0..=lc1).exp() };
            Link { id: l as u64, capacity_bps: c.clamp(cfg.capacity.0, cfg.capacity.1) }
        })
        .collect();

    let mut counts: Vec<usize> = (0..cfg.num_flows)
        .map(|_| rng.gen_range(cfg.paths_per_flow.0..=cfg.paths_per_flow.1))
        .collect();
    if let Some(target) = cfg.target_total_paths {
        rescale_counts(&mut counts, target, cfg.paths_per_flow, &mut rng);
    }

    let caps = WeightedIndex::new(cfg.cap_choices.iter().map(|&(_, p)| p))
        .map_err(|e| Error::Config(format!("cap_choices: {e}")))?;

    let mut flows = Vec::with_capacity(cfg.num_flows);
    for (k, &num_paths) in counts.iter().enumerate() {
        let mut seen = HashSet::new();
        let mut paths = Vec::with_capacity(num_paths);
        while paths.len() < num_paths {
            let mut path = Vec::new();
            for _ in 0..DISTINCT_PATH_ATTEMPTS {
                let len = rng.gen_range(cfg.path_length.0..=cfg.path_length.1);
                path = sample(&mut rng, cfg.num_links, len).into_vec();
                let mut key = path.clone();
                key.sort_unstable();
                if seen.insert(key) {
                    break;
                }
            }
            paths.push(path);
        }
        let n = rng.gen_range(cfg.subflow_count.0..=cfg.subflow_count.1);
        let size: f64 = (0..n).map(|_| sampler.draw(&mut rng)).sum();
        let cap = cfg.cap_choices[caps.sample(&mut rng)].0.min(num_paths);
        flows.push(Flow { id: k as u64, size_bits: size, cardinality_cap: cap, paths });
    }
    ProblemInstance::new(links, flows, cfg.alpha, cfg.beta)
}
