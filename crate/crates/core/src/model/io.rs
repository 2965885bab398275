//! JSON instance files.
//!
//! ```json
//! {
//!   "links": [{"id": 1, "capacity_bps": 1e10}],
//!   "flows": [{"id": 1, "size_bits": 8e9, "cardinality_cap": 1, "paths": [[1]]}],
//!   "weights": {"alpha": 500.0, "beta": 0.05}
//! }
//! ```
//!
//! Paths list link ids, not positions. [`to_canonical_string`] always emits
//! the same bytes for the same instance.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Flow, Link, ProblemInstance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub links: Vec<LinkRecord>,
    pub flows: Vec<FlowRecord>,
    pub weights: WeightsRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkRecord {
    pub id: u64,
    pub capacity_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowRecord {
    pub id: u64,
    pub size_bits: f64,
    pub cardinality_cap: usize,
    pub paths: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsRecord {
    pub alpha: f64,
    pub beta: f64,
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<ProblemInstance> {
        let mut index = HashMap::with_capacity(self.links.len());
        for (l, link) in self.links.iter().enumerate() {
            index.entry(link.id).or_insert(l);
        }
        let links = self
            .links
            .iter()
            .map(|r| Link {
                id: r.id,
                capacity_bps: r.capacity_bps,
            })
            .collect();
        let mut flows = Vec::with_capacity(self.flows.len());
        for (k, f) in self.flows.into_iter().enumerate() {
            let mut paths = Vec::with_capacity(f.paths.len());
            for path in &f.paths {
                let mut idx = Vec::with_capacity(path.len());
                for id in path {
                    let l = *index.get(id).ok_or_else(|| {
                        Error::invalid("flows.paths", k, format!("unknown link id {id}"))
                    })?;
                    idx.push(l);
                }
                paths.push(idx);
            }
            flows.push(Flow {
                id: f.id,
                size_bits: f.size_bits,
                cardinality_cap: f.cardinality_cap,
                paths,
            });
        }
        ProblemInstance::new(links, flows, self.weights.alpha, self.weights.beta)
    }

    pub fn from_instance(instance: &ProblemInstance) -> Self {
        let ids = instance.link_ids();
        Self {
            links: instance
                .links()
                .into_iter()
                .map(|l| LinkRecord {
                    id: l.id,
                    capacity_bps: l.capacity_bps,
                })
                .collect(),
            flows: instance
                .flows()
                .into_iter()
                .map(|f| FlowRecord {
                    id: f.id,
                    size_bits: f.size_bits,
                    cardinality_cap: f.cardinality_cap,
                    paths: f
                        .paths
                        .iter()
                        .map(|p| p.iter().map(|&l| ids[l]).collect())
                        .collect(),
                })
                .collect(),
            weights: WeightsRecord {
                alpha: instance.alpha(),
                beta: instance.beta(),
            },
        }
    }
}

pub fn parse_instance(text: &str) -> Result<ProblemInstance> {
    let file: InstanceFile = serde_json::from_str(text)?;
    file.into_instance()
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<ProblemInstance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_instance(&text)
}

pub fn to_canonical_string(instance: &ProblemInstance) -> String {
    let mut text = serde_json::to_string_pretty(&InstanceFile::from_instance(instance))
        .expect("instance records always serialize");
    text.push('\n');
    text
}

pub fn save_instance(instance: &ProblemInstance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_canonical_string(instance)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
