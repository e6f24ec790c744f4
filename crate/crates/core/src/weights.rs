//! Trainable decoder weights under the supported sharing schemes.
//!
//! Storage layouts (`L` iterations, `N` proto VNs, `E` proto edges):
//!
//! | scheme                 | layout per iteration           | total      |
//! |------------------------|--------------------------------|------------|
//! | full / protograph-full | `[vn_0..vn_N, cn_0..cn_E]`     | `(N+E) L`  |
//! | spatial                | `[vn, cn]`                     | `2 L`      |
//! | temporal               | one shared `[vn_0.., cn_0..]`  | `N + E`    |
//! | spatial+ucn            | `[vn, scn, ucn]`               | `3 L`      |

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::Quantizer;
use crate::code::{weight_count, TannerGraph};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SharingScheme {
    /// One weight per proto VN and proto edge per iteration.
    #[serde(rename = "full")]
    Full,
    /// Same layout as `Full`; kept as a separate name for configs that spell it out.
    #[serde(rename = "protograph-full")]
    ProtographFull,
    #[serde(rename = "spatial")]
    Spatial,
    #[serde(rename = "temporal")]
    Temporal,
    /// Spatial sharing with a separate CN weight for unsatisfied checks.
    #[serde(rename = "spatial+ucn")]
    SpatialUcn,
}

impl SharingScheme {
    pub const ALL: [SharingScheme; 5] = [
        SharingScheme::Full,
        SharingScheme::ProtographFull,
        SharingScheme::Spatial,
        SharingScheme::Temporal,
        SharingScheme::SpatialUcn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SharingScheme::Full => "full",
            SharingScheme::ProtographFull => "protograph-full",
            SharingScheme::Spatial => "spatial",
            SharingScheme::Temporal => "temporal",
            SharingScheme::SpatialUcn => "spatial+ucn",
        }
    }
}

impl FromStr for SharingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(SharingScheme::Full),
            "protograph-full" | "protograph" => Ok(SharingScheme::ProtographFull),
            "spatial" => Ok(SharingScheme::Spatial),
            "temporal" => Ok(SharingScheme::Temporal),
            "spatial+ucn" | "spatial-ucn" | "ucn" => Ok(SharingScheme::SpatialUcn),
            _ => Err(Error::UnknownScheme(s.to_string())),
        }
    }
}

impl fmt::Display for SharingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Weights of one contiguous block of iterations `first..=last` (1-based).
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSet {
    scheme: SharingScheme,
    first: usize,
    last: usize,
    proto_vns: usize,
    proto_edges: usize,
    params: Vec<f64>,
}

/// Dense per-iteration weights, resolved for fast lookup in the decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationWeights {
    /// Indexed by proto VN.
    pub vn: Vec<f64>,
    /// CN weight for satisfied checks, indexed by proto edge.
    pub scn: Vec<f64>,
    /// CN weight for unsatisfied checks, indexed by proto edge.
    pub ucn: Vec<f64>,
}

impl WeightSet {
    /// All parameters initialised to 1.
    pub fn ones(
        scheme: SharingScheme,
        first: usize,
        last: usize,
        proto_vns: usize,
        proto_edges: usize,
    ) -> Result<Self> {
        if first == 0 || last < first {
            return Err(Error::Config(format!(
                "invalid iteration range {first}..={last} (iterations are 1-based)"
            )));
        }
        let len = weight_count(scheme, proto_vns, proto_edges, last - first + 1)?;
        Ok(WeightSet {
            scheme,
            first,
            last,
            proto_vns,
            proto_edges,
            params: vec![1.0; len],
        })
    }

    pub fn for_graph(graph: &TannerGraph, scheme: SharingScheme, first: usize, last: usize) -> Result<Self> {
        Self::ones(scheme, first, last, graph.num_proto_vns(), graph.num_proto_edges())
    }

    pub fn from_params(
        scheme: SharingScheme,
        first: usize,
        last: usize,
        proto_vns: usize,
        proto_edges: usize,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut ws = Self::ones(scheme, first, last, proto_vns, proto_edges)?;
        if params.len() != ws.params.len() {
            return Err(Error::Length {
                expected: ws.params.len(),
                got: params.len(),
            });
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::Config(format!("parameter {i} is not finite")));
        }
        ws.params = params;
        Ok(ws)
    }

    pub fn scheme(&self) -> SharingScheme {
        self.scheme
    }

    pub fn first(&self) -> usize {
        self.first
    }

    pub fn last(&self) -> usize {
        self.last
    }

    pub fn iterations(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn covers(&self, iteration: usize) -> bool {
        (self.first..=self.last).contains(&iteration)
    }

    pub fn proto_vns(&self) -> usize {
        self.proto_vns
    }

    pub fn proto_edges(&self) -> usize {
        self.proto_edges
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    fn check(&self, iteration: usize) -> Result<usize> {
        if self.covers(iteration) {
            Ok(iteration - self.first)
        } else {
            Err(Error::Coverage {
                iteration,
                covered: format!("{}..={}", self.first, self.last),
            })
        }
    }

    /// Storage index of the VN weight for `proto_vn` at `iteration`.
    pub fn vn_index(&self, iteration: usize, proto_vn: usize) -> Result<usize> {
        let k = self.check(iteration)?;
        Ok(match self.scheme {
            SharingScheme::Full | SharingScheme::ProtographFull => k * (self.proto_vns + self.proto_edges) + proto_vn,
            SharingScheme::Spatial => 2 * k,
            SharingScheme::Temporal => proto_vn,
            SharingScheme::SpatialUcn => 3 * k,
        })
    }

    /// Storage index of the CN weight for `proto_edge` at `iteration`;
    /// `unsatisfied` only matters under spatial+ucn.
    pub fn cn_index(&self, iteration: usize, proto_edge: usize, unsatisfied: bool) -> Result<usize> {
        let k = self.check(iteration)?;
        Ok(match self.scheme {
            SharingScheme::Full | SharingScheme::ProtographFull => {
                k * (self.proto_vns + self.proto_edges) + self.proto_vns + proto_edge
            }
            SharingScheme::Spatial => 2 * k + 1,
            SharingScheme::Temporal => self.proto_vns + proto_edge,
            SharingScheme::SpatialUcn => 3 * k + if unsatisfied { 2 } else { 1 },
        })
    }

    /// `(vn weight, cn weight)` acting on lifted edge `edge` at `iteration`.
    pub fn resolve(&self, graph: &TannerGraph, iteration: usize, edge: usize, unsatisfied: bool) -> Result<(f64, f64)> {
        let e = graph.edge(edge);
        let vi = self.vn_index(iteration, e.proto_vn)?;
        let ci = self.cn_index(iteration, e.proto_edge, unsatisfied)?;
        Ok((self.params[vi], self.params[ci]))
    }

    pub fn iteration_weights(&self, iteration: usize) -> Result<IterationWeights> {
        let vn = (0..self.proto_vns)
            .map(|p| self.vn_index(iteration, p).map(|i| self.params[i]))
            .collect::<Result<_>>()?;
        let scn = (0..self.proto_edges)
            .map(|p| self.cn_index(iteration, p, false).map(|i| self.params[i]))
            .collect::<Result<_>>()?;
        let ucn = (0..self.proto_edges)
            .map(|p| self.cn_index(iteration, p, true).map(|i| self.params[i]))
            .collect::<Result<_>>()?;
        Ok(IterationWeights { vn, scn, ucn })
    }

    /// Expands to a full-diversity set; unsatisfied-check weights are dropped.
    pub fn to_full(&self) -> WeightSet {
        let mut full = WeightSet::ones(
            SharingScheme::Full,
            self.first,
            self.last,
            self.proto_vns,
            self.proto_edges,
        )
        .expect("range already validated");
        for it in self.first..=self.last {
            for p in 0..self.proto_vns {
                let dst = full.vn_index(it, p).unwrap();
                full.params[dst] = self.params[self.vn_index(it, p).unwrap()];
            }
            for p in 0..self.proto_edges {
                let dst = full.cn_index(it, p, false).unwrap();
                full.params[dst] = self.params[self.cn_index(it, p, false).unwrap()];
            }
        }
        full
    }

    /// Sets one VN and one CN value for every iteration (UCN weight equals CN weight).
    pub fn fill(&mut self, vn: f64, cn: f64) {
        for it in self.first..=self.last {
            for p in 0..self.proto_vns {
                let i = self.vn_index(it, p).unwrap();
                self.params[i] = vn;
            }
            for p in 0..self.proto_edges {
                for u in [false, true] {
                    let i = self.cn_index(it, p, u).unwrap();
                    self.params[i] = cn;
                }
            }
        }
    }
}

/// Weight sets of consecutive decoding stages covering iterations `1..=total`.
#[derive(Clone, Debug, PartialEq)]
pub struct StagedWeights {
    stages: Vec<WeightSet>,
}

impl StagedWeights {
    pub fn new(stages: Vec<WeightSet>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::Config("at least one weight stage is required".into()));
        }
        let mut next = 1;
        for s in &stages {
            if s.first != next {
                return Err(Error::Coverage {
                    iteration: next,
                    covered: format!("stage starting at {}", s.first),
                });
            }
            if (s.proto_vns, s.proto_edges) != (stages[0].proto_vns, stages[0].proto_edges) {
                return Err(Error::Config("stages disagree on protograph size".into()));
            }
            next = s.last + 1;
        }
        Ok(StagedWeights { stages })
    }

    pub fn single(ws: WeightSet) -> Result<Self> {
        Self::new(vec![ws])
    }

    /// Weighted min-sum with a single CN weight and unit VN weights.
    pub fn constant(graph: &TannerGraph, iterations: usize, cn_weight: f64) -> Result<Self> {
        let mut ws = WeightSet::for_graph(graph, SharingScheme::Spatial, 1, iterations)?;
        ws.fill(1.0, cn_weight);
        Self::single(ws)
    }

    pub fn stages(&self) -> &[WeightSet] {
        &self.stages
    }

    pub fn stage(&self, k: usize) -> &WeightSet {
        &self.stages[k]
    }

    pub fn stage_mut(&mut self, k: usize) -> &mut WeightSet {
        &mut self.stages[k]
    }

    pub fn total_iterations(&self) -> usize {
        self.stages.last().map(|s| s.last).unwrap_or(0)
    }

    pub fn stage_of(&self, iteration: usize) -> Result<usize> {
        self.stages
            .iter()
            .position(|s| s.covers(iteration))
            .ok_or_else(|| Error::Coverage {
                iteration,
                covered: format!("1..={}", self.total_iterations()),
            })
    }

    /// Keeps the stages needed for iterations `1..=iterations`, truncating the last one.
    pub fn truncated(&self, iterations: usize) -> Result<Self> {
        let k = self.stage_of(iterations)?;
        let mut stages: Vec<WeightSet> = self.stages[..=k].to_vec();
        let last = stages.last_mut().unwrap();
        if last.last != iterations {
            let keep = match last.scheme {
                SharingScheme::Temporal => last.params.clone(),
                _ => {
                    let per = last.params.len() / last.iterations();
                    last.params[..per * (iterations - last.first + 1)].to_vec()
                }
            };
            *last = WeightSet::from_params(
                last.scheme,
                last.first,
                iterations,
                last.proto_vns,
                last.proto_edges,
                keep,
            )?;
        }
        Self::new(stages)
    }

    pub fn push(&mut self, ws: WeightSet) -> Result<()> {
        let mut stages = std::mem::take(&mut self.stages);
        stages.push(ws);
        *self = Self::new(stages)?;
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.stages.iter().map(|s| s.len()).sum()
    }
}

pub const WEIGHT_FORMAT_VERSION: u32 = 1;

/// JSON weight file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFile {
    pub format_version: u32,
    pub code_id: String,
    pub proto_vns: usize,
    pub proto_edges: usize,
    pub quantizer: Option<Quantizer>,
    pub stages: Vec<StageRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub scheme: SharingScheme,
    pub first_iteration: usize,
    pub last_iteration: usize,
    pub params: Vec<f64>,
}

impl WeightFile {
    pub fn from_weights(code_id: &str, weights: &StagedWeights, quantizer: Option<Quantizer>) -> Self {
        let first = weights.stage(0);
        WeightFile {
            format_version: WEIGHT_FORMAT_VERSION,
            code_id: code_id.to_string(),
            proto_vns: first.proto_vns,
            proto_edges: first.proto_edges,
            quantizer,
            stages: weights
                .stages()
                .iter()
                .map(|s| StageRecord {
                    scheme: s.scheme,
                    first_iteration: s.first,
                    last_iteration: s.last,
                    params: s.params.clone(),
                })
                .collect(),
        }
    }

    pub fn to_weights(&self) -> Result<StagedWeights> {
        if self.format_version != WEIGHT_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported weight format version {}",
                self.format_version
            )));
        }
        let stages = self
            .stages
            .iter()
            .map(|s| {
                WeightSet::from_params(
                    s.scheme,
                    s.first_iteration,
                    s.last_iteration,
                    self.proto_vns,
                    self.proto_edges,
                    s.params.clone(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        StagedWeights::new(stages)
    }

    /// Checks the file was written for a graph with this protograph.
    pub fn check_graph(&self, graph: &TannerGraph) -> Result<()> {
        if self.proto_vns != graph.num_proto_vns() || self.proto_edges != graph.num_proto_edges() {
            return Err(Error::Dimension(format!(
                "weights are for N={} E={}, code has N={} E={}",
                self.proto_vns,
                self.proto_edges,
                graph.num_proto_vns(),
                graph.num_proto_edges()
            )));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let wf: WeightFile = serde_json::from_str(text)?;
        wf.to_weights()?;
        Ok(wf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("weight file serialises")
    }

    /// Writes atomically through a temporary sibling file.
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_json().as_bytes())
    }

    /// SHA-256 of the parameter content, used as dataset provenance.
    pub fn digest(&self) -> String {
        weights_digest(&self.to_weights().expect("validated on construction"))
    }
}

/// SHA-256 over scheme, range and little-endian parameter bytes of every stage.
pub fn weights_digest(weights: &StagedWeights) -> String {
    let mut h = Sha256::new();
    for s in weights.stages() {
        h.update(s.scheme.name().as_bytes());
        h.update((s.first as u64).to_le_bytes());
        h.update((s.last as u64).to_le_bytes());
        for p in &s.params {
            h.update(p.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
