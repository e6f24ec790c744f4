use serde::Serialize;

use super::TannerGraph;
use crate::error::{Error, Result};
use crate::weights::SharingScheme;

/// Number of trainable parameters for `iterations` iterations under `scheme`.
pub fn weight_count(scheme: SharingScheme, proto_vns: usize, proto_edges: usize, iterations: usize) -> Result<usize> {
    if iterations == 0 {
        return Err(Error::Config("weight_count needs at least one iteration".into()));
    }
    Ok(match scheme {
        SharingScheme::Full | SharingScheme::ProtographFull => (proto_vns + proto_edges) * iterations,
        SharingScheme::Spatial => 2 * iterations,
        SharingScheme::Temporal => proto_vns + proto_edges,
        SharingScheme::SpatialUcn => 3 * iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderKind {
    MinSum,
    NeuralMinSum,
}

/// Per-iteration operation counts and the weighted total `(A + 2C + Mul) * iterations`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ComplexityReport {
    pub kind: DecoderKind,
    pub additions: u64,
    pub comparisons: u64,
    pub multiplications: u64,
    pub iterations: u64,
    pub total: u64,
    /// Stored weights; zero for plain min-sum.
    pub weight_memory: u64,
}

impl ComplexityReport {
    pub fn with_weight_memory(mut self, count: usize) -> Self {
        if self.kind == DecoderKind::NeuralMinSum {
            self.weight_memory = count as u64;
        }
        self
    }
}

/// Comparisons a check of degree `d` spends finding the two smallest
/// magnitudes: `d + ceil(ln d) - 2`.
pub fn check_comparisons(degree: usize) -> u64 {
    let d = degree as f64;
    (degree as u64 + d.ln().ceil() as u64).saturating_sub(2)
}

pub fn complexity_estimate(graph: &TannerGraph, kind: DecoderKind, iterations: usize) -> Result<ComplexityReport> {
    if iterations == 0 {
        return Err(Error::Config("complexity needs at least one iteration".into()));
    }
    let ez = graph.num_edges() as u64;
    let additions = 2 * ez;
    let comparisons: u64 = (0..graph.m()).map(|c| check_comparisons(graph.cn_degree(c))).sum();
    let multiplications = match kind {
        DecoderKind::MinSum => ez,
        // E*z extra CN weightings plus N*z VN weightings
        DecoderKind::NeuralMinSum => 2 * ez + graph.n() as u64,
    };
    let iterations = iterations as u64;
    Ok(ComplexityReport {
        kind,
        additions,
        comparisons,
        multiplications,
        iterations,
        total: (additions + 2 * comparisons + multiplications) * iterations,
        weight_memory: 0,
    })
}
