//! Reverse pass through the unrolled decoder.
//!
//! Local derivatives per iteration:
//! * VN message `w_vn * ch + sum(others)`: `d/dw_vn = ch`, `d/d(incoming) = 1`.
//! * CN message `w * s * |x_a|` with `x_a` the smallest other input: `d/dw` is
//!   the unweighted output `s * |x_a|`, `d/dx_a = w * s * sgn(x_a)`; the other
//!   inputs, the sign product, and the satisfaction flag are constants.
//! * Quantizer: straight-through inside `(-max, max)`, zero outside.

use std::ops::RangeInclusive;

use crate::channel::Quantizer;
use crate::code::TannerGraph;
use crate::decoder::DecodeRecord;
use crate::error::{Error, Result};
use crate::train::loss::{fer_loss_soft, LossConfig};
use crate::weights::{IterationWeights, StagedWeights, WeightSet};

/// Gradient accumulators aligned with one [`WeightSet`]'s storage.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBuffer {
    pub grads: Vec<f64>,
    pub samples: usize,
    pub loss_sum: f64,
}

impl GradientBuffer {
    pub fn zeros(len: usize) -> Self {
        GradientBuffer {
            grads: vec![0.0; len],
            samples: 0,
            loss_sum: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn merge(&mut self, other: &GradientBuffer) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            *a += b;
        }
        self.samples += other.samples;
        self.loss_sum += other.loss_sum;
    }

    /// Per-sample mean gradient.
    pub fn mean(&self) -> Vec<f64> {
        let k = self.samples.max(1) as f64;
        self.grads.iter().map(|g| g / k).collect()
    }

    pub fn mean_loss(&self) -> f64 {
        self.loss_sum / self.samples.max(1) as f64
    }
}

/// Which stage is trained and over which iterations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainTarget {
    pub stage: usize,
    pub first: usize,
    pub last: usize,
}

impl TrainTarget {
    pub fn iterations(&self) -> RangeInclusive<usize> {
        self.first..=self.last
    }
}

/// Parameters of `ws` used by at least one iteration in `first..=last`.
pub fn trainable_mask(ws: &WeightSet, first: usize, last: usize) -> Result<Vec<bool>> {
    let mut mask = vec![false; ws.len()];
    for it in first..=last {
        for p in 0..ws.proto_vns() {
            mask[ws.vn_index(it, p)?] = true;
        }
        for p in 0..ws.proto_edges() {
            mask[ws.cn_index(it, p, false)?] = true;
            mask[ws.cn_index(it, p, true)?] = true;
        }
    }
    Ok(mask)
}

struct IterationTables {
    weights: IterationWeights,
    /// Present for iterations inside the trainable window.
    vn_index: Option<Vec<usize>>,
    scn_index: Vec<usize>,
    ucn_index: Vec<usize>,
}

/// Reverse pass prepared for fixed weights, target, and unrolled depth.
pub struct Backward<'g> {
    graph: &'g TannerGraph,
    quantizer: Option<Quantizer>,
    target: TrainTarget,
    depth: usize,
    len: usize,
    tables: Vec<IterationTables>,
    edge_proto: Vec<u32>,
}

impl<'g> Backward<'g> {
    pub fn new(
        graph: &'g TannerGraph,
        weights: &StagedWeights,
        quantizer: Option<Quantizer>,
        target: TrainTarget,
        depth: usize,
    ) -> Result<Self> {
        if target.stage >= weights.stages().len() {
            return Err(Error::Config(format!("no weight stage {}", target.stage)));
        }
        let ws = weights.stage(target.stage);
        if target.first < ws.first() || target.last > ws.last() || target.first > target.last {
            return Err(Error::Coverage {
                iteration: target.first,
                covered: format!("{}..={}", ws.first(), ws.last()),
            });
        }
        if depth < target.last || depth > weights.total_iterations() {
            return Err(Error::Config(format!(
                "unrolled depth {depth} must lie in {}..={}",
                target.last,
                weights.total_iterations()
            )));
        }
        let mut tables = Vec::with_capacity(depth - target.first + 1);
        for it in target.first..=depth {
            let k = weights.stage_of(it)?;
            let iw = weights.stage(k).iteration_weights(it)?;
            let (vn_index, scn_index, ucn_index) = if it <= target.last {
                (
                    Some(
                        (0..ws.proto_vns())
                            .map(|p| ws.vn_index(it, p))
                            .collect::<Result<Vec<_>>>()?,
                    ),
                    (0..ws.proto_edges())
                        .map(|p| ws.cn_index(it, p, false))
                        .collect::<Result<Vec<_>>>()?,
                    (0..ws.proto_edges())
                        .map(|p| ws.cn_index(it, p, true))
                        .collect::<Result<Vec<_>>>()?,
                )
            } else {
                (None, Vec::new(), Vec::new())
            };
            tables.push(IterationTables {
                weights: iw,
                vn_index,
                scn_index,
                ucn_index,
            });
        }
        Ok(Backward {
            graph,
            quantizer,
            target,
            depth,
            len: ws.len(),
            tables,
            edge_proto: (0..graph.num_edges()).map(|e| graph.proto_edge_of(e) as u32).collect(),
        })
    }

    pub fn target(&self) -> TrainTarget {
        self.target
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn buffer(&self) -> GradientBuffer {
        GradientBuffer::zeros(self.len)
    }

    fn passes(&self, x: f64) -> bool {
        self.quantizer.is_none_or(|q| q.passes_gradient(x))
    }

    /// Adds the gradient of the soft loss of `record` into `buf`; returns the loss.
    pub fn accumulate(&self, record: &DecodeRecord, loss: &LossConfig, buf: &mut GradientBuffer) -> Result<f64> {
        if record.early_stopped {
            return Err(Error::EarlyStopped(record.iterations));
        }
        if record.iterations != self.depth {
            return Err(Error::Config(format!(
                "record ran {} iterations, expected {}",
                record.iterations, self.depth
            )));
        }
        if buf.len() != self.len {
            return Err(Error::Length {
                expected: self.len,
                got: buf.len(),
            });
        }
        record.iteration_trace(self.target.first)?;

        let g = self.graph;
        let (n, m, ne) = (g.n(), g.m(), g.num_edges());
        let sl = fer_loss_soft(&record.output, loss.alpha)?;
        buf.samples += 1;
        buf.loss_sum += sl.value;

        let mut g_c2v = vec![0.0f64; ne];
        let mut g_v2c = vec![0.0f64; ne];
        for &e in g.vn_edges(sl.argmin) {
            g_c2v[e as usize] = sl.grad;
        }

        for it in (self.target.first..=self.depth).rev() {
            let t = record.iteration_trace(it)?;
            let tab = &self.tables[it - self.target.first];
            let trainable = it <= self.target.last;

            g_v2c.iter_mut().for_each(|x| *x = 0.0);
            for c in 0..m {
                let unsat = t.unsatisfied[c];
                let (i1, i2) = (t.min1[c] as usize, t.min2[c] as usize);
                let table = if unsat { &tab.weights.ucn } else { &tab.weights.scn };
                for &e in g.cn_edges(c) {
                    let e = e as usize;
                    let gd = g_c2v[e];
                    if gd == 0.0 || !self.passes(t.c2v_raw[e]) {
                        continue;
                    }
                    let a = if e == i1 { i2 } else { i1 };
                    let xa = t.v2c[a];
                    let s = if unsat ^ (t.v2c[e] < 0.0) { -1.0 } else { 1.0 };
                    let pe = self.edge_proto[e] as usize;
                    if trainable {
                        let idx = if unsat { tab.ucn_index[pe] } else { tab.scn_index[pe] };
                        buf.grads[idx] += gd * s * xa.abs();
                    }
                    let sa = if xa < 0.0 { -1.0 } else { 1.0 };
                    g_v2c[a] += gd * table[pe] * s * sa;
                }
            }

            let propagate = it > self.target.first;
            for v in 0..n {
                let edges = g.vn_edges(v);
                let mut total = 0.0;
                for &e in edges {
                    let e = e as usize;
                    if !self.passes(t.v2c_raw[e]) {
                        g_v2c[e] = 0.0;
                    }
                    total += g_v2c[e];
                }
                if let Some(vi) = &tab.vn_index {
                    buf.grads[vi[g.proto_vn_of_vn(v)]] += total * record.channel[v];
                }
                if propagate {
                    for &e in edges {
                        let e = e as usize;
                        g_c2v[e] = total - g_v2c[e];
                    }
                }
            }
        }
        Ok(sl.value)
    }

    pub fn gradient(&self, record: &DecodeRecord, loss: &LossConfig) -> Result<GradientBuffer> {
        let mut buf = self.buffer();
        self.accumulate(record, loss, &mut buf)?;
        Ok(buf)
    }
}
