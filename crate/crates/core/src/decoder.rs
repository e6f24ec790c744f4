//! Flooding neural min-sum decoder.
//!
//! Per iteration `l`, every VN sends
//! `w_vn(l) * ch[v] + sum of the other incoming CN messages of l-1` (computed
//! as the full sum minus the target edge's own message), then each
//! CN's satisfaction flag is taken from the sign product of the messages it
//! just received, then every CN replies with
//! `w_cn(l) * sign product * min magnitude` over its other neighbours.
//! In quantized mode the channel LLRs and both message kinds pass through the
//! [`Quantizer`]. With all weights 1 this is plain min-sum.

use crate::channel::Quantizer;
use crate::code::TannerGraph;
use crate::error::{Error, Result};
use crate::weights::{IterationWeights, StagedWeights};

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderConfig {
    /// Total iterations to run.
    pub iterations: usize,
    pub quantizer: Option<Quantizer>,
    /// Quantize the channel LLRs as well (only with `quantizer`).
    pub quantize_channel: bool,
    /// Stop once the hard decision satisfies every check.
    pub early_stop: bool,
    /// Record per-iteration messages from this iteration on.
    pub trace_from: Option<usize>,
}

impl DecoderConfig {
    pub fn floating(iterations: usize) -> Self {
        DecoderConfig {
            iterations,
            quantizer: None,
            quantize_channel: true,
            early_stop: true,
            trace_from: None,
        }
    }

    pub fn quantized(iterations: usize, quantizer: Quantizer) -> Self {
        DecoderConfig {
            quantizer: Some(quantizer),
            ..Self::floating(iterations)
        }
    }

    /// Fixed depth with every iteration recorded, as needed for training.
    pub fn traced(mut self, from: usize) -> Self {
        self.early_stop = false;
        self.trace_from = Some(from);
        self
    }

    pub fn with_early_stop(mut self, on: bool) -> Self {
        self.early_stop = on;
        self
    }
}

/// Messages and CN bookkeeping of one iteration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationTrace {
    pub iteration: usize,
    /// VN to CN before quantization (identical to `v2c` when floating).
    pub v2c_raw: Vec<f64>,
    pub v2c: Vec<f64>,
    pub c2v_raw: Vec<f64>,
    pub c2v: Vec<f64>,
    /// Per CN: odd number of negative incoming messages.
    pub unsatisfied: Vec<bool>,
    /// Per CN: edge with the smallest incoming magnitude (lowest id on ties).
    pub min1: Vec<u32>,
    /// Per CN: edge with the second smallest incoming magnitude.
    pub min2: Vec<u32>,
}

impl IterationTrace {
    fn resize(&mut self, edges: usize, checks: usize) {
        self.v2c_raw.resize(edges, 0.0);
        self.v2c.resize(edges, 0.0);
        self.c2v_raw.resize(edges, 0.0);
        self.c2v.resize(edges, 0.0);
        self.unsatisfied.resize(checks, false);
        self.min1.resize(checks, 0);
        self.min2.resize(checks, 0);
    }
}

/// Result of one decode, optionally with the forward trace.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DecodeRecord {
    /// LLRs as seen by the decoder (quantized in quantized mode).
    pub channel: Vec<f64>,
    /// `channel + sum of incoming CN messages` after the last iteration run.
    pub output: Vec<f64>,
    pub hard: Vec<u8>,
    /// Bit errors against the all-zero codeword after each iteration run.
    pub errors_per_iteration: Vec<u32>,
    /// The final hard decision satisfies every check.
    pub success: bool,
    pub iterations: usize,
    pub early_stopped: bool,
    pub trace_from: Option<usize>,
    pub trace: Vec<IterationTrace>,
    scratch: IterationTrace,
    trace_len: usize,
}

impl DecodeRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bit_errors(&self) -> u32 {
        self.errors_per_iteration
            .last()
            .copied()
            .unwrap_or_else(|| self.hard.iter().map(|&b| b as u32).sum())
    }

    /// Any residual bit error against the transmitted all-zero codeword.
    pub fn frame_error(&self) -> bool {
        self.bit_errors() > 0
    }

    /// CN-to-VN messages after the last iteration run.
    pub fn final_c2v(&self) -> &[f64] {
        &self.scratch.c2v
    }

    /// Recorded iterations.
    pub fn traces(&self) -> &[IterationTrace] {
        &self.trace[..self.trace_len]
    }

    pub fn iteration_trace(&self, iteration: usize) -> Result<&IterationTrace> {
        let from = self.trace_from.ok_or(Error::MissingTrace(iteration))?;
        if iteration < from || iteration > self.iterations {
            return Err(Error::MissingTrace(iteration));
        }
        self.traces()
            .get(iteration - from)
            .ok_or(Error::MissingTrace(iteration))
    }
}

/// Bit `v` is 1 iff `channel[v] + sum of incoming CN messages at iteration` is
/// negative.
pub fn posterior_hard_decision(graph: &TannerGraph, record: &DecodeRecord, iteration: usize) -> Result<Vec<u8>> {
    let t = record.iteration_trace(iteration)?;
    Ok((0..graph.n())
        .map(|v| {
            let post = graph
                .vn_edges(v)
                .iter()
                .fold(record.channel[v], |acc, &e| acc + t.c2v[e as usize]);
            (post < 0.0) as u8
        })
        .collect())
}

/// Single VN-to-CN message: `w * ch + sum(incoming)`.
pub fn vn_update(ch: f64, incoming: &[f64], vn_weight: f64, quantizer: Option<&Quantizer>) -> f64 {
    let s = incoming.iter().fold(vn_weight * ch, |acc, &m| acc + m);
    match quantizer {
        Some(q) => q.quantize(s),
        None => s,
    }
}

/// Single CN-to-VN message: `w * prod(sgn) * min |incoming|` with `sgn(0) = +1`.
pub fn cn_update(incoming: &[f64], cn_weight: f64, quantizer: Option<&Quantizer>) -> Result<f64> {
    if incoming.is_empty() {
        return Err(Error::DegenerateCheck(0, 1));
    }
    let negative = incoming.iter().filter(|&&m| m < 0.0).count() % 2 == 1;
    let mag = incoming.iter().fold(f64::INFINITY, |acc, m| acc.min(m.abs()));
    let d = cn_weight * if negative { -mag } else { mag };
    Ok(match quantizer {
        Some(q) => q.quantize(d),
        None => d,
    })
}

pub struct Decoder<'g> {
    graph: &'g TannerGraph,
    config: DecoderConfig,
    weights: Vec<IterationWeights>,
    edge_proto: Vec<u32>,
    vn_proto: Vec<u32>,
}

impl<'g> Decoder<'g> {
    pub fn new(graph: &'g TannerGraph, weights: &StagedWeights, config: DecoderConfig) -> Result<Self> {
        if config.iterations == 0 {
            return Err(Error::Config("decoder needs at least one iteration".into()));
        }
        if let Some(q) = &config.quantizer {
            q.validate()?;
        }
        if let Some(from) = config.trace_from {
            if from == 0 || from > config.iterations {
                return Err(Error::Config(format!(
                    "trace start {from} outside 1..={}",
                    config.iterations
                )));
            }
        }
        let first = weights.stage(0);
        if first.proto_vns() != graph.num_proto_vns() || first.proto_edges() != graph.num_proto_edges() {
            return Err(Error::Dimension(format!(
                "weights are for N={} E={}, graph has N={} E={}",
                first.proto_vns(),
                first.proto_edges(),
                graph.num_proto_vns(),
                graph.num_proto_edges()
            )));
        }
        let weights = (1..=config.iterations)
            .map(|it| {
                let k = weights.stage_of(it)?;
                weights.stage(k).iteration_weights(it)
            })
            .collect::<Result<Vec<_>>>()?;
        let edge_proto = (0..graph.num_edges()).map(|e| graph.proto_edge_of(e) as u32).collect();
        Ok(Decoder {
            graph,
            config,
            weights,
            edge_proto,
            vn_proto: (0..graph.n()).map(|v| graph.proto_vn_of_vn(v) as u32).collect(),
        })
    }

    pub fn graph(&self) -> &'g TannerGraph {
        self.graph
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.config
    }

    pub fn decode(&self, llr: &[f64]) -> Result<DecodeRecord> {
        let mut rec = DecodeRecord::new();
        self.decode_into(llr, &mut rec)?;
        Ok(rec)
    }

    /// Decodes into `rec`, reusing its buffers.
    pub fn decode_into(&self, llr: &[f64], rec: &mut DecodeRecord) -> Result<()> {
        self.run(llr, 0, None, rec)
    }

    /// Continues from the CN messages left by a decode that stopped after
    /// iteration `done` (see [`DecodeRecord::final_c2v`]). Weights of the
    /// skipped iterations are not consulted, so the result equals a full decode
    /// whenever the resumed messages came from the same weights.
    /// `errors_per_iteration` then starts at iteration `done + 1`.
    pub fn resume_into(&self, llr: &[f64], done: usize, c2v: &[f64], rec: &mut DecodeRecord) -> Result<()> {
        if done >= self.config.iterations {
            return Err(Error::Config(format!(
                "cannot resume after iteration {done} of {}",
                self.config.iterations
            )));
        }
        if let Some(from) = self.config.trace_from {
            if from <= done {
                return Err(Error::MissingTrace(from));
            }
        }
        if c2v.len() != self.graph.num_edges() {
            return Err(Error::Length {
                expected: self.graph.num_edges(),
                got: c2v.len(),
            });
        }
        self.run(llr, done, Some(c2v), rec)
    }

    fn run(&self, llr: &[f64], done: usize, start: Option<&[f64]>, rec: &mut DecodeRecord) -> Result<()> {
        let g = self.graph;
        let (n, m, ne) = (g.n(), g.m(), g.num_edges());
        if llr.len() != n {
            return Err(Error::Length {
                expected: n,
                got: llr.len(),
            });
        }
        let q = self.config.quantizer;

        rec.channel.clear();
        match q {
            Some(q) if self.config.quantize_channel => rec.channel.extend(llr.iter().map(|&l| q.quantize(l))),
            _ => rec.channel.extend_from_slice(llr),
        }
        rec.output.resize(n, 0.0);
        rec.hard.resize(n, 0);
        rec.errors_per_iteration.clear();
        rec.trace_from = self.config.trace_from;
        rec.trace_len = 0;
        rec.success = false;
        rec.early_stopped = false;
        rec.iterations = done;

        let mut cur = std::mem::take(&mut rec.scratch);
        cur.resize(ne, m);
        match start {
            Some(c2v) => cur.c2v.copy_from_slice(c2v),
            // m^(0)_{c->v} = 0
            None => cur.c2v.iter_mut().for_each(|x| *x = 0.0),
        }

        let mut buf: Vec<f64> = Vec::with_capacity(16);
        for it in done + 1..=self.config.iterations {
            let w = &self.weights[it - 1];
            cur.iteration = it;

            for v in 0..n {
                let base = w.vn[self.vn_proto[v] as usize] * rec.channel[v];
                let edges = g.vn_edges(v);
                let total = edges.iter().fold(base, |acc, &e| acc + cur.c2v[e as usize]);
                for &e in edges {
                    let e = e as usize;
                    let s = total - cur.c2v[e];
                    cur.v2c_raw[e] = s;
                    cur.v2c[e] = match &q {
                        Some(q) => q.quantize(s),
                        None => s,
                    };
                }
            }

            for c in 0..m {
                let edges = g.cn_edges(c);
                buf.resize(edges.len(), 0.0);
                for (b, &e) in buf.iter_mut().zip(edges) {
                    *b = cur.v2c[e as usize];
                }
                let mut negative = false;
                let (mut min1, mut min2) = (f64::INFINITY, f64::INFINITY);
                let (mut i1, mut i2) = (0, 0);
                for (k, &x) in buf.iter().enumerate() {
                    negative ^= x < 0.0;
                    let a = x.abs();
                    if a < min1 {
                        min2 = min1;
                        i2 = i1;
                        min1 = a;
                        i1 = k;
                    } else if a < min2 {
                        min2 = a;
                        i2 = k;
                    }
                }
                cur.unsatisfied[c] = negative;
                cur.min1[c] = edges[i1];
                cur.min2[c] = edges[i2];
                let table = if negative { &w.ucn } else { &w.scn };
                for (k, (&e, &x)) in edges.iter().zip(buf.iter()).enumerate() {
                    let e = e as usize;
                    let mag = if k == i1 { min2 } else { min1 };
                    let neg = negative ^ (x < 0.0);
                    let d = table[self.edge_proto[e] as usize] * if neg { -mag } else { mag };
                    cur.c2v_raw[e] = d;
                    cur.c2v[e] = match &q {
                        Some(q) => q.quantize(d),
                        None => d,
                    };
                }
            }

            let mut errors = 0u32;
            for v in 0..n {
                let post = g
                    .vn_edges(v)
                    .iter()
                    .fold(rec.channel[v], |acc, &e| acc + cur.c2v[e as usize]);
                rec.output[v] = post;
                let bit = (post < 0.0) as u8;
                rec.hard[v] = bit;
                errors += bit as u32;
            }
            rec.errors_per_iteration.push(errors);
            rec.iterations = it;

            if let Some(from) = self.config.trace_from {
                if it >= from {
                    if rec.trace.len() <= rec.trace_len {
                        rec.trace.push(IterationTrace::default());
                    }
                    rec.trace[rec.trace_len].clone_from(&cur);
                    rec.trace_len += 1;
                }
            }

            if self.config.early_stop && self.parity_ok(&rec.hard) {
                rec.success = true;
                rec.early_stopped = it < self.config.iterations;
                break;
            }
        }
        if !rec.success {
            rec.success = self.parity_ok(&rec.hard);
        }
        rec.scratch = cur;
        Ok(())
    }

    fn parity_ok(&self, hard: &[u8]) -> bool {
        let g = self.graph;
        (0..g.m()).all(|c| {
            g.cn_edges(c)
                .iter()
                .fold(0u8, |acc, &e| acc ^ hard[g.edge_vn(e as usize)])
                == 0
        })
    }
}
