//! Block-wise training of one decoder stage.
//!
//! Iterations before a sub-stage window do not change while it trains, so the
//! CN messages after them are computed once per sub-stage and every forward
//! pass resumes from there. Resuming is bit-identical to decoding from scratch.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{stream_rng, ChannelParams, Quantizer};
use crate::code::TannerGraph;
use crate::decoder::{DecodeRecord, Decoder, DecoderConfig};
use crate::error::{Error, Result};
use crate::pipeline::dataset::draw_frame;
use crate::pipeline::schedule::substage_windows;
use crate::train::{
    fer_loss_hard, trainable_mask, AdamConfig, AdamState, Backward, GradientBuffer, LossConfig, TrainTarget,
};
use crate::weights::StagedWeights;

/// Samples per parallel work unit; fixed so results do not depend on the
/// number of workers.
const WORK_UNIT: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub loss: LossConfig,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            epochs: 100,
            batch_size: 500,
            adam: AdamConfig::default(),
            loss: LossConfig::default(),
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        self.loss.validate()
    }
}

/// Decoder arithmetic shared by training and evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arithmetic {
    pub quantizer: Option<Quantizer>,
    pub quantize_channel: bool,
}

impl Arithmetic {
    pub fn floating() -> Self {
        Arithmetic {
            quantizer: None,
            quantize_channel: false,
        }
    }

    pub fn quantized(q: Quantizer) -> Self {
        Arithmetic {
            quantizer: Some(q),
            quantize_channel: true,
        }
    }

    pub fn config(&self, iterations: usize) -> DecoderConfig {
        DecoderConfig {
            quantizer: self.quantizer,
            quantize_channel: self.quantize_channel,
            ..DecoderConfig::floating(iterations)
        }
    }
}

/// Where training frames come from.
#[derive(Clone, Copy, Debug)]
pub enum SampleSource<'a> {
    /// Fresh frames every epoch, Eb/N0 drawn uniformly from `region`.
    Random {
        channel: ChannelParams,
        region: &'a [f64],
        frames_per_epoch: usize,
    },
    /// A fixed set of channel LLR vectors, reshuffled every epoch.
    Fixed(&'a [Vec<f64>]),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub delta1: usize,
    pub delta2: usize,
}

impl Schedule {
    pub fn one_shot(stage_len: usize) -> Self {
        Schedule {
            delta1: stage_len,
            delta2: 0,
        }
    }
}

/// One row of the training log. Epoch 0 is the evaluation before training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub stage: usize,
    pub substage: usize,
    pub first: usize,
    pub last: usize,
    pub epoch: usize,
    pub train_loss: Option<f64>,
    pub train_fer: Option<f64>,
    pub validation_fer: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubstageResult {
    pub first: usize,
    pub last: usize,
    pub best_epoch: usize,
    pub best_validation_fer: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct StageReport {
    pub log: Vec<EpochLog>,
    pub substages: Vec<SubstageResult>,
}

/// CN messages after the first `done` iterations, compact when quantized.
#[derive(Clone, Debug)]
enum Stored {
    Start,
    Levels(Vec<i8>),
    Exact(Vec<f64>),
}

#[derive(Clone, Debug)]
enum Prefix {
    Pending(Stored),
    /// Decoding already stopped on a valid codeword; `true` for a frame error.
    Settled(bool),
}

struct PrefixCache {
    done: usize,
    states: Vec<Prefix>,
}

impl PrefixCache {
    fn new(len: usize) -> Self {
        PrefixCache {
            done: 0,
            states: vec![Prefix::Pending(Stored::Start); len],
        }
    }
}

fn level_step(q: Option<Quantizer>) -> Option<f64> {
    q.filter(|q| q.max / q.step <= i8::MAX as f64).map(|q| q.step)
}

fn store(c2v: &[f64], step: Option<f64>) -> Stored {
    match step {
        Some(s) => Stored::Levels(c2v.iter().map(|&x| (x / s).round() as i8).collect()),
        None => Stored::Exact(c2v.to_vec()),
    }
}

fn forward(
    decoder: &Decoder,
    llr: &[f64],
    done: usize,
    state: &Stored,
    step: Option<f64>,
    rec: &mut DecodeRecord,
) -> Result<()> {
    match state {
        Stored::Start => decoder.decode_into(llr, rec),
        Stored::Exact(c) => decoder.resume_into(llr, done, c, rec),
        Stored::Levels(k) => {
            let s = step.expect("levels are only stored with a step");
            let c: Vec<f64> = k.iter().map(|&k| k as f64 * s).collect();
            decoder.resume_into(llr, done, &c, rec)
        }
    }
}

/// Moves every pending state of `cache` forward to iteration `to`.
fn advance(
    cache: &mut PrefixCache,
    graph: &TannerGraph,
    weights: &StagedWeights,
    arith: Arithmetic,
    llrs: &[Vec<f64>],
    to: usize,
    early_stop: bool,
) -> Result<()> {
    if to <= cache.done {
        return Ok(());
    }
    let decoder = Decoder::new(graph, weights, arith.config(to).with_early_stop(early_stop))?;
    let step = level_step(arith.quantizer);
    let done = cache.done;
    cache.states.par_iter_mut().zip(llrs.par_iter()).try_for_each_init(
        DecodeRecord::new,
        |rec, (p, llr)| -> Result<()> {
            if let Prefix::Pending(s) = p {
                forward(&decoder, llr, done, s, step, rec)?;
                *p = if early_stop && rec.success {
                    Prefix::Settled(rec.frame_error())
                } else {
                    Prefix::Pending(store(rec.final_c2v(), step))
                };
            }
            Ok(())
        },
    )?;
    cache.done = to;
    Ok(())
}

/// First iteration of `stage` before `first` whose weights share storage with
/// the trainable parameters of the window, or `first` when there is none.
fn first_affected(weights: &StagedWeights, stage: usize, first: usize, last: usize) -> Result<usize> {
    let ws = weights.stage(stage);
    let mask = trainable_mask(ws, first, last)?;
    for it in ws.first()..first {
        let touched = (0..ws.proto_vns()).any(|p| ws.vn_index(it, p).is_ok_and(|i| mask[i]))
            || (0..ws.proto_edges()).any(|p| {
                [false, true]
                    .iter()
                    .any(|&u| ws.cn_index(it, p, u).is_ok_and(|i| mask[i]))
            });
        if touched {
            return Ok(it);
        }
    }
    Ok(first)
}

fn validation_fer(
    cache: &PrefixCache,
    graph: &TannerGraph,
    weights: &StagedWeights,
    arith: Arithmetic,
    llrs: &[Vec<f64>],
    depth: usize,
) -> Result<f64> {
    let decoder = Decoder::new(graph, weights, arith.config(depth))?;
    let step = level_step(arith.quantizer);
    let errors: Vec<bool> = cache
        .states
        .par_iter()
        .zip(llrs.par_iter())
        .map_init(DecodeRecord::new, |rec, (p, llr)| match p {
            Prefix::Settled(e) => Ok(*e),
            Prefix::Pending(s) => {
                forward(&decoder, llr, cache.done, s, step, rec)?;
                Ok(rec.frame_error())
            }
        })
        .collect::<Result<_>>()?;
    Ok(errors.iter().filter(|&&e| e).count() as f64 / llrs.len() as f64)
}

struct BatchResult {
    grads: GradientBuffer,
    hard_errors: f64,
}

/// Forward and backward over `batch`; partial sums merged in batch order.
fn run_batch(
    decoder: &Decoder,
    backward: &Backward,
    loss: &LossConfig,
    batch: &[(Vec<f64>, Option<&Prefix>)],
    done: usize,
    step: Option<f64>,
) -> Result<BatchResult> {
    let parts: Vec<BatchResult> = batch
        .par_chunks(WORK_UNIT)
        .map_init(DecodeRecord::new, |rec, unit| {
            let mut grads = backward.buffer();
            let mut hard_errors = 0.0;
            for (llr, prefix) in unit {
                match prefix {
                    None => forward(decoder, llr, 0, &Stored::Start, step, rec)?,
                    Some(Prefix::Pending(s)) => forward(decoder, llr, done, s, step, rec)?,
                    Some(Prefix::Settled(_)) => unreachable!("training prefixes never settle"),
                }
                backward.accumulate(rec, loss, &mut grads)?;
                hard_errors += fer_loss_hard(&rec.output);
            }
            Ok(BatchResult { grads, hard_errors })
        })
        .collect::<Result<_>>()?;
    let mut total = BatchResult {
        grads: backward.buffer(),
        hard_errors: 0.0,
    };
    for p in &parts {
        total.grads.merge(&p.grads);
        total.hard_errors += p.hard_errors;
    }
    Ok(total)
}

/// Trains stage `stage` of `weights` in place with the block-wise schedule.
/// Other stages are never written. Each sub-stage keeps the weights of its
/// epoch with the lowest validation FER, the later epoch on ties.
pub fn train_stage(
    graph: &TannerGraph,
    weights: &mut StagedWeights,
    stage: usize,
    schedule: Schedule,
    source: SampleSource,
    validation: &[Vec<f64>],
    arith: Arithmetic,
    cfg: &TrainerConfig,
) -> Result<StageReport> {
    cfg.validate()?;
    if stage >= weights.stages().len() {
        return Err(Error::Config(format!("no weight stage {}", stage + 1)));
    }
    if validation.is_empty() {
        return Err(Error::EmptyDataset("validation set".into()));
    }
    match source {
        SampleSource::Fixed(s) if s.is_empty() => return Err(Error::EmptyDataset("training set".into())),
        SampleSource::Random {
            region,
            frames_per_epoch,
            ..
        } if region.is_empty() || frames_per_epoch == 0 => {
            return Err(Error::EmptyDataset("random source needs a region and frames".into()))
        }
        _ => {}
    }
    let (start, end) = (weights.stage(stage).first(), weights.stage(stage).last());
    let windows = substage_windows(start, end, schedule.delta1, schedule.delta2)?;
    let n = graph.n();
    let step = level_step(arith.quantizer);
    let clock = Instant::now();
    let mut report = StageReport::default();

    let mut val_cache = PrefixCache::new(validation.len());
    let mut train_cache = match source {
        SampleSource::Fixed(s) => Some(PrefixCache::new(s.len())),
        SampleSource::Random { .. } => None,
    };

    for (si, &(first, last)) in windows.iter().enumerate() {
        let substage = si + 1;
        let cut = first_affected(weights, stage, first, last)? - 1;
        if cut < val_cache.done {
            val_cache = PrefixCache::new(validation.len());
        }
        advance(&mut val_cache, graph, weights, arith, validation, cut, true)?;
        if let (Some(cache), SampleSource::Fixed(s)) = (train_cache.as_mut(), source) {
            if cut < cache.done {
                *cache = PrefixCache::new(s.len());
            }
            advance(cache, graph, weights, arith, s, cut, false)?;
        }

        let mask = trainable_mask(weights.stage(stage), first, last)?;
        let mut adam = AdamState::new(mask.len(), cfg.adam);
        let mut best_fer = validation_fer(&val_cache, graph, weights, arith, validation, last)?;
        let mut best_epoch = 0;
        let mut best_params = weights.stage(stage).params().to_vec();
        report.log.push(EpochLog {
            stage: stage + 1,
            substage,
            first,
            last,
            epoch: 0,
            train_loss: None,
            train_fer: None,
            validation_fer: best_fer,
            wall_seconds: clock.elapsed().as_secs_f64(),
        });

        let stream_base = ((stage as u64) << 56) | ((substage as u64) << 44);
        for epoch in 1..=cfg.epochs {
            let count = match source {
                SampleSource::Fixed(s) => s.len(),
                SampleSource::Random { frames_per_epoch, .. } => frames_per_epoch,
            };
            let mut order: Vec<usize> = (0..count).collect();
            if let SampleSource::Fixed(_) = source {
                order.shuffle(&mut stream_rng(cfg.seed ^ 0x5eed, stream_base | epoch as u64));
            }
            let (mut loss_sum, mut hard_sum) = (0.0, 0.0);
            for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
                let decoder = Decoder::new(graph, weights, arith.config(last).traced(first))?;
                let backward = Backward::new(
                    graph,
                    weights,
                    arith.quantizer,
                    TrainTarget { stage, first, last },
                    last,
                )?;
                let batch: Vec<(Vec<f64>, Option<&Prefix>)> = match source {
                    SampleSource::Fixed(s) => {
                        let cache = train_cache.as_ref().expect("fixed source has a cache");
                        idx.iter().map(|&i| (s[i].clone(), Some(&cache.states[i]))).collect()
                    }
                    SampleSource::Random { channel, region, .. } => idx
                        .par_iter()
                        .map(|&i| {
                            let frame = ((epoch - 1) * count + i) as u64;
                            let mut llr = vec![0.0; n];
                            draw_frame(&channel, region, cfg.seed, stream_base | frame, &mut llr);
                            (llr, None)
                        })
                        .collect(),
                };
                let done = train_cache.as_ref().map_or(0, |c| c.done);
                let res = run_batch(&decoder, &backward, &cfg.loss, &batch, done, step)?;
                loss_sum += res.grads.loss_sum;
                hard_sum += res.hard_errors;
                let grads = res.grads.mean();
                adam.step(weights.stage_mut(stage).params_mut(), &grads, Some(&mask))
                    .map_err(|e| match e {
                        Error::NonFiniteGradient { index, value } => Error::Config(format!(
                            "non-finite gradient {value} at parameter {index} (epoch {epoch}, batch {bi})"
                        )),
                        other => other,
                    })?;
            }
            let fer = validation_fer(&val_cache, graph, weights, arith, validation, last)?;
            if fer <= best_fer {
                best_fer = fer;
                best_epoch = epoch;
                best_params.copy_from_slice(weights.stage(stage).params());
            }
            report.log.push(EpochLog {
                stage: stage + 1,
                substage,
                first,
                last,
                epoch,
                train_loss: Some(loss_sum / count as f64),
                train_fer: Some(hard_sum / count as f64),
                validation_fer: fer,
                wall_seconds: clock.elapsed().as_secs_f64(),
            });
        }
        weights.stage_mut(stage).params_mut().copy_from_slice(&best_params);
        report.substages.push(SubstageResult {
            first,
            last,
            best_epoch,
            best_validation_fer: best_fer,
        });
    }
    Ok(report)
}

/// Fraction of `frames` still in error after decoding through every
/// iteration of `weights` with early stopping.
pub fn evaluate_test_fer(
    graph: &TannerGraph,
    weights: &StagedWeights,
    arith: Arithmetic,
    frames: &[Vec<f64>],
) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::EmptyDataset("test set".into()));
    }
    let decoder = Decoder::new(graph, weights, arith.config(weights.total_iterations()))?;
    let errors: Vec<bool> = frames
        .par_iter()
        .map_init(DecodeRecord::new, |rec, llr| {
            decoder.decode_into(llr, rec)?;
            Ok(rec.frame_error())
        })
        .collect::<Result<_>>()?;
    Ok(errors.iter().filter(|&&e| e).count() as f64 / frames.len() as f64)
}
