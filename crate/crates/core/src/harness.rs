//! Monte Carlo FER/BER simulation and error/weight reports.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{stream_rng, transmit_into, ChannelParams};
use crate::decoder::{DecodeRecord, Decoder};
use crate::error::{Error, Result};
use crate::weights::{SharingScheme, WeightFile};

/// Residual errors and iterations spent on one frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameOutcome {
    pub bit_errors: u32,
    pub iterations: usize,
}

/// Anything that decodes a frame of channel LLRs.
pub trait FrameDecoder: Sync {
    fn code_length(&self) -> usize;
    fn decode_frame(&self, llr: &[f64], scratch: &mut DecodeRecord) -> Result<FrameOutcome>;
}

impl FrameDecoder for Decoder<'_> {
    fn code_length(&self) -> usize {
        self.graph().n()
    }

    fn decode_frame(&self, llr: &[f64], scratch: &mut DecodeRecord) -> Result<FrameOutcome> {
        self.decode_into(llr, scratch)?;
        Ok(FrameOutcome {
            bit_errors: scratch.bit_errors(),
            iterations: scratch.iterations,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StopRule {
    pub min_frame_errors: u64,
    pub max_frames: u64,
}

impl StopRule {
    pub fn new(min_frame_errors: u64, max_frames: u64) -> Result<Self> {
        if max_frames == 0 {
            return Err(Error::Config("frame cap must be positive".into()));
        }
        Ok(StopRule {
            min_frame_errors,
            max_frames,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McConfig {
    pub stop: StopRule,
    pub seed: u64,
    /// Frames per work unit. A point always stops on a chunk boundary.
    pub chunk: u64,
}

impl McConfig {
    pub fn new(stop: StopRule, seed: u64) -> Self {
        McConfig { stop, seed, chunk: 256 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FerPoint {
    pub ebn0_db: f64,
    pub frames: u64,
    pub frame_errors: u64,
    pub bit_errors: u64,
    pub fer: f64,
    pub ber: f64,
    pub avg_iterations: f64,
    pub wall_seconds: f64,
    /// 95% Wilson interval for the FER.
    pub fer_low: f64,
    pub fer_high: f64,
    /// The frame cap ended the point before the error target was met.
    pub capped: bool,
}

impl FerPoint {
    /// Human-readable note for points that did not reach the error target.
    pub fn annotation(&self) -> Option<String> {
        self.capped.then(|| {
            format!(
                "capped at {} frames with {} errors; FER < {:.3e} at 95%",
                self.frames, self.frame_errors, self.fer_high
            )
        })
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Copy, Default)]
struct Tally {
    frames: u64,
    frame_errors: u64,
    bit_errors: u64,
    iterations: u64,
}

/// Stream index of frame `frame` at point `point`; disjoint across points.
pub fn frame_stream(point: usize, frame: u64) -> u64 {
    ((point as u64) << 44) | frame
}

fn run_chunk<D: FrameDecoder + ?Sized>(
    decoder: &D,
    params: &ChannelParams,
    seed: u64,
    point: usize,
    frames: std::ops::Range<u64>,
) -> Result<Tally> {
    let mut llr = vec![0.0; decoder.code_length()];
    let mut rec = DecodeRecord::new();
    let mut t = Tally::default();
    for f in frames {
        transmit_into(params, &mut stream_rng(seed, frame_stream(point, f)), &mut llr);
        let o = decoder.decode_frame(&llr, &mut rec)?;
        t.frames += 1;
        t.frame_errors += (o.bit_errors > 0) as u64;
        t.bit_errors += o.bit_errors as u64;
        t.iterations += o.iterations as u64;
    }
    Ok(t)
}

/// Simulates every Eb/N0 point until the error target or the frame cap.
///
/// Frame `f` of point `i` always sees the same noise, and chunks are merged in
/// order, so results depend only on the seed and the chunk size.
pub fn monte_carlo<D: FrameDecoder + ?Sized>(
    decoder: &D,
    channel: &ChannelParams,
    ebn0_db: &[f64],
    cfg: &McConfig,
) -> Result<Vec<FerPoint>> {
    if cfg.chunk == 0 {
        return Err(Error::Config("chunk size must be positive".into()));
    }
    let workers = rayon::current_num_threads().max(1) as u64;
    let mut out = Vec::with_capacity(ebn0_db.len());
    for (point, &db) in ebn0_db.iter().enumerate() {
        let params = ChannelParams {
            ebn0_db: db,
            ..*channel
        };
        params.validate()?;
        let start = Instant::now();
        let mut total = Tally::default();
        let mut next = 0u64;
        'outer: while next < cfg.stop.max_frames {
            let ranges: Vec<_> = (0..workers)
                .map(|k| next + k * cfg.chunk)
                .take_while(|&s| s < cfg.stop.max_frames)
                .map(|s| s..(s + cfg.chunk).min(cfg.stop.max_frames))
                .collect();
            next = ranges.last().map(|r| r.end).unwrap_or(cfg.stop.max_frames);
            let tallies: Vec<Result<Tally>> = ranges
                .into_par_iter()
                .map(|r| run_chunk(decoder, &params, cfg.seed, point, r))
                .collect();
            for t in tallies {
                let t = t?;
                total.frames += t.frames;
                total.frame_errors += t.frame_errors;
                total.bit_errors += t.bit_errors;
                total.iterations += t.iterations;
                if total.frame_errors >= cfg.stop.min_frame_errors {
                    break 'outer;
                }
            }
        }
        let n = decoder.code_length() as f64;
        let fer = total.frame_errors as f64 / total.frames.max(1) as f64;
        let (lo, hi) = wilson_interval(total.frame_errors, total.frames, 1.96);
        out.push(FerPoint {
            ebn0_db: db,
            frames: total.frames,
            frame_errors: total.frame_errors,
            bit_errors: total.bit_errors,
            fer,
            ber: total.bit_errors as f64 / (total.frames.max(1) as f64 * n),
            avg_iterations: total.iterations as f64 / total.frames.max(1) as f64,
            wall_seconds: start.elapsed().as_secs_f64(),
            fer_low: lo,
            fer_high: hi,
            capped: total.frame_errors < cfg.stop.min_frame_errors,
        });
    }
    Ok(out)
}

/// Residual-error counts of a set of frames at one iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorHistogram {
    pub iteration: usize,
    pub counts: BTreeMap<u32, u64>,
}

impl ErrorHistogram {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Fraction of frames with `1..=max` residual errors among frames with any.
    pub fn small_error_fraction(&self, max: u32) -> f64 {
        let failed: u64 = self.counts.range(1..).map(|(_, c)| c).sum();
        if failed == 0 {
            return 0.0;
        }
        let small: u64 = self.counts.range(1..=max).map(|(_, c)| c).sum();
        small as f64 / failed as f64
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["iteration", "errors", "frames"]).map_err(csv_err)?;
        for (e, c) in &self.counts {
            wr.write_record([self.iteration.to_string(), e.to_string(), c.to_string()])
                .map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Frames that are corrected, have `1..=small_max` errors, or more, after one iteration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ErrorProfileRow {
    pub iteration: usize,
    pub corrected: u64,
    pub small: u64,
    pub large: u64,
}

/// Residual errors of each frame after each iteration `1..=depth`; a frame
/// that stopped early keeps its final count.
pub fn residual_errors<'a, I>(decoder: &Decoder, frames: I) -> Result<Vec<Vec<u32>>>
where
    I: IntoParallelIterator<Item = &'a [f64]>,
{
    let depth = decoder.config().iterations;
    frames
        .into_par_iter()
        .map_init(DecodeRecord::new, |rec, llr| {
            decoder.decode_into(llr, rec)?;
            let mut e = rec.errors_per_iteration.clone();
            let last = *e.last().expect("at least one iteration");
            e.resize(depth, last);
            Ok(e)
        })
        .collect()
}

pub fn error_histogram(per_frame: &[Vec<u32>], iteration: usize) -> Result<ErrorHistogram> {
    if per_frame.is_empty() {
        return Err(Error::EmptyDataset("no frames for the histogram".into()));
    }
    let mut counts = BTreeMap::new();
    for e in per_frame {
        let v = *e.get(iteration.wrapping_sub(1)).ok_or(Error::MissingTrace(iteration))?;
        *counts.entry(v).or_insert(0) += 1;
    }
    Ok(ErrorHistogram { iteration, counts })
}

pub fn error_profile(per_frame: &[Vec<u32>], small_max: u32) -> Vec<ErrorProfileRow> {
    let depth = per_frame.first().map_or(0, |e| e.len());
    (1..=depth)
        .map(|it| {
            let mut row = ErrorProfileRow {
                iteration: it,
                corrected: 0,
                small: 0,
                large: 0,
            };
            for e in per_frame {
                match e[it - 1] {
                    0 => row.corrected += 1,
                    x if x <= small_max => row.small += 1,
                    _ => row.large += 1,
                }
            }
            row
        })
        .collect()
}

/// One iteration of a weight file. Spatial schemes fill `vw`/`cw`/`ucw`
/// directly; the others report means with min/max spreads.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightRow {
    pub iteration: usize,
    pub scheme: SharingScheme,
    pub vw: f64,
    pub cw: f64,
    pub ucw: f64,
    pub vw_min: f64,
    pub vw_max: f64,
    pub cw_min: f64,
    pub cw_max: f64,
}

/// Mean, min, max; the mean of identical values is that value exactly.
fn stats(xs: &[f64]) -> (f64, f64, f64) {
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = if min == max {
        min
    } else {
        xs.iter().sum::<f64>() / xs.len().max(1) as f64
    };
    (mean, min, max)
}

pub fn weight_report(file: &WeightFile) -> Result<Vec<WeightRow>> {
    let weights = file.to_weights()?;
    let mut rows = Vec::new();
    for ws in weights.stages() {
        for it in ws.first()..=ws.last() {
            let iw = ws.iteration_weights(it)?;
            let (vw, vw_min, vw_max) = stats(&iw.vn);
            let (cw, cw_min, cw_max) = stats(&iw.scn);
            let (ucw, _, _) = stats(&iw.ucn);
            rows.push(WeightRow {
                iteration: it,
                scheme: ws.scheme(),
                vw,
                cw,
                ucw,
                vw_min,
                vw_max,
                cw_min,
                cw_max,
            });
        }
    }
    Ok(rows)
}

pub fn write_csv_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}
