//! Uncorrected-word datasets.
//!
//! Binary layout (little endian):
//!
//! ```text
//! b"NMSD" | u32 version | u32 header_len | header (JSON) | records
//! record = f32 ebn0_db | n x f32 channel LLR
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{stream_rng, transmit_into, ChannelParams, Quantizer};
use crate::decoder::{DecodeRecord, Decoder};
use crate::error::{Error, Result};
use crate::weights::{weights_digest, StagedWeights};

pub const DATASET_MAGIC: &[u8; 4] = b"NMSD";
pub const DATASET_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub code_id: String,
    /// Channel kind, rate, and scale; the per-sample Eb/N0 lives in each record.
    pub channel: ChannelParams,
    /// Eb/N0 values the frames were drawn from.
    pub region: Vec<f64>,
    /// Digest of the weights of the decoder that failed on every sample.
    pub weights_digest: String,
    /// Iterations the provenance decoder ran.
    pub depth: usize,
    pub quantizer: Option<Quantizer>,
    pub n: usize,
    /// Frames drawn to collect the samples (0 when unknown).
    pub frames_drawn: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub ebn0_db: f32,
    pub llr: Vec<f32>,
}

impl Sample {
    pub fn llr_f64(&self) -> Vec<f64> {
        self.llr.iter().map(|&x| x as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Fraction of drawn frames that were kept.
    pub fn acceptance_rate(&self) -> Option<f64> {
        (self.header.frames_drawn > 0).then(|| self.len() as f64 / self.header.frames_drawn as f64)
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            header: self.header.clone(),
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        let header = serde_json::to_vec(&self.header)?;
        w.write_all(DATASET_MAGIC)?;
        w.write_all(&DATASET_VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        for s in &self.samples {
            if s.llr.len() != self.header.n {
                return Err(Error::Length {
                    expected: self.header.n,
                    got: s.llr.len(),
                });
            }
            w.write_all(&s.ebn0_db.to_le_bytes())?;
            for x in &s.llr {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DATASET_MAGIC {
            return Err(Error::Format("not a dataset file (bad magic)".into()));
        }
        let version = read_u32(&mut r)?;
        if version != DATASET_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let hlen = read_u32(&mut r)? as usize;
        let mut hbuf = vec![0u8; hlen];
        r.read_exact(&mut hbuf)?;
        let header: DatasetHeader = serde_json::from_slice(&hbuf)?;
        let mut count = [0u8; 8];
        r.read_exact(&mut count)?;
        let count = u64::from_le_bytes(count) as usize;
        let mut samples = Vec::with_capacity(count.min(1 << 20));
        let mut rec = vec![0u8; 4 * (header.n + 1)];
        for i in 0..count {
            r.read_exact(&mut rec)
                .map_err(|e| Error::Format(format!("truncated at record {i}: {e}")))?;
            let mut vals = rec
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
            let ebn0_db = vals.next().expect("record has an Eb/N0 field");
            samples.push(Sample {
                ebn0_db,
                llr: vals.collect(),
            });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after the last record".into()));
        }
        Ok(Dataset { header, samples })
    }

    /// Atomic save.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        crate::io::write_atomic(path, &buf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(File::open(path)?)
    }

    /// One row per sample: index, Eb/N0, then the LLRs.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut head = vec!["index".to_string(), "ebn0_db".to_string()];
        head.extend((0..self.header.n).map(|v| format!("llr_{v}")));
        wr.write_record(&head).map_err(|e| Error::Format(e.to_string()))?;
        for (i, s) in self.samples.iter().enumerate() {
            let mut row = vec![i.to_string(), s.ebn0_db.to_string()];
            row.extend(s.llr.iter().map(|x| x.to_string()));
            wr.write_record(&row).map_err(|e| Error::Format(e.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Checks the provenance: the digest matches `weights` and every sample
    /// still fails under `decoder`. Returns the indices that do not fail.
    pub fn verify(&self, decoder: &Decoder, weights: &StagedWeights) -> Result<Vec<usize>> {
        let digest = weights_digest(weights);
        if digest != self.header.weights_digest {
            return Err(Error::Format(format!(
                "dataset was collected with weights {}, not {digest}",
                self.header.weights_digest
            )));
        }
        if decoder.config().iterations != self.header.depth {
            return Err(Error::Format(format!(
                "dataset provenance decoder ran {} iterations, got {}",
                self.header.depth,
                decoder.config().iterations
            )));
        }
        let passing: Vec<Option<usize>> = self
            .samples
            .par_iter()
            .enumerate()
            .map_init(DecodeRecord::new, |rec, (i, s)| {
                decoder.decode_into(&s.llr_f64(), rec)?;
                Ok((!rec.frame_error()).then_some(i))
            })
            .collect::<Result<_>>()?;
        Ok(passing.into_iter().flatten().collect())
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Deterministic shuffled split into `(train, validation, test)` of the given sizes.
pub fn split_dataset(ds: &Dataset, sizes: [usize; 3], seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let total: usize = sizes.iter().sum();
    if total != ds.len() {
        return Err(Error::Config(format!(
            "split sizes {sizes:?} sum to {total}, dataset has {}",
            ds.len()
        )));
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut stream_rng(seed, 0));
    let (a, rest) = idx.split_at(sizes[0]);
    let (b, c) = rest.split_at(sizes[1]);
    Ok((ds.subset(a), ds.subset(b), ds.subset(c)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollectConfig {
    pub code_id: String,
    pub channel: ChannelParams,
    pub region: Vec<f64>,
    pub target: usize,
    pub seed: u64,
    /// Abort once the acceptance rate is known to be below this.
    pub floor: f64,
    pub chunk: u64,
}

impl CollectConfig {
    pub fn new(code_id: &str, channel: ChannelParams, region: Vec<f64>, target: usize, seed: u64) -> Self {
        CollectConfig {
            code_id: code_id.to_string(),
            channel,
            region,
            target,
            seed,
            floor: 1e-6,
            chunk: 512,
        }
    }
}

/// Frame `frame` of a random-region stream: Eb/N0 drawn uniformly from
/// `region`, LLRs rounded to `f32`. Returns the Eb/N0 used.
pub fn draw_frame(channel: &ChannelParams, region: &[f64], seed: u64, frame: u64, buf: &mut [f64]) -> f64 {
    let mut rng = stream_rng(seed, frame);
    let db = region[rng.random_range(0..region.len())];
    let p = ChannelParams {
        ebn0_db: db,
        ..*channel
    };
    transmit_into(&p, &mut rng, buf);
    for x in buf.iter_mut() {
        *x = *x as f32 as f64;
    }
    db
}

/// Draws frames until `target` of them fail under `decoder`.
pub fn collect_uncorrected(decoder: &Decoder, weights: &StagedWeights, cfg: &CollectConfig) -> Result<Dataset> {
    if cfg.target == 0 {
        return Err(Error::Config("collection target must be positive".into()));
    }
    if cfg.region.is_empty() {
        return Err(Error::Config("collection region is empty".into()));
    }
    if !(cfg.floor > 0.0 && cfg.floor < 1.0) || cfg.chunk == 0 {
        return Err(Error::Config("invalid acceptance floor or chunk".into()));
    }
    for &db in &cfg.region {
        ChannelParams {
            ebn0_db: db,
            ..cfg.channel
        }
        .validate()?;
    }
    let n = decoder.graph().n();
    let workers = rayon::current_num_threads().max(1) as u64;
    // enough draws to tell a rate at the floor from zero
    let judge_after = (10.0 / cfg.floor).ceil() as u64;
    let mut samples = Vec::with_capacity(cfg.target);
    let mut drawn = 0u64;
    'outer: loop {
        let chunks: Vec<_> = (0..workers).map(|k| drawn + k * cfg.chunk).collect();
        let found: Vec<Result<Vec<(u64, Sample)>>> = chunks
            .into_par_iter()
            .map(|start| {
                let mut rec = DecodeRecord::new();
                let mut llr = vec![0.0; n];
                let mut out = Vec::new();
                for f in start..start + cfg.chunk {
                    let db = draw_frame(&cfg.channel, &cfg.region, cfg.seed, f, &mut llr) as f32;
                    decoder.decode_into(&llr, &mut rec)?;
                    if rec.frame_error() {
                        out.push((
                            f,
                            Sample {
                                ebn0_db: db,
                                llr: llr.iter().map(|&x| x as f32).collect(),
                            },
                        ));
                    }
                }
                Ok(out)
            })
            .collect();
        for chunk in found {
            for (f, s) in chunk? {
                samples.push(s);
                if samples.len() == cfg.target {
                    drawn = f + 1;
                    break 'outer;
                }
            }
            drawn += cfg.chunk;
        }
        if drawn >= judge_after && (samples.len() as f64) < cfg.floor * drawn as f64 {
            return Err(Error::RegionTooEasy {
                accepted: samples.len(),
                drawn,
                floor: cfg.floor,
            });
        }
    }
    Ok(Dataset {
        header: DatasetHeader {
            code_id: cfg.code_id.clone(),
            channel: cfg.channel,
            region: cfg.region.clone(),
            weights_digest: weights_digest(weights),
            depth: decoder.config().iterations,
            quantizer: decoder.config().quantizer,
            n,
            frames_drawn: drawn,
        },
        samples,
    })
}
