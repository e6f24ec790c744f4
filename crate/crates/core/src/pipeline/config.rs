//! TOML pipeline description and the driver that runs it.
//!
//! ```toml
//! code = "wimax-576-r34"
//! output_dir = "runs/wimax"
//! seed = 1
//! quantizer = { max = 7.5, step = 0.5 }
//!
//! [trainer]
//! batch_size = 500
//!
//! [[stage]]
//! first = 1
//! last = 20
//! scheme = "spatial"
//! source = { kind = "random", region = [2.0, 2.5, 3.0, 3.5, 4.0] }
//!
//! [[stage]]
//! first = 21
//! last = 50
//! scheme = "spatial+ucn"
//! delta1 = 5
//! delta2 = 10
//! source = { kind = "collected", region = [4.5], count = 60000, split = [50000, 5000, 5000] }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelKind, ChannelParams, Quantizer};
use crate::code::{lift, parse_base_matrix, TannerGraph};
use crate::decoder::Decoder;
use crate::error::{Error, Result};
use crate::harness::write_csv_rows;
use crate::io::write_atomic;
use crate::pipeline::dataset::{collect_uncorrected, draw_frame, split_dataset, CollectConfig, Dataset};
use crate::pipeline::training::{
    evaluate_test_fer, train_stage, Arithmetic, SampleSource, Schedule, StageReport, TrainerConfig,
};
use crate::presets;
use crate::weights::{SharingScheme, StagedWeights, WeightFile, WeightSet};

fn default_true() -> bool {
    true
}

fn default_frames_per_epoch() -> usize {
    50_000
}

fn default_validation_frames() -> usize {
    5_000
}

fn default_floor() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceConfig {
    Random {
        region: Vec<f64>,
        #[serde(default = "default_frames_per_epoch")]
        frames_per_epoch: usize,
        #[serde(default = "default_validation_frames")]
        validation_frames: usize,
    },
    Collected {
        region: Vec<f64>,
        count: usize,
        /// Train, validation, and test sizes; they must sum to `count`.
        split: [usize; 3],
        #[serde(default = "default_floor")]
        floor: f64,
        /// Use this dataset instead of collecting when it exists and its
        /// provenance matches.
        #[serde(default)]
        dataset: Option<PathBuf>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub first: usize,
    pub last: usize,
    pub scheme: SharingScheme,
    /// Iterations added per sub-stage; the whole stage when absent.
    #[serde(default)]
    pub delta1: Option<usize>,
    /// Earlier iterations retrained with each sub-stage.
    #[serde(default)]
    pub delta2: usize,
    /// Overrides the trainer's epoch count.
    #[serde(default)]
    pub epochs: Option<usize>,
    pub source: SourceConfig,
}

impl StageConfig {
    pub fn schedule(&self) -> Schedule {
        Schedule {
            delta1: self.delta1.unwrap_or(self.last + 1 - self.first),
            delta2: self.delta2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Bundled code id or path to a base-matrix file.
    pub code: String,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub channel: ChannelKind,
    /// Floating-point decoding when absent.
    #[serde(default)]
    pub quantizer: Option<Quantizer>,
    #[serde(default = "default_true")]
    pub quantize_channel: bool,
    #[serde(default)]
    pub trainer: TrainerConfig,
    #[serde(rename = "stage")]
    pub stages: Vec<StageConfig>,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::parse(&fs::read_to_string(path)?)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        resolve(&mut cfg.output_dir);
        if presets::base_matrix_text(&cfg.code).is_err() && Path::new(&cfg.code).is_relative() {
            cfg.code = dir.join(&cfg.code).to_string_lossy().into_owned();
        }
        for s in &mut cfg.stages {
            if let SourceConfig::Collected { dataset: Some(p), .. } = &mut s.source {
                resolve(p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Config("pipeline has no stages".into()));
        }
        if let Some(q) = &self.quantizer {
            q.validate()?;
        }
        self.trainer.validate()?;
        let mut next = 1;
        for (k, s) in self.stages.iter().enumerate() {
            let id = k + 1;
            if s.first != next || s.last < s.first {
                return Err(Error::Config(format!(
                    "stage {id} covers {}..={}, expected to start at {next}",
                    s.first, s.last
                )));
            }
            next = s.last + 1;
            let sched = s.schedule();
            if sched.delta1 == 0 {
                return Err(Error::Config(format!("stage {id}: delta1 must be at least 1")));
            }
            if sched.delta1 + sched.delta2 > s.last + 1 - s.first {
                return Err(Error::Config(format!(
                    "stage {id}: delta1 + delta2 exceeds the stage length"
                )));
            }
            match &s.source {
                SourceConfig::Random {
                    region,
                    frames_per_epoch,
                    validation_frames,
                } => {
                    if region.is_empty() || *frames_per_epoch == 0 || *validation_frames == 0 {
                        return Err(Error::Config(format!(
                            "stage {id}: random source needs a region, frames, and validation frames"
                        )));
                    }
                }
                SourceConfig::Collected {
                    region, count, split, ..
                } => {
                    if k == 0 {
                        return Err(Error::Config(
                            "the first stage has no earlier decoder to collect failures from".into(),
                        ));
                    }
                    if region.is_empty() || split.iter().sum::<usize>() != *count || split.contains(&0) {
                        return Err(Error::Config(format!(
                            "stage {id}: collected source needs a region and a nonempty split summing to count"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn arithmetic(&self) -> Arithmetic {
        Arithmetic {
            quantizer: self.quantizer,
            quantize_channel: self.quantize_channel && self.quantizer.is_some(),
        }
    }
}

/// Bundled code by id, else a base-matrix file. Returns the code id as well.
pub fn load_code(spec: &str) -> Result<(String, TannerGraph)> {
    if presets::base_matrix_text(spec).is_ok() {
        return Ok((spec.to_string(), presets::code(spec)?));
    }
    let path = Path::new(spec);
    let graph = lift(&parse_base_matrix(&fs::read_to_string(path)?)?)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| spec.to_string());
    Ok((id, graph))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: usize,
    pub first: usize,
    pub last: usize,
    pub scheme: SharingScheme,
    pub weights_file: PathBuf,
    pub log_file: PathBuf,
    pub dataset_file: Option<PathBuf>,
    pub dataset_acceptance_rate: Option<f64>,
    /// Held-out FER on collected words before this stage was trained.
    pub test_fer_before: Option<f64>,
    pub test_fer: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub weights: StagedWeights,
    pub reports: Vec<StageReport>,
    pub stages: Vec<StageSummary>,
}

fn channel(cfg: &PipelineConfig, rate: f64, ebn0_db: f64) -> Result<ChannelParams> {
    ChannelParams::new(cfg.channel, ebn0_db, rate)
}

fn random_frames(
    channel: &ChannelParams,
    region: &[f64],
    seed: u64,
    stream: u64,
    count: usize,
    n: usize,
) -> Vec<Vec<f64>> {
    (0..count as u64)
        .map(|f| {
            let mut llr = vec![0.0; n];
            draw_frame(channel, region, seed, stream | f, &mut llr);
            llr
        })
        .collect()
}

fn llrs(ds: &Dataset) -> Vec<Vec<f64>> {
    ds.samples.iter().map(|s| s.llr_f64()).collect()
}

/// Trains every stage in order, saving weights, datasets, and logs under
/// `output_dir` after each stage.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let (code_id, graph) = load_code(&cfg.code)?;
    let arith = cfg.arithmetic();
    let out = &cfg.output_dir;
    fs::create_dir_all(out)?;
    let n = graph.n();
    let mut weights: Option<StagedWeights> = None;
    let mut reports = Vec::new();
    let mut stages = Vec::new();

    for (k, sc) in cfg.stages.iter().enumerate() {
        let id = k + 1;
        let ws = WeightSet::for_graph(&graph, sc.scheme, sc.first, sc.last)?;
        let mut trainer = cfg.trainer;
        trainer.seed = cfg.seed.wrapping_add(id as u64);
        if let Some(e) = sc.epochs {
            trainer.epochs = e;
        }
        let mut summary = StageSummary {
            stage: id,
            first: sc.first,
            last: sc.last,
            scheme: sc.scheme,
            weights_file: out.join(format!("weights_stage{id}.json")),
            log_file: out.join(format!("log_stage{id}.csv")),
            dataset_file: None,
            dataset_acceptance_rate: None,
            test_fer_before: None,
            test_fer: None,
        };

        let (staged, report) = match &sc.source {
            SourceConfig::Random {
                region,
                frames_per_epoch,
                validation_frames,
            } => {
                let mut staged = match weights.take() {
                    Some(mut w) => {
                        w.push(ws)?;
                        w
                    }
                    None => StagedWeights::single(ws)?,
                };
                let ch = channel(cfg, graph.rate(), region[0])?;
                let val_stream = (1u64 << 63) | ((id as u64) << 48);
                let val = random_frames(&ch, region, cfg.seed, val_stream, *validation_frames, n);
                let src = SampleSource::Random {
                    channel: ch,
                    region,
                    frames_per_epoch: *frames_per_epoch,
                };
                let report = train_stage(&graph, &mut staged, k, sc.schedule(), src, &val, arith, &trainer)?;
                (staged, report)
            }
            SourceConfig::Collected {
                region,
                count,
                split,
                floor,
                dataset,
            } => {
                let frozen = weights.take().expect("validated: a collected stage has a predecessor");
                let decoder = Decoder::new(&graph, &frozen, arith.config(frozen.total_iterations()))?;
                let ds_path = dataset
                    .clone()
                    .unwrap_or_else(|| out.join(format!("dataset_stage{id}.bin")));
                let reuse = match ds_path.exists() {
                    true => {
                        let ds = Dataset::load(&ds_path)?;
                        let ok = ds.len() == *count
                            && ds.header.region == *region
                            && ds.verify(&decoder, &frozen)?.is_empty();
                        ok.then_some(ds)
                    }
                    false => None,
                };
                let ds = match reuse {
                    Some(ds) => ds,
                    None => {
                        let ch = channel(cfg, graph.rate(), region[0])?;
                        let mut cc = CollectConfig::new(
                            &code_id,
                            ch,
                            region.clone(),
                            *count,
                            cfg.seed.wrapping_add(1000 + id as u64),
                        );
                        cc.floor = *floor;
                        let ds = collect_uncorrected(&decoder, &frozen, &cc)?;
                        ds.save(&ds_path)?;
                        ds
                    }
                };
                summary.dataset_file = Some(ds_path);
                summary.dataset_acceptance_rate = ds.acceptance_rate();
                let (train, val, test) = split_dataset(&ds, *split, cfg.seed.wrapping_add(id as u64))?;
                let (train, val, test) = (llrs(&train), llrs(&val), llrs(&test));
                let mut staged = frozen;
                staged.push(ws)?;
                summary.test_fer_before = Some(evaluate_test_fer(&graph, &staged, arith, &test)?);
                let report = train_stage(
                    &graph,
                    &mut staged,
                    k,
                    sc.schedule(),
                    SampleSource::Fixed(&train),
                    &val,
                    arith,
                    &trainer,
                )?;
                summary.test_fer = Some(evaluate_test_fer(&graph, &staged, arith, &test)?);
                (staged, report)
            }
        };

        WeightFile::from_weights(&code_id, &staged, cfg.quantizer).save(&summary.weights_file)?;
        let mut csv = Vec::new();
        write_csv_rows(&mut csv, &report.log)?;
        write_atomic(&summary.log_file, &csv)?;
        reports.push(report);
        stages.push(summary);
        write_atomic(
            &out.join("summary.json"),
            serde_json::to_string_pretty(&stages)?.as_bytes(),
        )?;
        weights = Some(staged);
    }
    Ok(PipelineOutcome {
        weights: weights.expect("at least one stage"),
        reports,
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "2 4 3\n0 1 2 -1\n1 -1 0 2\n";

    fn config(dir: &Path) -> String {
        format!(
            r#"
code = "{code}"
output_dir = "{out}"
seed = 4
quantizer = {{ max = 7.5, step = 0.5 }}

[trainer]
epochs = 2
batch_size = 16

[[stage]]
first = 1
last = 3
scheme = "spatial"
source = {{ kind = "random", region = [1.0, 2.0], frames_per_epoch = 32, validation_frames = 16 }}

[[stage]]
first = 4
last = 7
scheme = "spatial+ucn"
delta1 = 2
delta2 = 1
source = {{ kind = "collected", region = [1.0], count = 40, split = [24, 8, 8] }}
"#,
            code = dir.join("toy.txt").display(),
            out = dir.join("run").display()
        )
    }

    #[test]
    fn parses_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::parse(&config(dir.path())).unwrap();
        assert_eq!(cfg.stages.len(), 2);
        assert_eq!(cfg.stages[1].schedule(), Schedule { delta1: 2, delta2: 1 });
        assert_eq!(cfg.stages[0].schedule(), Schedule::one_shot(3));
        let gap = config(dir.path()).replace("first = 4", "first = 5");
        assert!(PipelineConfig::parse(&gap).is_err());
        let bad_split = config(dir.path()).replace("[24, 8, 8]", "[24, 8, 9]");
        assert!(PipelineConfig::parse(&bad_split).is_err());
        let typo = config(dir.path()).replace("delta2 = 1", "delta_2 = 1");
        assert!(PipelineConfig::parse(&typo).is_err());
    }

    #[test]
    fn two_stage_run_is_reproducible_and_freezes_the_base() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("toy.txt"), TOY).unwrap();
        let cfg = PipelineConfig::parse(&config(dir.path())).unwrap();
        let a = run_pipeline(&cfg).unwrap();
        let base_file = WeightFile::load(&a.stages[0].weights_file).unwrap();
        let post_file = WeightFile::load(&a.stages[1].weights_file).unwrap();
        assert_eq!(base_file.stages[0], post_file.stages[0]);
        assert_eq!(a.weights.total_iterations(), 7);
        let s2 = &a.stages[1];
        assert!(s2.test_fer.unwrap() <= 1.0);
        let ds = Dataset::load(s2.dataset_file.as_ref().unwrap()).unwrap();
        assert_eq!(ds.len(), 40);
        let frozen = base_file.to_weights().unwrap();
        let (_, g) = load_code(&cfg.code).unwrap();
        let dec = Decoder::new(&g, &frozen, cfg.arithmetic().config(3)).unwrap();
        assert!(ds.verify(&dec, &frozen).unwrap().is_empty());
        let log = fs::read_to_string(&s2.log_file).unwrap();
        assert!(log.starts_with("stage,substage,first,last,epoch,train_loss,train_fer,validation_fer,wall_seconds"));

        let mut again = cfg.clone();
        again.output_dir = dir.path().join("run2");
        let b = run_pipeline(&again).unwrap();
        assert_eq!(a.weights, b.weights);
    }
}
