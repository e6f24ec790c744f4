//! `nmsdec`: FER evaluation, uncorrected-word collection, pipeline training,
//! and reports for neural min-sum decoders.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use nms_core::channel::{ChannelKind, ChannelParams, Quantizer};
use nms_core::code::{complexity_estimate, weight_count, DecoderKind, TannerGraph};
use nms_core::decoder::Decoder;
use nms_core::harness::{
    error_histogram, error_profile, monte_carlo, residual_errors, weight_report, write_csv_rows, McConfig, StopRule,
};
use nms_core::io::write_atomic;
use nms_core::pipeline::config::load_code;
use nms_core::pipeline::{collect_uncorrected, run_pipeline, Arithmetic, CollectConfig, Dataset, PipelineConfig};
use nms_core::weights::{SharingScheme, StagedWeights, WeightFile};

#[derive(Parser)]
#[command(name = "nmsdec", version, about = "Neural min-sum LDPC decoding toolkit")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "NMSDEC_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a code.
    Code {
        #[command(subcommand)]
        cmd: CodeCmd,
    },
    /// Evaluate decoders.
    Eval {
        #[command(subcommand)]
        cmd: EvalCmd,
    },
    /// Collect channel words a decoder fails to correct.
    Collect(CollectArgs),
    /// Run a training pipeline described by a TOML file.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Inspect weight files.
    Weights {
        #[command(subcommand)]
        cmd: WeightsCmd,
    },
    /// Inspect datasets.
    Dataset {
        #[command(subcommand)]
        cmd: DatasetCmd,
    },
}

#[derive(Subcommand)]
enum CodeCmd {
    /// Dimensions, weight counts, and per-iteration complexity.
    Info {
        /// Bundled code id or base-matrix file.
        code: String,
        /// Iterations used for weight counts and complexity totals.
        #[arg(long, default_value_t = 50)]
        iterations: usize,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    /// FER/BER curve by Monte Carlo simulation.
    Fer(FerArgs),
    /// Residual-error histograms of a dataset.
    Hist(HistArgs),
}

#[derive(Subcommand)]
enum WeightsCmd {
    /// Per-iteration weight table as CSV.
    Report {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Header summary.
    Info { file: PathBuf },
    /// All samples as CSV.
    Export {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Decoder selection shared by several commands.
#[derive(Args, Clone, Serialize)]
struct DecoderArgs {
    /// Bundled code id or base-matrix file.
    #[arg(long)]
    code: String,
    /// Weight file; without it the decoder is weighted min-sum.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// CN weight of weighted min-sum when no weight file is given.
    #[arg(long, default_value_t = 1.0)]
    wms: f64,
    /// Decoding iterations; defaults to the weight file's depth.
    #[arg(long)]
    iterations: Option<usize>,
    /// Floating-point decoding instead of the 5-bit quantizer.
    #[arg(long)]
    floating: bool,
    /// Quantizer clip level.
    #[arg(long, default_value_t = 7.5)]
    qmax: f64,
    /// Quantizer step.
    #[arg(long, default_value_t = 0.5)]
    qstep: f64,
    #[arg(long, default_value = "awgn")]
    channel: String,
}

#[derive(Args, Serialize)]
struct FerArgs {
    #[command(flatten)]
    decoder: DecoderArgs,
    /// `start:step:stop` or a comma-separated list, in dB.
    #[arg(long)]
    ebn0: String,
    #[arg(long, default_value_t = 500)]
    min_errors: u64,
    /// Frame cap per point; required because no cap suits every FER.
    #[arg(long)]
    max_frames: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct CollectArgs {
    #[command(flatten)]
    decoder: DecoderArgs,
    /// Eb/N0 values drawn uniformly per frame (`a:step:b` or list).
    #[arg(long)]
    ebn0: String,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Minimum acceptance rate before giving up.
    #[arg(long, default_value_t = 1e-6)]
    floor: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct HistArgs {
    #[command(flatten)]
    decoder: DecoderArgs,
    #[arg(long)]
    dataset: PathBuf,
    /// Iterations at which to capture the histogram.
    #[arg(long, value_delimiter = ',', default_value = "20")]
    capture: Vec<usize>,
    /// Largest residual error count considered small.
    #[arg(long, default_value_t = 10)]
    small_max: u32,
    /// Output directory for `hist_<iteration>.csv` and `profile.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    command: &'a str,
    config_digest: String,
    seeds: Vec<u64>,
    versions: Versions,
    config: &'a T,
}

#[derive(Serialize)]
struct Versions {
    nmsdec: &'static str,
    weight_format: u32,
    dataset_format: u32,
}

fn write_manifest<T: Serialize>(path: &Path, command: &str, seeds: Vec<u64>, config: &T) -> Result<()> {
    let json = serde_json::to_vec(config)?;
    let m = Manifest {
        command,
        config_digest: hex(&Sha256::digest(&json)),
        seeds,
        versions: Versions {
            nmsdec: env!("CARGO_PKG_VERSION"),
            weight_format: nms_core::weights::WEIGHT_FORMAT_VERSION,
            dataset_format: nms_core::pipeline::dataset::DATASET_VERSION,
        },
        config,
    };
    write_atomic(path, serde_json::to_string_pretty(&m)?.as_bytes())?;
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// `a:step:b` (inclusive, tolerant to rounding) or `x,y,z`.
fn parse_ebn0(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [a, s, b] => {
            let (a, s, b): (f64, f64, f64) = (a.trim().parse()?, s.trim().parse()?, b.trim().parse()?);
            if !(s > 0.0) || b < a {
                bail!("range {spec} needs a positive step and start <= stop");
            }
            let n = ((b - a) / s + 1e-9).floor() as usize;
            (0..=n).map(|i| a + s * i as f64).collect()
        }
        [_] => spec
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(Into::into))
            .collect::<Result<Vec<_>>>()?,
        _ => bail!("cannot parse Eb/N0 `{spec}`; use start:step:stop or a list"),
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        bail!("no usable Eb/N0 values in `{spec}`");
    }
    Ok(values)
}

struct Loaded {
    code_id: String,
    graph: TannerGraph,
    weights: StagedWeights,
    arith: Arithmetic,
    iterations: usize,
    channel: ChannelKind,
}

fn load_decoder(a: &DecoderArgs) -> Result<Loaded> {
    let (code_id, graph) = load_code(&a.code).with_context(|| format!("loading code {}", a.code))?;
    let arith = if a.floating {
        Arithmetic::floating()
    } else {
        Arithmetic::quantized(Quantizer::new(a.qmax, a.qstep)?)
    };
    let (weights, iterations) = match &a.weights {
        Some(p) => {
            let wf = WeightFile::load(p).with_context(|| format!("loading weights {}", p.display()))?;
            wf.check_graph(&graph)?;
            let w = wf.to_weights()?;
            let it = a.iterations.unwrap_or(w.total_iterations());
            (w.truncated(it)?, it)
        }
        None => {
            let it = a.iterations.context("--iterations is required without --weights")?;
            (StagedWeights::constant(&graph, it, a.wms)?, it)
        }
    };
    Ok(Loaded {
        code_id,
        graph,
        weights,
        arith,
        iterations,
        channel: a.channel.parse()?,
    })
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => {
            if let Some(d) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(d)?;
            }
            Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?)
        }
        None => Box::new(std::io::stdout().lock()),
    })
}

fn code_info(code: &str, iterations: usize) -> Result<()> {
    let (id, g) = load_code(code)?;
    let b = g.base();
    println!("code            {id}");
    println!("base matrix     {} x {} (z = {})", b.rows(), b.cols(), b.z());
    println!("proto edges     {}", g.num_proto_edges());
    println!("n, m            {}, {}", g.n(), g.m());
    println!("design rate     {:.4}", g.rate());
    println!("edges           {}", g.num_edges());
    println!("weights for {iterations} iterations:");
    for s in SharingScheme::ALL {
        let c = weight_count(s, g.num_proto_vns(), g.num_proto_edges(), iterations)?;
        println!("  {:<16}{c}", s.name());
    }
    for kind in [DecoderKind::MinSum, DecoderKind::NeuralMinSum] {
        let r = complexity_estimate(&g, kind, iterations)?;
        println!(
            "{:<16}A={} C={} Mul={} per iteration, total {}",
            format!("{kind:?}"),
            r.additions,
            r.comparisons,
            r.multiplications,
            r.total
        );
    }
    Ok(())
}

fn eval_fer(a: &FerArgs) -> Result<()> {
    let l = load_decoder(&a.decoder)?;
    let dec = Decoder::new(&l.graph, &l.weights, l.arith.config(l.iterations))?;
    let points = parse_ebn0(&a.ebn0)?;
    let ch = ChannelParams::new(l.channel, points[0], l.graph.rate())?;
    let cfg = McConfig::new(StopRule::new(a.min_errors, a.max_frames)?, a.seed);
    let res = monte_carlo(&dec, &ch, &points, &cfg)?;
    for p in &res {
        if let Some(note) = p.annotation() {
            eprintln!("{:.2} dB: {note}", p.ebn0_db);
        }
    }
    write_csv_rows(output(a.out.as_deref())?, &res)?;
    if let Some(out) = &a.out {
        write_manifest(&manifest_path(out), "eval fer", vec![a.seed], a)?;
    }
    Ok(())
}

fn collect(a: &CollectArgs) -> Result<()> {
    let l = load_decoder(&a.decoder)?;
    let dec = Decoder::new(&l.graph, &l.weights, l.arith.config(l.iterations))?;
    let region = parse_ebn0(&a.ebn0)?;
    let ch = ChannelParams::new(l.channel, region[0], l.graph.rate())?;
    let mut cfg = CollectConfig::new(&l.code_id, ch, region, a.count, a.seed);
    cfg.floor = a.floor;
    let ds = collect_uncorrected(&dec, &l.weights, &cfg)?;
    ds.save(&a.out)?;
    eprintln!(
        "collected {} words from {} frames (acceptance {:.3e})",
        ds.len(),
        ds.header.frames_drawn,
        ds.acceptance_rate().unwrap_or(0.0)
    );
    write_manifest(&manifest_path(&a.out), "collect", vec![a.seed], a)?;
    Ok(())
}

fn eval_hist(a: &HistArgs) -> Result<()> {
    let l = load_decoder(&a.decoder)?;
    let ds = Dataset::load(&a.dataset).with_context(|| format!("loading {}", a.dataset.display()))?;
    if ds.header.n != l.graph.n() {
        bail!("dataset has length {}, code has {}", ds.header.n, l.graph.n());
    }
    let depth = a.capture.iter().copied().max().context("no capture iterations")?;
    if depth == 0 || depth > l.iterations {
        bail!("capture iterations must lie in 1..={}", l.iterations);
    }
    let weights = l.weights.truncated(depth)?;
    let dec = Decoder::new(&l.graph, &weights, l.arith.config(depth))?;
    let frames: Vec<Vec<f64>> = ds.samples.iter().map(|s| s.llr_f64()).collect();
    let per = residual_errors(&dec, frames.iter().map(Vec::as_slice).collect::<Vec<_>>())?;
    fs::create_dir_all(&a.out)?;
    for &it in &a.capture {
        let h = error_histogram(&per, it)?;
        let mut buf = Vec::new();
        h.write_csv(&mut buf)?;
        write_atomic(&a.out.join(format!("hist_{it}.csv")), &buf)?;
        println!(
            "iteration {it}: {} frames, {:.1}% of failures with <= {} errors",
            h.total(),
            100.0 * h.small_error_fraction(a.small_max),
            a.small_max
        );
    }
    let mut buf = Vec::new();
    write_csv_rows(&mut buf, &error_profile(&per, a.small_max))?;
    write_atomic(&a.out.join("profile.csv"), &buf)?;
    write_manifest(&a.out.join("manifest.json"), "eval hist", vec![], a)?;
    Ok(())
}

fn train(config: &Path) -> Result<()> {
    let cfg = PipelineConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    let outcome = run_pipeline(&cfg)?;
    for s in &outcome.stages {
        let mut line = format!("stage {} [{}..={}] {}", s.stage, s.first, s.last, s.scheme);
        if let (Some(b), Some(a)) = (s.test_fer_before, s.test_fer) {
            line += &format!(": held-out FER {b:.4} -> {a:.4}");
        }
        println!("{line} ({})", s.weights_file.display());
    }
    let seeds = vec![cfg.seed];
    write_manifest(&cfg.output_dir.join("manifest.json"), "train", seeds, &cfg)?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match cli.command {
        Command::Code {
            cmd: CodeCmd::Info { code, iterations },
        } => code_info(&code, iterations),
        Command::Eval { cmd: EvalCmd::Fer(a) } => eval_fer(&a),
        Command::Eval { cmd: EvalCmd::Hist(a) } => eval_hist(&a),
        Command::Collect(a) => collect(&a),
        Command::Train { config } => train(&config),
        Command::Weights {
            cmd: WeightsCmd::Report { file, out },
        } => {
            let wf = WeightFile::load(&file)?;
            write_csv_rows(output(out.as_deref())?, &weight_report(&wf)?)?;
            Ok(())
        }
        Command::Dataset {
            cmd: DatasetCmd::Info { file },
        } => {
            let ds = Dataset::load(&file)?;
            println!("{}", serde_json::to_string_pretty(&ds.header)?);
            println!("samples: {}", ds.len());
            if let Some(r) = ds.acceptance_rate() {
                println!("acceptance rate: {r:.3e}");
            }
            Ok(())
        }
        Command::Dataset {
            cmd: DatasetCmd::Export { file, out },
        } => {
            let ds = Dataset::load(&file)?;
            ds.write_csv(output(Some(&out))?)?;
            Ok(())
        }
    }
}
