//! Two-stage boosting run on the bundled WiMAX code at adjustable scale.
//!
//! `cargo run --release -p nms-core --example boosting`
//!
//! Scale knobs (environment): BASE_EPOCHS, BASE_FRAMES, POST_EPOCHS, COUNT,
//! DELTA1, DELTA2, LR, BATCH, ARTIFACTS (directory reused across runs).

use std::time::Instant;

use nms_core::channel::{ChannelParams, Quantizer};
use nms_core::decoder::Decoder;
use nms_core::harness::{monte_carlo, McConfig, StopRule};
use nms_core::pipeline::{
    collect_uncorrected, evaluate_test_fer, split_dataset, train_stage, Arithmetic, CollectConfig, Dataset,
    SampleSource, Schedule, TrainerConfig,
};
use nms_core::presets;
use nms_core::train::AdamConfig;
use nms_core::weights::{SharingScheme, StagedWeights, WeightFile, WeightSet};

fn knob<T: std::str::FromStr>(name: &str, default: T) -> T {
    std::env::var(name).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn main() -> nms_core::Result<()> {
    let g = presets::code(presets::WIMAX_576_R34)?;
    let arith = Arithmetic::quantized(Quantizer::default());
    let lr: f64 = knob("LR", 1e-3);
    let adam = AdamConfig {
        lr,
        ..AdamConfig::default()
    };
    let clock = Instant::now();

    let r1 = [2.0, 2.5, 3.0, 3.5, 4.0];
    let ch = ChannelParams::awgn(3.0, g.rate())?;
    let mut w = StagedWeights::single(WeightSet::for_graph(&g, SharingScheme::Spatial, 1, 20)?)?;
    let val: Vec<Vec<f64>> = (0..1000u64)
        .map(|f| {
            let mut llr = vec![0.0; g.n()];
            nms_core::pipeline::draw_frame(&ch, &r1, 99, f, &mut llr);
            llr
        })
        .collect();
    let base_cfg = TrainerConfig {
        epochs: knob("BASE_EPOCHS", 5),
        batch_size: knob("BATCH", 500),
        adam,
        seed: 1,
        ..TrainerConfig::default()
    };
    let src = SampleSource::Random {
        channel: ch,
        region: &r1,
        frames_per_epoch: knob("BASE_FRAMES", 2000),
    };
    let dir = std::path::PathBuf::from(knob("ARTIFACTS", "/tmp/boosting".to_string()));
    std::fs::create_dir_all(&dir)?;
    let base_path = dir.join("base.json");
    if base_path.exists() {
        w = WeightFile::load(&base_path)?.to_weights()?;
    } else {
        let rep = train_stage(&g, &mut w, 0, Schedule::one_shot(20), src, &val, arith, &base_cfg)?;
        for l in &rep.log {
            println!(
                "base epoch {} val FER {:.4} loss {:?} t={:.1}s",
                l.epoch, l.validation_fer, l.train_loss, l.wall_seconds
            );
        }
        WeightFile::from_weights("wimax", &w, arith.quantizer).save(&base_path)?;
    }
    println!("base weights {:?}", &w.stage(0).params()[..6]);

    let dec = Decoder::new(&g, &w, arith.config(20))?;
    let grid: Vec<f64> = (0..9).map(|i| 2.5 + 0.25 * i as f64).collect();
    let grid_frames: u64 = knob("GRID_FRAMES", 100_000);
    let pts = monte_carlo(&dec, &ch, &grid, &McConfig::new(StopRule::new(200, grid_frames)?, 5))?;
    let mut region = *grid.last().unwrap();
    for p in &pts {
        println!(
            "base {:.2} dB FER {:.3e} ({} frames) t={:.1}s",
            p.ebn0_db,
            p.fer,
            p.frames,
            clock.elapsed().as_secs_f64()
        );
    }
    if let Some(p) = pts.iter().find(|p| p.fer <= 1e-2) {
        region = p.ebn0_db;
    }
    let count: usize = knob("COUNT", 1000);
    let cc = CollectConfig::new("wimax", ch, vec![region], count, 7);
    let ds_path = dir.join(format!("ds_{region}_{count}.bin"));
    let ds = if ds_path.exists() {
        Dataset::load(&ds_path)?
    } else {
        let ds = collect_uncorrected(&dec, &w, &cc)?;
        ds.save(&ds_path)?;
        ds
    };
    println!(
        "collected {} at {region} dB, rate {:?}, t={:.1}s",
        ds.len(),
        ds.acceptance_rate(),
        clock.elapsed().as_secs_f64()
    );

    let nt = count * 8 / 10;
    let nv = count / 10;
    let (tr, va, te) = split_dataset(&ds, [nt, nv, count - nt - nv], 3)?;
    let f = |d: &Dataset| d.samples.iter().map(|s| s.llr_f64()).collect::<Vec<_>>();
    let (tr, va, te) = (f(&tr), f(&va), f(&te));
    w.push(WeightSet::for_graph(&g, SharingScheme::Full, 21, 30)?)?;
    println!(
        "test FER before post training {:.4}",
        evaluate_test_fer(&g, &w, arith, &te)?
    );
    let post_cfg = TrainerConfig {
        epochs: knob("POST_EPOCHS", 5),
        batch_size: knob("BATCH", 500),
        adam,
        seed: 2,
        ..TrainerConfig::default()
    };
    let sched = Schedule {
        delta1: knob("DELTA1", 5),
        delta2: knob("DELTA2", 5),
    };
    let t0 = Instant::now();
    let rep = train_stage(&g, &mut w, 1, sched, SampleSource::Fixed(&tr), &va, arith, &post_cfg)?;
    for l in &rep.log {
        println!(
            "post [{},{}] epoch {} val FER {:.4} train FER {:?} loss {:?} t={:.1}s",
            l.first, l.last, l.epoch, l.validation_fer, l.train_fer, l.train_loss, l.wall_seconds
        );
    }
    println!("post training {:.1}s", t0.elapsed().as_secs_f64());
    println!(
        "test FER after post training {:.4}",
        evaluate_test_fer(&g, &w, arith, &te)?
    );
    Ok(())
}
