//! Decoding throughput and FER on the bundled WiMAX code: quantized WMS(0.75),
//! or the bundled reference weights when the fourth argument is `reference`.
//!
//! `cargo run --release -p nms-core --example throughput -- 3.5 20000 20`

use nms_core::channel::{ChannelParams, Quantizer};
use nms_core::decoder::{Decoder, DecoderConfig};
use nms_core::harness::{monte_carlo, McConfig, StopRule};
use nms_core::presets;
use nms_core::weights::StagedWeights;

fn main() -> nms_core::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let ebn0: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3.5);
    let frames: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let iters: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(20);
    let g = presets::code(presets::WIMAX_576_R34)?;
    let w = match args.get(4).map(String::as_str) {
        Some("reference") => presets::wimax_reference_weights().to_weights()?.truncated(iters)?,
        _ => StagedWeights::constant(&g, iters, 0.75)?,
    };
    let dec = Decoder::new(&g, &w, DecoderConfig::quantized(iters, Quantizer::default()))?;
    let p = ChannelParams::awgn(ebn0, g.rate())?;
    let pts = monte_carlo(&dec, &p, &[ebn0], &McConfig::new(StopRule::new(u64::MAX, frames)?, 1))?;
    for pt in pts {
        println!(
            "{} dB: {} frames, {} errors, FER {:.3e}, avg it {:.2}, {:.0} frames/s",
            pt.ebn0_db,
            pt.frames,
            pt.frame_errors,
            pt.fer,
            pt.avg_iterations,
            pt.frames as f64 / pt.wall_seconds
        );
    }
    Ok(())
}
