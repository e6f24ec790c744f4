use std::time::Instant;

use nms_core::channel::{stream_rng, transmit, ChannelParams, Quantizer};
use nms_core::decoder::{DecodeRecord, Decoder, DecoderConfig};
use nms_core::presets;
use nms_core::weights::StagedWeights;

fn main() -> nms_core::Result<()> {
    let g = presets::code(presets::WIMAX_576_R34)?;
    let w = StagedWeights::constant(&g, 20, 0.75)?;
    let p = ChannelParams::awgn(2.0, g.rate())?;
    let llr = transmit(&p, g.n(), &mut stream_rng(1, 0));
    for (name, cfg) in [
        (
            "quantized",
            DecoderConfig::quantized(20, Quantizer::default()).with_early_stop(false),
        ),
        ("floating", DecoderConfig::floating(20).with_early_stop(false)),
        ("traced", DecoderConfig::quantized(20, Quantizer::default()).traced(1)),
    ] {
        let dec = Decoder::new(&g, &w, cfg)?;
        let mut rec = DecodeRecord::new();
        let t = Instant::now();
        let reps: u32 = std::env::var("REPS").ok().and_then(|s| s.parse().ok()).unwrap_or(500);
        for _ in 0..reps {
            dec.decode_into(&llr, &mut rec)?;
        }
        println!(
            "{name}: {:.2} us/iteration",
            t.elapsed().as_secs_f64() * 1e6 / (reps * 20) as f64
        );
    }
    let t = Instant::now();
    let mut s = 0.0;
    for f in 0..5000 {
        s += transmit(&p, g.n(), &mut stream_rng(1, f))[0];
    }
    println!(
        "transmit: {:.2} us/frame ({s})",
        t.elapsed().as_secs_f64() * 1e6 / 5000.0
    );
    Ok(())
}
