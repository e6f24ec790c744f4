//! BPSK over AWGN or Rayleigh fading, channel LLRs, and the uniform message
//! quantizer.
//!
//! The all-zero codeword is always transmitted (every symbol is +1). Min-sum
//! decoding commutes with codeword sign flips, so frame error rates measured
//! this way hold for any codeword.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    #[default]
    Awgn,
    Rayleigh,
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "awgn" => Ok(ChannelKind::Awgn),
            "rayleigh" => Ok(ChannelKind::Rayleigh),
            other => Err(Error::Config(format!("unknown channel `{other}`"))),
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::Rayleigh => "rayleigh",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub kind: ChannelKind,
    pub ebn0_db: f64,
    pub rate: f64,
    /// Rayleigh scale parameter; ignored for AWGN.
    pub scale: f64,
}

impl ChannelParams {
    pub fn new(kind: ChannelKind, ebn0_db: f64, rate: f64) -> Result<Self> {
        let p = ChannelParams {
            kind,
            ebn0_db,
            rate,
            scale: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn awgn(ebn0_db: f64, rate: f64) -> Result<Self> {
        Self::new(ChannelKind::Awgn, ebn0_db, rate)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return Err(Error::Config(format!("code rate {} not in (0, 1)", self.rate)));
        }
        if !self.ebn0_db.is_finite() {
            return Err(Error::Config("Eb/N0 must be finite".into()));
        }
        if !(self.scale > 0.0) {
            return Err(Error::Config(format!("Rayleigh scale {} must be positive", self.scale)));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        ebn0_to_sigma(self.ebn0_db, self.rate)
    }
}

/// Noise standard deviation for unit-energy BPSK: `(2 R 10^(Eb/N0 / 10))^(-1/2)`.
pub fn ebn0_to_sigma(ebn0_db: f64, rate: f64) -> f64 {
    (2.0 * rate * 10f64.powf(ebn0_db / 10.0)).powf(-0.5)
}

/// Fills `llr` with channel LLRs of one all-zero frame.
pub fn transmit_into<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R, llr: &mut [f64]) {
    let sigma = params.sigma();
    let scale = 2.0 / (sigma * sigma);
    match params.kind {
        ChannelKind::Awgn => {
            for l in llr.iter_mut() {
                let g: f64 = rng.sample(StandardNormal);
                *l = scale * (1.0 + sigma * g);
            }
        }
        ChannelKind::Rayleigh => {
            for l in llr.iter_mut() {
                // inverse-CDF Rayleigh sample, fading known at the receiver
                let u: f64 = rng.random();
                let h = params.scale * (-2.0 * (1.0 - u).ln()).sqrt();
                let g: f64 = rng.sample(StandardNormal);
                *l = scale * h * (h + sigma * g);
            }
        }
    }
}

pub fn transmit<R: Rng + ?Sized>(params: &ChannelParams, n: usize, rng: &mut R) -> Vec<f64> {
    let mut llr = vec![0.0; n];
    transmit_into(params, rng, &mut llr);
    llr
}

/// Deterministic generator for one independent stream of frames.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform mid-tread quantizer with alphabet `{-max, .., -step, 0, step, .., max}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    pub max: f64,
    pub step: f64,
}

impl Default for Quantizer {
    fn default() -> Self {
        Quantizer { max: 7.5, step: 0.5 }
    }
}

impl Quantizer {
    pub fn new(max: f64, step: f64) -> Result<Self> {
        let q = Quantizer { max, step };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max > 0.0 && self.step > 0.0) {
            return Err(Error::Config("quantizer max and step must be positive".into()));
        }
        let ratio = self.max / self.step;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "quantizer max {} is not a multiple of step {}",
                self.max, self.step
            )));
        }
        Ok(())
    }

    /// Number of positive levels.
    pub fn positive_levels(&self) -> usize {
        (self.max / self.step).round() as usize
    }

    /// Sign-magnitude width in bits.
    pub fn bits(&self) -> u32 {
        let mags = self.positive_levels() + 1;
        1 + usize::BITS - (mags - 1).leading_zeros()
    }

    pub fn alphabet(&self) -> Vec<f64> {
        let k = self.positive_levels() as i64;
        (-k..=k).map(|i| i as f64 * self.step).collect()
    }

    /// Clips to `[-max, max]` and rounds to the nearest multiple of `step`,
    /// ties away from zero.
    #[inline]
    pub fn quantize(&self, x: f64) -> f64 {
        let c = if x > self.max {
            self.max
        } else if x < -self.max {
            -self.max
        } else {
            x
        };
        let y = c / self.step;
        // round half away from zero without a libm call
        let a = y.abs();
        let whole = a as i64;
        let k = (whole + (a - whole as f64 >= 0.5) as i64) as f64;
        (if y < 0.0 { -k } else { k }) * self.step
    }

    /// Straight-through derivative: one strictly inside the clip range.
    #[inline]
    pub fn passes_gradient(&self, x: f64) -> bool {
        x.abs() < self.max
    }
}
