//! Frame-error loss and its smooth surrogate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// 0/1 frame error; metric only.
    FerHard,
    /// `sigmoid(-alpha * min_v o_v)`.
    FerSoft,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub kind: LossKind,
    pub alpha: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            kind: LossKind::FerSoft,
            alpha: 1.0,
        }
    }
}

impl LossConfig {
    pub fn soft(alpha: f64) -> Result<Self> {
        let cfg = LossConfig {
            kind: LossKind::FerSoft,
            alpha,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "loss temperature {} must be positive",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Soft loss value, the component it depends on, and `d loss / d o[argmin]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoftLoss {
    pub value: f64,
    pub argmin: usize,
    pub grad: f64,
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Lowest index of the smallest entry.
fn argmin(output: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in output.iter().enumerate().skip(1) {
        if x < output[best] {
            best = i;
        }
    }
    best
}

/// 1 when some output LLR is `<= 0`, else 0.
pub fn fer_loss_hard(output: &[f64]) -> f64 {
    if output.iter().any(|&x| x <= 0.0) {
        1.0
    } else {
        0.0
    }
}

pub fn fer_loss_hard_mean<'a>(outputs: impl IntoIterator<Item = &'a [f64]>) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for o in outputs {
        sum += fer_loss_hard(o);
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

pub fn fer_loss_soft(output: &[f64], alpha: f64) -> Result<SoftLoss> {
    if output.is_empty() {
        return Err(Error::Length { expected: 1, got: 0 });
    }
    let a = argmin(output);
    let value = logistic(-alpha * output[a]);
    Ok(SoftLoss {
        value,
        argmin: a,
        grad: -alpha * value * (1.0 - value),
    })
}
