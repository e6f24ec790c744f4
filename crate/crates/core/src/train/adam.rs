use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam. Parameters are never clipped.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        AdamState {
            config,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update. Entries with `mask[i] == false` are left bit-identical,
    /// moments included.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], mask: Option<&[bool]>) -> Result<()> {
        let len = self.m.len();
        for got in [params.len(), grads.len(), mask.map_or(len, |m| m.len())] {
            if got != len {
                return Err(Error::Length { expected: len, got });
            }
        }
        if let Some((index, &value)) = grads.iter().enumerate().find(|(_, g)| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index, value });
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..len {
            if mask.is_some_and(|m| !m[i]) {
                continue;
            }
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_weights() {
        let mut s = AdamState::new(2, AdamConfig::default());
        let mut p = [1.0, 0.5];
        s.step(&mut p, &[0.0, 0.0], None).unwrap();
        assert_eq!(p, [1.0, 0.5]);
        assert_eq!(s.steps(), 1);
    }

    #[test]
    fn first_and_second_step_sizes() {
        // Closed form: with a constant gradient every bias-corrected step is
        // lr * g / (|g| + eps).
        let mut s = AdamState::new(1, AdamConfig::default());
        let mut p = [1.0];
        s.step(&mut p, &[1.0], None).unwrap();
        let one = 1e-3 * 1.0 / (1.0 + 1e-8);
        assert!((p[0] - (1.0 - one)).abs() < 1e-12);
        s.step(&mut p, &[1.0], None).unwrap();
        assert!((p[0] - (1.0 - 0.002)).abs() < 1e-5);
    }

    #[test]
    fn mask_and_non_finite() {
        let mut s = AdamState::new(2, AdamConfig::default());
        let mut p = [1.0, 1.0];
        s.step(&mut p, &[1.0, 1.0], Some(&[false, true])).unwrap();
        assert_eq!(p[0].to_bits(), 1.0f64.to_bits());
        assert!(p[1] < 1.0);
        let err = s.step(&mut p, &[f64::NAN, 0.0], None).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { index: 0, .. }));
        assert!(s.step(&mut p, &[0.0], None).is_err());
    }
}
