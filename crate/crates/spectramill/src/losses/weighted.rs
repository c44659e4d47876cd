//! Noise-conditioned weighted MSE for the denoiser.
//!
//! Low-noise spectra get their MSE amplified so the model keeps refining
//! fine structure instead of coasting on easy samples; the multiplier falls
//! to 1 as the drawn noise level rises.

use serde::{Deserialize, Serialize};

/// Noise std -> MSE multiplier, nearest-key lookup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedMseSchedule {
    /// (std, coefficient) pairs sorted by std; coefficients non-increasing.
    pub table: Vec<(f64, f64)>,
}

impl Default for WeightedMseSchedule {
    fn default() -> Self {
        WeightedMseSchedule {
            table: vec![
                (0.0, 100.0),
                (0.001, 100.0),
                (0.005, 40.0),
                (0.01, 40.0),
                (0.02, 15.0),
                (0.05, 4.0),
                (0.1, 1.0),
                (0.15, 1.0),
            ],
        }
    }
}

impl WeightedMseSchedule {
    /// Coefficient at the nearest tabulated std; ties go to the lower key.
    pub fn coefficient(&self, noise_std: f64) -> f64 {
        let mut best = (f64::INFINITY, 1.0);
        for &(std, coeff) in &self.table {
            let dist = (noise_std - std).abs();
            if dist < best.0 {
                best = (dist, coeff);
            }
        }
        best.1
    }
}

pub fn weighted_mse(pred: &[f64], truth: &[f64], noise_std: f64, sched: &WeightedMseSchedule) -> f64 {
    let c = sched.coefficient(noise_std);
    let n = pred.len() as f64;
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    c * sum / n
}

pub fn weighted_mse_grad(
    pred: &[f64],
    truth: &[f64],
    noise_std: f64,
    sched: &WeightedMseSchedule,
) -> (f64, Vec<f64>) {
    let c = sched.coefficient(noise_std);
    let n = pred.len() as f64;
    let mut sum = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for i in 0..pred.len() {
        let e = pred[i] - truth[i];
        sum += e * e;
        grad[i] = 2.0 * c * e / n;
    }
    (c * sum / n, grad)
}
