//! Additive noise layers: one Gaussian layer whose standard deviation is
//! drawn from a configured list, plus up to two gated beta-distributed
//! layers with a random shared sign each.

use super::config::{BetaNoise, GenConfig};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};

/// Zero-mean Gaussian draws, one per point.
pub fn gaussian_layer<R: Rng>(rng: &mut R, n: usize, std: f64) -> Vec<f64> {
    if std <= 0.0 {
        return vec![0.0; n];
    }
    let dist = Normal::new(0.0, std).expect("finite std");
    (0..n).map(|_| dist.sample(rng)).collect()
}

/// Beta(1, 2) magnitudes mapped onto `[lo, hi]`; every value is
/// non-negative and the density leans toward `lo`.
pub fn beta_layer<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::Config(format!(
            "beta noise range [{lo}, {hi}] must satisfy 0 <= lo < hi"
        )));
    }
    let dist = Beta::new(1.0, 2.0).expect("valid beta shape");
    Ok((0..n).map(|_| lo + dist.sample(rng) * (hi - lo)).collect())
}

/// Add all noise layers to a normalized spectrum. Returns the noisy values
/// and the Gaussian standard deviation that was drawn. Draw order: std
/// choice, Gaussian points, then per beta layer a gate, a sign, and the
/// point draws.
pub fn add_noise<R: Rng>(rng: &mut R, values: &[f64], cfg: &GenConfig) -> Result<(Vec<f64>, f64)> {
    let n = values.len();
    let std = cfg.gauss_stds[rng.random_range(0..cfg.gauss_stds.len())];
    let mut out = values.to_vec();
    if std > 0.0 {
        let layer = gaussian_layer(rng, n, std);
        for (o, g) in out.iter_mut().zip(&layer) {
            *o += g;
        }
    }
    let apply_beta = |rng: &mut R, out: &mut [f64], b: &BetaNoise| -> Result<()> {
        if rng.random_bool(b.prob) {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let layer = beta_layer(rng, n, b.mag_range.0, b.mag_range.1)?;
            for (o, v) in out.iter_mut().zip(&layer) {
                *o += sign * v;
            }
        }
        Ok(())
    };
    apply_beta(rng, &mut out, &cfg.beta1)?;
    if let Some(b2) = &cfg.beta2 {
        apply_beta(rng, &mut out, b2)?;
    }
    Ok((out, std))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::Task;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_layer_matches_requested_std() {
        let mut rng = ChaCha8Rng::seed_from_u64(300);
        let layer = gaussian_layer(&mut rng, 200_000, 0.05);
        let mean = layer.iter().sum::<f64>() / layer.len() as f64;
        let var = layer.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / layer.len() as f64;
        let std = var.sqrt();
        assert!(mean.abs() < 0.001, "{mean}");
        assert!((std - 0.05).abs() / 0.05 < 0.03, "{std}");
    }

    #[test]
    fn beta_layer_support_and_skew() {
        let mut rng = ChaCha8Rng::seed_from_u64(301);
        let layer = beta_layer(&mut rng, 100_000, 0.0, 0.004).unwrap();
        let mut below_mid = 0usize;
        for &v in &layer {
            assert!((0.0..=0.004).contains(&v), "{v}");
            below_mid += (v < 0.002) as usize;
        }
        // Beta(1, 2) has CDF 0.75 at the midpoint.
        let frac = below_mid as f64 / layer.len() as f64;
        assert!((frac - 0.75).abs() < 0.01, "{frac}");
        let mean = layer.iter().sum::<f64>() / layer.len() as f64;
        // Mean of Beta(1, 2) is 1/3 of the range.
        assert!((mean - 0.004 / 3.0).abs() < 0.0001, "{mean}");
    }

    #[test]
    fn beta_layer_rejects_bad_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(302);
        assert!(beta_layer(&mut rng, 8, 0.004, 0.004).is_err());
        assert!(beta_layer(&mut rng, 8, -0.001, 0.004).is_err());
    }

    #[test]
    fn add_noise_reports_drawn_std() {
        let cfg = GenConfig::for_task(Task::Denoiser, 7);
        let values = vec![0.5; 555];
        let mut rng = ChaCha8Rng::seed_from_u64(303);
        for _ in 0..200 {
            let (out, std) = add_noise(&mut rng, &values, &cfg).unwrap();
            assert!(cfg.gauss_stds.contains(&std));
            assert_eq!(out.len(), 555);
        }
    }

    #[test]
    fn zero_config_is_identity() {
        let cfg = GenConfig {
            gauss_stds: vec![0.0],
            beta1: BetaNoise { prob: 0.0, mag_range: (0.0, 0.004) },
            beta2: None,
            ..GenConfig::for_task(Task::PeakLocator, 1)
        };
        let values: Vec<f64> = (0..64).map(|i| i as f64 / 64.0).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(304);
        let (out, std) = add_noise(&mut rng, &values, &cfg).unwrap();
        assert_eq!(out, values);
        assert_eq!(std, 0.0);
    }

    #[test]
    fn beta_gate_rate_and_sign_balance() {
        let cfg = GenConfig {
            gauss_stds: vec![0.0],
            beta1: BetaNoise { prob: 0.3, mag_range: (0.001, 0.004) },
            beta2: None,
            ..GenConfig::for_task(Task::PeakLocator, 1)
        };
        let values = vec![0.0; 16];
        let mut rng = ChaCha8Rng::seed_from_u64(305);
        let (mut gated, mut positive) = (0usize, 0usize);
        let n = 20_000;
        for _ in 0..n {
            let (out, _) = add_noise(&mut rng, &values, &cfg).unwrap();
            // lo > 0 makes an applied layer visible at every point.
            if out[0] != 0.0 {
                gated += 1;
                positive += (out[0] > 0.0) as usize;
                for &v in &out {
                    assert!(v.abs() >= 0.001 && v.abs() <= 0.004);
                    assert_eq!(v > 0.0, out[0] > 0.0, "sign is shared per layer");
                }
            }
        }
        let gate_rate = gated as f64 / n as f64;
        let pos_rate = positive as f64 / gated as f64;
        assert!((gate_rate - 0.3).abs() < 0.015, "{gate_rate}");
        assert!((pos_rate - 0.5).abs() < 0.03, "{pos_rate}");
    }
}
