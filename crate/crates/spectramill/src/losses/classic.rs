//! Plain MSE and binary cross-entropy, the comparator arms in the
//! ablation studies.

/// Log clamp floor for cross-entropy.
pub const CE_EPS: f64 = 1e-12;

/// Mean squared error over all points.
pub fn mse(pred: &[f64], truth: &[f64]) -> f64 {
    let n = pred.len() as f64;
    pred.iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n
}

pub fn mse_grad(pred: &[f64], truth: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len() as f64;
    let mut acc = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for i in 0..pred.len() {
        let e = pred[i] - truth[i];
        acc += e * e;
        grad[i] = 2.0 * e / n;
    }
    (acc / n, grad)
}

/// Mean binary cross-entropy with epsilon-clamped logs.
pub fn cross_entropy(y_p: &[f64], y_t: &[f64]) -> f64 {
    let n = y_p.len() as f64;
    let mut acc = 0.0;
    for (p, t) in y_p.iter().zip(y_t) {
        acc -= t * p.max(CE_EPS).ln() + (1.0 - t) * (1.0 - p).max(CE_EPS).ln();
    }
    acc / n
}

pub fn cross_entropy_grad(y_p: &[f64], y_t: &[f64]) -> (f64, Vec<f64>) {
    let n = y_p.len() as f64;
    let mut acc = 0.0;
    let mut grad = vec![0.0; y_p.len()];
    for i in 0..y_p.len() {
        let (p, t) = (y_p[i], y_t[i]);
        acc -= t * p.max(CE_EPS).ln() + (1.0 - t) * (1.0 - p).max(CE_EPS).ln();
        let mut g = 0.0;
        if p > CE_EPS {
            g -= t / p;
        }
        if 1.0 - p > CE_EPS {
            g += (1.0 - t) / (1.0 - p);
        }
        grad[i] = g / n;
    }
    (acc / n, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ce_zero_on_exact_binary_match() {
        let y = vec![1.0, 0.0, 1.0, 0.0];
        assert!(cross_entropy(&y, &y) <= -((1.0f64 - CE_EPS).ln()) + 1e-15);
        assert_eq!(cross_entropy(&y, &y), 0.0);
    }

    #[test]
    fn ce_half_scores_give_ln2() {
        let y_p = vec![0.5; 10];
        let y_t = vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        assert!((cross_entropy(&y_p, &y_t) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn matches_scalar_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let y_p: Vec<f64> = (0..128).map(|_| rng.random_range(0.01..0.99)).collect();
        let y_t: Vec<f64> = (0..128).map(|_| f64::from(rng.random::<bool>())).collect();
        let mut ce = 0.0;
        let mut sq = 0.0;
        for i in 0..128 {
            ce -= y_t[i] * y_p[i].ln() + (1.0 - y_t[i]) * (1.0 - y_p[i]).ln();
            sq += (y_p[i] - y_t[i]) * (y_p[i] - y_t[i]);
        }
        assert!((cross_entropy(&y_p, &y_t) - ce / 128.0).abs() < 1e-12);
        assert!((mse(&y_p, &y_t) - sq / 128.0).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let truth: Vec<f64> = (0..64).map(|_| f64::from(rng.random::<bool>())).collect();
        let mut pred: Vec<f64> = (0..64).map(|_| rng.random_range(0.05..0.95)).collect();
        let (_, g_ce) = cross_entropy_grad(&pred, &truth);
        let (_, g_mse) = mse_grad(&pred, &truth);
        let h = 1e-5;
        for i in 0..64 {
            let keep = pred[i];
            pred[i] = keep + h;
            let (ce_up, mse_up) = (cross_entropy(&pred, &truth), mse(&pred, &truth));
            pred[i] = keep - h;
            let (ce_dn, mse_dn) = (cross_entropy(&pred, &truth), mse(&pred, &truth));
            pred[i] = keep;
            let fd_ce = (ce_up - ce_dn) / (2.0 * h);
            let fd_mse = (mse_up - mse_dn) / (2.0 * h);
            let d1 = fd_ce.abs().max(g_ce[i].abs()).max(1e-6);
            let d2 = fd_mse.abs().max(g_mse[i].abs()).max(1e-6);
            assert!((fd_ce - g_ce[i]).abs() / d1 < 1e-4);
            assert!((fd_mse - g_mse[i]).abs() / d2 < 1e-4);
        }
    }
}
