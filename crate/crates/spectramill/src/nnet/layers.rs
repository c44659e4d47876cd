//! Differentiable 1D layers. Forward functions return whatever the matching
//! backward needs; model code owns the parameter storage and threads slices
//! in. All arithmetic is f64; loops are written tap-outer so the inner
//! length loop vectorizes.

use super::tensor::Tensor;
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Left padding that keeps output length equal to input length. Odd kernels
/// pad symmetrically; the even kernel 4 pads 2 left, 1 right.
pub fn same_pad_left(k: usize) -> usize {
    k / 2
}

/// Weight layout: w[(co * in_ch + ci) * k + t], bias per output channel.
pub fn conv1d_forward(
    x: &Tensor,
    w: &[f64],
    b: &[f64],
    in_ch: usize,
    out_ch: usize,
    k: usize,
) -> Tensor {
    debug_assert_eq!(x.ch, in_ch);
    debug_assert_eq!(w.len(), out_ch * in_ch * k);
    let (batch, _, len) = x.shape();
    let pad_l = same_pad_left(k) as isize;
    let mut y = Tensor::zeros(batch, out_ch, len);
    for bi in 0..batch {
        for co in 0..out_ch {
            let yc = y.channel_mut(bi, co);
            yc.fill(b[co]);
            for ci in 0..in_ch {
                let xc = x.channel(bi, ci);
                let wbase = (co * in_ch + ci) * k;
                for (t, wv) in w[wbase..wbase + k].iter().enumerate() {
                    let shift = t as isize - pad_l;
                    if shift >= 0 {
                        let s = shift as usize;
                        for (yv, xv) in yc[..len - s].iter_mut().zip(&xc[s..]) {
                            *yv += wv * xv;
                        }
                    } else {
                        let s = (-shift) as usize;
                        for (yv, xv) in yc[s..].iter_mut().zip(&xc[..len - s]) {
                            *yv += wv * xv;
                        }
                    }
                }
            }
        }
    }
    y
}

/// Returns (dx, dw, db).
pub fn conv1d_backward(
    dy: &Tensor,
    x: &Tensor,
    w: &[f64],
    in_ch: usize,
    out_ch: usize,
    k: usize,
) -> (Tensor, Vec<f64>, Vec<f64>) {
    let (batch, _, len) = x.shape();
    let pad_l = same_pad_left(k) as isize;
    let mut dx = Tensor::zeros(batch, in_ch, len);
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; out_ch];
    for bi in 0..batch {
        for co in 0..out_ch {
            let dyc = dy.channel(bi, co);
            db[co] += dyc.iter().sum::<f64>();
            for ci in 0..in_ch {
                let xc = x.channel(bi, ci);
                let dxc = dx.channel_mut(bi, ci);
                let wbase = (co * in_ch + ci) * k;
                for t in 0..k {
                    let shift = t as isize - pad_l;
                    let (ys, xs) = if shift >= 0 {
                        (0usize, shift as usize)
                    } else {
                        ((-shift) as usize, 0usize)
                    };
                    let n = len - ys.max(xs);
                    let wv = w[wbase + t];
                    let mut acc = 0.0;
                    for j in 0..n {
                        let d = dyc[ys + j];
                        acc += d * xc[xs + j];
                        dxc[xs + j] += wv * d;
                    }
                    dw[wbase + t] += acc;
                }
            }
        }
    }
    (dx, dw, db)
}

pub struct BnCache {
    pub x_hat: Tensor,
    pub inv_std: Vec<f64>,
}

/// Train-mode batch normalization over (batch, length) per channel.
/// Running statistics move by `momentum` toward the batch statistics and
/// are kept on the f32 grid so checkpoints reproduce them exactly.
#[allow(clippy::too_many_arguments)]
pub fn bn_forward_train(
    x: &Tensor,
    gamma: &[f64],
    beta: &[f64],
    running_mean: &mut [f64],
    running_var: &mut [f64],
    momentum: f64,
    eps: f64,
) -> Result<(Tensor, BnCache)> {
    let (batch, ch, len) = x.shape();
    if batch < 2 {
        return Err(Error::Shape {
            expected: "batch >= 2 for train-mode batch normalization".to_string(),
            got: format!("batch {batch}"),
        });
    }
    let n = (batch * len) as f64;
    let mut y = Tensor::zeros(batch, ch, len);
    let mut x_hat = Tensor::zeros(batch, ch, len);
    let mut inv_std = vec![0.0; ch];
    for c in 0..ch {
        let mut mean = 0.0;
        for bi in 0..batch {
            mean += x.channel(bi, c).iter().sum::<f64>();
        }
        mean /= n;
        let mut var = 0.0;
        for bi in 0..batch {
            for v in x.channel(bi, c) {
                let d = v - mean;
                var += d * d;
            }
        }
        var /= n;
        let is = 1.0 / (var + eps).sqrt();
        inv_std[c] = is;
        for bi in 0..batch {
            let xc = x.channel(bi, c);
            let xh = x_hat.channel_mut(bi, c);
            for (h, v) in xh.iter_mut().zip(xc) {
                *h = (v - mean) * is;
            }
            let yc = y.channel_mut(bi, c);
            for (o, h) in yc.iter_mut().zip(x_hat.channel(bi, c)) {
                *o = gamma[c] * h + beta[c];
            }
        }
        running_mean[c] = (((1.0 - momentum) * running_mean[c] + momentum * mean) as f32) as f64;
        running_var[c] = (((1.0 - momentum) * running_var[c] + momentum * var) as f32) as f64;
    }
    Ok((y, BnCache { x_hat, inv_std }))
}

pub fn bn_forward_eval(
    x: &Tensor,
    gamma: &[f64],
    beta: &[f64],
    running_mean: &[f64],
    running_var: &[f64],
    eps: f64,
) -> Tensor {
    let (batch, ch, len) = x.shape();
    let mut y = Tensor::zeros(batch, ch, len);
    for c in 0..ch {
        let is = 1.0 / (running_var[c] + eps).sqrt();
        for bi in 0..batch {
            let xc = x.channel(bi, c);
            let yc = y.channel_mut(bi, c);
            for (o, v) in yc.iter_mut().zip(xc) {
                *o = gamma[c] * (v - running_mean[c]) * is + beta[c];
            }
        }
    }
    y
}

/// Returns (dx, dgamma, dbeta).
pub fn bn_backward(dy: &Tensor, cache: &BnCache, gamma: &[f64]) -> (Tensor, Vec<f64>, Vec<f64>) {
    let (batch, ch, len) = dy.shape();
    let n = (batch * len) as f64;
    let mut dx = Tensor::zeros(batch, ch, len);
    let mut dgamma = vec![0.0; ch];
    let mut dbeta = vec![0.0; ch];
    for c in 0..ch {
        let mut sum_dy = 0.0;
        let mut sum_dy_xh = 0.0;
        for bi in 0..batch {
            let dyc = dy.channel(bi, c);
            let xh = cache.x_hat.channel(bi, c);
            for (d, h) in dyc.iter().zip(xh) {
                sum_dy += d;
                sum_dy_xh += d * h;
            }
        }
        dgamma[c] = sum_dy_xh;
        dbeta[c] = sum_dy;
        let scale = gamma[c] * cache.inv_std[c];
        for bi in 0..batch {
            let dyc = dy.channel(bi, c);
            let xh = cache.x_hat.channel(bi, c);
            let dxc = dx.channel_mut(bi, c);
            for ((o, d), h) in dxc.iter_mut().zip(dyc).zip(xh) {
                *o = scale * (*d - sum_dy / n - h * sum_dy_xh / n);
            }
        }
    }
    (dx, dgamma, dbeta)
}

/// Stride-2 max pooling; odd lengths keep a final window of one point.
/// Returns the pooled tensor and the winning input index per output value
/// (ties go to the lower index).
pub fn maxpool_forward(x: &Tensor) -> (Tensor, Vec<usize>) {
    let (batch, ch, len) = x.shape();
    let out_len = len.div_ceil(2);
    let mut y = Tensor::zeros(batch, ch, out_len);
    let mut argmax = vec![0usize; batch * ch * out_len];
    for bi in 0..batch {
        for c in 0..ch {
            let xc = x.channel(bi, c);
            let base = (bi * ch + c) * out_len;
            let yc = y.channel_mut(bi, c);
            for (i, o) in yc.iter_mut().enumerate() {
                let a = 2 * i;
                let b = 2 * i + 1;
                if b < len && xc[b] > xc[a] {
                    *o = xc[b];
                    argmax[base + i] = b;
                } else {
                    *o = xc[a];
                    argmax[base + i] = a;
                }
            }
        }
    }
    (y, argmax)
}

pub fn maxpool_backward(dy: &Tensor, argmax: &[usize], in_len: usize) -> Tensor {
    let (batch, ch, out_len) = dy.shape();
    let mut dx = Tensor::zeros(batch, ch, in_len);
    for bi in 0..batch {
        for c in 0..ch {
            let dyc = dy.channel(bi, c);
            let base = (bi * ch + c) * out_len;
            let dxc = dx.channel_mut(bi, c);
            for (i, d) in dyc.iter().enumerate() {
                dxc[argmax[base + i]] += d;
            }
        }
    }
    dx
}

/// Nearest-neighbor 2x upsampling, cropped to `out_len` (either 2n or
/// 2n - 1, matching the pre-pool length being restored).
pub fn upsample_forward(x: &Tensor, out_len: usize) -> Tensor {
    let (batch, ch, len) = x.shape();
    debug_assert!(out_len <= 2 * len && out_len + 1 >= 2 * len);
    let mut y = Tensor::zeros(batch, ch, out_len);
    for bi in 0..batch {
        for c in 0..ch {
            let xc = x.channel(bi, c);
            let yc = y.channel_mut(bi, c);
            for (i, o) in yc.iter_mut().enumerate() {
                *o = xc[i / 2];
            }
        }
    }
    y
}

pub fn upsample_backward(dy: &Tensor, in_len: usize) -> Tensor {
    let (batch, ch, _) = dy.shape();
    let mut dx = Tensor::zeros(batch, ch, in_len);
    for bi in 0..batch {
        for c in 0..ch {
            let dyc = dy.channel(bi, c);
            let dxc = dx.channel_mut(bi, c);
            for (i, d) in dyc.iter().enumerate() {
                dxc[i / 2] += d;
            }
        }
    }
    dx
}

/// Inverted dropout: kept elements are scaled by 1/(1-rate) so eval mode is
/// the identity. Returns the per-element multiplier mask.
pub fn dropout_forward(x: &Tensor, rate: f64, rng: &mut ChaCha8Rng) -> (Tensor, Vec<f64>) {
    if rate <= 0.0 {
        return (x.clone(), Vec::new());
    }
    let scale = 1.0 / (1.0 - rate);
    let mut y = x.clone();
    let mut mask = vec![0.0; x.data.len()];
    for (m, v) in mask.iter_mut().zip(y.data.iter_mut()) {
        if rng.random_bool(rate) {
            *v = 0.0;
        } else {
            *m = scale;
            *v *= scale;
        }
    }
    (y, mask)
}

pub fn dropout_backward(dy: &Tensor, mask: &[f64]) -> Tensor {
    if mask.is_empty() {
        return dy.clone();
    }
    let mut dx = dy.clone();
    for (d, m) in dx.data.iter_mut().zip(mask) {
        *d *= m;
    }
    dx
}

/// Stochastic depth on a residual branch: each sample's branch output is
/// zeroed with probability `rate`, survivors scaled by 1/(1-rate). Returns
/// the per-sample multiplier.
pub fn droppath_forward(x: &Tensor, rate: f64, rng: &mut ChaCha8Rng) -> (Tensor, Vec<f64>) {
    if rate <= 0.0 {
        return (x.clone(), Vec::new());
    }
    let scale = 1.0 / (1.0 - rate);
    let gates: Vec<f64> = (0..x.batch)
        .map(|_| if rng.random_bool(rate) { 0.0 } else { scale })
        .collect();
    let mut y = x.clone();
    for bi in 0..x.batch {
        let g = gates[bi];
        for c in 0..x.ch {
            for v in y.channel_mut(bi, c) {
                *v *= g;
            }
        }
    }
    (y, gates)
}

pub fn droppath_backward(dy: &Tensor, gates: &[f64]) -> Tensor {
    if gates.is_empty() {
        return dy.clone();
    }
    let mut dx = dy.clone();
    for bi in 0..dx.batch {
        let g = gates[bi];
        for c in 0..dx.ch {
            for v in dx.channel_mut(bi, c) {
                *v *= g;
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, b: usize, c: usize, l: usize) -> Tensor {
        let data = (0..b * c * l).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::from_data(b, c, l, data).unwrap()
    }

    #[test]
    fn conv_identity_kernel_passes_input_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(600);
        let x = rand_tensor(&mut rng, 2, 1, 16);
        let w = vec![0.0, 1.0, 0.0];
        let y = conv1d_forward(&x, &w, &[0.0], 1, 1, 3);
        assert_eq!(y, x);
    }

    #[test]
    fn conv_box_kernel_keeps_constant_input_constant() {
        let x = Tensor::from_data(1, 1, 8, vec![2.0; 8]).unwrap();
        let w = vec![1.0 / 3.0; 3];
        let y = conv1d_forward(&x, &w, &[0.0], 1, 1, 3);
        // Interior points average three 2s; the zero-padded edges see two.
        for v in &y.channel(0, 0)[1..7] {
            assert!((v - 2.0).abs() < 1e-12);
        }
        assert!((y.channel(0, 0)[0] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn conv_kernel4_preserves_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(601);
        let x = rand_tensor(&mut rng, 1, 2, 15);
        let w: Vec<f64> = (0..3 * 2 * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = conv1d_forward(&x, &w, &[0.1, 0.2, 0.3], 2, 3, 4);
        assert_eq!(y.shape(), (1, 3, 15));
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(602);
        let (in_ch, out_ch, k, len) = (2usize, 3usize, 5usize, 12usize);
        let x = rand_tensor(&mut rng, 2, in_ch, len);
        let mut w: Vec<f64> = (0..out_ch * in_ch * k)
            .map(|_| rng.random_range(-0.5..0.5))
            .collect();
        let b: Vec<f64> = (0..out_ch).map(|_| rng.random_range(-0.5..0.5)).collect();
        // Scalar objective: sum of outputs weighted by fixed coefficients.
        let coef = rand_tensor(&mut rng, 2, out_ch, len);
        let objective = |x: &Tensor, w: &[f64], b: &[f64]| -> f64 {
            let y = conv1d_forward(x, w, b, in_ch, out_ch, k);
            y.data.iter().zip(&coef.data).map(|(a, c)| a * c).sum()
        };
        let (dx, dw, db) = conv1d_backward(&coef, &x, &w, in_ch, out_ch, k);
        let h = 1e-6;
        for t in 0..w.len() {
            let keep = w[t];
            w[t] = keep + h;
            let up = objective(&x, &w, &b);
            w[t] = keep - h;
            let dn = objective(&x, &w, &b);
            w[t] = keep;
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - dw[t]).abs() / fd.abs().max(1.0) < 1e-4, "w[{t}]");
        }
        let mut xv = x.clone();
        for i in (0..xv.data.len()).step_by(7) {
            let keep = xv.data[i];
            xv.data[i] = keep + h;
            let up = objective(&xv, &w, &b);
            xv.data[i] = keep - h;
            let dn = objective(&xv, &w, &b);
            xv.data[i] = keep;
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - dx.data[i]).abs() / fd.abs().max(1.0) < 1e-4, "x[{i}]");
        }
        let mut bv = b.clone();
        for t in 0..bv.len() {
            let keep = bv[t];
            bv[t] = keep + h;
            let up = objective(&x, &w, &bv);
            bv[t] = keep - h;
            let dn = objective(&x, &w, &bv);
            bv[t] = keep;
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - db[t]).abs() / fd.abs().max(1.0) < 1e-4, "b[{t}]");
        }
    }

    #[test]
    fn bn_normalizes_batch_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(603);
        let x = {
            let data = (0..8 * 2 * 200)
                .map(|_| 3.0 + 2.0 * rng.random_range(-1.0..1.0))
                .collect();
            Tensor::from_data(8, 2, 200, data).unwrap()
        };
        let mut rm = vec![0.0; 2];
        let mut rv = vec![1.0; 2];
        let (y, _) =
            bn_forward_train(&x, &[1.0, 1.0], &[0.0, 0.0], &mut rm, &mut rv, 0.1, 1e-5).unwrap();
        for c in 0..2 {
            let mut mean = 0.0;
            let mut var = 0.0;
            let n = (8 * 200) as f64;
            for bi in 0..8 {
                mean += y.channel(bi, c).iter().sum::<f64>();
            }
            mean /= n;
            for bi in 0..8 {
                for v in y.channel(bi, c) {
                    var += (v - mean) * (v - mean);
                }
            }
            var /= n;
            assert!(mean.abs() < 0.05, "{mean}");
            assert!((var - 1.0).abs() < 0.05, "{var}");
        }
    }

    #[test]
    fn bn_rejects_single_sample_training() {
        let x = Tensor::zeros(1, 1, 8);
        let mut rm = vec![0.0];
        let mut rv = vec![1.0];
        assert!(bn_forward_train(&x, &[1.0], &[0.0], &mut rm, &mut rv, 0.1, 1e-5).is_err());
    }

    #[test]
    fn bn_eval_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(604);
        let x = rand_tensor(&mut rng, 1, 2, 16);
        let a = bn_forward_eval(&x, &[1.5, 0.5], &[0.1, -0.2], &[0.3, 0.4], &[1.2, 0.8], 1e-5);
        let b = bn_forward_eval(&x, &[1.5, 0.5], &[0.1, -0.2], &[0.3, 0.4], &[1.2, 0.8], 1e-5);
        assert_eq!(a, b);
    }

    #[test]
    fn bn_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(605);
        let x = rand_tensor(&mut rng, 3, 2, 10);
        let gamma = vec![1.3, 0.7];
        let beta = vec![0.2, -0.1];
        let coef = rand_tensor(&mut rng, 3, 2, 10);
        let objective = |x: &Tensor, gamma: &[f64], beta: &[f64]| -> f64 {
            let mut rm = vec![0.0; 2];
            let mut rv = vec![1.0; 2];
            let (y, _) = bn_forward_train(x, gamma, beta, &mut rm, &mut rv, 0.1, 1e-5).unwrap();
            y.data.iter().zip(&coef.data).map(|(a, c)| a * c).sum()
        };
        let mut rm = vec![0.0; 2];
        let mut rv = vec![1.0; 2];
        let (_, cache) =
            bn_forward_train(&x, &gamma, &beta, &mut rm, &mut rv, 0.1, 1e-5).unwrap();
        let (dx, dgamma, dbeta) = bn_backward(&coef, &cache, &gamma);
        let h = 1e-6;
        let mut xv = x.clone();
        for i in (0..xv.data.len()).step_by(5) {
            let keep = xv.data[i];
            xv.data[i] = keep + h;
            let up = objective(&xv, &gamma, &beta);
            xv.data[i] = keep - h;
            let dn = objective(&xv, &gamma, &beta);
            xv.data[i] = keep;
            let fd = (up - dn) / (2.0 * h);
            let denom = fd.abs().max(dx.data[i].abs());
            if denom < 1e-6 {
                continue;
            }
            assert!((fd - dx.data[i]).abs() / denom < 1e-4, "x[{i}]: {fd} vs {}", dx.data[i]);
        }
        for c in 0..2 {
            let mut gv = gamma.clone();
            let keep = gv[c];
            gv[c] = keep + h;
            let up = objective(&x, &gv, &beta);
            gv[c] = keep - h;
            let dn = objective(&x, &gv, &beta);
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - dgamma[c]).abs() / fd.abs().max(1.0) < 1e-4, "gamma[{c}]");
            let mut bv = beta.clone();
            let keepb = bv[c];
            bv[c] = keepb + h;
            let upb = objective(&x, &gamma, &bv);
            bv[c] = keepb - h;
            let dnb = objective(&x, &gamma, &bv);
            let fdb = (upb - dnb) / (2.0 * h);
            assert!((fdb - dbeta[c]).abs() / fdb.abs().max(1.0) < 1e-4, "beta[{c}]");
        }
    }

    #[test]
    fn pool_examples_and_backward_routing() {
        let x = Tensor::from_data(1, 1, 4, vec![1.0, 3.0, 2.0, 2.0]).unwrap();
        let (y, argmax) = maxpool_forward(&x);
        assert_eq!(y.data, vec![3.0, 2.0]);
        // Tie in the second window goes to the lower index.
        assert_eq!(argmax, vec![1, 2]);
        let dy = Tensor::from_data(1, 1, 2, vec![10.0, 20.0]).unwrap();
        let dx = maxpool_backward(&dy, &argmax, 4);
        assert_eq!(dx.data, vec![0.0, 10.0, 20.0, 0.0]);
    }

    #[test]
    fn odd_length_pool_then_upsample_restores_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(606);
        let x = rand_tensor(&mut rng, 1, 1, 555);
        let (y, _) = maxpool_forward(&x);
        assert_eq!(y.len, 278);
        let up = upsample_forward(&y, 555);
        assert_eq!(up.len, 555);
        assert_eq!(up.channel(0, 0)[554], y.channel(0, 0)[277]);
    }

    #[test]
    fn upsample_backward_sums_grads() {
        let x = Tensor::from_data(1, 1, 2, vec![5.0, 6.0]).unwrap();
        let y = upsample_forward(&x, 3);
        assert_eq!(y.data, vec![5.0, 5.0, 6.0]);
        let dy = Tensor::from_data(1, 1, 3, vec![1.0, 2.0, 4.0]).unwrap();
        let dx = upsample_backward(&dy, 2);
        assert_eq!(dx.data, vec![3.0, 4.0]);
    }

    #[test]
    fn dropout_scales_survivors() {
        let mut rng = ChaCha8Rng::seed_from_u64(607);
        let x = Tensor::from_data(1, 1, 10_000, vec![1.0; 10_000]).unwrap();
        let (y, mask) = dropout_forward(&x, 0.25, &mut rng);
        let kept = y.data.iter().filter(|v| **v != 0.0).count();
        assert!((kept as f64 / 10_000.0 - 0.75).abs() < 0.02);
        for (v, m) in y.data.iter().zip(&mask) {
            assert_eq!(v, m);
        }
        // Expectation preserved by the inverse-keep scaling.
        let mean = y.data.iter().sum::<f64>() / 10_000.0;
        assert!((mean - 1.0).abs() < 0.03, "{mean}");
    }

    #[test]
    fn droppath_gates_whole_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(608);
        let x = Tensor::from_data(64, 1, 4, vec![1.0; 256]).unwrap();
        let (y, gates) = droppath_forward(&x, 0.5, &mut rng);
        assert_eq!(gates.len(), 64);
        for bi in 0..64 {
            let row = y.channel(bi, 0);
            if gates[bi] == 0.0 {
                assert!(row.iter().all(|v| *v == 0.0));
            } else {
                assert!(row.iter().all(|v| (*v - 2.0).abs() < 1e-12));
            }
        }
        let zeroed = gates.iter().filter(|g| **g == 0.0).count();
        assert!(zeroed > 16 && zeroed < 48, "{zeroed}");
    }
}
