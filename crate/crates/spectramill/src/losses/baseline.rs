//! Composite objective for the baseline remover: regionally weighted MSE
//! plus the two total-variation penalties, with the smoothing penalties
//! suspended around baseline-shift discontinuities.

use super::tv::{sgn, TV2_EPS};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineLossParams {
    /// TV1 weight; swept over [0.5, 50] historically.
    pub tv1_alpha: f64,
    /// TV2 weight; swept over [5e-4, 7.5e-3].
    pub tv2_beta: f64,
    /// MSE multiplier applied to the whole spectrum for narrow-peak
    /// (Raman-like) samples.
    pub raman_mse_factor: f64,
    /// MSE multiplier inside widened shift windows; overrides the
    /// Raman factor there.
    pub shift_mse_factor: f64,
    /// Shift windows are widened by this many points on each side.
    pub shift_halfwidth: usize,
}

impl Default for BaselineLossParams {
    fn default() -> Self {
        BaselineLossParams {
            tv1_alpha: 5.0,
            tv2_beta: 2e-3,
            raman_mse_factor: 30.0,
            shift_mse_factor: 6.0,
            shift_halfwidth: 3,
        }
    }
}

/// Per-point mask: true where the point falls inside a shift window widened
/// by `halfwidth` on each side. Windows are inclusive index ranges.
fn shift_mask(len: usize, windows: &[(usize, usize)], halfwidth: usize) -> Vec<bool> {
    let mut mask = vec![false; len];
    for &(s, e) in windows {
        let lo = s.saturating_sub(halfwidth);
        let hi = (e + halfwidth).min(len.saturating_sub(1));
        for m in mask.iter_mut().take(hi + 1).skip(lo) {
            *m = true;
        }
    }
    mask
}

pub fn baseline_composite_loss(
    pred: &[f64],
    truth: &[f64],
    raman_like: bool,
    shift_windows: &[(usize, usize)],
    p: &BaselineLossParams,
) -> f64 {
    eval(pred, truth, raman_like, shift_windows, p, false).0
}

pub fn baseline_composite_loss_grad(
    pred: &[f64],
    truth: &[f64],
    raman_like: bool,
    shift_windows: &[(usize, usize)],
    p: &BaselineLossParams,
) -> (f64, Vec<f64>) {
    let (v, g) = eval(pred, truth, raman_like, shift_windows, p, true);
    (v, g.unwrap())
}

fn eval(
    pred: &[f64],
    truth: &[f64],
    raman_like: bool,
    shift_windows: &[(usize, usize)],
    p: &BaselineLossParams,
    want_grad: bool,
) -> (f64, Option<Vec<f64>>) {
    let n = pred.len();
    let mask = shift_mask(n, shift_windows, p.shift_halfwidth);
    let base_w = if raman_like { p.raman_mse_factor } else { 1.0 };
    let inv_n = 1.0 / n as f64;
    let mut grad = if want_grad { Some(vec![0.0; n]) } else { None };

    let mut mse = 0.0;
    for i in 0..n {
        let w = if mask[i] { p.shift_mse_factor } else { base_w };
        let e = pred[i] - truth[i];
        mse += w * e * e;
        if let Some(g) = grad.as_mut() {
            g[i] += 2.0 * w * e * inv_n;
        }
    }
    mse *= inv_n;

    // Smoothness terms skip any stencil touching a widened shift window.
    let mut tv = 0.0;
    for i in 0..n.saturating_sub(1) {
        if mask[i] || mask[i + 1] {
            continue;
        }
        let d = pred[i + 1] - pred[i];
        tv += p.tv1_alpha * d.abs();
        if let Some(g) = grad.as_mut() {
            let s = p.tv1_alpha * sgn(d);
            g[i + 1] += s;
            g[i] -= s;
        }
    }
    for i in 0..n.saturating_sub(2) {
        if mask[i] || mask[i + 1] || mask[i + 2] {
            continue;
        }
        let u = pred[i + 2] - 2.0 * pred[i + 1] + pred[i];
        tv += p.tv2_beta * u.abs().sqrt();
        if let Some(g) = grad.as_mut() {
            let ds = p.tv2_beta * sgn(u) / (2.0 * (u.abs() + TV2_EPS).sqrt());
            g[i] += ds;
            g[i + 1] -= 2.0 * ds;
            g[i + 2] += ds;
        }
    }

    (mse + tv, grad)
}
