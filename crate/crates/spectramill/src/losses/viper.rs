//! Vicinity peak response loss for the peak locator.
//!
//! Three summed components over the score vector Y_P against the binary
//! indicator Y_T, with d(i) the index distance from point i to the nearest
//! true peak center and v the vicinity radius:
//!
//!   F_p = alpha * sum_{d > v}  Y_P(i) * (d(i) - v)^2     spurious response
//!   P_V = beta  * sum_{all i} (Y_P(i) - Y_T(i))^2        vertical error
//!   P_L = gamma * sum_{d <= v} (Y_P(i) - 1)^2 * (1 - d(i)/v)^2
//!
//! The components are sums, not means. With Y_P equal to the indicator and
//! v <= 1 the loss is exactly zero.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Linear schedule shrinking the vicinity radius over early training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViperAnneal {
    pub v_start: f64,
    pub v_end: f64,
    /// Fraction of total epochs over which v moves from start to end;
    /// v stays at `v_end` afterwards.
    pub frac: f64,
}

impl Default for ViperAnneal {
    fn default() -> Self {
        ViperAnneal { v_start: 8.0, v_end: 2.0, frac: 0.6 }
    }
}

impl ViperAnneal {
    pub fn v_at(&self, epoch: usize, total_epochs: usize) -> f64 {
        let span = self.frac * total_epochs as f64;
        if span <= 0.0 {
            return self.v_end;
        }
        let t = (epoch as f64 / span).min(1.0);
        self.v_start + (self.v_end - self.v_start) * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViperParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Current vicinity radius in index units, > 0.
    pub v: f64,
    pub anneal: ViperAnneal,
}

impl Default for ViperParams {
    fn default() -> Self {
        let anneal = ViperAnneal::default();
        ViperParams { alpha: 1.0, beta: 1.0, gamma: 1.0, v: anneal.v_start, anneal }
    }
}

impl ViperParams {
    /// Copy of the params with v set from the anneal schedule.
    pub fn at_epoch(&self, epoch: usize, total_epochs: usize) -> Self {
        ViperParams { v: self.anneal.v_at(epoch, total_epochs), ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViperBreakdown {
    pub f_p: f64,
    pub p_v: f64,
    pub p_l: f64,
}

impl ViperBreakdown {
    pub fn total(&self) -> f64 {
        self.f_p + self.p_v + self.p_l
    }
}

/// Index distance to the nearest set index, for every position.
/// Two sweeps; O(L).
fn nearest_distance(y_t: &[f64]) -> Result<Vec<f64>> {
    let n = y_t.len();
    let big = n as f64 + 1.0;
    let mut d = vec![big; n];
    let mut any = false;
    let mut last = f64::NEG_INFINITY;
    for i in 0..n {
        if y_t[i] > 0.5 {
            last = i as f64;
            any = true;
        }
        d[i] = i as f64 - last;
    }
    if !any {
        return Err(Error::Degenerate(
            "vicinity loss needs at least one true peak".into(),
        ));
    }
    let mut next = f64::INFINITY;
    for i in (0..n).rev() {
        if y_t[i] > 0.5 {
            next = i as f64;
        }
        d[i] = d[i].min(next - i as f64);
    }
    Ok(d)
}

pub fn viper_components(y_p: &[f64], y_t: &[f64], p: &ViperParams) -> Result<ViperBreakdown> {
    let (bd, _) = eval(y_p, y_t, p, false)?;
    Ok(bd)
}

pub fn viper_loss(y_p: &[f64], y_t: &[f64], p: &ViperParams) -> Result<f64> {
    Ok(viper_components(y_p, y_t, p)?.total())
}

pub fn viper_loss_grad(y_p: &[f64], y_t: &[f64], p: &ViperParams) -> Result<(f64, Vec<f64>)> {
    let (bd, grad) = eval(y_p, y_t, p, true)?;
    Ok((bd.total(), grad.unwrap()))
}

fn eval(
    y_p: &[f64],
    y_t: &[f64],
    p: &ViperParams,
    want_grad: bool,
) -> Result<(ViperBreakdown, Option<Vec<f64>>)> {
    if y_p.len() != y_t.len() {
        return Err(Error::Shape {
            expected: format!("prediction length {}", y_t.len()),
            got: format!("{}", y_p.len()),
        });
    }
    if !(p.v > 0.0) {
        return Err(Error::Config(format!("vicinity radius must be > 0, got {}", p.v)));
    }
    let d = nearest_distance(y_t)?;
    let mut bd = ViperBreakdown { f_p: 0.0, p_v: 0.0, p_l: 0.0 };
    let mut grad = if want_grad { Some(vec![0.0; y_p.len()]) } else { None };
    for i in 0..y_p.len() {
        let dv = y_p[i] - y_t[i];
        bd.p_v += p.beta * dv * dv;
        let mut gi = 2.0 * p.beta * dv;
        if d[i] > p.v {
            let excess = d[i] - p.v;
            bd.f_p += p.alpha * y_p[i] * excess * excess;
            gi += p.alpha * excess * excess;
        } else {
            let near = 1.0 - d[i] / p.v;
            let low = y_p[i] - 1.0;
            bd.p_l += p.gamma * low * low * near * near;
            gi += 2.0 * p.gamma * low * near * near;
        }
        if let Some(g) = grad.as_mut() {
            g[i] = gi;
        }
    }
    Ok((bd, grad))
}
