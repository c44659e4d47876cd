//! Error-adaptive objective for peak parameter retrieval.
//!
//! Apex points carry a 5x weight and switch the error power as the
//! prediction converges: squared error while the relative error is loose,
//! cubic magnitude once it is within 6% of truth, quartic within 3%. The
//! higher powers hand out progressively milder gradients near convergence,
//! which keeps the fine-tuning phase from oscillating. Non-apex points use
//! plain squared error and the result is the mean over all points.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakFitLossParams {
    pub apex_weight: f64,
    /// Relative-error gate for the cubic term: active once r <= 1 - t_mce.
    pub t_mce: f64,
    /// Stricter gate for the quartic term: active once r <= 1 - t_mqe.
    pub t_mqe: f64,
}

impl Default for PeakFitLossParams {
    fn default() -> Self {
        PeakFitLossParams { apex_weight: 5.0, t_mce: 0.94, t_mqe: 0.97 }
    }
}

impl PeakFitLossParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.70..=0.98).contains(&self.t_mce) || !(0.90..=0.99).contains(&self.t_mqe) {
            return Err(Error::Config(format!(
                "thresholds out of range: t_mce={}, t_mqe={}",
                self.t_mce, self.t_mqe
            )));
        }
        if self.t_mqe <= self.t_mce {
            return Err(Error::Config(format!(
                "t_mqe ({}) must exceed t_mce ({})",
                self.t_mqe, self.t_mce
            )));
        }
        Ok(())
    }
}

pub fn dynamic_peakfit_loss(
    pred: &[f64],
    truth: &[f64],
    apex_mask: &[bool],
    p: &PeakFitLossParams,
) -> Result<f64> {
    Ok(eval(pred, truth, apex_mask, p, false)?.0)
}

pub fn dynamic_peakfit_loss_grad(
    pred: &[f64],
    truth: &[f64],
    apex_mask: &[bool],
    p: &PeakFitLossParams,
) -> Result<(f64, Vec<f64>)> {
    let (v, g) = eval(pred, truth, apex_mask, p, true)?;
    Ok((v, g.unwrap()))
}

fn eval(
    pred: &[f64],
    truth: &[f64],
    apex_mask: &[bool],
    p: &PeakFitLossParams,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    let n = pred.len();
    if truth.len() != n || apex_mask.len() != n {
        return Err(Error::Shape {
            expected: format!("three arrays of length {n}"),
            got: format!("truth {}, mask {}", truth.len(), apex_mask.len()),
        });
    }
    let mce_gate = 1.0 - p.t_mce;
    let mqe_gate = 1.0 - p.t_mqe;
    let inv_n = 1.0 / n as f64;
    let mut acc = 0.0;
    let mut grad = if want_grad { Some(vec![0.0; n]) } else { None };
    for i in 0..n {
        let e = pred[i] - truth[i];
        let (term, slope) = if !apex_mask[i] {
            (e * e, 2.0 * e)
        } else {
            if truth[i] <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "apex at index {i} has non-positive truth {}",
                    truth[i]
                )));
            }
            let r = e.abs() / truth[i];
            let w = p.apex_weight;
            if r > mce_gate {
                (w * e * e, w * 2.0 * e)
            } else if r > mqe_gate {
                // Cubic magnitude: |e|^3, slope 3*e*|e|.
                (w * e.abs().powi(3), w * 3.0 * e * e.abs())
            } else {
                (w * e.powi(4), w * 4.0 * e.powi(3))
            }
        };
        acc += term;
        if let Some(g) = grad.as_mut() {
            g[i] = slope * inv_n;
        }
    }
    Ok((acc * inv_n, grad))
}
