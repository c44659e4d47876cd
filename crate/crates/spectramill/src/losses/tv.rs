//! Total-variation penalties used inside the baseline composite loss.
//!
//! TV1 is the absolute first difference; TV2 is the square root of the
//! absolute second difference, which punishes curvature while tolerating
//! isolated bends. The TV2 value uses the exact sqrt; its gradient uses an
//! epsilon-smoothed denominator so the slope stays finite at zero curvature.

/// Smoothing constant in the TV2 gradient denominator.
pub const TV2_EPS: f64 = 1e-8;

pub(super) fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// alpha * sum |y[i+1] - y[i]|.
pub fn tv1(y: &[f64], alpha: f64) -> f64 {
    let mut acc = 0.0;
    for w in y.windows(2) {
        acc += (w[1] - w[0]).abs();
    }
    alpha * acc
}

/// TV1 with its subgradient (sign(0) taken as 0).
pub fn tv1_grad(y: &[f64], alpha: f64) -> (f64, Vec<f64>) {
    let mut acc = 0.0;
    let mut grad = vec![0.0; y.len()];
    for i in 0..y.len().saturating_sub(1) {
        let d = y[i + 1] - y[i];
        acc += d.abs();
        let s = alpha * sgn(d);
        grad[i + 1] += s;
        grad[i] -= s;
    }
    (alpha * acc, grad)
}

/// beta * sum sqrt(|y[i+2] - 2*y[i+1] + y[i]|).
pub fn tv2(y: &[f64], beta: f64) -> f64 {
    let mut acc = 0.0;
    for w in y.windows(3) {
        acc += (w[2] - 2.0 * w[1] + w[0]).abs().sqrt();
    }
    beta * acc
}

/// TV2 with the smoothed gradient d/du sqrt(|u|) ~= sign(u) / (2*sqrt(|u| + eps)).
pub fn tv2_grad(y: &[f64], beta: f64) -> (f64, Vec<f64>) {
    let mut acc = 0.0;
    let mut grad = vec![0.0; y.len()];
    for i in 0..y.len().saturating_sub(2) {
        let u = y[i + 2] - 2.0 * y[i + 1] + y[i];
        acc += u.abs().sqrt();
        let ds = beta * sgn(u) / (2.0 * (u.abs() + TV2_EPS).sqrt());
        grad[i] += ds;
        grad[i + 1] -= 2.0 * ds;
        grad[i + 2] += ds;
    }
    (beta * acc, grad)
}
