//! Elementwise activations with analytic derivatives.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    LeakyRelu,
    Gelu,
    Swish,
    Mish,
    Isrlu,
    Sigmoid,
}

const LEAKY_SLOPE: f64 = 0.01;
const ISRLU_ALPHA: f64 = 1.0;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable ln(1 + e^x).
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu => {
                if x >= 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            Activation::Gelu => {
                // tanh form of the Gaussian error linear unit
                let c = (2.0 / std::f64::consts::PI).sqrt();
                let u = c * (x + 0.044715 * x * x * x);
                0.5 * x * (1.0 + u.tanh())
            }
            Activation::Swish => x * sigmoid(x),
            Activation::Mish => x * softplus(x).tanh(),
            Activation::Isrlu => {
                if x >= 0.0 {
                    x
                } else {
                    x / (1.0 + ISRLU_ALPHA * x * x).sqrt()
                }
            }
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// d apply / dx at x.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Gelu => {
                let c = (2.0 / std::f64::consts::PI).sqrt();
                let u = c * (x + 0.044715 * x * x * x);
                let t = u.tanh();
                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x)
            }
            Activation::Swish => {
                let s = sigmoid(x);
                s + x * s * (1.0 - s)
            }
            Activation::Mish => {
                let t = softplus(x).tanh();
                t + x * (1.0 - t * t) * sigmoid(x)
            }
            Activation::Isrlu => {
                if x >= 0.0 {
                    1.0
                } else {
                    (1.0 + ISRLU_ALPHA * x * x).powf(-1.5)
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ALL: [Activation; 7] = [
        Activation::Relu,
        Activation::LeakyRelu,
        Activation::Gelu,
        Activation::Swish,
        Activation::Mish,
        Activation::Isrlu,
        Activation::Sigmoid,
    ];

    #[test]
    fn zero_fixed_points() {
        for a in [Activation::Relu, Activation::Gelu, Activation::Swish, Activation::Mish] {
            assert_eq!(a.apply(0.0), 0.0, "{a:?}");
        }
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        assert_eq!(Activation::Relu.apply(-1.0), 0.0);
        assert_eq!(Activation::Relu.apply(2.0), 2.0);
        assert_eq!(Activation::Isrlu.apply(3.0), 3.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(500);
        let h = 1e-5;
        for a in ALL {
            let mut checked = 0;
            while checked < 100 {
                let x: f64 = rng.random_range(-4.0..4.0);
                // Stay away from the kink at 0 for the piecewise ones.
                if x.abs() < 10.0 * h {
                    continue;
                }
                let fd = (a.apply(x + h) - a.apply(x - h)) / (2.0 * h);
                let an = a.derivative(x);
                let denom = fd.abs().max(an.abs());
                if denom < 1e-6 {
                    checked += 1;
                    continue;
                }
                assert!(
                    (fd - an).abs() / denom < 1e-4,
                    "{a:?} at {x}: fd {fd} vs {an}"
                );
                checked += 1;
            }
        }
    }

    #[test]
    fn large_inputs_stay_finite() {
        for a in ALL {
            for x in [-500.0, 500.0] {
                assert!(a.apply(x).is_finite(), "{a:?}({x})");
                assert!(a.derivative(x).is_finite(), "{a:?}'({x})");
            }
        }
    }
}
