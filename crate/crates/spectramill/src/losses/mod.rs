//! Training objectives for all four models.
//!
//! Each loss comes in two forms: a plain evaluation returning the scalar,
//! and a `_grad` variant returning the scalar together with the gradient
//! with respect to the predictions. The gradient forms are what the trainer
//! consumes; the scalar forms keep tests and reporting cheap.

mod baseline;
mod classic;
mod peakfit;
mod tv;
mod viper;
mod weighted;

pub use baseline::{baseline_composite_loss, baseline_composite_loss_grad, BaselineLossParams};
pub use classic::{cross_entropy, cross_entropy_grad, mse, mse_grad, CE_EPS};
pub use peakfit::{dynamic_peakfit_loss, dynamic_peakfit_loss_grad, PeakFitLossParams};
pub use tv::{tv1, tv1_grad, tv2, tv2_grad, TV2_EPS};
pub use viper::{
    viper_components, viper_loss, viper_loss_grad, ViperAnneal, ViperBreakdown, ViperParams,
};
pub use weighted::{weighted_mse, weighted_mse_grad, WeightedMseSchedule};
