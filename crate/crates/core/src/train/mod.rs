//! Gradient-based training of decoder weights.

pub mod adam;
pub mod backward;
pub mod loss;

pub use adam::{AdamConfig, AdamState};
pub use backward::{trainable_mask, Backward, GradientBuffer, TrainTarget};
pub use loss::{fer_loss_hard, fer_loss_hard_mean, fer_loss_soft, logistic, LossConfig, LossKind, SoftLoss};
