//! Deterministic numerical primitives shared by every metric.

mod auc;
mod mi;
mod mlp;
mod split;
mod stats;

pub use auc::{auc_roc, auc_roc_ova};
pub use mi::{entropy, histogram_mi};
pub use mlp::{
    loss_and_grad, mlp_train, Adam, Dense, Gradients, Loss, Mlp, MlpSpec, OutputActivation,
    Trace, TrainConfig, TrainHistory,
};
pub use split::{split, SplitSpec};
pub use stats::{
    mean, pearson, percentile_nearest_rank, spearman, std_dev, trapezoid, welch_t_test,
};
