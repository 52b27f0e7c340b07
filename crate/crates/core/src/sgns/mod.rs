//! Skip-gram with negative sampling.

mod config;
mod sampling;
mod train;

pub use config::TrainConfig;
pub use sampling::{subsample_keep_prob, NegativeTable, NOISE_EXPONENT};
pub use train::{
    negative_sampling_gradients, negative_sampling_loss, train, train_ids, PairGradients,
    TrainReport, Trained,
};
