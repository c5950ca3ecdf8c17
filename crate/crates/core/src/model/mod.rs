//! Convolutional encoder, coefficient decoder and training loop.

mod config;
pub mod loss;
pub mod network;
mod params;
pub mod train;

pub use config::{loss_kind_from_name, loss_kind_name, EncoderConfig, TrainConfig};
pub use flowembed_tensor::FieldLossKind;
pub use network::{decode, encode, encode_batch, predict_coefficients, reconstruct, reconstruct_batch};
pub use params::{parameter_layout, ModelParams};
pub use train::{finetune_decoder, train, EpochRecord, TrainState};
