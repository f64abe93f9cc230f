//! Cooperative steering-angle regression: a time-distributed CNN feeding a
//! stacked LSTM and a dense head, trained on an ego vehicle's recent frames
//! together with frames shared by a vehicle driving ahead.

pub mod autograd;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod harness;
pub mod models;
pub mod nn;
pub mod optim;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
