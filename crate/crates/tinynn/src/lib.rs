//! A deliberately small neural-network substrate.
//!
//! Layers are described by name prefixes and read their weights from a shared
//! [`ParamStore`]; every forward pass has an explicit backward pass that
//! accumulates into a [`Grads`] map. There is no tape: callers chain the
//! backward functions in reverse order themselves.

pub mod attention;
mod error;
pub mod gradcheck;
pub mod ops;
pub mod params;
pub mod rnn;
mod tensor;

pub use attention::{AttentionBlock, AttentionCache};
pub use error::NnError;
pub use ops::{dense, dense_backward, softmax, softmax_backward, Activation};
pub use params::{AdamConfig, Grads, ParamStore};
pub use rnn::{RnnCell, RnnStepCache};
pub use tensor::Tensor2;
