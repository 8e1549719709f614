//! Adversarial emotion classifier over semantic interactive orders.
//!
//! The [`net::Generator`] maps an SIO sequence to an emotion distribution and
//! a duration/dispersion estimate. The [`net::Discriminator`] scores
//! (sequence, distribution) pairs as real or generated and carries two
//! supervised branches: one over object patches, one over the raw scanpath,
//! whose decoder reconstructs the fixation coordinates.

mod error;
pub mod losses;
pub mod mi;
pub mod net;
pub mod report;
pub mod target;
pub mod train;

pub use error::{LossError, ModelError};
pub use net::{Discriminator, Generator, ModelConfig};
pub use report::{compose_losses, LossComponents, LossReport, LossWeights};
pub use target::AuxRegTarget;
pub use train::{train, train_with, EpochLog, ModelState, TrainConfig, TrainOutcome};
