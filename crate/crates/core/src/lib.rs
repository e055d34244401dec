//! Bagged multilayer perceptrons trained on ranked set samples (RSS) or
//! simple random samples (SRS), a lab for the mean and variance of the
//! empirical convex risk under both designs, and the statistics used to
//! compare them.

pub mod cli;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod losses;
pub mod mlp;
pub mod numerics;
pub mod sampling;
pub mod synthetic;
pub mod variance_lab;

pub use data::{Dataset, LabelColumn, Standardizer};
pub use ensemble::{train_ensemble, EnsembleConfig, EnsembleModel, FusionRule};
pub use error::{Error, Result};
pub use losses::LossKind;
pub use mlp::{MlpConfig, MlpModel};
pub use numerics::{Matrix, RngStream};
pub use sampling::{SamplerConfig, SamplerKind, SetSize};
