//! Multilabel ensembles of GRU and temporal-convolutional networks trained
//! with Adam-family optimizers, cluster-center augmentation, and the ten
//! standard multilabel indicators.

pub mod ensemble;
pub mod error;
pub mod harness;
pub mod layers;
pub mod metrics;
pub mod numerics;
pub mod optim;
pub mod pipeline;

pub use error::{Error, Result};
