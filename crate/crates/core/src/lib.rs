pub mod autodiff;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod network;
pub mod observation;
pub mod physics;
pub mod qmc;
pub mod training;
pub mod vwerp;
pub mod windkessel;

pub use error::{Error, ErrorKind, Result};
