//! Continuous unravelings of the Lindblad master equation: a stochastic
//! Schrodinger equation engine with tunable noise correlation, a density-matrix
//! reference integrator, model systems and ensemble statistics.

pub mod ensemble;
pub mod error;
pub mod hilbert;
pub mod master;
pub mod models;
pub mod noise;
pub mod runner;
pub mod sde;

pub use error::{Error, Result};
pub use hilbert::{Operator, StateVector, C64};
pub use noise::{CorrelationFactor, RngStream};
pub use sde::{ChannelSet, CorrelationPolicy, LindbladChannel, SdeConfig};
