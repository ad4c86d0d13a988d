//! Exact finite-dimensional mixture filters for discretely sampled
//! diffusions.
//!
//! The hidden signal is a Markov chain (an AR(1), a radial Ornstein-Uhlenbeck
//! sampling, or its squared Cox-Ingersoll-Ross counterpart) observed through
//! a channel that keeps a mixture class conjugate: the exact filter, the
//! prediction filter and the exact likelihood are all computable in closed
//! form with finitely many components. Grid-quadrature and particle-filter
//! oracles validate every formula independently.

pub mod cir;
pub mod engine;
pub mod error;
pub mod kalman;
pub mod mixtures;
pub mod oracle;
pub mod radial_ou;
pub mod simulate;

pub use cir::{ChannelKind, CirModel};
pub use engine::{log_likelihood, predict, run_filter, update, ConjugateFamily, FilterStep, FilterTrace};
pub use error::{Error, Result};
pub use kalman::KalmanModel;
pub use mixtures::{
    Family, KalmanTheta, MixtureDistribution, ScaleTheta, StateDistribution, Theta, WeightVector,
};
pub use radial_ou::RadialOuModel;
pub use simulate::{InitSpec, SimConfig, SimulatedPath};
