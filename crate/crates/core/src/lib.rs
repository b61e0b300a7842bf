//! Quantum state transfer from a superconducting qubit to a Rydberg atom
//! through a shared microwave resonator.
//!
//! The numerical core is generic over the real scalar (`f32` or `f64`);
//! the aliases below fix it to `f64`, which is what the experiments use.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod evolve;
pub mod experiments;
pub mod hilbert;
pub mod metrics;
pub mod model;
pub mod scalar;

pub use error::{Error, Result};
pub use hilbert::BlochAngle;
pub use scalar::Real;

pub type Complex = scalar::C<f64>;
pub type Operator = hilbert::CompositeOperator<f64>;
pub type Density = hilbert::DensityMatrix<f64>;
pub type Params = model::ModelParams<f64>;
pub type Schedule = model::ProtocolSchedule<f64>;
pub type Trajectory = evolve::TrajectoryRecord<f64>;
pub type Config = evolve::IntegratorConfig<f64>;
