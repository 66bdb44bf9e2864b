//! Free-boundary West Nile virus model with almost-periodic, spatially
//! heterogeneous rates: front-fixing implicit solver, principal Lyapunov
//! exponents, spreading/vanishing thresholds and verification harnesses.

pub mod coefficients;
pub mod config;
pub mod error;
pub mod lyapunov;
pub mod model;
pub mod output;
pub mod plot;
pub mod report;
pub mod reproduce;
pub mod solver;
pub mod thresholds;
pub mod transform;
mod tridiag;
pub mod verify;

pub use coefficients::{CoefficientField, ConstantMatrix, LinearizationMatrix, MatrixField, SpatialProfile, TemporalHarmonic};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use lyapunov::{lyapunov_constant_oracle, lyapunov_exponent, EstimatorConfig, LyapunovEstimate};
pub use model::{default_paper_spec, InitialData, ModelSpec};
pub use report::{Check, Report};
pub use solver::{simulate, FrontState, RunStatus, SolverConfig, Trajectory};
pub use thresholds::{classify, Classification, ClassifyConfig, Verdict};
pub use transform::FrontGeometry;
