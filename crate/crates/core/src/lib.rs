//! Continuous-time Blahut-Arimoto flow `dq/dt = T(q) - q` on finite simplices:
//! the operator itself, an RK4 integrator with dissipation diagnostics,
//! equilibrium spectra, the exact Gaussian reduction, solvable finite models
//! and the MIMO / Wyner-Ziv gap formulas.
//!
//! All information quantities are in nats.

pub mod ba;
pub mod error;
pub mod extensions;
pub mod flow;
pub mod gaussian;
pub mod models;
pub mod samples;
pub mod simplex;
pub mod spectral;
pub mod table;
pub mod verify;

pub use ba::{BaProblem, GibbsState};
pub use error::{Error, Result};
pub use flow::{ba_fixed_point, integrate_flow, IntegratorConfig, Method, Trajectory};
pub use simplex::{divergence, fr_inner, project_tangent, DivergenceKind, ProbVec, TangentVec};
pub use spectral::{gram_kernel, jacobian_spectrum, tangent_spectrum, GramKernel, SpectrumReport};
pub use table::Table;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
