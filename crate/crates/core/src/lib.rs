//! Inertial corrected primal-dual proximal splitting, Nesterov's accelerated
//! gradient, their continuous-time models, and numerical checks of the
//! associated descent certificates and Lyapunov functions.

pub mod certificate;
pub mod error;
pub mod harness;
pub mod lyapunov;
pub mod ode;
pub mod params;
pub mod saddle;
pub mod solvers;

pub use error::{Error, Result};
