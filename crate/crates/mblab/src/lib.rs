//! Pseudospectral laboratory for a coupled pair of KdV equations on the
//! torus with asymmetric dispersion,
//!
//! ```text
//!     u_t + u_xxx           + v v_x   = 0
//!     v_t + alpha v_xxx + (u v)_x     = 0,        x in [0, 2*pi),
//! ```
//!
//! optionally damped (`+ gamma u`, `+ delta v`) and forced. The crate provides
//! the spectral discretization, the resonance arithmetic of the dispersion
//! relation `omega(k) = k^3` vs `alpha k^3`, normal-form (differentiation by
//! parts) operators with their integrated-identity checks, a deterministic
//! integrating-factor RK4 evolver, and the experiment drivers exposed by the
//! `mblab` binary.

pub mod cli;
pub mod config;
pub mod diophantine;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod normal_form;
pub mod record;
pub mod spectral;

pub use error::{Error, Result};
