//! Poissonian occupation times and Parisian ruin for spectrally negative Lévy
//! risk processes.
//!
//! The crate has an analytic side and a simulation side:
//!
//! - [`model`], [`scale`], [`occupation`] and [`parisian`] evaluate the
//!   fluctuation identities in closed form for Brownian and Cramér–Lundberg
//!   (exponential claims) risk processes;
//! - [`mc`] simulates the defining path functionals directly and serves as an
//!   independent oracle;
//! - [`identity`] exposes every identity under a stable name together with its
//!   Monte Carlo counterpart, which is what the command-line front end drives.

pub mod error;
pub mod identity;
pub mod mc;
pub mod model;
pub mod occupation;
pub mod parisian;
pub mod quad;
pub mod scale;

pub use error::{Error, Result};
pub use model::{LevyModel, TransitionDensity};
pub use scale::ScaleContext;
