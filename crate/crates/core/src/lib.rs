//! Coverage probability of RIS-assisted links in a square indoor THz room.
//!
//! The analytic pipeline tabulates the link-distance laws
//! ([`distributions`]), averages the blockage model over them ([`blockage`])
//! and composes direct and reflected coverage ([`coverage`]). The
//! [`montecarlo`] simulator checks every analytic quantity at event level,
//! and [`experiments`] runs the parameter sweeps behind the CLI.

pub mod blockage;
pub mod cli;
pub mod config;
pub mod coverage;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod montecarlo;
pub mod numerics;

pub use error::{Error, Result};

/// Engine version echoed in every JSON output.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
