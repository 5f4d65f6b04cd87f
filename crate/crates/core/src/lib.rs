//! Design and metrology numerics for micro-fabricated Fabry-Perot cavity mirrors.
//!
//! - [`optics`]: Gaussian beams, resonator stability and mode waists.
//! - [`qed`]: finesse, loss budgets, cooperativity, strong coupling and the
//!   cavity summary table with uncertainty propagation.
//! - [`reflow`]: equilibrium shape of a glass membrane drawn into a sealed
//!   blind hole, inverse design, and the furnace program.
//! - [`metrology`]: profilometer line scans, circle and polynomial fits,
//!   roughness and residual periodograms.
//! - [`instrument`]: simulation and inversion of the sideband-calibrated
//!   linewidth scan and the retro-reflection curvature scan.
//! - [`config`] and [`report`]: the key-value configuration format and the
//!   report writers used by the command-line tool.
//!
//! All quantities are SI internally. Unit conversion happens only at the
//! configuration and CSV boundaries.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
mod io;
pub mod instrument;
pub mod metrology;
pub mod optics;
pub mod qed;
pub mod reflow;
pub mod report;
pub mod solve;
pub mod units;

pub use error::{Error, Result};
