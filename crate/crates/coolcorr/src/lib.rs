//! Thermodynamic cooling and correlating of finite-dimensional quantum systems.
//!
//! Layers, bottom to top:
//! - [`spectra`]: Hamiltonians, Gibbs states, temperatures, entropies.
//! - [`quantum`]: dense joint states, partial traces, unitaries.
//! - [`majorization`]: majorization, T-transforms, Horn and Birkhoff constructions.
//! - [`lp`]: a small simplex solver with Farkas certificates.
//! - [`coherent`]: cooling with energy-conserving and arbitrary unitaries plus work.
//! - [`incoherent`]: cooling driven by a hot bath with energy-conserving unitaries.
//! - [`correlations`]: building correlations between thermal systems.
//! - [`cli`]: configuration parsing and the command line tool.

pub mod cli;
pub mod coherent;
pub mod correlations;
pub mod error;
pub mod incoherent;
pub mod lp;
pub mod majorization;
pub mod quantum;
pub mod spectra;

pub use error::{CoolError, Result};
