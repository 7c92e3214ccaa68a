//! Closed-loop simulation, flight control and cycle optimization for a
//! pumping-cycle tethered kite.

pub mod error;
pub mod flight_control;
pub mod guidance;
pub mod harness;
pub mod model;
pub mod numfmt;
pub mod optimizer;
pub mod parallel;
pub mod winch;

pub use error::{KiteError, Result};
