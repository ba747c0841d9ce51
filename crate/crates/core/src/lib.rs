//! Optimal settlement allocations between a buyer and a near-insolvent
//! defaulting supplier, and a time-stepped model of how offers evolve while
//! each party reassesses its constraints during mediation.

pub mod engine;
pub mod error;
pub mod io;
pub mod model;
pub mod optimizer;
pub mod presets;
pub mod replicate;
pub mod simplex;

pub use error::{Error, Result};
