//! Integrated fulfillment-node selection and vehicle routing.
//!
//! A wave-driven simulator assigns each customer order to one of several
//! warehouses (or defers it), then routes capacitated vehicles under time
//! windows from each depot. Both stages have a heuristic and a learned
//! policy; [`orchestrator`] wires them into episodes, training and
//! evaluation runs.

pub mod c2s;
pub mod config;
pub mod demand;
pub mod env;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod metrics;
pub mod nn;
pub mod oracle;
pub mod orchestrator;
pub mod records;
pub mod rng;
pub mod vrp;

pub use error::{Error, Result, Violation};
