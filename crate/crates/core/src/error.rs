use std::fmt;

use crate::env::OrderId;

pub type Result<T> = std::result::Result<T, Error>;

/// One failed constraint found while checking a trip or a route set.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Capacity { load: u32, capacity: u32 },
    TimeWindow { order: OrderId, service_start: f64, open: f64, close: f64 },
    TravelTime { order: OrderId, service_start: f64, earliest: f64 },
    UnknownOrder(OrderId),
    NotAssigned(OrderId),
    Duplicate(OrderId),
    Missing(OrderId),
    VehicleBusy { available_at: f64, start: f64 },
    LegCount { legs: usize, visits: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Capacity { load, capacity } => write!(f, "load {load} exceeds capacity {capacity}"),
            Violation::TimeWindow { order, service_start, open, close } => {
                write!(f, "order {order}: service at {service_start:.4} outside [{open:.4}, {close:.4}]")
            }
            Violation::TravelTime { order, service_start, earliest } => {
                write!(f, "order {order}: service at {service_start:.4} before earliest {earliest:.4}")
            }
            Violation::UnknownOrder(id) => write!(f, "unknown order {id}"),
            Violation::NotAssigned(id) => write!(f, "order {id} is not assigned to this depot"),
            Violation::Duplicate(id) => write!(f, "order {id} covered more than once"),
            Violation::Missing(id) => write!(f, "order {id} not covered"),
            Violation::VehicleBusy { available_at, start } => {
                write!(f, "vehicle busy until {available_at:.4}, trip starts {start:.4}")
            }
            Violation::LegCount { legs, visits } => write!(f, "{legs} legs for {visits} visits"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("infeasible action: warehouse {warehouse} holds {inventory} units, order {order} needs {demand}")]
    Infeasible { order: OrderId, warehouse: usize, inventory: u32, demand: u32 },

    #[error("order {order} is {state}, expected {expected}")]
    OrderState { order: OrderId, state: &'static str, expected: &'static str },

    #[error("unknown order {0}")]
    UnknownOrder(OrderId),

    #[error("trip rejected: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    TripRejected(Vec<Violation>),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("no embedding for order {0}")]
    MissingEmbedding(OrderId),

    #[error("no legal action")]
    EmptyMask,

    #[error("reward component out of range: {0}")]
    RewardRange(String),

    #[error("order {0} already settled")]
    DoubleSettlement(OrderId),

    #[error("instance has {0} orders, enumeration bound is {1}")]
    InstanceTooLarge(usize, usize),

    #[error("empty graph buffer")]
    EmptyBuffer,

    #[error("agent mismatch: {0}")]
    AgentMismatch(String),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
