//! The physical world the routing protocols run in: planar geometry,
//! random-waypoint mobility, free-space propagation and battery accounting.

mod energy;
mod geometry;
mod mobility;
mod radio;

pub use energy::{Debit, EnergyBudget, EnergyUse};
pub use geometry::{distance, Position, Velocity};
pub use mobility::{advance_waypoint, MobilityParams, MobilityState};
pub use radio::{RadioModel, SPEED_OF_LIGHT};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysError {
    #[error("rssi is undefined for non-positive distance {0} m")]
    NonPositiveDistance(f64),
    #[error("invalid radio parameter: {0}")]
    InvalidRadio(&'static str),
}
