//! Reference protocols sharing the same engine: textbook AODV and an
//! omnidirectional, connection-time driven RARP-lite.

pub mod aodv;
pub mod rarp;

pub use aodv::{AodvNode, Flavor};
pub use rarp::{best_offer, expected_connection_time, rarp_utility, RouteOffer, UtilityWeights};
