//! RLPR: forwarding-zone filtered, composite-metric contention routing.

pub mod metric;
pub mod node;
pub mod tables;

pub use metric::{
    composite_metric, contention_delay, contention_jitter, forwarding_angle, geographic_distance_metric,
    in_forwarding_zone, relative_speed_metric, MetricError, ZoneConfig,
};
pub use node::RlprNode;
pub use tables::{ContentionTimer, ForwardEntry, FrontRelativeTable, NeighborRecord, NeighborTable, RouteTables};
