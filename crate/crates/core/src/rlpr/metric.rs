//! Relay-selection arithmetic: forwarding angle, zone predicate, the
//! geographic-progress and relative-speed metrics, and contention delay.

use crate::phys::Position;
use crate::wire::NodeId;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("invalid metric configuration: {0}")]
    Config(&'static str),
}

/// Angle in degrees at `prev_hop` between the direction to `dest` and the
/// direction to `candidate`, in [0, 180].
pub fn forwarding_angle(prev_hop: Position, candidate: Position, dest: Position) -> Result<f64, MetricError> {
    let (cx, cy) = (candidate.x - prev_hop.x, candidate.y - prev_hop.y);
    let (dx, dy) = (dest.x - prev_hop.x, dest.y - prev_hop.y);
    if cx == 0.0 && cy == 0.0 {
        return Err(MetricError::DegenerateGeometry("candidate coincides with previous hop"));
    }
    if dx == 0.0 && dy == 0.0 {
        return Err(MetricError::DegenerateGeometry("destination coincides with previous hop"));
    }
    // atan2 of cross and dot is well conditioned near 0 and 180 degrees.
    let cross = cx * dy - cy * dx;
    let dot = cx * dx + cy * dy;
    Ok(cross.abs().atan2(dot).to_degrees())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneConfig {
    pub half_angle_deg: f64,
    pub energy_threshold: f64,
}

impl Default for ZoneConfig {
    fn default() -> Self {
        Self { half_angle_deg: 90.0, energy_threshold: 10.0 }
    }
}

pub fn in_forwarding_zone(angle_deg: f64, energy: f64, cfg: &ZoneConfig) -> bool {
    energy >= cfg.energy_threshold && angle_deg <= cfg.half_angle_deg
}

/// GD = |1 - (dp - dn) / r|: 0 for a full-range advance, 1 for no
/// progress, 2 for a full-range retreat. The progress ratio is clamped to
/// [-1, 1] so positions sampled a few microseconds apart cannot push the
/// result outside [0, 2].
pub fn geographic_distance_metric(dp: f64, dn: f64, r: f64) -> Result<f64, MetricError> {
    if !(r > 0.0) {
        return Err(MetricError::Config("transmission range must be positive"));
    }
    let progress = ((dp - dn) / r).clamp(-1.0, 1.0);
    Ok((1.0 - progress).abs())
}

/// V_RL = |v_prev - v_recv| / v_max, clamped to [0, 1].
pub fn relative_speed_metric(v_prev: f64, v_recv: f64, v_max: f64) -> Result<f64, MetricError> {
    if !(v_max > 0.0) {
        return Err(MetricError::Config("maximum speed must be positive"));
    }
    Ok(((v_prev - v_recv).abs() / v_max).min(1.0))
}

pub fn composite_metric(gd: f64, vrl: f64, alpha: f64, beta: f64) -> f64 {
    alpha * gd + beta * vrl
}

/// Id-derived tie breaker, always positive and at most a thousandth of a slot.
pub fn contention_jitter(node: NodeId, slot: f64) -> f64 {
    const BUCKETS: u32 = 4096;
    slot * 1e-3 * f64::from(node.0 % BUCKETS + 1) / f64::from(BUCKETS)
}

/// Delay before a candidate rebroadcasts: linear in the metric plus a
/// sub-slot id jitter so distinct nodes with equal metrics never tie.
pub fn contention_delay(metric: f64, node: NodeId, slot: f64) -> f64 {
    slot * metric.max(0.0) + contention_jitter(node, slot)
}
