use super::{Position, Velocity};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityParams {
    pub area_width: f64,
    pub area_height: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub pause_time: f64,
}

/// Random-waypoint state of one node. Static nodes (the ground station and
/// scripted test layouts) never move and never draw from their stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityState {
    pub position: Position,
    pub waypoint: Position,
    pub speed: f64,
    pub pause_remaining: f64,
    pub heading: (f64, f64),
    pub fixed: bool,
}

impl MobilityState {
    pub fn stationary(position: Position) -> Self {
        Self {
            position,
            waypoint: position,
            speed: 0.0,
            pause_remaining: 0.0,
            heading: (1.0, 0.0),
            fixed: true,
        }
    }

    /// Uniform start position, moving immediately toward a first waypoint.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, params: &MobilityParams) -> Self {
        let position = uniform_point(rng, params);
        let mut state = Self {
            position,
            waypoint: position,
            speed: 0.0,
            pause_remaining: 0.0,
            heading: (1.0, 0.0),
            fixed: false,
        };
        state.draw_leg(rng, params);
        state
    }

    /// Moving toward `waypoint` at `speed`; used by scripted scenarios.
    pub fn heading_to(position: Position, waypoint: Position, speed: f64) -> Self {
        let mut s = Self {
            position,
            waypoint,
            speed,
            pause_remaining: 0.0,
            heading: (1.0, 0.0),
            fixed: false,
        };
        s.update_heading();
        s
    }

    pub fn is_paused(&self) -> bool {
        self.fixed || self.pause_remaining > 0.0 || self.speed == 0.0
    }

    pub fn velocity(&self) -> Velocity {
        if self.is_paused() {
            Velocity { speed: 0.0, heading: self.heading }
        } else {
            Velocity { speed: self.speed, heading: self.heading }
        }
    }

    fn update_heading(&mut self) {
        let dx = self.waypoint.x - self.position.x;
        let dy = self.waypoint.y - self.position.y;
        let len = dx.hypot(dy);
        if len > 0.0 {
            self.heading = (dx / len, dy / len);
        }
    }

    fn draw_leg<R: Rng + ?Sized>(&mut self, rng: &mut R, params: &MobilityParams) {
        self.waypoint = uniform_point(rng, params);
        self.speed = if params.speed_max > params.speed_min {
            rng.gen_range(params.speed_min..=params.speed_max)
        } else {
            params.speed_min
        };
        self.update_heading();
    }
}

fn uniform_point<R: Rng + ?Sized>(rng: &mut R, params: &MobilityParams) -> Position {
    Position::new(
        rng.gen_range(0.0..=params.area_width),
        rng.gen_range(0.0..=params.area_height),
    )
}

/// Advances one node by `dt` seconds: travel toward the waypoint, pause on
/// arrival, then draw a fresh waypoint and speed.
pub fn advance_waypoint<R: Rng + ?Sized>(
    state: &mut MobilityState,
    rng: &mut R,
    params: &MobilityParams,
    dt: f64,
) {
    if state.fixed {
        return;
    }
    let mut left = dt;
    // Zero-length legs with no pause could spin forever on a degenerate area.
    let mut guard = 0;
    while left > 0.0 && guard < 10_000 {
        guard += 1;
        if state.pause_remaining > 0.0 {
            if left < state.pause_remaining {
                state.pause_remaining -= left;
                return;
            }
            left -= state.pause_remaining;
            state.pause_remaining = 0.0;
            state.draw_leg(rng, params);
            continue;
        }
        let remaining = state.position.distance_to(&state.waypoint);
        if state.speed <= 0.0 {
            return;
        }
        let to_arrive = remaining / state.speed;
        if left < to_arrive {
            let step = state.speed * left;
            state.position = state
                .position
                .offset(state.heading.0 * step, state.heading.1 * step);
            clamp_into(&mut state.position, params);
            return;
        }
        left -= to_arrive;
        state.position = state.waypoint;
        if params.pause_time > 0.0 {
            state.pause_remaining = params.pause_time;
        } else {
            state.draw_leg(rng, params);
        }
    }
}

fn clamp_into(p: &mut Position, params: &MobilityParams) {
    p.x = p.x.clamp(0.0, params.area_width);
    p.y = p.y.clamp(0.0, params.area_height);
}
