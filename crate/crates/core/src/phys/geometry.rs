use serde::{Deserialize, Serialize};

/// Horizontal position in meters. Altitude is a scenario-wide constant and
/// never enters distance computations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_to(&self, other: &Position) -> f64 {
        distance(*self, *other)
    }

    pub fn offset(&self, dx: f64, dy: f64) -> Position {
        Position::new(self.x + dx, self.y + dy)
    }
}

/// Euclidean distance between two positions.
pub fn distance(a: Position, b: Position) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Speed plus unit heading. A paused node has speed 0 and keeps its last heading.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Velocity {
    pub speed: f64,
    pub heading: (f64, f64),
}

impl Velocity {
    pub fn still() -> Self {
        Self { speed: 0.0, heading: (1.0, 0.0) }
    }

    pub fn components(&self) -> (f64, f64) {
        (self.speed * self.heading.0, self.speed * self.heading.1)
    }
}
