//! Normalized grid geometry.
//!
//! Raw coordinates live on `[-100, 100]²` and are divided by [`GRID_SCALE`]
//! on ingestion, so every distance and reward term works in units where the
//! grid is `[-1, 1]²`.

use serde::{Deserialize, Serialize};

/// Raw-to-normalized coordinate divisor.
pub const GRID_SCALE: f64 = 100.0;

/// Largest warehouse-to-customer distance on the grid (corner to the far
/// quadrant center), `1.5 * sqrt(2)`.
pub const MAX_WAREHOUSE_DISTANCE: f64 = 1.5 * std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Builds a point from raw grid coordinates.
    pub fn from_raw(x: f64, y: f64) -> Self {
        Self::new(x / GRID_SCALE, y / GRID_SCALE)
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.x.abs() <= 1.0 && self.y.abs() <= 1.0
    }

    /// Quadrant index in warehouse order: upper-right, upper-left,
    /// lower-left, lower-right. Points on an axis go to the lower index.
    pub fn quadrant(&self) -> usize {
        match (self.x >= 0.0, self.y >= 0.0) {
            (true, true) => 0,
            (false, true) => 1,
            (false, false) => 2,
            (true, false) => 3,
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k)
    }
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Centers of the four grid quadrants, in quadrant-index order.
pub const QUADRANT_CENTERS: [Point; 4] = [
    Point::new(0.5, 0.5),
    Point::new(-0.5, 0.5),
    Point::new(-0.5, -0.5),
    Point::new(0.5, -0.5),
];
