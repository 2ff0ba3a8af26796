//! Pixel coordinates.
//!
//! The origin is the upper-left pixel. `x` runs down the image (the row
//! index, i.e. the height direction) and `y` runs across it (the column
//! index). "Lower" on the plant therefore means a larger `x`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pixel {
    /// Row, counted downwards from the top.
    pub x: i32,
    /// Column, counted rightwards from the left edge.
    pub y: i32,
}

impl Pixel {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Pixel) -> f64 {
        let dx = f64::from(self.x - other.x);
        let dy = f64::from(self.y - other.y);
        dx.hypot(dy)
    }

    pub fn dist2(self, other: Pixel) -> i64 {
        let dx = i64::from(self.x - other.x);
        let dy = i64::from(self.y - other.y);
        dx * dx + dy * dy
    }

    /// True when the two pixels touch under 8-connectivity.
    pub fn is_adjacent(self, other: Pixel) -> bool {
        self != other && (self.x - other.x).abs() <= 1 && (self.y - other.y).abs() <= 1
    }

    /// The eight neighbours in clockwise order starting from north.
    pub fn neighbors8(self) -> [Pixel; 8] {
        let Pixel { x, y } = self;
        [
            Pixel::new(x - 1, y),
            Pixel::new(x - 1, y + 1),
            Pixel::new(x, y + 1),
            Pixel::new(x + 1, y + 1),
            Pixel::new(x + 1, y),
            Pixel::new(x + 1, y - 1),
            Pixel::new(x, y - 1),
            Pixel::new(x - 1, y - 1),
        ]
    }
}

impl From<(i32, i32)> for Pixel {
    fn from((x, y): (i32, i32)) -> Self {
        Pixel::new(x, y)
    }
}
