//! Convex hulls of plant silhouettes and per-day view selection.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Pixel;
use crate::raster::BinaryMask;

/// A convex polygon with vertices in counter-clockwise order in the `(x, y)`
/// frame. Hull outputs never contain three consecutive collinear vertices;
/// a single point or a segment is returned as a one- or two-vertex polygon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Pixel>,
}

#[inline]
fn cross(o: Pixel, a: Pixel, b: Pixel) -> i64 {
    let (ax, ay) = (i64::from(a.x - o.x), i64::from(a.y - o.y));
    let (bx, by) = (i64::from(b.x - o.x), i64::from(b.y - o.y));
    ax * by - ay * bx
}

/// Andrew's monotone chain over an arbitrary point set.
pub fn convex_hull_points(points: &[Pixel]) -> Result<Polygon> {
    if points.is_empty() {
        return Err(Error::EmptyInput("convex hull of an empty point set".into()));
    }
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return Ok(Polygon { vertices: pts });
    }

    let mut hull: Vec<Pixel> = Vec::with_capacity(pts.len() + 1);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    // All points collinear: the chain degenerates to the two extremes.
    if hull.len() == 2 || (hull.len() > 2 && polygon_twice_area(&hull) == 0) {
        return Ok(Polygon {
            vertices: vec![pts[0], pts[pts.len() - 1]],
        });
    }
    Ok(Polygon { vertices: hull })
}

/// Hull of all foreground pixel centres. Only the leftmost and rightmost
/// pixel of each row can be hull vertices, so only those are fed to the
/// chain.
pub fn convex_hull(mask: &BinaryMask) -> Result<Polygon> {
    let mut extremes = Vec::new();
    for x in 0..mask.height() {
        let row = &mask.bits()[x * mask.width()..(x + 1) * mask.width()];
        if let (Some(first), Some(last)) = (row.iter().position(|&b| b), row.iter().rposition(|&b| b)) {
            extremes.push(Pixel::new(x as i32, first as i32));
            if last != first {
                extremes.push(Pixel::new(x as i32, last as i32));
            }
        }
    }
    if extremes.is_empty() {
        return Err(Error::EmptyInput("convex hull of an empty mask".into()));
    }
    convex_hull_points(&extremes)
}

fn polygon_twice_area(v: &[Pixel]) -> i64 {
    let n = v.len();
    (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            i64::from(a.x) * i64::from(b.y) - i64::from(b.x) * i64::from(a.y)
        })
        .sum()
}

/// Shoelace area in square pixels; zero for points and segments.
pub fn polygon_area(p: &Polygon) -> f64 {
    if p.vertices.len() < 3 {
        return 0.0;
    }
    polygon_twice_area(&p.vertices).unsigned_abs() as f64 / 2.0
}

impl Polygon {
    /// True when `p` lies inside or on the polygon.
    pub fn contains(&self, p: Pixel) -> bool {
        let v = &self.vertices;
        match v.len() {
            0 => false,
            1 => v[0] == p,
            2 => {
                cross(v[0], v[1], p) == 0
                    && p.x >= v[0].x.min(v[1].x)
                    && p.x <= v[0].x.max(v[1].x)
                    && p.y >= v[0].y.min(v[1].y)
                    && p.y <= v[0].y.max(v[1].y)
            }
            n => (0..n).all(|i| cross(v[i], v[(i + 1) % n], p) >= 0),
        }
    }
}

/// One of the two orthogonal side views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub enum View {
    View0,
    View90,
}

impl View {
    pub fn degrees(self) -> u16 {
        match self {
            View::View0 => 0,
            View::View90 => 90,
        }
    }
}

impl From<View> for u16 {
    fn from(v: View) -> u16 {
        v.degrees()
    }
}

impl TryFrom<u16> for View {
    type Error = String;

    fn try_from(d: u16) -> std::result::Result<Self, String> {
        match d {
            0 => Ok(View::View0),
            90 => Ok(View::View90),
            other => Err(format!("view must be 0 or 90, got {other}")),
        }
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.degrees())
    }
}

/// The selected view and both hull areas (0 for an empty view).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewChoice {
    pub view: View,
    pub area0: f64,
    pub area90: f64,
}

/// Picks the view whose silhouette hull is larger; ties go to view 0.
/// An empty view loses to a non-empty one.
pub fn select_view(mask0: &BinaryMask, mask90: &BinaryMask) -> Result<ViewChoice> {
    let area = |m: &BinaryMask| -> Option<f64> { convex_hull(m).ok().map(|h| polygon_area(&h)) };
    match (area(mask0), area(mask90)) {
        (None, None) => Err(Error::EmptyInput("both views are empty".into())),
        (Some(a0), None) => Ok(ViewChoice {
            view: View::View0,
            area0: a0,
            area90: 0.0,
        }),
        (None, Some(a90)) => Ok(ViewChoice {
            view: View::View90,
            area0: 0.0,
            area90: a90,
        }),
        (Some(a0), Some(a90)) => Ok(choose_by_area(a0, a90)),
    }
}

/// The comparison rule on its own: view 90 only when strictly larger.
pub fn choose_by_area(area0: f64, area90: f64) -> ViewChoice {
    ViewChoice {
        view: if area90 > area0 { View::View90 } else { View::View0 },
        area0,
        area90,
    }
}
