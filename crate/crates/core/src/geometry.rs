//! Planar geometry of the hexagonal macro network.
//!
//! Points are stored in Cartesian coordinates (Km); [`PolarPoint`] is the
//! input/output view used by the radio formulas.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the plane in Km, Cartesian.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        Point {
            x: r * theta.cos(),
            y: r * theta.sin(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn to_polar(&self) -> PolarPoint {
        PolarPoint::new(self.norm(), self.y.atan2(self.x))
    }

    pub fn offset(&self, dx: f64, dy: f64) -> Point {
        Point::new(self.x + dx, self.y + dy)
    }
}

/// Polar view `(r, theta)` with `r >= 0` and `theta` in `[0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    r: f64,
    theta: f64,
}

impl PolarPoint {
    /// Builds a polar point, folding negative radii through the origin and
    /// normalizing the azimuth.
    pub fn new(r: f64, theta: f64) -> Self {
        let (r, theta) = if r < 0.0 { (-r, theta + PI) } else { (r, theta) };
        let mut theta = theta.rem_euclid(TAU);
        if theta >= TAU {
            theta = 0.0;
        }
        PolarPoint { r, theta }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn to_cartesian(&self) -> Point {
        Point::from_polar(self.r, self.theta)
    }
}

impl From<PolarPoint> for Point {
    fn from(p: PolarPoint) -> Self {
        p.to_cartesian()
    }
}

/// Euclidean distance between two polar points.
pub fn distance(a: PolarPoint, b: PolarPoint) -> f64 {
    a.to_cartesian().dist(&b.to_cartesian())
}

/// Radius of the disk with the same area as a hexagon of inter-site
/// distance `delta`: `delta * sqrt(sqrt(3) / (2 pi))`.
pub fn disk_radius(delta: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "inter-site distance must be positive, got {delta}"
        )));
    }
    Ok(delta * (3f64.sqrt() / (2.0 * PI)).sqrt())
}

/// Hexagonal macro network around a central site at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellLayout {
    delta: f64,
    radius: f64,
    rings_for_oracle: usize,
}

impl CellLayout {
    pub fn new(delta: f64, rings_for_oracle: usize) -> Result<Self> {
        let radius = disk_radius(delta)?;
        if rings_for_oracle == 0 {
            return Err(Error::InvalidArgument(
                "at least one interferer ring is required".into(),
            ));
        }
        Ok(CellLayout {
            delta,
            radius,
            rings_for_oracle,
        })
    }

    /// Inter-site distance (Km).
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Disk-equivalent macro radius R (Km).
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn rings_for_oracle(&self) -> usize {
        self.rings_for_oracle
    }

    pub fn with_rings(&self, rings: usize) -> Result<Self> {
        CellLayout::new(self.delta, rings)
    }

    /// Centers of all lattice sites within `rings_for_oracle` rings of the
    /// origin, origin excluded. One nearest-neighbour pair lies on the x-axis.
    pub fn interferer_positions(&self) -> Vec<Point> {
        let n = self.rings_for_oracle as i64;
        let h = 3f64.sqrt() / 2.0;
        let mut sites = Vec::with_capacity(3 * (n * (n + 1)) as usize);
        for q in -n..=n {
            for r in (-n).max(-q - n)..=n.min(-q + n) {
                if q == 0 && r == 0 {
                    continue;
                }
                let x = self.delta * (q as f64 + 0.5 * r as f64);
                let y = self.delta * h * r as f64;
                sites.push(Point::new(x, y));
            }
        }
        sites
    }
}
