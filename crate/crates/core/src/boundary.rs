//! Observation cutoff `chi` on the boundary of the measurement square.
//!
//! `chi` depends on the boundary point only. Observed sides carry `chi = 1`
//! away from unobserved sides and fall to `0` through a cosine ramp measured
//! in arc length along the boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid2D, Region, Side};

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationMask {
    /// Observed sides of the square.
    pub sides: Vec<Side>,
    /// Arc-length width of the cosine ramp.
    pub ramp: f64,
}

impl Default for ObservationMask {
    fn default() -> Self {
        Self::full()
    }
}

/// Counterclockwise arc-length interval `[start, end]` of each side on a
/// square of half-width `a`, starting at the lower-left corner.
fn side_interval(side: Side, a: f64) -> (f64, f64) {
    match side {
        Side::South => (0.0, 2.0 * a),
        Side::East => (2.0 * a, 4.0 * a),
        Side::North => (4.0 * a, 6.0 * a),
        Side::West => (6.0 * a, 8.0 * a),
    }
}

/// Arc-length coordinate of a point on the square of half-width `a`.
pub fn perimeter_coordinate(p: [f64; 2], a: f64) -> f64 {
    let [x, y] = p;
    let tol = 1e-9 * a.max(1.0);
    if (y + a).abs() <= tol {
        x + a
    } else if (x - a).abs() <= tol {
        2.0 * a + (y + a)
    } else if (y - a).abs() <= tol {
        4.0 * a + (a - x)
    } else {
        6.0 * a + (a - y)
    }
}

impl ObservationMask {
    /// Data on the whole boundary.
    pub fn full() -> Self {
        Self { sides: Side::ALL.to_vec(), ramp: 0.2 }
    }

    pub fn new(sides: Vec<Side>, ramp: f64) -> Result<Self> {
        if !(ramp >= 0.0) {
            return Err(Error::InvalidParameter(format!("ramp width {ramp}")));
        }
        if sides.is_empty() {
            return Err(Error::InvalidParameter("at least one observed side is required".into()));
        }
        let mut sides = sides;
        sides.sort_by_key(|s| Side::ALL.iter().position(|t| t == s));
        sides.dedup();
        Ok(Self { sides, ramp })
    }

    /// Parse a side list such as `"NW"`.
    pub fn from_letters(letters: &str, ramp: f64) -> Result<Self> {
        let sides = letters
            .chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| Side::parse(c).ok_or_else(|| Error::InvalidParameter(format!("unknown side '{c}'"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(sides, ramp)
    }

    pub fn is_full(&self) -> bool {
        Side::ALL.iter().all(|s| self.sides.contains(s))
    }

    /// `chi` at a point on the square of half-width `max(|x|, |y|)`.
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        if self.is_full() {
            return 1.0;
        }
        let a = p[0].abs().max(p[1].abs());
        let s = perimeter_coordinate(p, a);
        let perimeter = 8.0 * a;
        let mut dist = f64::INFINITY;
        for side in Side::ALL {
            if self.sides.contains(&side) {
                continue;
            }
            let (s0, s1) = side_interval(side, a);
            let d = if s >= s0 && s <= s1 {
                0.0
            } else {
                let d0 = (s - s0).abs().min(perimeter - (s - s0).abs());
                let d1 = (s - s1).abs().min(perimeter - (s - s1).abs());
                d0.min(d1)
            };
            dist = dist.min(d);
        }
        if self.ramp == 0.0 {
            return if dist > 0.0 { 1.0 } else { 0.0 };
        }
        if dist >= self.ramp {
            1.0
        } else {
            0.5 * (1.0 - (PI * dist / self.ramp).cos())
        }
    }

    /// `chi` at the boundary nodes of `region`, in [`Region::boundary_nodes`] order.
    pub fn sample(&self, grid: &Grid2D, region: &Region) -> Vec<f64> {
        region.boundary_nodes().into_iter().map(|(i, j)| self.eval(grid.point(i, j))).collect()
    }

    /// Boundary nodes lying on an observed side (the set `Gamma`).
    pub fn gamma(&self, region: &Region) -> Vec<bool> {
        region
            .boundary_nodes()
            .into_iter()
            .map(|(i, j)| region.sides_of(i, j).iter().any(|s| self.sides.contains(s)))
            .collect()
    }
}
