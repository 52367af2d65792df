//! Uniform node grids, scalar fields on them, rectangular node regions and
//! the discrete norms shared by every solver.
//!
//! Fields are stored row-major with `x` varying fastest: the value at node
//! `(i, j)` lives at `data[j * nx + i]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the measurement square `[-1.28, 1.28]^2`.
pub const OMEGA_HALF_WIDTH: f64 = 1.28;
/// Half-width of the default computational box `[-1.5, 1.5]^2`.
pub const BOX_HALF_WIDTH: f64 = 1.5;

/// A uniform Cartesian node grid with square cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub h: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3x3 nodes, got {nx}x{ny}")));
        }
        if !(x_max > x_min && y_max > y_min) {
            return Err(Error::InvalidGrid("empty bounds".into()));
        }
        let hx = (x_max - x_min) / (nx - 1) as f64;
        let hy = (y_max - y_min) / (ny - 1) as f64;
        if ((hx - hy) / hx).abs() > 1e-9 {
            return Err(Error::InvalidGrid(format!("cells are not square: hx={hx}, hy={hy}")));
        }
        Ok(Self { nx, ny, x_min, x_max, y_min, y_max, h: hx })
    }

    /// `n x n` nodes on `[-half_width, half_width]^2`.
    pub fn square(n: usize, half_width: f64) -> Result<Self> {
        Self::new(n, n, -half_width, half_width, -half_width, half_width)
    }

    /// `n x n` nodes on the default box `[-1.5, 1.5]^2`.
    pub fn default_box(n: usize) -> Self {
        Self::square(n, BOX_HALF_WIDTH).expect("default box is valid for n >= 3")
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.h
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [self.x(i), self.y(j)]
    }

    /// Nearest node to a physical point, clamped to the grid.
    pub fn nearest(&self, p: [f64; 2]) -> (usize, usize) {
        let fi = ((p[0] - self.x_min) / self.h).round().clamp(0.0, (self.nx - 1) as f64);
        let fj = ((p[1] - self.y_min) / self.h).round().clamp(0.0, (self.ny - 1) as f64);
        (fi as usize, fj as usize)
    }

    pub fn same_shape(&self, other: &Grid2D) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && (self.x_min - other.x_min).abs() <= 1e-12 * self.h.max(1.0)
            && (self.y_min - other.y_min).abs() <= 1e-12 * self.h.max(1.0)
            && (self.h - other.h).abs() <= 1e-12 * self.h
    }
}

/// Side of a rectangle, named by compass direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "N")]
    North,
    #[serde(rename = "S")]
    South,
    #[serde(rename = "E")]
    East,
    #[serde(rename = "W")]
    West,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::North, Side::South, Side::East, Side::West];

    pub fn parse(c: char) -> Option<Side> {
        match c.to_ascii_uppercase() {
            'N' => Some(Side::North),
            'S' => Some(Side::South),
            'E' => Some(Side::East),
            'W' => Some(Side::West),
            _ => None,
        }
    }
}

/// What a grid node is with respect to the measurement geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    /// Outside the measurement domain (absorbing collar).
    Collar,
    /// On the boundary of the measurement domain.
    Boundary,
    /// Interior of the measurement domain, outside the optional subset.
    Interior,
    /// Interior of the optional compact subset.
    Subset,
}

/// A rectangular block of grid nodes `[i0, i1] x [j0, j1]` (inclusive).
///
/// The boundary node set is the topological boundary of the block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl Region {
    pub fn new(i0: usize, i1: usize, j0: usize, j1: usize) -> Result<Self> {
        if i1 < i0 || j1 < j0 {
            return Err(Error::EmptyRegion);
        }
        Ok(Self { i0, i1, j0, j1 })
    }

    /// All nodes of `grid`.
    pub fn full(grid: &Grid2D) -> Self {
        Self { i0: 0, i1: grid.nx - 1, j0: 0, j1: grid.ny - 1 }
    }

    /// Nodes with `|x| <= half_width` and `|y| <= half_width`.
    pub fn centered(grid: &Grid2D, half_width: f64) -> Result<Self> {
        let tol = 1e-9 * grid.h;
        let inside_x: Vec<usize> = (0..grid.nx).filter(|&i| grid.x(i).abs() <= half_width + tol).collect();
        let inside_y: Vec<usize> = (0..grid.ny).filter(|&j| grid.y(j).abs() <= half_width + tol).collect();
        match (inside_x.first(), inside_x.last(), inside_y.first(), inside_y.last()) {
            (Some(&i0), Some(&i1), Some(&j0), Some(&j1)) => Self::new(i0, i1, j0, j1),
            _ => Err(Error::EmptyRegion),
        }
    }

    /// The discrete measurement domain: nodes of `[-1.28, 1.28]^2`.
    pub fn omega(grid: &Grid2D) -> Result<Self> {
        Self::centered(grid, OMEGA_HALF_WIDTH)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.i1 - self.i0 + 1
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.j1 - self.j0 + 1
    }

    pub fn node_count(&self) -> usize {
        self.width() * self.height()
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        i >= self.i0 && i <= self.i1 && j >= self.j0 && j <= self.j1
    }

    #[inline]
    pub fn on_boundary(&self, i: usize, j: usize) -> bool {
        self.contains(i, j) && (i == self.i0 || i == self.i1 || j == self.j0 || j == self.j1)
    }

    #[inline]
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        i > self.i0 && i < self.i1 && j > self.j0 && j < self.j1
    }

    /// `true` when `self` lies inside `outer` without touching its boundary.
    pub fn strictly_inside(&self, outer: &Region) -> bool {
        self.i0 > outer.i0 && self.i1 < outer.i1 && self.j0 > outer.j0 && self.j1 < outer.j1
    }

    /// Boundary nodes in counterclockwise order, starting at `(i0, j0)`.
    pub fn boundary_nodes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        if self.i0 == self.i1 || self.j0 == self.j1 {
            for j in self.j0..=self.j1 {
                for i in self.i0..=self.i1 {
                    out.push((i, j));
                }
            }
            return out;
        }
        for i in self.i0..=self.i1 {
            out.push((i, self.j0));
        }
        for j in self.j0 + 1..=self.j1 {
            out.push((self.i1, j));
        }
        for i in (self.i0..self.i1).rev() {
            out.push((i, self.j1));
        }
        for j in (self.j0 + 1..self.j1).rev() {
            out.push((self.i0, j));
        }
        out
    }

    /// Sides of the region the node `(i, j)` lies on.
    pub fn sides_of(&self, i: usize, j: usize) -> Vec<Side> {
        let mut s = Vec::with_capacity(2);
        if j == self.j1 {
            s.push(Side::North);
        }
        if j == self.j0 {
            s.push(Side::South);
        }
        if i == self.i1 {
            s.push(Side::East);
        }
        if i == self.i0 {
            s.push(Side::West);
        }
        s
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.j0..=self.j1).flat_map(move |j| (self.i0..=self.i1).map(move |i| (i, j)))
    }

    /// Physical bounds `[x_min, x_max, y_min, y_max]` of the node block.
    pub fn bounds(&self, grid: &Grid2D) -> [f64; 4] {
        [grid.x(self.i0), grid.x(self.i1), grid.y(self.j0), grid.y(self.j1)]
    }
}

/// Grid plus the measurement domain and an optional compact subset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub grid: Grid2D,
    pub omega: Region,
    pub subset: Option<Region>,
}

impl Domain {
    pub fn new(grid: Grid2D) -> Result<Self> {
        let omega = Region::omega(&grid)?;
        if omega.i0 == 0 || omega.j0 == 0 || omega.i1 == grid.nx - 1 || omega.j1 == grid.ny - 1 {
            return Err(Error::InvalidGrid("measurement domain must lie strictly inside the box".into()));
        }
        Ok(Self { grid, omega, subset: None })
    }

    pub fn with_subset(mut self, subset: Region) -> Result<Self> {
        if !subset.strictly_inside(&self.omega) {
            return Err(Error::RegionTouchesBoundary);
        }
        self.subset = Some(subset);
        Ok(self)
    }

    pub fn classify(&self, i: usize, j: usize) -> NodeClass {
        if !self.omega.contains(i, j) {
            NodeClass::Collar
        } else if self.omega.on_boundary(i, j) {
            NodeClass::Boundary
        } else if self.subset.is_some_and(|k| k.contains(i, j)) {
            NodeClass::Subset
        } else {
            NodeClass::Interior
        }
    }
}

/// Real values at the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid2D,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!("expected {} values, got {}", grid.len(), data.len())));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, data: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        Self { grid, data: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                data.push(f(grid.x(i), grid.y(j)));
            }
        }
        Self { grid, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.data[k] = v;
    }

    pub fn check_grid(&self, other: &Grid2D) -> Result<()> {
        if self.grid.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!("{:?} vs {:?}", self.grid, other)))
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { grid: self.grid, data: self.data.iter().map(|v| a * v).collect() }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &ScalarField) -> Result<()> {
        other.check_grid(&self.grid)?;
        for (s, o) in self.data.iter_mut().zip(&other.data) {
            *s += a * o;
        }
        Ok(())
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// Copy with every node outside `region` set to zero.
    pub fn restricted(&self, region: &Region) -> Self {
        let mut out = Self::zeros(self.grid);
        for (i, j) in region.nodes() {
            out.set(i, j, self.at(i, j));
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_over(&self, region: &Region) -> f64 {
        region.nodes().map(|(i, j)| self.at(i, j)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Bilinear interpolation at a physical point, clamped to the grid.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let g = &self.grid;
        let fx = ((x - g.x_min) / g.h).clamp(0.0, (g.nx - 1) as f64);
        let fy = ((y - g.y_min) / g.h).clamp(0.0, (g.ny - 1) as f64);
        let i = (fx.floor() as usize).min(g.nx - 2);
        let j = (fy.floor() as usize).min(g.ny - 2);
        let a = fx - i as f64;
        let b = fy - j as f64;
        (1.0 - a) * (1.0 - b) * self.at(i, j)
            + a * (1.0 - b) * self.at(i + 1, j)
            + (1.0 - a) * b * self.at(i, j + 1)
            + a * b * self.at(i + 1, j + 1)
    }

    /// Values along the row of nodes closest to `y`.
    pub fn x_slice(&self, y: f64) -> Vec<(f64, f64)> {
        let (_, j) = self.grid.nearest([0.0, y]);
        (0..self.grid.nx).map(|i| (self.grid.x(i), self.at(i, j))).collect()
    }

    /// Values along the column of nodes closest to `x`.
    pub fn y_slice(&self, x: f64) -> Vec<(f64, f64)> {
        let (i, _) = self.grid.nearest([x, 0.0]);
        (0..self.grid.ny).map(|j| (self.grid.y(j), self.at(i, j))).collect()
    }
}

/// Discrete Dirichlet energy `sum |grad_h f|^2 h^2` over `region`.
///
/// Differences are taken along grid edges whose endpoints both lie in the
/// region; `h^2` cancels against the `1/h^2` of the difference quotients.
/// This is the quadratic form of the 5-point Laplacian, so harmonic
/// extensions are exactly orthogonal to fields vanishing on the region
/// boundary.
pub fn dirichlet_energy(f: &ScalarField, region: &Region) -> f64 {
    let mut sum = 0.0;
    for j in region.j0..=region.j1 {
        for i in region.i0..=region.i1 {
            let v = f.at(i, j);
            if i < region.i1 {
                let d = f.at(i + 1, j) - v;
                sum += d * d;
            }
            if j < region.j1 {
                let d = f.at(i, j + 1) - v;
                sum += d * d;
            }
        }
    }
    sum
}

/// Discrete `H_D` (Dirichlet) norm of `f` over `region`.
pub fn hd_norm(f: &ScalarField, region: &Region) -> Result<f64> {
    if region.node_count() < 2 {
        return Err(Error::EmptyRegion);
    }
    if region.i1 >= f.grid.nx || region.j1 >= f.grid.ny {
        return Err(Error::ShapeMismatch("region exceeds grid".into()));
    }
    Ok(dirichlet_energy(f, region).sqrt())
}

/// Discrete `L^2` norm over `region` (area element `h^2`).
pub fn l2_norm(f: &ScalarField, region: &Region) -> f64 {
    let s: f64 = region.nodes().map(|(i, j)| f.at(i, j).powi(2)).sum();
    (s * f.grid.h * f.grid.h).sqrt()
}

/// `||f - g|| / ||g||` in `L^2(region)`.
pub fn l2_rel_error(f: &ScalarField, g: &ScalarField, region: &Region) -> Result<f64> {
    f.check_grid(&g.grid)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, j) in region.nodes() {
        let d = f.at(i, j) - g.at(i, j);
        num += d * d;
        den += g.at(i, j).powi(2);
    }
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((num / den).sqrt())
}
