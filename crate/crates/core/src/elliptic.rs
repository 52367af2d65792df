//! Harmonic extension by geometric multigrid, and the orthogonal projection
//! onto fields with zero trace on the boundary of a subregion.
//!
//! The 5-point Laplacian is solved on a rectangular node block with
//! Dirichlet data on its boundary. V-cycles use red-black Gauss-Seidel
//! smoothing, full-weighting restriction and bilinear prolongation. Each
//! dimension is coarsened independently until it has at most 5 nodes; a
//! dimension with an even node count is mapped onto the nearest admissible
//! coarse size with interpolation weights taken from the physical positions
//! of the nodes.

use crate::error::{Error, Result};
use crate::grid::{Grid2D, Region, ScalarField};

const COARSEST: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultigridOptions {
    /// Stop once `max |Lap_h phi| <= tol * max |data|`.
    pub tol: f64,
    pub max_cycles: usize,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
}

impl Default for MultigridOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_cycles: 60, pre_sweeps: 2, post_sweeps: 2 }
    }
}

/// Residual history of a solve: `residuals[0]` is the initial residual and
/// `residuals[k]` the residual after `k` V-cycles (max norm).
#[derive(Debug, Clone, PartialEq)]
pub struct MultigridReport {
    pub cycles: usize,
    pub residuals: Vec<f64>,
    pub target: f64,
}

impl MultigridReport {
    /// Smallest per-cycle residual reduction factor.
    pub fn worst_contraction(&self) -> f64 {
        self.residuals
            .windows(2)
            .filter(|w| w[1] > 0.0)
            .map(|w| w[0] / w[1])
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
struct Level {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    u: Vec<f64>,
    f: Vec<f64>,
    r: Vec<f64>,
}

impl Level {
    fn new(nx: usize, ny: usize, hx: f64, hy: f64) -> Self {
        let n = nx * ny;
        Self { nx, ny, hx, hy, u: vec![0.0; n], f: vec![0.0; n], r: vec![0.0; n] }
    }

    fn smooth(&mut self, sweeps: usize) {
        let (nx, ny) = (self.nx, self.ny);
        let cx = 1.0 / (self.hx * self.hx);
        let cy = 1.0 / (self.hy * self.hy);
        let diag = 2.0 * (cx + cy);
        for _ in 0..sweeps {
            for color in 0..2 {
                for j in 1..ny - 1 {
                    let start = 1 + (j + 1 + color) % 2;
                    let mut i = start;
                    while i < nx - 1 {
                        let k = j * nx + i;
                        let u = &mut self.u;
                        u[k] = (cx * (u[k - 1] + u[k + 1]) + cy * (u[k - nx] + u[k + nx]) - self.f[k]) / diag;
                        i += 2;
                    }
                }
            }
        }
    }

    /// `r = f - A u` on the interior; returns `max |r|`.
    fn residual(&mut self) -> f64 {
        let (nx, ny) = (self.nx, self.ny);
        let cx = 1.0 / (self.hx * self.hx);
        let cy = 1.0 / (self.hy * self.hy);
        let mut m: f64 = 0.0;
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let k = j * nx + i;
                let u = &self.u;
                let au = cx * (u[k - 1] - 2.0 * u[k] + u[k + 1]) + cy * (u[k - nx] - 2.0 * u[k] + u[k + nx]);
                let r = self.f[k] - au;
                self.r[k] = r;
                m = m.max(r.abs());
            }
        }
        m
    }

    /// Dense elimination on the interior unknowns.
    fn direct_solve(&mut self) {
        let (nx, ny) = (self.nx, self.ny);
        if nx < 3 || ny < 3 {
            return;
        }
        let (mx, my) = (nx - 2, ny - 2);
        let m = mx * my;
        let cx = 1.0 / (self.hx * self.hx);
        let cy = 1.0 / (self.hy * self.hy);
        let mut a = vec![0.0; m * m];
        let mut b = vec![0.0; m];
        let unknown = |i: usize, j: usize| (j - 1) * mx + (i - 1);
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let row = unknown(i, j);
                a[row * m + row] = -2.0 * (cx + cy);
                b[row] = self.f[j * nx + i];
                for (ii, jj, w) in [(i - 1, j, cx), (i + 1, j, cx), (i, j - 1, cy), (i, j + 1, cy)] {
                    if ii == 0 || jj == 0 || ii == nx - 1 || jj == ny - 1 {
                        b[row] -= w * self.u[jj * nx + ii];
                    } else {
                        a[row * m + unknown(ii, jj)] = w;
                    }
                }
            }
        }
        // Gaussian elimination with partial pivoting
        for col in 0..m {
            let piv = (col..m).max_by(|&p, &q| a[p * m + col].abs().total_cmp(&a[q * m + col].abs())).unwrap();
            if piv != col {
                for k in 0..m {
                    a.swap(col * m + k, piv * m + k);
                }
                b.swap(col, piv);
            }
            let d = a[col * m + col];
            for row in col + 1..m {
                let factor = a[row * m + col] / d;
                if factor != 0.0 {
                    for k in col..m {
                        a[row * m + k] -= factor * a[col * m + k];
                    }
                    b[row] -= factor * b[col];
                }
            }
        }
        let mut x = vec![0.0; m];
        for row in (0..m).rev() {
            let s: f64 = (row + 1..m).map(|k| a[row * m + k] * x[k]).sum();
            x[row] = (b[row] - s) / a[row * m + row];
        }
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                self.u[j * nx + i] = x[unknown(i, j)];
            }
        }
    }
}

/// 1D linear interpolation from `nc` coarse nodes to `nf` fine nodes on the
/// same interval.
#[derive(Debug, Clone)]
struct Transfer1D {
    left: Vec<usize>,
    weight: Vec<f64>,
    col_sum: Vec<f64>,
    nc: usize,
}

impl Transfer1D {
    fn new(nf: usize, nc: usize) -> Self {
        let mut left = Vec::with_capacity(nf);
        let mut weight = Vec::with_capacity(nf);
        let mut col_sum = vec![0.0; nc];
        for i in 0..nf {
            let pos = i as f64 * (nc - 1) as f64 / (nf - 1) as f64;
            let k = (pos.floor() as usize).min(nc - 2);
            let w = pos - k as f64;
            left.push(k);
            weight.push(w);
            col_sum[k] += 1.0 - w;
            col_sum[k + 1] += w;
        }
        Self { left, weight, col_sum, nc }
    }
}

fn coarse_size(n: usize) -> usize {
    if n <= COARSEST {
        n
    } else if n % 2 == 1 {
        n.div_ceil(2)
    } else {
        n / 2 + 1
    }
}

/// Multigrid solver for the Dirichlet problem of the 5-point Laplacian on
/// an `nx x ny` node block.
#[derive(Debug, Clone)]
pub struct Multigrid {
    levels: Vec<Level>,
    transfers: Vec<(Transfer1D, Transfer1D)>,
    opts: MultigridOptions,
}

impl Multigrid {
    pub fn new(nx: usize, ny: usize, h: f64, opts: MultigridOptions) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!("multigrid block {nx}x{ny} has no interior")));
        }
        let mut levels = vec![Level::new(nx, ny, h, h)];
        let mut transfers = Vec::new();
        loop {
            let last = levels.last().unwrap();
            if last.nx <= COARSEST && last.ny <= COARSEST {
                break;
            }
            let (cx, cy) = (coarse_size(last.nx), coarse_size(last.ny));
            let hx = last.hx * (last.nx - 1) as f64 / (cx - 1) as f64;
            let hy = last.hy * (last.ny - 1) as f64 / (cy - 1) as f64;
            transfers.push((Transfer1D::new(last.nx, cx), Transfer1D::new(last.ny, cy)));
            levels.push(Level::new(cx, cy, hx, hy));
        }
        Ok(Self { levels, transfers, opts })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    fn vcycle(&mut self, l: usize) {
        if l + 1 == self.levels.len() {
            self.levels[l].direct_solve();
            return;
        }
        let (pre, post) = (self.opts.pre_sweeps, self.opts.post_sweeps);
        self.levels[l].smooth(pre);
        self.levels[l].residual();
        {
            let (fine, coarse) = self.levels.split_at_mut(l + 1);
            restrict(&fine[l], &mut coarse[0], &self.transfers[l]);
            coarse[0].u.iter_mut().for_each(|v| *v = 0.0);
        }
        self.vcycle(l + 1);
        {
            let (fine, coarse) = self.levels.split_at_mut(l + 1);
            prolong_add(&coarse[0], &mut fine[l], &self.transfers[l]);
        }
        self.levels[l].smooth(post);
    }

    /// Solve `Lap_h u = 0` in the interior with `u` on the block boundary
    /// taken from `u` (row-major, `nx * ny`). Interior values of `u` are the
    /// initial guess and are overwritten.
    pub fn solve_laplace(&mut self, u: &mut [f64]) -> Result<MultigridReport> {
        let (nx, ny) = (self.levels[0].nx, self.levels[0].ny);
        if u.len() != nx * ny {
            return Err(Error::ShapeMismatch(format!("expected {} values, got {}", nx * ny, u.len())));
        }
        let mut data_max: f64 = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                    data_max = data_max.max(u[j * nx + i].abs());
                }
            }
        }
        let target = self.opts.tol * data_max;
        let top = &mut self.levels[0];
        top.u.copy_from_slice(u);
        top.f.iter_mut().for_each(|v| *v = 0.0);
        let mut residuals = vec![top.residual()];
        let mut cycles = 0;
        while *residuals.last().unwrap() > target {
            if cycles == self.opts.max_cycles {
                return Err(Error::NoConvergence { cycles, residual: *residuals.last().unwrap(), target });
            }
            self.vcycle(0);
            cycles += 1;
            residuals.push(self.levels[0].residual());
        }
        u.copy_from_slice(&self.levels[0].u);
        Ok(MultigridReport { cycles, residuals, target })
    }
}

fn restrict(fine: &Level, coarse: &mut Level, (tx, ty): &(Transfer1D, Transfer1D)) {
    let (nfx, nfy) = (fine.nx, fine.ny);
    let ncx = tx.nc;
    // x direction: nfy rows of ncx values
    let mut tmp = vec![0.0; ncx * nfy];
    for j in 1..nfy - 1 {
        for i in 1..nfx - 1 {
            let r = fine.r[j * nfx + i];
            let (k, w) = (tx.left[i], tx.weight[i]);
            tmp[j * ncx + k] += (1.0 - w) * r;
            tmp[j * ncx + k + 1] += w * r;
        }
    }
    coarse.f.iter_mut().for_each(|v| *v = 0.0);
    for j in 1..nfy - 1 {
        let (k, w) = (ty.left[j], ty.weight[j]);
        for i in 0..ncx {
            let v = tmp[j * ncx + i];
            coarse.f[k * ncx + i] += (1.0 - w) * v;
            coarse.f[(k + 1) * ncx + i] += w * v;
        }
    }
    for jc in 0..coarse.ny {
        for ic in 0..ncx {
            coarse.f[jc * ncx + ic] /= tx.col_sum[ic] * ty.col_sum[jc];
        }
    }
}

fn prolong_add(coarse: &Level, fine: &mut Level, (tx, ty): &(Transfer1D, Transfer1D)) {
    let (nfx, nfy) = (fine.nx, fine.ny);
    let ncx = coarse.nx;
    for j in 1..nfy - 1 {
        let (kj, wj) = (ty.left[j], ty.weight[j]);
        for i in 1..nfx - 1 {
            let (ki, wi) = (tx.left[i], tx.weight[i]);
            let c = &coarse.u;
            let e = (1.0 - wj) * ((1.0 - wi) * c[kj * ncx + ki] + wi * c[kj * ncx + ki + 1])
                + wj * ((1.0 - wi) * c[(kj + 1) * ncx + ki] + wi * c[(kj + 1) * ncx + ki + 1]);
            fine.u[j * nfx + i] += e;
        }
    }
}

/// Harmonic extension of `boundary_values` (given in
/// [`Region::boundary_nodes`] order) into `region`, with a report.
pub fn harmonic_extend_with(
    boundary_values: &[f64],
    grid: &Grid2D,
    region: &Region,
    opts: MultigridOptions,
) -> Result<(ScalarField, MultigridReport)> {
    let nodes = region.boundary_nodes();
    if boundary_values.len() != nodes.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} boundary values for {} boundary nodes",
            boundary_values.len(),
            nodes.len()
        )));
    }
    if let Some(k) = boundary_values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(k));
    }
    if region.i1 >= grid.nx || region.j1 >= grid.ny {
        return Err(Error::ShapeMismatch("region exceeds grid".into()));
    }
    let (w, h) = (region.width(), region.height());
    let mut out = ScalarField::zeros(*grid);
    if w < 3 || h < 3 {
        for (&(i, j), &v) in nodes.iter().zip(boundary_values) {
            out.set(i, j, v);
        }
        return Ok((out, MultigridReport { cycles: 0, residuals: vec![0.0], target: 0.0 }));
    }
    let mut u = vec![0.0; w * h];
    for (&(i, j), &v) in nodes.iter().zip(boundary_values) {
        u[(j - region.j0) * w + (i - region.i0)] = v;
    }
    let mut mg = Multigrid::new(w, h, grid.h, opts)?;
    let report = mg.solve_laplace(&mut u)?;
    for jj in 0..h {
        for ii in 0..w {
            out.set(region.i0 + ii, region.j0 + jj, u[jj * w + ii]);
        }
    }
    Ok((out, report))
}

/// Harmonic extension `P phi` of boundary values into `region`; zero
/// outside the region.
pub fn harmonic_extend(boundary_values: &[f64], grid: &Grid2D, region: &Region) -> Result<ScalarField> {
    harmonic_extend_with(boundary_values, grid, region, MultigridOptions::default()).map(|(f, _)| f)
}

/// Orthogonal projection onto `H_D(K)`: `f - P_K(f on boundary of K)` on
/// `K`, zero elsewhere. `K` must lie strictly inside `omega`.
pub fn project_hd(f: &ScalarField, region_k: &Region, omega: &Region) -> Result<ScalarField> {
    if !region_k.strictly_inside(omega) {
        return Err(Error::RegionTouchesBoundary);
    }
    let trace: Vec<f64> = region_k.boundary_nodes().into_iter().map(|(i, j)| f.at(i, j)).collect();
    let ext = harmonic_extend(&trace, &f.grid, region_k)?;
    let mut out = ScalarField::zeros(f.grid);
    for (i, j) in region_k.nodes() {
        out.set(i, j, f.at(i, j) - ext.at(i, j));
    }
    // exact zero trace
    for (i, j) in region_k.boundary_nodes() {
        out.set(i, j, 0.0);
    }
    Ok(out)
}
