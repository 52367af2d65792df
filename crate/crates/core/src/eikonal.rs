//! Fast sweeping for `c |grad T| = 1` on the measurement square with
//! `T = 0` on an observed part of its boundary.

use crate::error::{Error, Result};
use crate::grid::{Region, ScalarField};

/// Convergence threshold on the largest update of one full sweep.
pub const SWEEP_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct Traveltime {
    /// Travel time on the region; zero outside it.
    pub field: ScalarField,
    pub region: Region,
    /// Full sweeps (all four orderings) performed, including the last one
    /// that detected convergence.
    pub sweeps: usize,
}

impl Traveltime {
    /// Largest travel time over the region, the critical time `T0`.
    pub fn critical_time(&self) -> f64 {
        critical_time(&self.field, &self.region)
    }
}

#[inline]
fn godunov(a: f64, b: f64, fh: f64) -> f64 {
    if (a - b).abs() >= fh {
        a.min(b) + fh
    } else {
        0.5 * (a + b + (2.0 * fh * fh - (a - b) * (a - b)).sqrt())
    }
}

/// Viscosity solution of the discrete eikonal equation on `region`, zero
/// at the boundary nodes flagged in `gamma` (in [`Region::boundary_nodes`]
/// order).
pub fn fast_sweep(c: &ScalarField, region: &Region, gamma: &[bool]) -> Result<Traveltime> {
    let g = c.grid;
    if region.i1 >= g.nx || region.j1 >= g.ny {
        return Err(Error::ShapeMismatch("region exceeds grid".into()));
    }
    let bnodes = region.boundary_nodes();
    if gamma.len() != bnodes.len() {
        return Err(Error::ShapeMismatch(format!("gamma has {} entries for {} nodes", gamma.len(), bnodes.len())));
    }
    if !gamma.iter().any(|&b| b) {
        return Err(Error::EmptyRegion);
    }
    if region.nodes().any(|(i, j)| c.at(i, j) <= 0.0) {
        return Err(Error::InvalidSpeed("speed must be positive".into()));
    }
    let (w, hgt) = (region.width(), region.height());
    let idx = |i: usize, j: usize| j * w + i;
    let mut t = vec![f64::INFINITY; w * hgt];
    let mut fixed = vec![false; w * hgt];
    for (&(i, j), &on) in bnodes.iter().zip(gamma) {
        if on {
            let k = idx(i - region.i0, j - region.j0);
            t[k] = 0.0;
            fixed[k] = true;
        }
    }
    let fh: Vec<f64> = (0..hgt)
        .flat_map(|j| (0..w).map(move |i| (i, j)))
        .map(|(i, j)| g.h / c.at(region.i0 + i, region.j0 + j))
        .collect();

    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut change: f64 = 0.0;
        for order in 0..4 {
            let (rev_i, rev_j) = (order & 1 == 1, order & 2 == 2);
            for jj in 0..hgt {
                let j = if rev_j { hgt - 1 - jj } else { jj };
                for ii in 0..w {
                    let i = if rev_i { w - 1 - ii } else { ii };
                    let k = idx(i, j);
                    if fixed[k] {
                        continue;
                    }
                    let a = match (i > 0, i + 1 < w) {
                        (true, true) => t[k - 1].min(t[k + 1]),
                        (true, false) => t[k - 1],
                        (false, true) => t[k + 1],
                        _ => f64::INFINITY,
                    };
                    let b = match (j > 0, j + 1 < hgt) {
                        (true, true) => t[k - w].min(t[k + w]),
                        (true, false) => t[k - w],
                        (false, true) => t[k + w],
                        _ => f64::INFINITY,
                    };
                    if a.is_infinite() && b.is_infinite() {
                        continue;
                    }
                    let cand = godunov(a, b, fh[k]);
                    if cand < t[k] {
                        let d = if t[k].is_infinite() { f64::INFINITY } else { t[k] - cand };
                        change = change.max(d);
                        t[k] = cand;
                    }
                }
            }
        }
        if change < SWEEP_TOL {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { cycles: sweeps, residual: change, target: SWEEP_TOL });
        }
    }
    let mut field = ScalarField::zeros(g);
    for j in 0..hgt {
        for i in 0..w {
            field.set(region.i0 + i, region.j0 + j, t[idx(i, j)]);
        }
    }
    Ok(Traveltime { field, region: *region, sweeps })
}

/// Maximum of a travel-time field over `region`.
pub fn critical_time(traveltime: &ScalarField, region: &Region) -> f64 {
    traveltime.max_over(region)
}
