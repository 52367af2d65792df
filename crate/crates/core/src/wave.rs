//! First-order velocity/pressure acoustic solver on a staggered grid with
//! perfectly matched layers, and the boundary measurement operator built on
//! it.
//!
//! Unknowns: the split pressure `u = u_x + u_y` at nodes `(i, j)`, the
//! velocity `v_x` at `(i + 1/2, j)` and `v_y` at `(i, j + 1/2)`. The loss
//! terms are treated half-implicitly:
//!
//! ```text
//! v_x <- [(1 - w dt/2) v_x - dt d_x u] / (1 + w dt/2)
//! u_x <- [(1 - w dt/2) u_x - dt c^2 d_x v_x] / (1 + w dt/2)
//! ```
//!
//! and likewise in `y`. A state at time `t` holds `u(t)` and `v(t - dt/2)`.
//! Nodes on the outer edge of the grid carry Dirichlet values (zero unless
//! supplied), which is what the time-reversal solve uses to impose the
//! measured trace on the boundary of the measurement domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dirichlet_energy, Grid2D, Region, ScalarField};

/// Default PML collar fraction: 0.22 of the 3.0-wide box, so the collar
/// spans `1.28 < |x| < 1.5`.
pub const DEFAULT_PML_SIGMA: f64 = 0.22 / 3.0;
/// Default PML loss amplitude.
pub const DEFAULT_PML_B: f64 = 100.0;
/// Default Courant number `dt max(c) / h`.
pub const DEFAULT_CFL: f64 = 0.5;

/// Loss profile `w(s)` on the rescaled coordinate `s` in `[0, 1]`.
pub fn pml_loss(s: f64, sigma: f64, b: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma < 0.5) {
        return Err(Error::InvalidParameter(format!("PML fraction {sigma} must lie in (0, 1/2)")));
    }
    if !(b > 0.0) {
        return Err(Error::InvalidParameter(format!("PML amplitude {b} must be positive")));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidParameter(format!("PML coordinate {s} outside [0, 1]")));
    }
    Ok(if s < sigma {
        b / sigma * ((s - sigma) / sigma).powi(2)
    } else if s > 1.0 - sigma {
        b / sigma * ((s - 1.0 + sigma) / sigma).powi(2)
    } else {
        0.0
    })
}

/// Per-node and per-face PML losses of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PmlProfile {
    pub sigma: f64,
    pub b: f64,
    /// Loss at node columns `i`.
    pub omega_x: Vec<f64>,
    /// Loss at faces `i + 1/2`.
    pub omega_x_half: Vec<f64>,
    pub omega_y: Vec<f64>,
    pub omega_y_half: Vec<f64>,
}

impl PmlProfile {
    pub fn new(grid: &Grid2D, sigma: f64, b: f64) -> Result<Self> {
        let profile = |n: usize, half: bool| -> Result<Vec<f64>> {
            let count = if half { n - 1 } else { n };
            (0..count)
                .map(|k| {
                    let s = (k as f64 + if half { 0.5 } else { 0.0 }) / (n - 1) as f64;
                    pml_loss(s, sigma, b)
                })
                .collect()
        };
        Ok(Self {
            sigma,
            b,
            omega_x: profile(grid.nx, false)?,
            omega_x_half: profile(grid.nx, true)?,
            omega_y: profile(grid.ny, false)?,
            omega_y_half: profile(grid.ny, true)?,
        })
    }

    /// The default collar between the measurement square and the box edge.
    pub fn default_for(grid: &Grid2D) -> Self {
        Self::new(grid, DEFAULT_PML_SIGMA, DEFAULT_PML_B).expect("default PML parameters are valid")
    }

    /// No absorption anywhere: a reflecting box.
    pub fn none(grid: &Grid2D) -> Self {
        Self {
            sigma: 0.0,
            b: 0.0,
            omega_x: vec![0.0; grid.nx],
            omega_x_half: vec![0.0; grid.nx - 1],
            omega_y: vec![0.0; grid.ny],
            omega_y_half: vec![0.0; grid.ny - 1],
        }
    }

    fn matches(&self, grid: &Grid2D) -> bool {
        self.omega_x.len() == grid.nx && self.omega_y.len() == grid.ny
    }
}

/// Staggered solver state.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub grid: Grid2D,
    pub u_x: Vec<f64>,
    pub u_y: Vec<f64>,
    /// `(nx - 1) x ny` values, row-major.
    pub v_x: Vec<f64>,
    /// `nx x (ny - 1)` values, row-major.
    pub v_y: Vec<f64>,
    pub t: f64,
    pub dt: f64,
}

impl WaveState {
    pub fn zeros(grid: Grid2D, dt: f64) -> Self {
        Self {
            grid,
            u_x: vec![0.0; grid.len()],
            u_y: vec![0.0; grid.len()],
            v_x: vec![0.0; (grid.nx - 1) * grid.ny],
            v_y: vec![0.0; grid.nx * (grid.ny - 1)],
            t: 0.0,
            dt,
        }
    }

    /// Cauchy data `(f, 0)`: zero initial velocity means
    /// `v(-dt/2) = (dt/2) grad f`.
    pub fn from_pressure(f: &ScalarField, dt: f64) -> Self {
        let g = f.grid;
        let mut s = Self::zeros(g, dt);
        for k in 0..g.len() {
            s.u_x[k] = 0.5 * f.data[k];
            s.u_y[k] = 0.5 * f.data[k];
        }
        let a = 0.5 * dt / g.h;
        for j in 0..g.ny {
            for i in 0..g.nx - 1 {
                s.v_x[j * (g.nx - 1) + i] = a * (f.at(i + 1, j) - f.at(i, j));
            }
        }
        for j in 0..g.ny - 1 {
            for i in 0..g.nx {
                s.v_y[j * g.nx + i] = a * (f.at(i, j + 1) - f.at(i, j));
            }
        }
        s
    }

    pub fn pressure(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.u_x.iter().zip(&self.u_y).map(|(a, b)| a + b).collect(),
        }
    }

    #[inline]
    pub fn pressure_at(&self, i: usize, j: usize) -> f64 {
        let k = self.grid.idx(i, j);
        self.u_x[k] + self.u_y[k]
    }
}

/// Leapfrog stepper for a fixed speed, loss profile and time step.
#[derive(Debug, Clone)]
pub struct WaveSolver {
    grid: Grid2D,
    c2: Vec<f64>,
    dt: f64,
    // update coefficients: value <- a * value - b * difference
    ax: Vec<f64>,
    bx: Vec<f64>,
    ay: Vec<f64>,
    by: Vec<f64>,
    ax_half: Vec<f64>,
    bx_half: Vec<f64>,
    ay_half: Vec<f64>,
    by_half: Vec<f64>,
}

fn coefficients(omega: &[f64], dt: f64, h: f64) -> (Vec<f64>, Vec<f64>) {
    omega
        .iter()
        .map(|&w| {
            let d = 1.0 + 0.5 * w * dt;
            ((1.0 - 0.5 * w * dt) / d, dt / (h * d))
        })
        .unzip()
}

/// Largest stable time step of the staggered scheme, `h / (c_max sqrt 2)`.
pub fn stability_limit(c: &ScalarField) -> f64 {
    c.grid.h / (c.max() * std::f64::consts::SQRT_2)
}

/// Time step at Courant number [`DEFAULT_CFL`].
pub fn default_dt(c: &ScalarField) -> f64 {
    DEFAULT_CFL * c.grid.h / c.max()
}

impl WaveSolver {
    pub fn new(c: &ScalarField, pml: &PmlProfile, dt: f64) -> Result<Self> {
        let grid = c.grid;
        if !pml.matches(&grid) {
            return Err(Error::ShapeMismatch("PML profile does not match the grid".into()));
        }
        if c.min() <= 0.0 {
            return Err(Error::InvalidSpeed("speed must be positive".into()));
        }
        let limit = stability_limit(c);
        if !(dt > 0.0 && dt <= limit) {
            return Err(Error::CflViolation { dt, limit });
        }
        let (ax, bx) = coefficients(&pml.omega_x, dt, grid.h);
        let (ay, by) = coefficients(&pml.omega_y, dt, grid.h);
        let (ax_half, bx_half) = coefficients(&pml.omega_x_half, dt, grid.h);
        let (ay_half, by_half) = coefficients(&pml.omega_y_half, dt, grid.h);
        Ok(Self {
            grid,
            c2: c.data.iter().map(|v| v * v).collect(),
            dt,
            ax,
            bx,
            ay,
            by,
            ax_half,
            bx_half,
            ay_half,
            by_half,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Advance one step with zero pressure on the outer edge.
    pub fn step(&self, state: &mut WaveState) {
        self.advance(state, None);
    }

    /// Advance one step, then impose `edge` (in [`Region::boundary_nodes`]
    /// order of the whole grid) as the pressure on the outer edge.
    pub fn step_with_edge(&self, state: &mut WaveState, edge: &[f64]) {
        self.advance(state, Some(edge));
    }

    fn advance(&self, s: &mut WaveState, edge: Option<&[f64]>) {
        let g = self.grid;
        let (nx, ny) = (g.nx, g.ny);
        debug_assert!(g.same_shape(&s.grid));

        // velocities from the pressure gradient
        for j in 0..ny {
            let row = j * nx;
            let vrow = j * (nx - 1);
            for i in 0..nx - 1 {
                let k = row + i;
                let du = (s.u_x[k + 1] + s.u_y[k + 1]) - (s.u_x[k] + s.u_y[k]);
                let v = &mut s.v_x[vrow + i];
                *v = self.ax_half[i] * *v - self.bx_half[i] * du;
            }
        }
        for j in 0..ny - 1 {
            let row = j * nx;
            let (a, b) = (self.ay_half[j], self.by_half[j]);
            for i in 0..nx {
                let k = row + i;
                let du = (s.u_x[k + nx] + s.u_y[k + nx]) - (s.u_x[k] + s.u_y[k]);
                let v = &mut s.v_y[k];
                *v = a * *v - b * du;
            }
        }

        // pressure splits from the velocity divergence
        for j in 1..ny - 1 {
            let row = j * nx;
            let vrow = j * (nx - 1);
            let (ay, by) = (self.ay[j], self.by[j]);
            for i in 1..nx - 1 {
                let k = row + i;
                let c2 = self.c2[k];
                let dvx = s.v_x[vrow + i] - s.v_x[vrow + i - 1];
                let dvy = s.v_y[k] - s.v_y[k - nx];
                s.u_x[k] = self.ax[i] * s.u_x[k] - self.bx[i] * c2 * dvx;
                s.u_y[k] = ay * s.u_y[k] - by * c2 * dvy;
            }
        }

        match edge {
            None => {
                for i in 0..nx {
                    for k in [i, (ny - 1) * nx + i] {
                        s.u_x[k] = 0.0;
                        s.u_y[k] = 0.0;
                    }
                }
                for j in 0..ny {
                    for k in [j * nx, j * nx + nx - 1] {
                        s.u_x[k] = 0.0;
                        s.u_y[k] = 0.0;
                    }
                }
            }
            Some(values) => {
                let full = Region::full(&g);
                for (&(i, j), &v) in full.boundary_nodes().iter().zip(values) {
                    let k = g.idx(i, j);
                    s.u_x[k] = v;
                    s.u_y[k] = 0.0;
                }
            }
        }
        s.t += self.dt;
    }
}

/// One leapfrog step of the PML system.
pub fn step(state: &WaveState, c: &ScalarField, pml: &PmlProfile, dt: f64) -> Result<WaveState> {
    c.check_grid(&state.grid)?;
    let solver = WaveSolver::new(c, pml, dt)?;
    let mut next = state.clone();
    next.dt = dt;
    solver.step(&mut next);
    Ok(next)
}

/// Discrete energy `sum |grad u|^2 + c^-2 |u_t|^2` over `region`.
///
/// `u_t = -c^2 div v` with `v(t)` taken as the mean of the stored
/// `v(t - dt/2)` and a lossless trial update `v(t + dt/2)`.
pub fn energy(state: &WaveState, c: &ScalarField, region: &Region) -> Result<f64> {
    c.check_grid(&state.grid)?;
    if region.node_count() < 2 {
        return Err(Error::EmptyRegion);
    }
    let g = state.grid;
    let (nx, ny) = (g.nx, g.ny);
    let u = state.pressure();
    let half = 0.5 * state.dt / g.h;
    let vx = |i: isize, j: usize| -> f64 {
        if i < 0 || i as usize >= nx - 1 {
            return 0.0;
        }
        let i = i as usize;
        state.v_x[j * (nx - 1) + i] - half * (u.at(i + 1, j) - u.at(i, j))
    };
    let vy = |i: usize, j: isize| -> f64 {
        if j < 0 || j as usize >= ny - 1 {
            return 0.0;
        }
        let j = j as usize;
        state.v_y[j * nx + i] - half * (u.at(i, j + 1) - u.at(i, j))
    };
    let mut kinetic = 0.0;
    for (i, j) in region.nodes() {
        // pressure is prescribed on the outer edge
        if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
            continue;
        }
        let div = (vx(i as isize, j) - vx(i as isize - 1, j) + vy(i, j as isize) - vy(i, j as isize - 1)) / g.h;
        let cc = c.at(i, j);
        // c^-2 (c^2 div)^2
        kinetic += cc * cc * div * div;
    }
    Ok(dirichlet_energy(&u, region) + kinetic * g.h * g.h)
}

/// Pressure samples `h(t_k, p)` at the boundary nodes of the measurement
/// domain, `k = 0..=n_t`, with an observation weight per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrace {
    pub n_t: usize,
    pub dt: f64,
    /// Grid indices of the boundary nodes.
    pub nodes: Vec<(usize, usize)>,
    /// Physical coordinates of the boundary nodes.
    pub coords: Vec<[f64; 2]>,
    /// Observation weight `chi` in `[0, 1]` per node.
    pub mask: Vec<f64>,
    /// Time-major samples: `values[k * nodes.len() + p]`.
    pub values: Vec<f64>,
}

impl BoundaryTrace {
    pub fn zeros(grid: &Grid2D, region: &Region, n_t: usize, dt: f64) -> Self {
        let nodes = region.boundary_nodes();
        let coords = nodes.iter().map(|&(i, j)| grid.point(i, j)).collect();
        let nb = nodes.len();
        Self { n_t, dt, nodes, coords, mask: vec![1.0; nb], values: vec![0.0; (n_t + 1) * nb] }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn duration(&self) -> f64 {
        self.n_t as f64 * self.dt
    }

    pub fn frame(&self, k: usize) -> &[f64] {
        let nb = self.n_nodes();
        &self.values[k * nb..(k + 1) * nb]
    }

    pub fn frame_mut(&mut self, k: usize) -> &mut [f64] {
        let nb = self.n_nodes();
        &mut self.values[k * nb..(k + 1) * nb]
    }

    /// Linear interpolation of the boundary values at time `t`.
    pub fn frame_at(&self, t: f64) -> Vec<f64> {
        let pos = (t / self.dt).clamp(0.0, self.n_t as f64);
        let k = (pos.floor() as usize).min(self.n_t.saturating_sub(1));
        let a = pos - k as f64;
        if self.n_t == 0 || a == 0.0 {
            return self.frame(k).to_vec();
        }
        self.frame(k).iter().zip(self.frame(k + 1)).map(|(x, y)| (1.0 - a) * x + a * y).collect()
    }

    pub fn set_mask(&mut self, mask: Vec<f64>) -> Result<()> {
        if mask.len() != self.n_nodes() {
            return Err(Error::ShapeMismatch(format!("mask has {} entries for {} nodes", mask.len(), self.n_nodes())));
        }
        if mask.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::InvalidParameter("mask values must lie in [0, 1]".into()));
        }
        self.mask = mask;
        Ok(())
    }

    /// `chi h`: values multiplied by the mask.
    pub fn masked(&self) -> Self {
        let nb = self.n_nodes();
        let mut out = self.clone();
        for (k, v) in out.values.iter_mut().enumerate() {
            *v *= self.mask[k % nb];
        }
        out
    }

    /// Euclidean norm of all samples.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// The measurement operator: propagate `(f, 0)` with a fixed solver and
/// record the pressure on the boundary of `omega`.
#[derive(Debug, Clone)]
pub struct ForwardOperator {
    solver: WaveSolver,
    omega: Region,
    n_t: usize,
}

impl ForwardOperator {
    /// Time step at the default Courant number, shrunk so that `n_t dt = T`.
    pub fn new(c: &ScalarField, omega: Region, t_final: f64, pml: &PmlProfile) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!("final time {t_final} must be positive")));
        }
        let n_t = (t_final / default_dt(c)).ceil() as usize;
        Self::with_steps(c, omega, t_final, n_t, pml)
    }

    pub fn with_steps(c: &ScalarField, omega: Region, t_final: f64, n_t: usize, pml: &PmlProfile) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!("final time {t_final} must be positive")));
        }
        if n_t == 0 {
            return Err(Error::InvalidParameter("need at least one time step".into()));
        }
        if omega.i1 >= c.grid.nx || omega.j1 >= c.grid.ny {
            return Err(Error::ShapeMismatch("region exceeds grid".into()));
        }
        let solver = WaveSolver::new(c, pml, t_final / n_t as f64)?;
        Ok(Self { solver, omega, n_t })
    }

    pub fn dt(&self) -> f64 {
        self.solver.dt()
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn omega(&self) -> &Region {
        &self.omega
    }

    pub fn grid(&self) -> &Grid2D {
        self.solver.grid()
    }

    /// `Lambda f`.
    pub fn measure(&self, f: &ScalarField) -> Result<BoundaryTrace> {
        self.measure_with(f, |_, _| {})
    }

    /// `Lambda f`, calling `observe(k, state)` after every step.
    pub fn measure_with(&self, f: &ScalarField, mut observe: impl FnMut(usize, &WaveState)) -> Result<BoundaryTrace> {
        let g = *self.grid();
        f.check_grid(&g)?;
        for (k, &v) in f.data.iter().enumerate() {
            let (i, j) = (k % g.nx, k / g.nx);
            if v != 0.0 && !self.omega.contains(i, j) {
                return Err(Error::SupportViolation(k));
            }
        }
        let mut trace = BoundaryTrace::zeros(&g, &self.omega, self.n_t, self.dt());
        let idx: Vec<usize> = trace.nodes.iter().map(|&(i, j)| g.idx(i, j)).collect();
        let mut state = WaveState::from_pressure(f, self.dt());
        for (p, &k) in idx.iter().enumerate() {
            trace.values[p] = state.u_x[k] + state.u_y[k];
        }
        observe(0, &state);
        for n in 1..=self.n_t {
            self.solver.step(&mut state);
            let frame = trace.frame_mut(n);
            for (p, &k) in idx.iter().enumerate() {
                frame[p] = state.u_x[k] + state.u_y[k];
            }
            observe(n, &state);
        }
        Ok(trace)
    }
}

/// `Lambda f` on `[0, T]` with the default time step.
pub fn forward_measure(f: &ScalarField, c: &ScalarField, omega: &Region, t_final: f64, pml: &PmlProfile) -> Result<BoundaryTrace> {
    ForwardOperator::new(c, *omega, t_final, pml)?.measure(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Domain;

    #[test]
    fn pml_loss_branches() {
        assert_eq!(pml_loss(0.5, 0.4, 3.0).unwrap(), 0.0);
        assert_eq!(pml_loss(0.5, 0.1, 50.0).unwrap(), 0.0);
        assert!((pml_loss(0.0, 0.1, 50.0).unwrap() - 500.0).abs() < 1e-10);
        for s in [0.0, 0.03, 0.07, 0.1] {
            let a = pml_loss(s, 0.1, 50.0).unwrap();
            let b = pml_loss(1.0 - s, 0.1, 50.0).unwrap();
            assert!((a - b).abs() < 1e-9 * a.max(1.0));
        }
        assert!(pml_loss(1.1, 0.1, 50.0).is_err());
        assert!(pml_loss(-0.1, 0.1, 50.0).is_err());
        assert!(pml_loss(0.3, 0.6, 50.0).is_err());
        assert!(pml_loss(0.3, 0.1, 0.0).is_err());
    }

    #[test]
    fn default_profile_vanishes_inside_omega() {
        let g = Grid2D::default_box(301);
        let p = PmlProfile::default_for(&g);
        let om = Region::omega(&g).unwrap();
        for i in om.i0..=om.i1 {
            assert_eq!(p.omega_x[i], 0.0);
            assert_eq!(p.omega_y[i], 0.0);
        }
        assert!(p.omega_x[om.i0 - 1] > 0.0);
        assert!(p.omega_x.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = Grid2D::default_box(41);
        let c = ScalarField::constant(g, 1.0);
        let pml = PmlProfile::default_for(&g);
        let s0 = WaveState::zeros(g, 0.01);
        let s1 = step(&s0, &c, &pml, 0.01).unwrap();
        assert!(s1.u_x.iter().chain(&s1.u_y).chain(&s1.v_x).chain(&s1.v_y).all(|&v| v == 0.0));
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let g = Grid2D::default_box(41);
        let c = ScalarField::constant(g, 2.0);
        let pml = PmlProfile::none(&g);
        assert!(matches!(WaveSolver::new(&c, &pml, g.h / 2.0), Err(Error::CflViolation { .. })));
        assert!(WaveSolver::new(&c, &pml, 0.3 * g.h).is_ok());
    }

    #[test]
    fn energy_of_initial_data_is_dirichlet_norm() {
        let g = Grid2D::default_box(81);
        let f = ScalarField::from_fn(g, |x, y| (-(x * x + 2.0 * y * y) / 0.1).exp() * (x + 0.3));
        let c = ScalarField::from_fn(g, |x, y| 1.0 + 0.2 * x * y);
        let r = Region::omega(&g).unwrap();
        let s = WaveState::from_pressure(&f, 0.4 * g.h);
        let e = energy(&s, &c, &r).unwrap();
        let hd = crate::grid::hd_norm(&f, &r).unwrap();
        assert!((e - hd * hd).abs() <= 1e-12 * e);
    }

    #[test]
    fn energy_is_conserved_in_a_reflecting_box() {
        let g = Grid2D::default_box(121);
        let c = ScalarField::from_fn(g, |x, y| 1.0 + 0.1 * (2.0 * x).sin() * y.cos());
        let f = ScalarField::from_fn(g, |x, y| (-((x - 0.2).powi(2) + y * y) / 0.04).exp());
        let pml = PmlProfile::none(&g);
        let dt = default_dt(&c);
        let solver = WaveSolver::new(&c, &pml, dt).unwrap();
        let full = Region::full(&g);
        let mut s = WaveState::from_pressure(&f, dt);
        let e0 = energy(&s, &c, &full).unwrap();
        let mut worst: f64 = 0.0;
        for n in 0..1000 {
            solver.step(&mut s);
            if n % 50 == 49 {
                let e = energy(&s, &c, &full).unwrap();
                worst = worst.max((e - e0).abs() / e0);
            }
        }
        assert!(worst < 5e-3, "relative energy drift {worst}");
    }

    #[test]
    fn plane_pulse_matches_dalembert() {
        // pulse in x, uniform in y: u(t) = (f(x - t) + f(x + t)) / 2 away from walls
        let profile = |x: f64| (-(x * x) / 0.02).exp();
        let t_end = 0.5;
        let mut errs = Vec::new();
        for n in [121usize, 241] {
            let g = Grid2D::default_box(n);
            let c = ScalarField::constant(g, 1.0);
            let f = ScalarField::from_fn(g, |x, _| profile(x));
            let pml = PmlProfile::none(&g);
            let steps = ((t_end / (0.5 * g.h)).round()) as usize;
            let dt = t_end / steps as f64;
            let solver = WaveSolver::new(&c, &pml, dt).unwrap();
            let mut s = WaveState::from_pressure(&f, dt);
            for _ in 0..steps {
                solver.step(&mut s);
            }
            let j = g.ny / 2;
            let mut err: f64 = 0.0;
            for i in 0..g.nx {
                let x = g.x(i);
                if x.abs() > 1.2 {
                    continue;
                }
                let exact = 0.5 * (profile(x - t_end) + profile(x + t_end));
                err = err.max((s.pressure_at(i, j) - exact).abs());
            }
            errs.push(err);
        }
        assert!(errs[0] < 2e-2, "{errs:?}");
        let ratio = errs[0] / errs[1];
        assert!(ratio > 3.0, "second-order ratio {ratio} ({errs:?})");
    }

    #[test]
    fn zero_source_gives_zero_trace() {
        let g = Grid2D::default_box(41);
        let d = Domain::new(g).unwrap();
        let c = ScalarField::constant(g, 1.0);
        let tr = forward_measure(&ScalarField::zeros(g), &c, &d.omega, 0.5, &PmlProfile::default_for(&g)).unwrap();
        assert!(tr.values.iter().all(|&v| v == 0.0));
        assert!((tr.duration() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = Grid2D::default_box(41);
        let d = Domain::new(g).unwrap();
        let c = ScalarField::constant(g, 1.0);
        let pml = PmlProfile::default_for(&g);
        assert!(forward_measure(&ScalarField::zeros(g), &c, &d.omega, 0.0, &pml).is_err());
        let mut f = ScalarField::zeros(g);
        f.set(0, 20, 1.0);
        assert!(matches!(forward_measure(&f, &c, &d.omega, 1.0, &pml), Err(Error::SupportViolation(_))));
    }

    #[test]
    fn first_arrival_matches_travel_distance() {
        let g = Grid2D::default_box(201);
        let d = Domain::new(g).unwrap();
        let c = ScalarField::constant(g, 1.0);
        let center = [0.3, -0.2];
        let width = 0.08;
        let f = ScalarField::from_fn(g, |x, y| {
            let r2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
            if r2 < 0.25 { (-r2 / (width * width)).exp() } else { 0.0 }
        });
        let tr = forward_measure(&f, &c, &d.omega, 2.0, &PmlProfile::default_for(&g)).unwrap();
        let peak = tr.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (p, xy) in tr.coords.iter().enumerate().step_by(37) {
            let dist = ((xy[0] - center[0]).powi(2) + (xy[1] - center[1]).powi(2)).sqrt();
            if dist > 1.9 {
                continue;
            }
            // onset: first sample above 1% of the global peak
            let onset = (0..=tr.n_t).find(|&k| tr.frame(k)[p].abs() > 0.01 * peak).map(|k| k as f64 * tr.dt);
            let onset = onset.expect("signal arrives");
            // the pulse has a finite width, so the onset leads the centre arrival
            let lead = 2.5 * width;
            assert!(onset <= dist + 2.0 * g.h, "p={p}: onset {onset} dist {dist}");
            assert!(onset >= dist - lead - 2.0 * g.h, "p={p}: onset {onset} dist {dist}");
        }
    }
}
