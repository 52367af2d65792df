//! Modified back projection `A` and the error operator `K = Id - A chi Lambda`.
//!
//! `A h` solves the wave equation backwards on the measurement square only,
//! starting at `t = T` from the harmonic extension of `h(T)` with zero
//! velocity, with `h` imposed as Dirichlet data on the boundary. With
//! `s = T - t` this is an ordinary forward solve, so the staggered stepper of
//! [`crate::wave`] is reused on the sub-grid of the square without any
//! absorbing layer.

use crate::elliptic::{harmonic_extend_with, MultigridOptions};
use crate::error::{Error, Result};
use crate::grid::{Grid2D, Region, ScalarField};
use crate::wave::{default_dt, stability_limit, BoundaryTrace, ForwardOperator, PmlProfile, WaveSolver, WaveState};

/// Backward solver for a fixed speed on a fixed measurement square.
#[derive(Debug, Clone)]
pub struct TimeReversal {
    grid: Grid2D,
    omega: Region,
    sub: Grid2D,
    c_sub: ScalarField,
    mg: MultigridOptions,
}

impl TimeReversal {
    pub fn new(c: &ScalarField, omega: Region) -> Result<Self> {
        let grid = c.grid;
        if omega.i1 >= grid.nx || omega.j1 >= grid.ny {
            return Err(Error::ShapeMismatch("region exceeds grid".into()));
        }
        let [x0, x1, y0, y1] = omega.bounds(&grid);
        let sub = Grid2D::new(omega.width(), omega.height(), x0, x1, y0, y1)?;
        let data = (omega.j0..=omega.j1)
            .flat_map(|j| (omega.i0..=omega.i1).map(move |i| (i, j)))
            .map(|(i, j)| c.at(i, j))
            .collect();
        let c_sub = ScalarField::new(sub, data)?;
        Ok(Self { grid, omega, sub, c_sub, mg: MultigridOptions::default() })
    }

    pub fn with_multigrid(mut self, mg: MultigridOptions) -> Self {
        self.mg = mg;
        self
    }

    pub fn omega(&self) -> &Region {
        &self.omega
    }

    /// `A (chi h)` on `[0, T]`, with `chi` the mask carried by the trace.
    pub fn apply(&self, trace: &BoundaryTrace, t_final: f64) -> Result<ScalarField> {
        let nodes = self.omega.boundary_nodes();
        if trace.nodes != nodes {
            return Err(Error::ShapeMismatch("trace nodes do not match the measurement boundary".into()));
        }
        if !(t_final > 0.0) {
            return Err(Error::InvalidParameter(format!("final time {t_final} must be positive")));
        }
        let duration = trace.duration();
        if t_final > duration * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!("final time {t_final} exceeds trace duration {duration}")));
        }
        let nb = nodes.len();
        let chi = &trace.mask;

        // Use the trace step when it divides T and is stable here; otherwise
        // interpolate the trace in time.
        let steps_exact = (t_final / trace.dt).round();
        let aligned = (steps_exact * trace.dt - t_final).abs() <= 1e-9 * t_final
            && trace.dt <= stability_limit(&self.c_sub)
            && steps_exact >= 1.0;
        let (n_s, dt) = if aligned {
            (steps_exact as usize, trace.dt)
        } else {
            let n = (t_final / default_dt(&self.c_sub)).ceil() as usize;
            (n, t_final / n as f64)
        };
        let frame = |s_index: usize| -> Vec<f64> {
            let raw = if aligned {
                trace.frame(n_s - s_index).to_vec()
            } else {
                trace.frame_at(t_final - s_index as f64 * dt)
            };
            raw.iter().zip(chi).map(|(v, m)| v * m).collect()
        };

        let terminal = frame(0);
        let sub_region = Region::full(&self.sub);
        let (phi, _) = harmonic_extend_with(&terminal, &self.sub, &sub_region, self.mg)?;
        let solver = WaveSolver::new(&self.c_sub, &PmlProfile::none(&self.sub), dt)?;
        let mut state = WaveState::from_pressure(&phi, dt);
        let mut edge = vec![0.0; nb];
        for k in 1..=n_s {
            edge.copy_from_slice(&frame(k));
            solver.step_with_edge(&mut state, &edge);
        }

        let mut out = ScalarField::zeros(self.grid);
        let (w, o) = (self.sub.nx, &self.omega);
        for j in 0..self.sub.ny {
            for i in 0..w {
                out.set(o.i0 + i, o.j0 + j, state.pressure_at(i, j));
            }
        }
        Ok(out)
    }
}

/// `A (chi h)` for a trace on `[0, T]`.
pub fn time_reverse(trace: &BoundaryTrace, c: &ScalarField, omega: &Region, t_final: f64) -> Result<ScalarField> {
    TimeReversal::new(c, *omega)?.apply(trace, t_final)
}

/// `K f = f - A (chi Lambda f)` with both solves set up once.
#[derive(Debug, Clone)]
pub struct ErrorOperator {
    forward: ForwardOperator,
    reverse: TimeReversal,
    mask: Vec<f64>,
    t_final: f64,
}

impl ErrorOperator {
    pub fn new(c: &ScalarField, omega: Region, t_final: f64, pml: &PmlProfile, mask: Vec<f64>) -> Result<Self> {
        let forward = ForwardOperator::new(c, omega, t_final, pml)?;
        Self::from_parts(forward, TimeReversal::new(c, omega)?, mask, t_final)
    }

    pub fn from_parts(forward: ForwardOperator, reverse: TimeReversal, mask: Vec<f64>, t_final: f64) -> Result<Self> {
        let nb = forward.omega().boundary_nodes().len();
        if mask.len() != nb {
            return Err(Error::ShapeMismatch(format!("mask has {} entries for {nb} nodes", mask.len())));
        }
        if forward.omega() != reverse.omega() {
            return Err(Error::ShapeMismatch("forward and backward regions differ".into()));
        }
        Ok(Self { forward, reverse, mask, t_final })
    }

    pub fn forward(&self) -> &ForwardOperator {
        &self.forward
    }

    pub fn reverse(&self) -> &TimeReversal {
        &self.reverse
    }

    pub fn mask(&self) -> &[f64] {
        &self.mask
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    /// `A chi Lambda f`, with `f` first clamped to zero outside the square.
    pub fn a_lambda(&self, f: &ScalarField) -> Result<ScalarField> {
        let f = f.restricted(self.forward.omega());
        let mut trace = self.forward.measure(&f)?;
        trace.set_mask(self.mask.clone())?;
        self.reverse.apply(&trace, self.t_final)
    }

    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        let f = f.restricted(self.forward.omega());
        let back = self.a_lambda(&f)?;
        f.sub(&back)
    }
}

/// `K f` on `[0, T]` with observation weights `mask` on the boundary nodes.
pub fn apply_error_operator(
    f: &ScalarField,
    c: &ScalarField,
    omega: &Region,
    t_final: f64,
    pml: &PmlProfile,
    mask: &[f64],
) -> Result<ScalarField> {
    ErrorOperator::new(c, *omega, t_final, pml, mask.to_vec())?.apply(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{hd_norm, l2_rel_error};
    use crate::wave::forward_measure;

    fn setup(n: usize) -> (Grid2D, Region, ScalarField, PmlProfile) {
        let g = Grid2D::default_box(n);
        let om = Region::omega(&g).unwrap();
        (g, om, ScalarField::constant(g, 1.0), PmlProfile::default_for(&g))
    }

    fn bump(g: Grid2D, cx: f64, cy: f64, r: f64) -> ScalarField {
        ScalarField::from_fn(g, |x, y| {
            let q = ((x - cx).powi(2) + (y - cy).powi(2)) / (r * r);
            if q < 1.0 { (1.0 - q).powi(3) } else { 0.0 }
        })
    }

    #[test]
    fn zero_trace_gives_zero() {
        let (g, om, c, _) = setup(61);
        let tr = BoundaryTrace::zeros(&g, &om, 40, 0.01);
        let out = time_reverse(&tr, &c, &om, 0.4).unwrap();
        assert!(out.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_trace_gives_constant() {
        let (g, om, c, _) = setup(61);
        let mut tr = BoundaryTrace::zeros(&g, &om, 50, 0.01);
        tr.values.iter_mut().for_each(|v| *v = 0.7);
        let out = time_reverse(&tr, &c, &om, 0.5).unwrap();
        for (i, j) in om.nodes() {
            assert!((out.at(i, j) - 0.7).abs() < 1e-7, "{}", out.at(i, j));
        }
        assert_eq!(out.at(0, 0), 0.0);
    }

    #[test]
    fn rejects_long_final_time_and_foreign_trace() {
        let (g, om, c, _) = setup(61);
        let tr = BoundaryTrace::zeros(&g, &om, 10, 0.01);
        assert!(time_reverse(&tr, &c, &om, 0.2).is_err());
        let other = Region::new(3, 57, 3, 57).unwrap();
        let tr = BoundaryTrace::zeros(&g, &other, 10, 0.01);
        assert!(time_reverse(&tr, &c, &om, 0.1).is_err());
    }

    #[test]
    fn interpolated_time_step_agrees_with_aligned_one() {
        let (g, om, c, pml) = setup(81);
        let f = bump(g, 0.2, 0.1, 0.4);
        let t = 1.5;
        let tr = forward_measure(&f, &c, &om, t, &pml).unwrap();
        let aligned = time_reverse(&tr, &c, &om, t).unwrap();
        // a trace recorded with a step that does not divide T forces interpolation
        let shorter = time_reverse(&tr, &c, &om, t - 0.37 * tr.dt).unwrap();
        assert!(l2_rel_error(&shorter, &aligned, &om).unwrap() < 0.05);
    }

    #[test]
    fn round_trip_is_a_parametrix() {
        let (g, om, c, pml) = setup(151);
        let f = bump(g, 0.15, -0.1, 0.5);
        let t = 4.0 * 1.28;
        let tr = forward_measure(&f, &c, &om, t, &pml).unwrap();
        let back = time_reverse(&tr, &c, &om, t).unwrap();
        let err = l2_rel_error(&back, &f, &om).unwrap();
        assert!(err < 0.15, "round trip error {err}");
    }

    #[test]
    fn error_operator_contracts_strongly_for_constant_speed() {
        let (g, om, c, pml) = setup(121);
        let nb = om.boundary_nodes().len();
        // T larger than the diameter of the square
        let k = ErrorOperator::new(&c, om, 3.8, &pml, vec![1.0; nb]).unwrap();
        let f = bump(g, -0.2, 0.3, 0.6);
        let kf = k.apply(&f).unwrap();
        let ratio = hd_norm(&kf, &om).unwrap() / hd_norm(&f, &om).unwrap();
        assert!(ratio < 0.5, "ratio {ratio}");
        let zero = k.apply(&ScalarField::zeros(g)).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn error_operator_is_linear() {
        let (g, om, c, pml) = setup(61);
        let nb = om.boundary_nodes().len();
        let k = ErrorOperator::new(&c, om, 1.0, &pml, vec![1.0; nb]).unwrap();
        let f = bump(g, 0.1, 0.0, 0.5);
        let h = bump(g, -0.3, 0.2, 0.4);
        let mut comb = f.scaled(2.0);
        comb.axpy(-0.5, &h).unwrap();
        let mut expect = k.apply(&f).unwrap().scaled(2.0);
        expect.axpy(-0.5, &k.apply(&h).unwrap()).unwrap();
        let got = k.apply(&comb).unwrap();
        let diff = got.sub(&expect).unwrap().max_abs();
        assert!(diff < 1e-9 * expect.max_abs().max(1.0), "{diff}");
    }
}
