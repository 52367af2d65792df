//! Sound-speed models.
//!
//! Three smooth speeds (`c1` non-trapping, `c2` radial trapping, `c3`
//! trapping) are blended to `1` near the boundary of the measurement square
//! by a quintic smoothstep over a collar of width `cutoff_width`. The two
//! piecewise speeds `c4` and `c5` jump across the interface
//! `S = boundary of [-1, 1]^2` (a slow interior and a fast "skull" band) and
//! ramp back to `1` before the measurement boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid2D, ScalarField, OMEGA_HALF_WIDTH};

use std::f64::consts::PI;

/// Half-width of the square interface of the piecewise speeds.
pub const INTERFACE_HALF_WIDTH: f64 = 1.0;
/// Default width of the smooth transition to `1` near the boundary.
pub const DEFAULT_CUTOFF_WIDTH: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedKind {
    C1,
    C2,
    C3,
    C4,
    C5,
    Constant,
    Custom,
}

impl SpeedKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c1" => Some(Self::C1),
            "c2" => Some(Self::C2),
            "c3" => Some(Self::C3),
            "c4" => Some(Self::C4),
            "c5" => Some(Self::C5),
            "constant" => Some(Self::Constant),
            "custom" => Some(Self::Custom),
            _ => None,
        }
    }
}

/// Which side of the square interface a point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Piece {
    Inside,
    Outside,
}

impl Piece {
    pub fn of(p: [f64; 2]) -> Self {
        if p[0].abs().max(p[1].abs()) <= INTERFACE_HALF_WIDTH {
            Piece::Inside
        } else {
            Piece::Outside
        }
    }

    pub fn other(self) -> Self {
        match self {
            Piece::Inside => Piece::Outside,
            Piece::Outside => Piece::Inside,
        }
    }
}

/// A sound speed `c(x) > 0`.
///
/// Parameters by kind:
/// * `constant`: `[value]` (applied everywhere, no cutoff)
/// * `c1`, `c2`, `c3`: none
/// * `c4`: `[interior, band, band_outer]`, defaults `[0.8, 1.6, 1.2]`
/// * `c5`: `[band, band_outer]`, defaults `[1.6, 1.2]`
/// * `custom`: sampled field given through [`SpeedModel::custom`]
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedModel {
    pub kind: SpeedKind,
    pub params: Vec<f64>,
    pub cutoff_width: f64,
    sampled: Option<ScalarField>,
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

fn smoothstep_deriv(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    30.0 * t * t * (t - 1.0) * (t - 1.0)
}

fn c1_raw(x: f64, y: f64) -> f64 {
    1.0 + 0.2 * (2.0 * PI * x).sin() + 0.1 * (2.0 * PI * y).cos()
}

fn c1_grad(x: f64, y: f64) -> [f64; 2] {
    [0.4 * PI * (2.0 * PI * x).cos(), -0.2 * PI * (2.0 * PI * y).sin()]
}

fn c2_radial(r: f64) -> (f64, f64) {
    let q = 9.0 * r * r;
    let bump = (-90.0 * r * r).exp();
    let ring_arg = 3.0 * r - 2.0;
    let ring = (-10.0 * ring_arg * ring_arg).exp();
    let value = q / (1.0 + q) + bump - 0.4 * ring;
    let deriv = 18.0 * r / ((1.0 + q) * (1.0 + q)) - 180.0 * r * bump + 24.0 * ring_arg * ring;
    (value, deriv)
}

fn c2_raw(x: f64, y: f64) -> f64 {
    c2_radial(x.hypot(y)).0
}

fn c2_grad(x: f64, y: f64) -> [f64; 2] {
    let r = x.hypot(y);
    if r == 0.0 {
        return [0.0, 0.0];
    }
    let d = c2_radial(r).1;
    [d * x / r, d * y / r]
}

fn c3_raw(x: f64, y: f64) -> f64 {
    1.25 + (2.0 * PI * x).sin() * (2.0 * PI * y).cos()
}

fn c3_grad(x: f64, y: f64) -> [f64; 2] {
    let (sx, cx) = (2.0 * PI * x).sin_cos();
    let (sy, cy) = (2.0 * PI * y).sin_cos();
    [2.0 * PI * cx * cy, -2.0 * PI * sx * sy]
}

impl SpeedModel {
    pub fn new(kind: SpeedKind, params: Vec<f64>) -> Result<Self> {
        let params = match kind {
            SpeedKind::Constant => {
                let v = params.first().copied().unwrap_or(1.0);
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidSpeed(format!("constant speed {v} must be positive")));
                }
                vec![v]
            }
            SpeedKind::C1 | SpeedKind::C2 | SpeedKind::C3 => Vec::new(),
            SpeedKind::C4 => {
                let d = [0.8, 1.6, 1.2];
                let p: Vec<f64> = (0..3).map(|k| params.get(k).copied().unwrap_or(d[k])).collect();
                Self::check_band(p[1], p[2])?;
                if !(p[0] > 0.0) {
                    return Err(Error::InvalidSpeed("c4 interior speed must be positive".into()));
                }
                p
            }
            SpeedKind::C5 => {
                let d = [1.6, 1.2];
                let p: Vec<f64> = (0..2).map(|k| params.get(k).copied().unwrap_or(d[k])).collect();
                Self::check_band(p[0], p[1])?;
                p
            }
            SpeedKind::Custom => {
                return Err(Error::InvalidSpeed("custom speeds are built from a sampled field".into()));
            }
        };
        Ok(Self { kind, params, cutoff_width: DEFAULT_CUTOFF_WIDTH, sampled: None })
    }

    fn check_band(band: f64, outer: f64) -> Result<()> {
        if !(band > 0.0) {
            return Err(Error::InvalidSpeed("band speed must be positive".into()));
        }
        if !(outer > INTERFACE_HALF_WIDTH && outer < OMEGA_HALF_WIDTH) {
            return Err(Error::InvalidSpeed(format!("band outer half-width {outer} must lie in (1, 1.28)")));
        }
        Ok(())
    }

    pub fn constant(v: f64) -> Result<Self> {
        Self::new(SpeedKind::Constant, vec![v])
    }

    pub fn c1() -> Self {
        Self::new(SpeedKind::C1, vec![]).unwrap()
    }
    pub fn c2() -> Self {
        Self::new(SpeedKind::C2, vec![]).unwrap()
    }
    pub fn c3() -> Self {
        Self::new(SpeedKind::C3, vec![]).unwrap()
    }
    pub fn c4() -> Self {
        Self::new(SpeedKind::C4, vec![]).unwrap()
    }
    pub fn c5() -> Self {
        Self::new(SpeedKind::C5, vec![]).unwrap()
    }

    /// A user speed given at grid nodes; interpolated bicubically and
    /// blended to `1` near the measurement boundary.
    pub fn custom(field: ScalarField) -> Result<Self> {
        if let Some(k) = field.data.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::InvalidSpeed(format!("custom speed non-positive at node {k}")));
        }
        Ok(Self { kind: SpeedKind::Custom, params: Vec::new(), cutoff_width: DEFAULT_CUTOFF_WIDTH, sampled: Some(field) })
    }

    pub fn with_cutoff_width(mut self, w: f64) -> Result<Self> {
        if !(w > 0.0 && w < OMEGA_HALF_WIDTH) {
            return Err(Error::InvalidSpeed(format!("cutoff width {w}")));
        }
        self.cutoff_width = w;
        Ok(self)
    }

    /// `true` for speeds without an interior interface.
    pub fn is_smooth(&self) -> bool {
        !matches!(self.kind, SpeedKind::C4 | SpeedKind::C5)
    }

    /// Cutoff weight `w(x, y)` and its gradient; `w = 1` away from the
    /// boundary collar and `w = 0` on and outside the measurement boundary.
    fn cutoff(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        let w = self.cutoff_width;
        let tx = (OMEGA_HALF_WIDTH - x.abs()) / w;
        let ty = (OMEGA_HALF_WIDTH - y.abs()) / w;
        let (sx, sy) = (smoothstep(tx), smoothstep(ty));
        let dsx = -smoothstep_deriv(tx) * x.signum() / w;
        let dsy = -smoothstep_deriv(ty) * y.signum() / w;
        (sx * sy, [dsx * sy, sx * dsy])
    }

    fn raw_smooth(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        match self.kind {
            SpeedKind::C1 => (c1_raw(x, y), c1_grad(x, y)),
            SpeedKind::C2 => (c2_raw(x, y), c2_grad(x, y)),
            SpeedKind::C3 => (c3_raw(x, y), c3_grad(x, y)),
            SpeedKind::Custom => bicubic(self.sampled.as_ref().expect("custom speed has samples"), x, y),
            _ => unreachable!("not a smooth blended kind"),
        }
    }

    /// Speed and gradient of the formula that holds on `piece`, extended
    /// smoothly past the interface (used for one-sided limits).
    pub fn eval_piece(&self, p: [f64; 2], piece: Piece) -> (f64, [f64; 2]) {
        let [x, y] = p;
        match self.kind {
            SpeedKind::Constant => (self.params[0], [0.0, 0.0]),
            SpeedKind::C1 | SpeedKind::C2 | SpeedKind::C3 | SpeedKind::Custom => {
                let (raw, graw) = self.raw_smooth(x, y);
                let (w, gw) = self.cutoff(x, y);
                (
                    1.0 + (raw - 1.0) * w,
                    [graw[0] * w + (raw - 1.0) * gw[0], graw[1] * w + (raw - 1.0) * gw[1]],
                )
            }
            SpeedKind::C4 | SpeedKind::C5 => match piece {
                Piece::Inside => {
                    if self.kind == SpeedKind::C4 {
                        (self.params[0], [0.0, 0.0])
                    } else {
                        (c1_raw(x, y), c1_grad(x, y))
                    }
                }
                Piece::Outside => {
                    let (band, outer) = if self.kind == SpeedKind::C4 {
                        (self.params[1], self.params[2])
                    } else {
                        (self.params[0], self.params[1])
                    };
                    let r = x.abs().max(y.abs());
                    if r <= outer {
                        return (band, [0.0, 0.0]);
                    }
                    let span = OMEGA_HALF_WIDTH - outer;
                    let t = (r - outer) / span;
                    let value = 1.0 + (band - 1.0) * (1.0 - smoothstep(t));
                    let dr = -(band - 1.0) * smoothstep_deriv(t) / span;
                    let grad = if x.abs() >= y.abs() { [dr * x.signum(), 0.0] } else { [0.0, dr * y.signum()] };
                    (value, grad)
                }
            },
        }
    }

    /// `c(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.eval_piece([x, y], Piece::of([x, y])).0
    }

    /// `grad c(x, y)` on the piece containing the point.
    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        self.eval_piece([x, y], Piece::of([x, y])).1
    }
}

/// Catmull-Rom bicubic interpolation with analytic gradient.
fn bicubic(f: &ScalarField, x: f64, y: f64) -> (f64, [f64; 2]) {
    let g = &f.grid;
    let fx = ((x - g.x_min) / g.h).clamp(0.0, (g.nx - 1) as f64);
    let fy = ((y - g.y_min) / g.h).clamp(0.0, (g.ny - 1) as f64);
    let i = (fx.floor() as usize).min(g.nx - 2);
    let j = (fy.floor() as usize).min(g.ny - 2);
    let (wx, dwx) = catmull_rom(fx - i as f64);
    let (wy, dwy) = catmull_rom(fy - j as f64);
    let clamp_i = |k: isize| k.clamp(0, g.nx as isize - 1) as usize;
    let clamp_j = |k: isize| k.clamp(0, g.ny as isize - 1) as usize;
    let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
    for (b, (&wyb, &dwyb)) in wy.iter().zip(&dwy).enumerate() {
        let jj = clamp_j(j as isize + b as isize - 1);
        for (a, (&wxa, &dwxa)) in wx.iter().zip(&dwx).enumerate() {
            let ii = clamp_i(i as isize + a as isize - 1);
            let s = f.at(ii, jj);
            v += wxa * wyb * s;
            gx += dwxa * wyb * s;
            gy += wxa * dwyb * s;
        }
    }
    (v, [gx / g.h, gy / g.h])
}

fn catmull_rom(t: f64) -> ([f64; 4], [f64; 4]) {
    let t2 = t * t;
    let t3 = t2 * t;
    (
        [
            0.5 * (-t3 + 2.0 * t2 - t),
            0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
            0.5 * (-3.0 * t3 + 4.0 * t2 + t),
            0.5 * (t3 - t2),
        ],
        [
            0.5 * (-3.0 * t2 + 4.0 * t - 1.0),
            0.5 * (9.0 * t2 - 10.0 * t),
            0.5 * (-9.0 * t2 + 8.0 * t + 1.0),
            0.5 * (3.0 * t2 - 2.0 * t),
        ],
    )
}

/// Sample `model` at the nodes of `grid`.
pub fn eval_speed(model: &SpeedModel, grid: &Grid2D) -> Result<ScalarField> {
    let field = ScalarField::from_fn(*grid, |x, y| model.eval(x, y));
    if let Some(k) = field.data.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidSpeed(format!("non-positive speed {} at node {k}", field.data[k])));
    }
    Ok(field)
}
