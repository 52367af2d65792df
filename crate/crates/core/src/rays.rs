//! Geodesics of the metric `c^-2 dx^2` and broken rays across the square
//! interface of the piecewise speeds.
//!
//! Rays follow the Hamiltonian flow of `H = c^2 |p|^2 / 2`:
//!
//! ```text
//! x' = c^2 p,    p' = -c |p|^2 grad c
//! ```
//!
//! started with `|p| = 1 / c`, so `|x'| = c` and elapsed time equals
//! Riemannian length. Integration is classical RK4; crossings of the
//! measurement boundary and of the interface are located by bisection on
//! the last step.

use serde::Serialize;

use crate::boundary::ObservationMask;
use crate::error::{Error, Result};
use crate::grid::{Grid2D, Region, ScalarField, OMEGA_HALF_WIDTH};
use crate::speed::{Piece, SpeedModel, INTERFACE_HALF_WIDTH};

/// Grid spacing used to pick the default integration step `h / (2 max c)`.
pub const DEFAULT_RAY_H: f64 = 0.015;
/// Rays hitting the interface within this many degrees of tangency are
/// rejected.
pub const TANGENT_THRESHOLD_DEG: f64 = 0.5;
pub const DEFAULT_DEPTH_CAP: usize = 12;
pub const DEFAULT_T1_DIRECTIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayState {
    pub x: [f64; 2],
    /// Covector; `c(x) |p| = 1` along a ray.
    pub p: [f64; 2],
    pub t: f64,
}

impl RayState {
    /// Start at `x` heading along `theta` (any nonzero vector).
    pub fn launch(model: &SpeedModel, x: [f64; 2], theta: [f64; 2], piece: Piece) -> Result<Self> {
        let n = theta[0].hypot(theta[1]);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidParameter("direction must be a nonzero vector".into()));
        }
        let c = model.eval_piece(x, piece).0;
        Ok(Self { x, p: [theta[0] / (n * c), theta[1] / (n * c)], t: 0.0 })
    }

    /// Unit direction of travel.
    pub fn direction(&self) -> [f64; 2] {
        let n = self.p[0].hypot(self.p[1]);
        [self.p[0] / n, self.p[1] / n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RayEventKind {
    ExitBoundary,
    Reflect,
    Transmit,
    TotalInternalReflection,
    TrappedCap,
    TangentRejected,
}

/// Incidence data at an interface hit. Angles are measured from the normal,
/// in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterfaceAngles {
    pub alpha_in: f64,
    pub alpha_out: Option<f64>,
    pub c_minus: f64,
    pub c_plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayEvent {
    pub kind: RayEventKind,
    pub location: [f64; 2],
    pub time: f64,
    pub angles: Option<InterfaceAngles>,
    pub note: String,
}

impl RayEvent {
    fn simple(kind: RayEventKind, s: &RayState, note: &str) -> Self {
        Self { kind, location: s.x, time: s.t, angles: None, note: note.to_string() }
    }
}

/// Critical angle `asin(c_minus / c_plus)` for a ray going from speed
/// `c_minus` to a faster medium; `None` if `c_plus <= c_minus`.
pub fn critical_angle(c_minus: f64, c_plus: f64) -> Option<f64> {
    (c_plus > c_minus).then(|| (c_minus / c_plus).asin())
}

/// Largest speed over the measurement square, sampled on a fine grid.
pub fn max_speed(model: &SpeedModel) -> f64 {
    let n = 257;
    let a = OMEGA_HALF_WIDTH;
    let mut m: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let x = -a + 2.0 * a * i as f64 / (n - 1) as f64;
            let y = -a + 2.0 * a * j as f64 / (n - 1) as f64;
            let p = [x, y];
            m = m.max(model.eval_piece(p, Piece::of(p)).0);
            if !model.is_smooth() {
                m = m.max(model.eval_piece(p, Piece::of(p).other()).0);
            }
        }
    }
    m
}

fn sup_norm(x: [f64; 2]) -> f64 {
    x[0].abs().max(x[1].abs())
}

#[derive(Debug, Clone, Copy)]
enum Stop {
    Exit,
    Interface,
    Cap,
}

#[derive(Debug, Clone)]
struct Leg {
    stop: Stop,
    end: RayState,
}

/// RK4 integrator bound to a speed model.
#[derive(Debug, Clone)]
pub struct RayTracer<'a> {
    model: &'a SpeedModel,
    step: f64,
    record: bool,
}

impl<'a> RayTracer<'a> {
    /// Step `DEFAULT_RAY_H / (2 max c)`; paths are recorded.
    pub fn new(model: &'a SpeedModel) -> Self {
        let step = DEFAULT_RAY_H / (2.0 * max_speed(model));
        Self { model, step, record: true }
    }

    pub fn with_step(mut self, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParameter(format!("ray step {step}")));
        }
        self.step = step;
        Ok(self)
    }

    /// Whether to keep the polyline of each traced path.
    pub fn recording(mut self, record: bool) -> Self {
        self.record = record;
        self
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn rhs(&self, piece: Piece, x: [f64; 2], p: [f64; 2]) -> ([f64; 2], [f64; 2]) {
        let (c, g) = self.model.eval_piece(x, piece);
        let p2 = p[0] * p[0] + p[1] * p[1];
        ([c * c * p[0], c * c * p[1]], [-c * p2 * g[0], -c * p2 * g[1]])
    }

    fn rk4(&self, piece: Piece, s: &RayState, dt: f64) -> RayState {
        let add = |a: [f64; 2], b: [f64; 2], k: f64| [a[0] + k * b[0], a[1] + k * b[1]];
        let (k1x, k1p) = self.rhs(piece, s.x, s.p);
        let (k2x, k2p) = self.rhs(piece, add(s.x, k1x, dt / 2.0), add(s.p, k1p, dt / 2.0));
        let (k3x, k3p) = self.rhs(piece, add(s.x, k2x, dt / 2.0), add(s.p, k2p, dt / 2.0));
        let (k4x, k4p) = self.rhs(piece, add(s.x, k3x, dt), add(s.p, k3p, dt));
        let comb = |a: [f64; 2], k1: [f64; 2], k2: [f64; 2], k3: [f64; 2], k4: [f64; 2]| {
            [
                a[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                a[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            ]
        };
        RayState { x: comb(s.x, k1x, k2x, k3x, k4x), p: comb(s.p, k1p, k2p, k3p, k4p), t: s.t + dt }
    }

    /// Sub-step length in `(0, dt]` at which `sup_norm(x) - level` changes
    /// sign, by bisection.
    fn bisect(&self, piece: Piece, s: &RayState, dt: f64, level: f64) -> f64 {
        let side = |t: f64| sup_norm(self.rk4(piece, s, t).x) > level;
        let start = sup_norm(s.x) > level;
        let (mut lo, mut hi) = (0.0, dt);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if side(mid) == start {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * dt.max(1e-300) {
                break;
            }
        }
        hi
    }

    /// Integrate from `s` on `piece` until the ray leaves the measurement
    /// square, crosses the interface (if `interface`), or reaches `t_max`.
    fn advance(&self, mut s: RayState, piece: Piece, t_max: f64, interface: bool, path: &mut Vec<[f64; 2]>) -> Leg {
        if self.record {
            path.push(s.x);
        }
        loop {
            if s.t >= t_max {
                return Leg { stop: Stop::Cap, end: s };
            }
            let dt = self.step.min(t_max - s.t);
            let next = self.rk4(piece, &s, dt);
            let r = sup_norm(next.x);
            let exits = r > OMEGA_HALF_WIDTH;
            let crosses = interface
                && match piece {
                    Piece::Inside => r > INTERFACE_HALF_WIDTH,
                    Piece::Outside => r < INTERFACE_HALF_WIDTH,
                };
            if exits || crosses {
                let mut best = (f64::INFINITY, Stop::Cap);
                if exits {
                    best = (self.bisect(piece, &s, dt, OMEGA_HALF_WIDTH), Stop::Exit);
                }
                if crosses {
                    let tc = self.bisect(piece, &s, dt, INTERFACE_HALF_WIDTH);
                    if tc < best.0 {
                        best = (tc, Stop::Interface);
                    }
                }
                let end = self.rk4(piece, &s, best.0);
                if self.record {
                    path.push(end.x);
                }
                return Leg { stop: best.1, end };
            }
            s = next;
            if self.record {
                path.push(s.x);
            }
        }
    }
}

/// A traced smooth geodesic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Geodesic {
    pub path: Vec<[f64; 2]>,
    pub end: RayState,
    /// `ExitBoundary` or `TrappedCap`.
    pub event: RayEvent,
}

impl Geodesic {
    pub fn exited(&self) -> bool {
        self.event.kind == RayEventKind::ExitBoundary
    }

    /// Exit time, if the ray left the square.
    pub fn exit_time(&self) -> Option<f64> {
        self.exited().then_some(self.end.t)
    }
}

impl RayTracer<'_> {
    pub fn geodesic(&self, x0: [f64; 2], theta: [f64; 2], t_max: f64) -> Result<Geodesic> {
        if !self.model.is_smooth() {
            return Err(Error::InvalidParameter("speed has an interface; trace broken rays instead".into()));
        }
        if sup_norm(x0) > OMEGA_HALF_WIDTH + 1e-9 {
            return Err(Error::InvalidParameter(format!("start point {x0:?} outside the square")));
        }
        let s = RayState::launch(self.model, x0, theta, Piece::Inside)?;
        let mut path = Vec::new();
        let leg = self.advance(s, Piece::Inside, t_max, false, &mut path);
        let event = match leg.stop {
            Stop::Exit => RayEvent::simple(RayEventKind::ExitBoundary, &leg.end, ""),
            _ => RayEvent::simple(RayEventKind::TrappedCap, &leg.end, "time cap reached"),
        };
        Ok(Geodesic { path, end: leg.end, event })
    }
}

/// Geodesic from `x0` along `theta` until it leaves the square or `t_max`.
pub fn trace_geodesic(x0: [f64; 2], theta: [f64; 2], model: &SpeedModel, t_max: f64) -> Result<Geodesic> {
    RayTracer::new(model).geodesic(x0, theta, t_max)
}

/// Which branches to follow at a partially transmitting interface hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchPolicy {
    /// Full tree of reflected and transmitted branches up to the depth cap.
    All,
    /// Follow the transmitted branch when there is one.
    TransmitFirst,
    /// Always follow the reflected branch.
    Reflect,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrokenRayOptions {
    pub t_max: f64,
    pub policy: BranchPolicy,
    pub depth_cap: usize,
    pub tangent_deg: f64,
}

impl BrokenRayOptions {
    pub fn new(t_max: f64, policy: BranchPolicy) -> Self {
        Self { t_max, policy, depth_cap: DEFAULT_DEPTH_CAP, tangent_deg: TANGENT_THRESHOLD_DEG }
    }
}

/// One path of the branch tree, from the launch point to its end event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub path: Vec<[f64; 2]>,
    pub events: Vec<RayEvent>,
    pub end: RayState,
    /// Interface interactions along this branch.
    pub depth: usize,
}

impl Branch {
    pub fn end_kind(&self) -> RayEventKind {
        self.events.last().map(|e| e.kind).unwrap_or(RayEventKind::TrappedCap)
    }

    pub fn exited(&self) -> bool {
        self.end_kind() == RayEventKind::ExitBoundary
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrokenRay {
    pub branches: Vec<Branch>,
}

impl BrokenRay {
    pub fn events(&self) -> impl Iterator<Item = &RayEvent> {
        self.branches.iter().flat_map(|b| b.events.iter())
    }

    pub fn earliest_exit(&self) -> Option<&RayState> {
        self.branches.iter().filter(|b| b.exited()).map(|b| &b.end).min_by(|a, b| a.t.total_cmp(&b.t))
    }
}

enum Interaction {
    Tangent(RayEvent),
    Reflect { state: RayState, event: RayEvent },
    Split { reflected: RayState, transmitted: RayState, reflect_event: RayEvent, transmit_event: RayEvent },
}

fn reflect_across(d: [f64; 2], n: [f64; 2]) -> [f64; 2] {
    let dn = d[0] * n[0] + d[1] * n[1];
    [d[0] - 2.0 * dn * n[0], d[1] - 2.0 * dn * n[1]]
}

impl RayTracer<'_> {
    /// Snell's law at a hit of the interface at `hit` coming from `piece`.
    fn interact(&self, hit: &RayState, piece: Piece, tangent_deg: f64) -> Interaction {
        let c_minus = self.model.eval_piece(hit.x, piece).0;
        let c_plus = self.model.eval_piece(hit.x, piece.other()).0;
        let d = hit.direction();
        let [x, y] = hit.x;
        let corner_tol = 1e-9;
        let tangent = tangent_deg.to_radians();
        let with_p = |dir: [f64; 2], c: f64| RayState { x: hit.x, p: [dir[0] / c, dir[1] / c], t: hit.t };

        if (x.abs() - y.abs()).abs() <= corner_tol {
            // both faces at once: only a double total reflection is resolved
            let faces = [[x.signum(), 0.0], [0.0, y.signum()]];
            let mut dir = d;
            let mut all_tir = true;
            let mut alpha_in: f64 = 0.0;
            for n in faces {
                let cos_a = (dir[0] * n[0] + dir[1] * n[1]).abs().min(1.0);
                let sin_a = (1.0 - cos_a * cos_a).sqrt();
                alpha_in = alpha_in.max(cos_a.acos());
                if sin_a * c_plus / c_minus <= 1.0 {
                    all_tir = false;
                }
                dir = reflect_across(dir, n);
            }
            if all_tir {
                let event = RayEvent {
                    kind: RayEventKind::TotalInternalReflection,
                    location: hit.x,
                    time: hit.t,
                    angles: Some(InterfaceAngles { alpha_in, alpha_out: None, c_minus, c_plus }),
                    note: "corner".into(),
                };
                return Interaction::Reflect { state: with_p(dir, c_minus), event };
            }
            return Interaction::Tangent(RayEvent::simple(RayEventKind::TangentRejected, hit, "corner"));
        }

        let n = if x.abs() > y.abs() { [x.signum(), 0.0] } else { [0.0, y.signum()] };
        let dn = d[0] * n[0] + d[1] * n[1];
        let cos_a = dn.abs().min(1.0);
        let alpha_in = cos_a.acos();
        if (std::f64::consts::FRAC_PI_2 - alpha_in).abs() < tangent {
            return Interaction::Tangent(RayEvent {
                kind: RayEventKind::TangentRejected,
                location: hit.x,
                time: hit.t,
                angles: Some(InterfaceAngles { alpha_in, alpha_out: None, c_minus, c_plus }),
                note: String::new(),
            });
        }
        let sin_in = alpha_in.sin();
        let sin_out = sin_in * c_plus / c_minus;
        let reflected = with_p(reflect_across(d, n), c_minus);
        if sin_out > 1.0 {
            let event = RayEvent {
                kind: RayEventKind::TotalInternalReflection,
                location: hit.x,
                time: hit.t,
                angles: Some(InterfaceAngles { alpha_in, alpha_out: None, c_minus, c_plus }),
                note: String::new(),
            };
            return Interaction::Reflect { state: reflected, event };
        }
        let alpha_out = sin_out.asin();
        let tang = [d[0] - dn * n[0], d[1] - dn * n[1]];
        let tn = tang[0].hypot(tang[1]);
        let t_hat = if tn > 0.0 { [tang[0] / tn, tang[1] / tn] } else { [0.0, 0.0] };
        let s = dn.signum();
        let (so, co) = alpha_out.sin_cos();
        let dir_t = [so * t_hat[0] + co * s * n[0], so * t_hat[1] + co * s * n[1]];
        let angles = Some(InterfaceAngles { alpha_in, alpha_out: Some(alpha_out), c_minus, c_plus });
        Interaction::Split {
            reflected,
            transmitted: with_p(dir_t, c_plus),
            reflect_event: RayEvent { kind: RayEventKind::Reflect, location: hit.x, time: hit.t, angles, note: String::new() },
            transmit_event: RayEvent {
                kind: RayEventKind::Transmit,
                location: hit.x,
                time: hit.t,
                angles,
                note: String::new(),
            },
        }
    }

    /// Broken rays from `x0` along `theta` for a speed with the square
    /// interface.
    pub fn broken(&self, x0: [f64; 2], theta: [f64; 2], opts: &BrokenRayOptions) -> Result<BrokenRay> {
        self.broken_until(x0, theta, opts, |_| false)
    }

    /// As [`RayTracer::broken`], stopping as soon as `done` accepts a
    /// finished branch.
    fn broken_until(
        &self,
        x0: [f64; 2],
        theta: [f64; 2],
        opts: &BrokenRayOptions,
        mut done: impl FnMut(&Branch) -> bool,
    ) -> Result<BrokenRay> {
        if self.model.is_smooth() {
            return Err(Error::InvalidParameter("speed has no interface; trace a geodesic instead".into()));
        }
        if sup_norm(x0) > OMEGA_HALF_WIDTH + 1e-9 {
            return Err(Error::InvalidParameter(format!("start point {x0:?} outside the square")));
        }
        let piece = Piece::of(x0);
        let start = RayState::launch(self.model, x0, theta, piece)?;
        let mut stack = vec![(start, piece, Vec::new(), Vec::new(), 0usize)];
        let mut branches = Vec::new();
        while let Some((s, piece, mut path, mut events, depth)) = stack.pop() {
            let leg = self.advance(s, piece, opts.t_max, true, &mut path);
            let mut finish = |path: Vec<[f64; 2]>, events: Vec<RayEvent>, end: RayState| -> bool {
                let b = Branch { path, events, end, depth };
                let stop = done(&b);
                branches.push(b);
                stop
            };
            match leg.stop {
                Stop::Exit => {
                    events.push(RayEvent::simple(RayEventKind::ExitBoundary, &leg.end, ""));
                    if finish(path, events, leg.end) {
                        break;
                    }
                }
                Stop::Cap => {
                    events.push(RayEvent::simple(RayEventKind::TrappedCap, &leg.end, "time cap reached"));
                    if finish(path, events, leg.end) {
                        break;
                    }
                }
                Stop::Interface if depth >= opts.depth_cap => {
                    events.push(RayEvent::simple(RayEventKind::TrappedCap, &leg.end, "depth cap reached"));
                    if finish(path, events, leg.end) {
                        break;
                    }
                }
                Stop::Interface => match self.interact(&leg.end, piece, opts.tangent_deg) {
                    Interaction::Tangent(e) => {
                        events.push(e);
                        if finish(path, events, leg.end) {
                            break;
                        }
                    }
                    Interaction::Reflect { state, event } => {
                        events.push(event);
                        stack.push((state, piece, path, events, depth + 1));
                    }
                    Interaction::Split { reflected, transmitted, reflect_event, transmit_event } => {
                        let follow_r = matches!(opts.policy, BranchPolicy::All | BranchPolicy::Reflect);
                        let follow_t = matches!(opts.policy, BranchPolicy::All | BranchPolicy::TransmitFirst);
                        if follow_r {
                            let mut ev = events.clone();
                            ev.push(reflect_event);
                            stack.push((reflected, piece, path.clone(), ev, depth + 1));
                        }
                        if follow_t {
                            events.push(transmit_event);
                            stack.push((transmitted, piece.other(), path, events, depth + 1));
                        }
                    }
                },
            }
        }
        Ok(BrokenRay { branches })
    }
}

/// Broken rays with the default step.
pub fn trace_broken_ray(
    x0: [f64; 2],
    theta: [f64; 2],
    model: &SpeedModel,
    t_max: f64,
    policy: BranchPolicy,
) -> Result<BrokenRay> {
    RayTracer::new(model).broken(x0, theta, &BrokenRayOptions::new(t_max, policy))
}

/// Fraction of visible directions at sampled nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityMap {
    pub nodes: Vec<(usize, usize)>,
    pub fraction: Vec<f64>,
    /// Fractions spread over the region for plotting (nearest sample),
    /// one outside the region.
    pub field: ScalarField,
}

impl VisibilityMap {
    pub fn fraction_at(&self, i: usize, j: usize) -> Option<f64> {
        self.nodes.iter().position(|&n| n == (i, j)).map(|k| self.fraction[k])
    }
}

fn direction(k: usize, n: usize) -> [f64; 2] {
    let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
    [a.cos(), a.sin()]
}

impl RayTracer<'_> {
    /// Does a ray from `x` along `theta` reach an observed boundary point
    /// (`chi > 0`) within time `t`?
    pub fn reaches_observed(&self, x: [f64; 2], theta: [f64; 2], t: f64, mask: &ObservationMask) -> Result<bool> {
        if self.model.is_smooth() {
            let g = self.geodesic(x, theta, t)?;
            Ok(g.exited() && mask.eval(g.end.x) > 0.0)
        } else {
            let opts = BrokenRayOptions::new(t, BranchPolicy::All);
            let mut seen = false;
            self.broken_until(x, theta, &opts, |b| {
                seen = b.exited() && mask.eval(b.end.x) > 0.0;
                seen
            })?;
            Ok(seen)
        }
    }
}

/// Visible fraction of `n_dirs` directions at every `stride`-th node of
/// `region`. A direction is visible when the ray reaches the observed part
/// of the boundary within time `t` forwards or backwards.
pub fn visibility_classify(
    grid: &Grid2D,
    region: &Region,
    model: &SpeedModel,
    t: f64,
    n_dirs: usize,
    mask: &ObservationMask,
    stride: usize,
) -> Result<VisibilityMap> {
    if n_dirs < 8 {
        return Err(Error::InvalidParameter(format!("need at least 8 directions, got {n_dirs}")));
    }
    let stride = stride.max(1);
    let tracer = RayTracer::new(model).recording(false);
    let mut nodes = Vec::new();
    let mut fraction = Vec::new();
    for j in (region.j0..=region.j1).step_by(stride) {
        for i in (region.i0..=region.i1).step_by(stride) {
            let x = grid.point(i, j);
            let mut visible = 0;
            for k in 0..n_dirs {
                let d = direction(k, n_dirs);
                if tracer.reaches_observed(x, d, t, mask)? || tracer.reaches_observed(x, [-d[0], -d[1]], t, mask)? {
                    visible += 1;
                }
            }
            nodes.push((i, j));
            fraction.push(visible as f64 / n_dirs as f64);
        }
    }
    let mut field = ScalarField::constant(*grid, 1.0);
    for (i, j) in region.nodes() {
        let si = region.i0 + ((i - region.i0 + stride / 2) / stride * stride).min((region.i1 - region.i0) / stride * stride);
        let sj = region.j0 + ((j - region.j0 + stride / 2) / stride * stride).min((region.j1 - region.j0) / stride * stride);
        let cols = (region.i1 - region.i0) / stride + 1;
        let k = (sj - region.j0) / stride * cols + (si - region.i0) / stride;
        field.set(i, j, fraction[k]);
    }
    Ok(VisibilityMap { nodes, fraction, field })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum T1Estimate {
    /// Longest sampled maximal geodesic.
    Finite { value: f64 },
    /// Some sampled geodesic was longer than the cap.
    ExceedsCap { cap: f64 },
}

/// Estimate of the longest maximal geodesic: `max (tau_+ + |tau_-|)` over
/// every `stride`-th node of `region` and `n_dirs` directions.
pub fn estimate_t1(
    grid: &Grid2D,
    region: &Region,
    model: &SpeedModel,
    stride: usize,
    n_dirs: usize,
    cap: f64,
) -> Result<T1Estimate> {
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(Error::InvalidParameter(format!("cap {cap} must be finite and positive")));
    }
    let tracer = RayTracer::new(model).recording(false);
    let stride = stride.max(1);
    let mut best: f64 = 0.0;
    for j in (region.j0..=region.j1).step_by(stride) {
        for i in (region.i0..=region.i1).step_by(stride) {
            let x = grid.point(i, j);
            // theta and -theta give the same chord
            for k in 0..n_dirs.div_ceil(2) {
                let d = direction(k, n_dirs);
                let fwd = tracer.geodesic(x, d, cap)?;
                let Some(tp) = fwd.exit_time() else {
                    return Ok(T1Estimate::ExceedsCap { cap });
                };
                let bwd = tracer.geodesic(x, [-d[0], -d[1]], cap - tp)?;
                let Some(tm) = bwd.exit_time() else {
                    return Ok(T1Estimate::ExceedsCap { cap });
                };
                best = best.max(tp + tm);
            }
        }
    }
    Ok(T1Estimate::Finite { value: best })
}

/// Principal symbol `1 - chi(x_+)/2 - chi(x_-)/2` of the error operator at
/// `(x, xi)`, with `x_+-` the exit points of the geodesic through `x` along
/// `+-xi`. Fails if either half does not exit within `cap`.
pub fn symbol_of_k(
    x: [f64; 2],
    xi: [f64; 2],
    chi: impl Fn([f64; 2]) -> f64,
    model: &SpeedModel,
    cap: f64,
) -> Result<f64> {
    let tracer = RayTracer::new(model).recording(false);
    let fwd = tracer.geodesic(x, xi, cap)?;
    let bwd = tracer.geodesic(x, [-xi[0], -xi[1]], cap)?;
    if !fwd.exited() || !bwd.exited() {
        return Err(Error::Trapped(cap));
    }
    Ok(1.0 - 0.5 * chi(fwd.end.x) - 0.5 * chi(bwd.end.x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(v: f64) -> SpeedModel {
        SpeedModel::constant(v).unwrap()
    }

    #[test]
    fn straight_rays_for_constant_speed() {
        let g1 = trace_geodesic([0.0, 0.0], [1.0, 0.0], &c(1.0), 10.0).unwrap();
        assert!(g1.exited());
        assert!((g1.end.t - 1.28).abs() < 1e-3);
        assert!((g1.end.x[0] - 1.28).abs() < 1e-9 && g1.end.x[1].abs() < 1e-12);
        let g2 = trace_geodesic([0.0, 0.0], [1.0, 0.0], &c(2.0), 10.0).unwrap();
        assert!((g2.end.t - 0.64).abs() < 1e-3);
        assert!((g1.end.x[0] - g2.end.x[0]).abs() < 1e-9);
    }

    #[test]
    fn trapping_speed_has_long_geodesics() {
        let m = SpeedModel::c3();
        let tracer = RayTracer::new(&m).recording(false);
        let starts = [[0.3, 0.6], [0.4, 0.6], [0.2, 0.7]];
        let long = starts.iter().flat_map(|&x| (0..16).map(move |k| (x, k))).any(|(x, k)| {
            let g = tracer.geodesic(x, direction(k, 16), 20.0).unwrap();
            !g.exited()
        });
        assert!(long, "no geodesic of length 20");
    }

    #[test]
    fn time_cap_is_reported() {
        let g = trace_geodesic([0.0, 0.0], [1.0, 0.0], &c(1.0), 0.5).unwrap();
        assert_eq!(g.event.kind, RayEventKind::TrappedCap);
        assert!(trace_geodesic([0.0, 0.0], [0.0, 0.0], &c(1.0), 1.0).is_err());
        assert!(trace_geodesic([0.0, 0.0], [1.0, 0.0], &SpeedModel::c4(), 1.0).is_err());
    }

    #[test]
    fn critical_angle_for_doubling_speed() {
        let a0 = critical_angle(0.8, 1.6).unwrap();
        assert!((a0 - 30f64.to_radians()).abs() < 1e-12);
        assert!(critical_angle(1.6, 0.8).is_none());
    }

    #[test]
    fn normal_incidence_transmits_straight() {
        let r = trace_broken_ray([0.0, 0.3], [1.0, 0.0], &SpeedModel::c4(), 5.0, BranchPolicy::TransmitFirst).unwrap();
        let t = r.events().find(|e| e.kind == RayEventKind::Transmit).expect("transmitted");
        let a = t.angles.unwrap();
        assert!(a.alpha_in.abs() < 1e-12 && a.alpha_out.unwrap().abs() < 1e-12);
        let exit = r.earliest_exit().unwrap();
        assert!((exit.x[1] - 0.3).abs() < 1e-9);
        // 1 at 0.8, then 0.2 in the band and a short ramp
        assert!(exit.t > 1.0 / 0.8);
    }

    #[test]
    fn forty_five_degrees_is_totally_reflected_and_trapped() {
        let m = SpeedModel::c4();
        let r = trace_broken_ray([0.0, 0.3], [1.0, 1.0], &m, 50.0, BranchPolicy::All).unwrap();
        assert_eq!(r.branches.len(), 1);
        let b = &r.branches[0];
        assert!(!b.exited());
        let tir: Vec<_> = b.events.iter().filter(|e| e.kind == RayEventKind::TotalInternalReflection).collect();
        assert!(tir.len() >= 12);
        for e in tir {
            let a = e.angles.unwrap();
            assert!((a.alpha_in - 45f64.to_radians()).abs() < 1e-8);
        }
        // the diagonal hits the corners
        let d = trace_broken_ray([0.0, 0.0], [0.7, 0.7], &m, 50.0, BranchPolicy::All).unwrap();
        assert!(d.events().any(|e| e.kind == RayEventKind::TotalInternalReflection));
        assert!(d.earliest_exit().is_none());
    }

    #[test]
    fn tangent_hits_are_rejected() {
        let m = SpeedModel::c4();
        // from the band, skimming the top face at 0.2 degrees off tangency
        let a = 0.2f64.to_radians();
        let r = trace_broken_ray([-0.9, 1.001], [a.cos(), -a.sin()], &m, 5.0, BranchPolicy::All).unwrap();
        assert!(r.events().any(|e| e.kind == RayEventKind::TangentRejected), "{:?}", r.events().collect::<Vec<_>>());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn snell_holds_for_every_transmission(y0 in -0.9f64..0.9, ang in -1.4f64..1.4, inside in any::<bool>()) {
            let m = SpeedModel::c4();
            let x0 = if inside { [0.0, y0] } else { [-1.1, y0] };
            let r = trace_broken_ray(x0, [ang.cos(), ang.sin()], &m, 6.0, BranchPolicy::All).unwrap();
            for e in r.events().filter(|e| e.kind == RayEventKind::Transmit) {
                let a = e.angles.unwrap();
                let lhs = a.c_plus * a.alpha_in.sin();
                let rhs = a.c_minus * a.alpha_out.unwrap().sin();
                prop_assert!((lhs - rhs).abs() < 1e-8);
            }
            for e in r.events().filter(|e| e.kind == RayEventKind::TotalInternalReflection && e.note.is_empty()) {
                let a = e.angles.unwrap();
                prop_assert!(a.c_plus * a.alpha_in.sin() > a.c_minus);
            }
        }

        #[test]
        fn hamiltonian_is_conserved(x in -1.0f64..1.0, y in -1.0f64..1.0, ang in 0.0f64..6.28) {
            let m = SpeedModel::c1();
            let g = trace_geodesic([x, y], [ang.cos(), ang.sin()], &m, 10.0).unwrap();
            let s = g.end;
            let h = m.eval(s.x[0], s.x[1]) * s.p[0].hypot(s.p[1]);
            prop_assert!((h - 1.0).abs() < 1e-6 * s.t.max(1.0));
        }

        #[test]
        fn retracing_returns_to_start(x in -1.0f64..1.0, y in -1.0f64..1.0, ang in 0.0f64..6.28) {
            let m = SpeedModel::c1();
            let g = trace_geodesic([x, y], [ang.cos(), ang.sin()], &m, 10.0).unwrap();
            prop_assume!(g.exited());
            let d = g.end.direction();
            let back = trace_geodesic(g.end.x, [-d[0], -d[1]], &m, g.end.t).unwrap();
            let e = back.end.x;
            prop_assert!((e[0] - x).hypot(e[1] - y) < 1e-4);
            let bd = back.end.direction();
            prop_assert!((bd[0] + ang.cos()).hypot(bd[1] + ang.sin()) < 1e-4);
        }
    }

    #[test]
    fn symbol_values() {
        let m = c(1.0);
        let x = [0.2, -0.3];
        assert_eq!(symbol_of_k(x, [1.0, 0.5], |_| 1.0, &m, 10.0).unwrap(), 0.0);
        assert_eq!(symbol_of_k(x, [1.0, 0.5], |_| 0.0, &m, 10.0).unwrap(), 1.0);
        let one_side = |p: [f64; 2]| if p[0] > 1.27 { 1.0 } else { 0.0 };
        assert_eq!(symbol_of_k(x, [1.0, 0.0], one_side, &m, 10.0).unwrap(), 0.5);
        assert!(matches!(symbol_of_k([-0.25, 0.0], [1.0, 0.0], |_| 1.0, &SpeedModel::c3(), 0.5), Err(Error::Trapped(_))));
    }

    #[test]
    fn t1_for_constant_speed_is_the_diagonal() {
        let g = Grid2D::default_box(201);
        let r = Region::omega(&g).unwrap();
        // the centre node lies on every stride-5 lattice of the square
        match estimate_t1(&g, &r, &c(1.0), 5, 64, 10.0).unwrap() {
            T1Estimate::Finite { value } => {
                let diag = 2.0 * 1.275 * 2f64.sqrt();
                assert!((value - diag).abs() < 0.02 * diag, "{value}");
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(estimate_t1(&g, &r, &c(1.0), 50, 64, 2.0).unwrap(), T1Estimate::ExceedsCap { cap: 2.0 });
    }

    #[test]
    fn c1_visibility_at_twice_the_critical_time() {
        let g = Grid2D::default_box(41);
        let r = Region::omega(&g).unwrap();
        let c1 = SpeedModel::c1();
        // T1 lies in (3, 4), so at T = 2.35 > T1 / 2 one half of every chord exits in time
        match estimate_t1(&g, &r, &c1, 4, 32, 20.0).unwrap() {
            T1Estimate::Finite { value } => assert!(value > 3.0 && value < 4.0, "{value}"),
            other => panic!("{other:?}"),
        }
        let full = ObservationMask::full();
        let late = visibility_classify(&g, &r, &c1, 2.35, 16, &full, 4).unwrap();
        assert!(late.fraction.iter().all(|&f| f == 1.0));
        let early = visibility_classify(&g, &r, &c1, 0.8, 16, &full, 4).unwrap();
        assert!(early.fraction.iter().any(|&f| f < 1.0));
    }

    #[test]
    fn constant_speed_sees_everything() {
        let g = Grid2D::default_box(41);
        let r = Region::omega(&g).unwrap();
        let v = visibility_classify(&g, &r, &c(1.0), 4.0, 16, &ObservationMask::full(), 4).unwrap();
        assert!(v.fraction.iter().all(|&f| f == 1.0));
        assert!(v.field.data.iter().all(|&f| f == 1.0));
        assert!(visibility_classify(&g, &r, &c(1.0), 4.0, 4, &ObservationMask::full(), 4).is_err());
    }
}
