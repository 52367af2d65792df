//! Experiment configuration: the JSON schema, its shorthand forms, and
//! validation into a resolved [`Experiment`].
//!
//! Full form:
//!
//! ```json
//! {
//!   "name": "c1_full",
//!   "grid": {"nx": 201, "bounds": [-1.5, 1.5, -1.5, 1.5]},
//!   "speed": {"kind": "c4", "params": [0.8, 1.6, 1.2]},
//!   "phantom": {"kind": "shepp_logan", "disks": [{"center": [0.8, 0.8], "radius": 0.1, "value": 1.0}]},
//!   "time": {"T_mult": 4},
//!   "mask": {"sides": "NW", "ramp": 0.2},
//!   "noise": {"level": 0.1, "seed": 7},
//!   "method": {"kind": "both", "max_terms": 9, "tol": 0.05},
//!   "output": {"dir": "runs/c1_full"}
//! }
//! ```
//!
//! Shorthand: `speed`, `phantom` and `method` may be bare strings, and
//! `T`, `T_mult`, `max_terms` and `tol` may sit at the top level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thermoacoustic::boundary::ObservationMask;
use thermoacoustic::grid::{Grid2D, Region, BOX_HALF_WIDTH};
use thermoacoustic::neumann::{DEFAULT_MAX_TERMS, DEFAULT_TOL};
use thermoacoustic::phantom::{default_disks, Disk};
use thermoacoustic::speed::{SpeedKind, SpeedModel};

use crate::error::{CliError, Result};

pub const DEFAULT_NX: usize = 201;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub bounds: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedObject {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
    pub cutoff_width: Option<f64>,
    /// Field file for `kind: "custom"`.
    pub field: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, expecting = "a speed name such as \"c1\" or an object {kind, params}")]
pub enum SpeedSpec {
    Name(String),
    Full(SpeedObject),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomObject {
    pub kind: String,
    /// Disks for `shepp_logan`; the four corner disks when absent.
    pub disks: Option<Vec<Disk>>,
    /// PGM file for `image`, field file for `field`.
    pub path: Option<PathBuf>,
    /// Half-width of the square the image is fitted into.
    pub fit_half_width: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, expecting = "a phantom name such as \"shepp_logan\" or an object {kind, ...}")]
pub enum PhantomSpec {
    Name(String),
    Full(PhantomObject),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    #[serde(rename = "T")]
    pub t: Option<f64>,
    #[serde(rename = "T_mult")]
    pub t_mult: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, expecting = "side letters such as \"NW\" or a list [\"N\", \"W\"]")]
pub enum Sides {
    Letters(String),
    List(Vec<String>),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSpec {
    pub sides: Option<Sides>,
    pub ramp: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub level: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodObject {
    pub kind: Option<String>,
    pub max_terms: Option<usize>,
    pub tol: Option<f64>,
    /// Project the series onto sources vanishing on the interface square;
    /// defaults to on for speeds with an interface.
    pub project_interface: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, expecting = "\"ns\", \"tr\", \"both\" or an object {kind, max_terms, tol}")]
pub enum MethodSpec {
    Name(String),
    Full(MethodObject),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

/// The configuration file as written.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub name: Option<String>,
    #[serde(default)]
    pub grid: GridSpec,
    pub speed: SpeedSpec,
    pub phantom: PhantomSpec,
    pub time: Option<TimeSpec>,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    #[serde(rename = "T_mult")]
    pub t_mult: Option<f64>,
    #[serde(default)]
    pub mask: MaskSpec,
    pub noise: Option<NoiseSpec>,
    pub method: Option<MethodSpec>,
    pub max_terms: Option<usize>,
    pub tol: Option<f64>,
    pub output: Option<OutputSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Ns,
    Tr,
    Both,
}

impl MethodKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ns" => Ok(Self::Ns),
            "tr" => Ok(Self::Tr),
            "both" => Ok(Self::Both),
            _ => Err(CliError::Config(format!("method must be ns, tr or both, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Method {
    pub kind: MethodKind,
    pub max_terms: usize,
    pub tol: f64,
    pub project_interface: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeChoice {
    /// `T` in time units.
    Absolute(f64),
    /// `T = m T0` with `T0` computed for the observed sides.
    Multiple(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Phantom {
    SheppLogan { disks: Vec<Disk> },
    Stripes { fit_half_width: f64 },
    Image { path: PathBuf, fit_half_width: f64 },
    Field { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Noise {
    pub level: f64,
    pub seed: u64,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub grid: Grid2D,
    pub speed: SpeedModel,
    /// Field file backing a custom speed.
    pub speed_field: Option<PathBuf>,
    pub phantom: Phantom,
    pub time: TimeChoice,
    pub mask: ObservationMask,
    pub noise: Option<Noise>,
    pub method: Method,
    pub output_dir: Option<PathBuf>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Grid with `nx x ny` nodes; the box must contain the measurement square
/// with room for the absorbing layer.
pub fn build_grid(nx: usize, ny: usize, bounds: [f64; 4]) -> Result<Grid2D> {
    let [x0, x1, y0, y1] = bounds;
    let margin = thermoacoustic::grid::OMEGA_HALF_WIDTH;
    if !(x0 < -margin && x1 > margin && y0 < -margin && y1 > margin) {
        return Err(bad(format!("grid bounds {bounds:?} must strictly contain [-1.28, 1.28]^2")));
    }
    if nx < 11 || ny < 11 {
        return Err(bad(format!("grid needs at least 11 nodes per side, got {nx} x {ny}")));
    }
    let g = Grid2D::new(nx, ny, x0, x1, y0, y1)?;
    let om = Region::omega(&g)?;
    if om.i0 == 0 || om.j0 == 0 || om.i1 + 1 >= g.nx || om.j1 + 1 >= g.ny {
        return Err(bad("grid leaves no absorbing layer around the measurement square"));
    }
    Ok(g)
}

pub fn default_bounds() -> [f64; 4] {
    [-BOX_HALF_WIDTH, BOX_HALF_WIDTH, -BOX_HALF_WIDTH, BOX_HALF_WIDTH]
}

/// Speed model from a kind name and parameters; `custom` needs a field.
pub fn build_speed(kind: &str, params: &[f64], field: Option<thermoacoustic::grid::ScalarField>) -> Result<SpeedModel> {
    let kind = SpeedKind::parse(kind).ok_or_else(|| bad(format!("unknown speed kind '{kind}'")))?;
    if kind == SpeedKind::Custom {
        let field = field.ok_or_else(|| bad("custom speed needs a field file"))?;
        return Ok(SpeedModel::custom(field)?);
    }
    if kind == SpeedKind::Constant && params.is_empty() {
        return Err(bad("constant speed needs its value in params"));
    }
    Ok(SpeedModel::new(kind, params.to_vec())?)
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(format!("{name} must be positive and finite, got {v}")))
    }
}

pub fn parse_mask(sides: &str, ramp: f64) -> Result<ObservationMask> {
    if !(ramp >= 0.0 && ramp.is_finite()) {
        return Err(bad(format!("mask ramp must be non-negative, got {ramp}")));
    }
    let letters = if sides.eq_ignore_ascii_case("all") { "NSEW" } else { sides };
    Ok(ObservationMask::from_letters(letters, ramp)?)
}

pub fn parse_phantom(kind: &str, path: Option<PathBuf>, disks: Option<Vec<Disk>>, fit: Option<f64>) -> Result<Phantom> {
    let fit_half_width = positive("fit_half_width", fit.unwrap_or(1.0))?;
    if fit_half_width >= thermoacoustic::grid::OMEGA_HALF_WIDTH {
        return Err(bad("fit_half_width must be below 1.28"));
    }
    match kind.to_ascii_lowercase().as_str() {
        "shepp_logan" | "shepp-logan" => Ok(Phantom::SheppLogan { disks: disks.unwrap_or_else(default_disks) }),
        "stripes" | "zebras" => Ok(Phantom::Stripes { fit_half_width }),
        "image" => Ok(Phantom::Image { path: path.ok_or_else(|| bad("image phantom needs a path"))?, fit_half_width }),
        "field" => Ok(Phantom::Field { path: path.ok_or_else(|| bad("field phantom needs a path"))? }),
        other => Err(bad(format!("unknown phantom kind '{other}'"))),
    }
}

impl RawConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| bad(format!("invalid config: {e}")))
    }

    /// Validate, with relative file paths taken from `base`.
    pub fn resolve(self, base: &Path, default_name: &str) -> Result<Experiment> {
        let nx = self.grid.nx.unwrap_or(DEFAULT_NX);
        let ny = self.grid.ny.unwrap_or(nx);
        let grid = build_grid(nx, ny, self.grid.bounds.unwrap_or_else(default_bounds))?;

        let (speed, speed_field) = match self.speed {
            SpeedSpec::Name(k) => (build_speed(&k, &[], None)?, None),
            SpeedSpec::Full(s) => {
                let path = s.field.map(|p| resolve_path(base, &p));
                let field = match &path {
                    Some(p) => {
                        let f = thermoacoustic::io::read_field(p)?;
                        f.check_grid(&grid).map_err(|_| bad("speed field grid differs from the experiment grid"))?;
                        Some(f)
                    }
                    None => None,
                };
                let mut m = build_speed(&s.kind, &s.params, field)?;
                if let Some(w) = s.cutoff_width {
                    m = m.with_cutoff_width(w)?;
                }
                (m, path)
            }
        };

        let phantom = match self.phantom {
            PhantomSpec::Name(k) => parse_phantom(&k, None, None, None)?,
            PhantomSpec::Full(p) => parse_phantom(&p.kind, p.path.map(|q| resolve_path(base, &q)), p.disks, p.fit_half_width)?,
        };

        let time_obj = self.time.unwrap_or_default();
        let t = [time_obj.t, self.t].into_iter().flatten().collect::<Vec<_>>();
        let m = [time_obj.t_mult, self.t_mult].into_iter().flatten().collect::<Vec<_>>();
        let time = match (t.as_slice(), m.as_slice()) {
            ([v], []) => TimeChoice::Absolute(positive("T", *v)?),
            ([], [v]) => TimeChoice::Multiple(positive("T_mult", *v)?),
            ([], []) => return Err(bad("time needs T or T_mult")),
            _ => return Err(bad("give exactly one of T and T_mult")),
        };

        let sides = match self.mask.sides {
            None => "NSEW".to_string(),
            Some(Sides::Letters(s)) => s,
            Some(Sides::List(v)) => v.concat(),
        };
        let mask = parse_mask(&sides, self.mask.ramp.unwrap_or(0.2))?;

        let noise = match self.noise {
            Some(n) if !(n.level >= 0.0 && n.level.is_finite()) => {
                return Err(bad(format!("noise level must be non-negative, got {}", n.level)))
            }
            Some(n) => Some(Noise { level: n.level, seed: n.seed }),
            None => None,
        };

        let (kind, obj) = match self.method {
            None => (MethodKind::Ns, None),
            Some(MethodSpec::Name(s)) => (MethodKind::parse(&s)?, None),
            Some(MethodSpec::Full(o)) => (o.kind.as_deref().map(MethodKind::parse).transpose()?.unwrap_or(MethodKind::Ns), Some(o)),
        };
        let pick = |inner: Option<usize>, outer: Option<usize>, name: &str| -> Result<Option<usize>> {
            match (inner, outer) {
                (Some(_), Some(_)) => Err(bad(format!("{name} given twice"))),
                (a, b) => Ok(a.or(b)),
            }
        };
        let max_terms = pick(obj.as_ref().and_then(|o| o.max_terms), self.max_terms, "max_terms")?.unwrap_or(DEFAULT_MAX_TERMS);
        if max_terms == 0 {
            return Err(bad("max_terms must be at least 1"));
        }
        let tol = match (obj.as_ref().and_then(|o| o.tol), self.tol) {
            (Some(_), Some(_)) => return Err(bad("tol given twice")),
            (a, b) => a.or(b).unwrap_or(DEFAULT_TOL),
        };
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(bad(format!("tol must be non-negative, got {tol}")));
        }
        let project_interface = obj.as_ref().and_then(|o| o.project_interface).unwrap_or(!speed.is_smooth());
        let method = Method { kind, max_terms, tol, project_interface };

        let name = self.name.unwrap_or_else(|| default_name.to_string());
        let output_dir = self.output.and_then(|o| o.dir);
        Ok(Experiment { name, grid, speed, speed_field, phantom, time, mask, noise, method, output_dir })
    }
}

/// Read and validate a configuration file.
pub fn load(path: &Path) -> Result<Experiment> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    RawConfig::from_json(&text)?.resolve(base, stem)
}
