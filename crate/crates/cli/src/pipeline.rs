//! The experiment pipeline: phantom, forward data, optional noise, time
//! reversal and/or the Neumann series, metrics and artifacts.

use serde::Serialize;
use thermoacoustic::eikonal::fast_sweep;
use thermoacoustic::grid::{l2_rel_error, Grid2D, Region, ScalarField};
use thermoacoustic::io::{slices_csv, Slice};
use thermoacoustic::neumann::{NsOptions, ReportSummary, Reconstructor};
use thermoacoustic::phantom::{add_noise, image_phantom, load_image_phantom, shepp_logan, stripes_image};
use thermoacoustic::speed::{eval_speed, SpeedModel};
use thermoacoustic::wave::PmlProfile;
use thermoacoustic::boundary::ObservationMask;

use crate::config::{Experiment, Method, MethodKind, Noise, Phantom, TimeChoice};
use crate::error::{CliError, Result};
use crate::manifest::{Manifest, Outputs};

pub fn make_phantom(phantom: &Phantom, grid: &Grid2D) -> Result<ScalarField> {
    let fit = |hw: f64| Region::centered(grid, hw);
    Ok(match phantom {
        Phantom::SheppLogan { disks } => shepp_logan(grid, disks)?,
        Phantom::Stripes { fit_half_width } => image_phantom(&stripes_image(256, 256), grid, &fit(*fit_half_width)?)?,
        Phantom::Image { path, fit_half_width } => load_image_phantom(path, grid, &fit(*fit_half_width)?)?,
        Phantom::Field { path } => {
            let f = thermoacoustic::io::read_field(path)?;
            f.check_grid(grid).map_err(|_| CliError::Config("phantom field grid differs from the experiment grid".into()))?;
            f
        }
    })
}

/// Critical time `T0` for the observed sides.
pub fn critical_time(c: &ScalarField, omega: &Region, mask: &ObservationMask) -> Result<f64> {
    Ok(fast_sweep(c, omega, &mask.gamma(omega))?.critical_time())
}

#[derive(Debug, Clone, Serialize)]
pub struct GridInfo {
    pub nx: usize,
    pub ny: usize,
    pub bounds: [f64; 4],
}

impl From<&Grid2D> for GridInfo {
    fn from(g: &Grid2D) -> Self {
        Self { nx: g.nx, ny: g.ny, bounds: [g.x_min, g.x_max, g.y_min, g.y_max] }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrResult {
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NsResult {
    #[serde(flatten)]
    pub summary: ReportSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub speed: String,
    pub speed_params: Vec<f64>,
    pub grid: GridInfo,
    pub phantom: Phantom,
    pub mask: ObservationMask,
    pub noise: Option<Noise>,
    pub method: Method,
    #[serde(rename = "T0")]
    pub t0: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "T_mult")]
    pub t_mult: Option<f64>,
    pub n_t: usize,
    pub dt: f64,
    /// Time reversal baseline (method `tr` or `both`).
    pub tr: Option<TrResult>,
    /// Neumann series (method `ns` or `both`).
    pub ns: Option<NsResult>,
    /// Field files of the iterates: the partial sums of the series, or the
    /// single time reversal image for method `tr`.
    pub iterates: Vec<String>,
    /// Error of the final reconstruction of the requested method.
    pub rel_error: f64,
}

pub fn speed_name(m: &SpeedModel) -> String {
    serde_json::to_value(m.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

/// Run `exp`, writing every artifact into `out`.
pub fn run_experiment(exp: &Experiment, out: &mut Outputs) -> Result<RunReport> {
    let g = exp.grid;
    let omega = Region::omega(&g)?;
    let c = eval_speed(&exp.speed, &g)?;
    let f = make_phantom(&exp.phantom, &g)?;
    let t0 = critical_time(&c, &omega, &exp.mask)?;
    let (t, t_mult) = match exp.time {
        TimeChoice::Absolute(t) => (t, None),
        TimeChoice::Multiple(m) => (m * t0, Some(m)),
    };
    if !t.is_finite() {
        return Err(CliError::Config(format!("final time T = {t} is not finite")));
    }

    let rec = Reconstructor::new(&c, omega, t, &PmlProfile::default_for(&g))?;
    let mut trace = rec.measure(&f, &exp.mask.sample(&g, &omega))?;
    if let Some(n) = exp.noise {
        trace = add_noise(&trace, n.level, n.seed)?;
    }

    out.field("speed", &c)?;
    out.field("phantom", &f)?;
    out.pgm("phantom.pgm", &f, &omega)?;
    out.trace("trace.trc", &trace)?;

    let mut columns: Vec<(String, ScalarField)> = vec![("truth".into(), f.clone())];
    let tr = if matches!(exp.method.kind, MethodKind::Tr | MethodKind::Both) {
        let g_tr = rec.reconstruct_tr(&trace)?;
        let rel_error = l2_rel_error(&g_tr, &f, &omega)?;
        out.field("tr", &g_tr)?;
        out.pgm("tr.pgm", &g_tr, &omega)?;
        columns.push(("tr".into(), g_tr));
        Some(TrResult { rel_error })
    } else {
        None
    };

    let mut iterates = vec!["tr.bin".to_string()];
    let ns = if matches!(exp.method.kind, MethodKind::Ns | MethodKind::Both) {
        let opts = NsOptions {
            max_terms: exp.method.max_terms,
            tol: exp.method.tol,
            region_k: if exp.method.project_interface { Some(Region::centered(&g, thermoacoustic::speed::INTERFACE_HALF_WIDTH)?) } else { None },
        };
        let report = rec.reconstruct_ns(&trace, &opts, Some(&f))?;
        iterates.clear();
        for (k, it) in report.iterates.iter().enumerate() {
            let stem = format!("ns_iter_{k:02}");
            out.field(&stem, it)?;
            iterates.push(format!("{stem}.bin"));
        }
        out.pgm("ns.pgm", report.result(), &omega)?;
        columns.push(("ns".into(), report.result().clone()));
        Some(NsResult { summary: report.summary() })
    } else {
        None
    };

    let refs: Vec<(&str, &ScalarField)> = columns.iter().map(|(n, f)| (n.as_str(), f)).collect();
    out.bytes("slice_x.csv", slices_csv(&refs, Slice::X(0.0))?.as_bytes())?;
    out.bytes("slice_y.csv", slices_csv(&refs, Slice::Y(0.0))?.as_bytes())?;

    let rel_error = match (&ns, &tr) {
        (Some(n), _) => n.summary.rel_error.unwrap_or(f64::NAN),
        (None, Some(t)) => t.rel_error,
        (None, None) => unreachable!("method selects at least one reconstruction"),
    };
    let report = RunReport {
        name: exp.name.clone(),
        speed: speed_name(&exp.speed),
        speed_params: exp.speed.params.clone(),
        grid: GridInfo::from(&g),
        phantom: exp.phantom.clone(),
        mask: exp.mask.clone(),
        noise: exp.noise,
        method: exp.method,
        t0,
        t,
        t_mult,
        n_t: rec.forward().n_t(),
        dt: rec.forward().dt(),
        tr,
        ns,
        iterates,
        rel_error,
    };
    out.json("report.json", &report)?;
    Ok(report)
}

/// Run and finish the manifest.
pub fn run_to_dir(exp: &Experiment, dir: &std::path::Path) -> Result<(RunReport, Manifest)> {
    let mut out = Outputs::create(dir)?;
    let report = run_experiment(exp, &mut out)?;
    let manifest = out.finish()?;
    Ok((report, manifest))
}
