//! Subcommand definitions and their implementations.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thermoacoustic::grid::{l2_rel_error, Grid2D, Region, ScalarField};
use thermoacoustic::io::{rays_csv, read_field, read_trace};
use thermoacoustic::neumann::{NsOptions, Reconstructor, DEFAULT_MAX_TERMS, DEFAULT_TOL};
use thermoacoustic::phantom::add_noise;
use thermoacoustic::rays::{BranchPolicy, RayTracer, BrokenRayOptions};
use thermoacoustic::speed::{eval_speed, SpeedModel};
use thermoacoustic::wave::PmlProfile;

use crate::config::{self, build_grid, build_speed, default_bounds, parse_mask, parse_phantom, MethodKind};
use crate::error::{CliError, Result};
use crate::manifest::{output_dir, Outputs};
use crate::pipeline::{critical_time, make_phantom, run_to_dir};

#[derive(Debug, Parser)]
#[command(name = "tat", version, about = "Thermoacoustic reconstruction with variable sound speed")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run experiments described by JSON config files.
    Run(RunArgs),
    /// Synthesize boundary data for a phantom.
    Forward(ForwardArgs),
    /// Reconstruct a source from a trace file.
    Reconstruct(ReconstructArgs),
    /// Travel times to the observed boundary and the critical time T0.
    Eikonal(EikonalArgs),
    /// Trace a (possibly broken) ray.
    Raytrace(RaytraceArgs),
    /// Write a phantom as a field file and a PGM image.
    Phantom(PhantomArgs),
    /// Tabulate time reversal against the Neumann series from run reports.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Output directory; relative paths sit under $TAT_OUTPUT_ROOT
    /// (default `tat-out`).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Nodes per side of the computational box.
    #[arg(long, default_value_t = config::DEFAULT_NX)]
    pub nx: usize,
    /// Box bounds x_min,x_max,y_min,y_max.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub bounds: Option<Vec<f64>>,
}

impl GridArgs {
    fn grid(&self) -> Result<Grid2D> {
        let b = match &self.bounds {
            Some(v) => pair_or_quad::<4>("bounds", v)?,
            None => default_bounds(),
        };
        build_grid(self.nx, self.nx, b)
    }
}

#[derive(Debug, Args)]
pub struct SpeedArgs {
    /// c1, c2, c3, c4, c5, constant or custom.
    #[arg(long, default_value = "c1")]
    pub speed: String,
    /// Comma-separated speed parameters.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub speed_params: Vec<f64>,
    /// Field file for a custom speed.
    #[arg(long)]
    pub speed_field: Option<PathBuf>,
}

impl SpeedArgs {
    fn model(&self, grid: &Grid2D) -> Result<SpeedModel> {
        let field = match &self.speed_field {
            Some(p) => {
                let f = read_field(p)?;
                f.check_grid(grid)?;
                Some(f)
            }
            None => None,
        };
        build_speed(&self.speed, &self.speed_params, field)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Config files; each runs into its own directory.
    #[arg(required = true)]
    pub configs: Vec<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub speed: SpeedArgs,
    /// shepp_logan, stripes, image or field.
    #[arg(long, default_value = "shepp_logan")]
    pub phantom: String,
    /// PGM or field file for the image and field phantoms.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Final time.
    #[arg(long = "T", conflicts_with = "t_mult")]
    pub t: Option<f64>,
    /// Final time as a multiple of T0.
    #[arg(long = "T-mult", default_value_t = 4.0)]
    pub t_mult: f64,
    /// Observed sides, e.g. NW, or `all`.
    #[arg(long, default_value = "all")]
    pub mask: String,
    #[arg(long, default_value_t = 0.2)]
    pub ramp: f64,
    /// Relative L2 noise level.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Trace file written by `forward`.
    #[arg(long)]
    pub trace: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub speed: SpeedArgs,
    /// Final time; defaults to the trace duration.
    #[arg(long = "T")]
    pub t: Option<f64>,
    /// ns, tr or both.
    #[arg(long, default_value = "ns")]
    pub method: String,
    #[arg(long, default_value_t = DEFAULT_MAX_TERMS)]
    pub max_terms: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Field file of the true source, for error reporting.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct EikonalArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub speed: SpeedArgs,
    /// Observed sides, e.g. NW, or `all`.
    #[arg(long, default_value = "all")]
    pub gamma: String,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct RaytraceArgs {
    #[command(flatten)]
    pub speed: SpeedArgs,
    /// Start point x,y.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub from: Vec<f64>,
    /// Direction x,y (normalized internally).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub dir: Vec<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub t_max: f64,
    /// all, transmit_first or reflect.
    #[arg(long, default_value = "all")]
    pub policy: String,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// shepp_logan, stripes, image or field.
    #[arg(long, default_value = "shepp_logan")]
    pub kind: String,
    /// PGM or field file for the image and field kinds.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// report.json files written by `run` or `reconstruct`.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => run(a),
        Command::Forward(a) => forward(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Eikonal(a) => eikonal(a),
        Command::Raytrace(a) => raytrace(a),
        Command::Phantom(a) => phantom(a),
        Command::Compare(a) => compare(a),
    }
}

fn pair_or_quad<const N: usize>(name: &str, v: &[f64]) -> Result<[f64; N]> {
    v.try_into().map_err(|_| CliError::Usage(format!("--{name} takes {N} comma-separated numbers, got {}", v.len())))
}

fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

fn run(a: RunArgs) -> Result<()> {
    let many = a.configs.len() > 1;
    for path in &a.configs {
        let exp = config::load(path)?;
        let dir = match (&a.out.out, many) {
            (Some(o), false) => output_dir(Some(o), &exp.name),
            (Some(o), true) => output_dir(Some(&o.join(&exp.name)), &exp.name),
            (None, _) => output_dir(exp.output_dir.as_deref(), &exp.name),
        };
        let (report, manifest) = run_to_dir(&exp, &dir)?;
        let mut line = format!("{}: T0 = {:.4}, T = {:.4}", report.name, report.t0, report.t);
        if let Some(tr) = &report.tr {
            line += &format!(", TR error {}", pct(tr.rel_error));
        }
        if let Some(ns) = &report.ns {
            line += &format!(
                ", NS error {} (k = {}, {})",
                pct(ns.summary.rel_error.unwrap_or(f64::NAN)),
                ns.summary.k_used,
                serde_json::to_value(ns.summary.stop_reason)?.as_str().unwrap_or("")
            );
        }
        println!("{line}");
        println!("  {} files in {}", manifest.files.len(), dir.display());
    }
    Ok(())
}

fn forward(a: ForwardArgs) -> Result<()> {
    let g = a.grid.grid()?;
    let om = Region::omega(&g)?;
    let model = a.speed.model(&g)?;
    let c = eval_speed(&model, &g)?;
    let f = make_phantom(&parse_phantom(&a.phantom, a.input.clone(), None, None)?, &g)?;
    let mask = parse_mask(&a.mask, a.ramp)?;
    let t0 = critical_time(&c, &om, &mask)?;
    let t = match a.t {
        Some(t) if t > 0.0 => t,
        Some(t) => return Err(CliError::Usage(format!("T must be positive, got {t}"))),
        None if a.t_mult > 0.0 => a.t_mult * t0,
        None => return Err(CliError::Usage(format!("T-mult must be positive, got {}", a.t_mult))),
    };
    let rec = Reconstructor::new(&c, om, t, &PmlProfile::default_for(&g))?;
    let mut trace = rec.measure(&f, &mask.sample(&g, &om))?;
    if a.noise > 0.0 {
        trace = add_noise(&trace, a.noise, a.seed)?;
    }
    let mut out = Outputs::create(&output_dir(a.out.out.as_deref(), "forward"))?;
    out.trace("trace.trc", &trace)?;
    out.field("phantom", &f)?;
    out.field("speed", &c)?;
    let m = out.finish()?;
    println!("T0 = {t0:.6}\nT = {t:.6}\nn_t = {}\ndt = {:.6e}\nnodes = {}", trace.n_t, trace.dt, trace.n_nodes());
    println!("{} files", m.files.len());
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ReconstructReport {
    #[serde(rename = "T")]
    t: f64,
    method: MethodKind,
    tr_rel_error: Option<f64>,
    ns: Option<thermoacoustic::neumann::ReportSummary>,
    rel_error: Option<f64>,
}

fn reconstruct(a: ReconstructArgs) -> Result<()> {
    let g = a.grid.grid()?;
    let om = Region::omega(&g)?;
    let model = a.speed.model(&g)?;
    let c = eval_speed(&model, &g)?;
    let trace = read_trace(&a.trace)?;
    let t = a.t.unwrap_or_else(|| trace.duration());
    let method = MethodKind::parse(&a.method)?;
    let truth = a.truth.as_deref().map(read_field).transpose()?;
    if let Some(f) = &truth {
        f.check_grid(&g)?;
    }
    let rec = Reconstructor::new(&c, om, t, &PmlProfile::default_for(&g))?;
    let mut out = Outputs::create(&output_dir(a.out.out.as_deref(), "reconstruct"))?;
    let err = |h: &ScalarField| -> Result<Option<f64>> { truth.as_ref().map(|f| l2_rel_error(h, f, &om)).transpose().map_err(Into::into) };
    let mut tr_rel_error = None;
    if matches!(method, MethodKind::Tr | MethodKind::Both) {
        let h = rec.reconstruct_tr(&trace)?;
        tr_rel_error = err(&h)?;
        out.field("tr", &h)?;
        out.pgm("tr.pgm", &h, &om)?;
    }
    let mut ns = None;
    if matches!(method, MethodKind::Ns | MethodKind::Both) {
        let region_k = if model.is_smooth() { None } else { Some(Region::centered(&g, thermoacoustic::speed::INTERFACE_HALF_WIDTH)?) };
        let opts = NsOptions { max_terms: a.max_terms, tol: a.tol, region_k };
        let r = rec.reconstruct_ns(&trace, &opts, truth.as_ref())?;
        for (k, it) in r.iterates.iter().enumerate() {
            out.field(&format!("ns_iter_{k:02}"), it)?;
        }
        out.field("ns", r.result())?;
        out.pgm("ns.pgm", r.result(), &om)?;
        ns = Some(r.summary());
    }
    let rel_error = ns.as_ref().and_then(|s| s.rel_error).or(tr_rel_error);
    let report = ReconstructReport { t, method, tr_rel_error, ns, rel_error };
    out.json("report.json", &report)?;
    out.finish()?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn eikonal(a: EikonalArgs) -> Result<()> {
    let g = a.grid.grid()?;
    let om = Region::omega(&g)?;
    let c = eval_speed(&a.speed.model(&g)?, &g)?;
    let mask = parse_mask(&a.gamma, 0.0)?;
    let tt = thermoacoustic::eikonal::fast_sweep(&c, &om, &mask.gamma(&om))?;
    let t0 = tt.critical_time();
    let mut out = Outputs::create(&output_dir(a.out.out.as_deref(), "eikonal"))?;
    out.field("traveltime", &tt.field)?;
    out.pgm("traveltime.pgm", &tt.field, &om)?;
    out.json("eikonal.json", &serde_json::json!({ "T0": t0, "sweeps": tt.sweeps }))?;
    out.finish()?;
    println!("T0 = {t0:.6}");
    println!("sweeps = {}", tt.sweeps);
    Ok(())
}

fn parse_policy(s: &str) -> Result<BranchPolicy> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
        .map_err(|_| CliError::Usage(format!("policy must be all, transmit_first or reflect, got '{s}'")))
}

fn raytrace(a: RaytraceArgs) -> Result<()> {
    // rays use the analytic speed; a custom one is sampled on the default grid
    let g = Grid2D::default_box(config::DEFAULT_NX);
    let model = a.speed.model(&g)?;
    let (x0, d) = (pair_or_quad::<2>("from", &a.from)?, pair_or_quad::<2>("dir", &a.dir)?);
    let opts = BrokenRayOptions::new(a.t_max, parse_policy(&a.policy)?);
    let ray = RayTracer::new(&model).broken(x0, d, &opts)?;
    let events: Vec<_> = ray.events().cloned().collect();
    let mut out = Outputs::create(&output_dir(a.out.out.as_deref(), "raytrace"))?;
    out.bytes("rays.csv", rays_csv(&ray.branches).as_bytes())?;
    out.json("events.json", &events)?;
    out.finish()?;
    for e in &events {
        let angles = e
            .angles
            .map(|a| format!(" incidence {:.3} deg", a.alpha_in.to_degrees()))
            .unwrap_or_default();
        let kind = serde_json::to_value(e.kind)?;
        println!(
            "{:<26} t = {:8.4} at ({:+.4}, {:+.4}){angles}",
            kind.as_str().unwrap_or(""),
            e.time,
            e.location[0],
            e.location[1]
        );
    }
    Ok(())
}

fn phantom(a: PhantomArgs) -> Result<()> {
    let g = a.grid.grid()?;
    let om = Region::omega(&g)?;
    let f = make_phantom(&parse_phantom(&a.kind, a.input.clone(), None, None)?, &g)?;
    let mut out = Outputs::create(&output_dir(a.out.out.as_deref(), "phantom"))?;
    out.field("phantom", &f)?;
    out.pgm("phantom.pgm", &f, &om)?;
    let m = out.finish()?;
    for e in &m.files {
        println!("{}  {}", e.sha256, e.path);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub name: String,
    #[serde(rename = "T")]
    pub t: f64,
    pub tr_error: Option<f64>,
    pub ns_error: Option<f64>,
    pub k: Option<usize>,
    pub stop_reason: Option<String>,
}

/// One row from a report written by `run` or `reconstruct`.
pub fn compare_row(path: &Path) -> Result<CompareRow> {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let num = |p: &str| v.pointer(p).and_then(|x| x.as_f64());
    let name = v
        .get("name")
        .and_then(|n| n.as_str())
        .map(str::to_string)
        .unwrap_or_else(|| path.parent().and_then(|p| p.file_name()).map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    let t = num("/T").ok_or_else(|| CliError::Config(format!("{}: not a run report", path.display())))?;
    Ok(CompareRow {
        name,
        t,
        tr_error: num("/tr/rel_error").or_else(|| num("/tr_rel_error")),
        ns_error: num("/ns/rel_error"),
        k: v.pointer("/ns/k_used").and_then(|x| x.as_u64()).map(|k| k as usize),
        stop_reason: v.pointer("/ns/stop_reason").and_then(|x| x.as_str()).map(str::to_string),
    })
}

pub fn compare_table(rows: &[CompareRow]) -> String {
    let opt = |v: Option<f64>| v.map(pct).unwrap_or_else(|| "-".into());
    let mut s = String::from("| run | T | TR error | NS error | k | stop |\n|---|---|---|---|---|---|\n");
    for r in rows {
        s += &format!(
            "| {} | {:.4} | {} | {} | {} | {} |\n",
            r.name,
            r.t,
            opt(r.tr_error),
            opt(r.ns_error),
            r.k.map(|k| k.to_string()).unwrap_or_else(|| "-".into()),
            r.stop_reason.as_deref().unwrap_or("-")
        );
    }
    s
}

fn compare(a: CompareArgs) -> Result<()> {
    let rows = a.reports.iter().map(|p| compare_row(p)).collect::<Result<Vec<_>>>()?;
    let table = compare_table(&rows);
    let mut csv = String::from("run,T,tr_error,ns_error,k,stop_reason\n");
    for r in &rows {
        let o = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        csv += &format!(
            "{},{},{},{},{},{}\n",
            r.name,
            r.t,
            o(r.tr_error),
            o(r.ns_error),
            r.k.map(|k| k.to_string()).unwrap_or_default(),
            r.stop_reason.as_deref().unwrap_or("")
        );
    }
    let mut out = Outputs::create(&output_dir(a.out.out.as_deref(), "compare"))?;
    out.bytes("compare.md", table.as_bytes())?;
    out.bytes("compare.csv", csv.as_bytes())?;
    out.finish()?;
    print!("{table}");
    Ok(())
}
