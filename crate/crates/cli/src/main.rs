use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rigidity_core::framework::Framework;
use rigidity_core::holeyhedron::{self, Holeyhedron, SURFACE_CATALOG};
use rigidity_core::lift::{self, LiftedFace};
use rigidity_core::render::{self, Projection};
use rigidity_core::report::{self, Analysis, AnalysisReport, Payload, RunOptions};
use rigidity_core::tolerances::Tolerances;
use rigidity_core::verify;

#[derive(Parser)]
#[command(name = "rigidity", version, about = "Rigidity certificates for bar frameworks and tensegrities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one analysis and write a JSON report.
    Analyze {
        #[arg(long, conflicts_with = "example")]
        input: Option<PathBuf>,
        /// Built-in fixture name (see `rigidity list`).
        #[arg(long)]
        example: Option<String>,
        /// infinitesimal | prestress | super | pinned-u2r | second-order-falsify | holeyhedron
        #[arg(long)]
        certify: String,
        /// Relative rank cutoff.
        #[arg(long, env = "RIGIDITY_TOL")]
        tol: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Ambient analysis dimension.
        #[arg(long)]
        dimension: Option<usize>,
    },
    /// Re-check a report without rerunning the search.
    Verify {
        report: PathBuf,
        /// Print every check as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Draw a planar framework, a face diagram or a projected framework as SVG.
    Render {
        #[arg(long, conflicts_with = "example")]
        input: Option<PathBuf>,
        #[arg(long)]
        example: Option<String>,
        /// Color edges by the stress in this report.
        #[arg(long)]
        report: Option<PathBuf>,
        /// xy | xz | yz, required for 3-D input.
        #[arg(long)]
        project: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// List built-in fixtures.
    List,
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn tolerances(tol: Option<f64>) -> Result<Tolerances, Failure> {
    match tol {
        None => Ok(Tolerances::default()),
        Some(t) if t.is_finite() && t > 0.0 && t < 1.0 => Ok(Tolerances::with_rank(t)),
        Some(t) => Err(Failure(format!("tolerance must lie in (0, 1), got {t}"))),
    }
}

fn analyze(
    input: Option<PathBuf>,
    example: Option<String>,
    certify: &str,
    tol: Option<f64>,
    seed: u64,
    out: Option<PathBuf>,
    dimension: Option<usize>,
) -> Result<i32, Failure> {
    let analysis = Analysis::parse(certify).ok_or_else(|| Failure(format!("unknown analysis `{certify}`")))?;
    let tol = tolerances(tol)?;
    let text = match &input {
        Some(p) => Some(read(p)?),
        None if example.is_none() => return Err(Failure("give --input FILE or --example NAME".into())),
        None => None,
    };
    let label = input.as_ref().map(|p| p.display().to_string());
    let (fixture, subject) = report::load_subject(example.as_deref(), label.as_deref(), text.as_deref())?;
    let opts = RunOptions { seed, tol, dimension };
    let (report, timing) = report::run_analysis(&fixture, &subject, analysis, &opts)?;
    let json = report.to_json();
    match &out {
        Some(path) => {
            fs::write(path, &json).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
            let mut tpath = path.clone().into_os_string();
            tpath.push(".timing.json");
            let _ = fs::write(PathBuf::from(tpath), serde_json::to_string(&timing)? + "\n");
        }
        None => print!("{json}"),
    }
    eprintln!(
        "{fixture}: {} -> {:?} ({}), {:.3} s",
        analysis.name(),
        report.verdict,
        report.payload.kind(),
        timing.analysis_seconds
    );
    Ok(report.verdict.exit_code())
}

fn verify_cmd(path: &Path, json: bool) -> Result<i32, Failure> {
    let report = AnalysisReport::from_json(&read(path)?)?;
    let v = verify::verify_report(&report);
    if json {
        println!("{}", serde_json::to_string_pretty(&v)?);
    }
    for c in v.checks.iter().filter(|c| !c.passed) {
        eprintln!("failed {}: {}", c.name, c.detail);
    }
    eprintln!("{}: {} checks, {}", path.display(), v.checks.len(), if v.passed { "verified" } else { "REJECTED" });
    Ok(if v.passed { 0 } else { 2 })
}

fn report_stress(path: &Path, edges: usize) -> Result<Vec<f64>, Failure> {
    let r = AnalysisReport::from_json(&read(path)?)?;
    let w = match &r.payload {
        Payload::PdStress(s) => s.stress.clone(),
        Payload::SuperStable { certificate, .. } => certificate.stress.clone(),
        Payload::NonPositive { stress, .. } => stress.clone(),
        other => return Err(Failure(format!("report payload `{}` carries no stress", other.kind()))),
    };
    if w.len() != edges {
        return Err(Failure(format!("report stress has {} entries, framework has {edges} edges", w.len())));
    }
    Ok(w)
}

fn render_cmd(
    input: Option<PathBuf>,
    example: Option<String>,
    report_path: Option<PathBuf>,
    project: Option<String>,
    out: &Path,
) -> Result<i32, Failure> {
    let project = match project.as_deref() {
        None => None,
        Some(s) => Some(Projection::parse(s).ok_or_else(|| Failure(format!("unknown projection `{s}`")))?),
    };
    let framework: Framework;
    let mut spider_stress = None;
    match (&input, &example) {
        (Some(path), _) => {
            let text = read(path)?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            if value.get("base").is_some() {
                let lf = LiftedFace::from_json(&text)?;
                fs::write(out, render::render_lifted_face(&lf)?)?;
                return Ok(0);
            }
            framework = if value.get("polytope").is_some() {
                let h = Holeyhedron::from_json(&text)?;
                holeyhedron::triangulate_surface(&h, &holeyhedron::SurfaceOptions::centered())?.framework
            } else {
                Framework::from_json(&text)?
            };
        }
        (None, Some(name)) => {
            if let Some((h, so)) = holeyhedron::surface_fixture(name) {
                framework = holeyhedron::triangulate_surface(&h, &so)?.framework;
            } else {
                framework = rigidity_core::make_example(name, &[])?;
                if name == "frustum_spider" {
                    let s = lift::mc_project(&lift::frustum_lift())?;
                    spider_stress = render::stress_from_spider(&framework, &s);
                }
            }
        }
        (None, None) => return Err(Failure("give --input FILE or --example NAME".into())),
    }
    let stress = match &report_path {
        Some(p) => Some(report_stress(p, framework.edge_count())?),
        None => spider_stress,
    };
    let svg = render::render_framework(&framework, stress.as_deref(), project)?;
    fs::write(out, svg).map_err(|e| Failure(format!("{}: {e}", out.display())))?;
    Ok(0)
}

fn list() -> i32 {
    for (name, what) in rigidity_core::fixtures::CATALOG {
        println!("{name:24} {what}");
    }
    for name in SURFACE_CATALOG {
        println!("{name:24} triangulated holeyhedron surface");
    }
    0
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Analyze { input, example, certify, tol, seed, out, dimension } => {
            analyze(input, example, &certify, tol, seed, out, dimension)
        }
        Command::Verify { report, json } => verify_cmd(&report, json),
        Command::Render { input, example, report, project, out } => render_cmd(input, example, report, project, &out),
        Command::List => Ok(list()),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
