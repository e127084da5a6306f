//! JSON analysis reports and the pipelines that produce them.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::fixtures;
use crate::framework::{Framework, FrameworkDoc, FrameworkError};
use crate::holeyhedron::{self, Certify3dOutcome, HoleyError, Holeyhedron, SurfaceOptions, ValidateOptions};
use crate::linear::{self, FlexBasis, SpaceTag};
use crate::second_order::{self, FalsifyOptions, PinnedOutcome, SecondOrderError, SecondOrderFlex};
use crate::synthesis::{
    self, FarkasWitness, PdCertificate, SolverOptions, SuperOutcome, SynthesisError, SynthesisOutcome, Undecided,
};
use crate::tolerances::Tolerances;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    Infinitesimal,
    Prestress,
    Super,
    PinnedU2r,
    SecondOrderFalsify,
    Holeyhedron,
}

impl Analysis {
    pub fn parse(s: &str) -> Option<Self> {
        serde_json::from_value(Value::String(s.to_string())).ok()
    }

    pub fn name(self) -> &'static str {
        match self {
            Analysis::Infinitesimal => "infinitesimal",
            Analysis::Prestress => "prestress",
            Analysis::Super => "super",
            Analysis::PinnedU2r => "pinned-u2r",
            Analysis::SecondOrderFalsify => "second-order-falsify",
            Analysis::Holeyhedron => "holeyhedron",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    Refuted,
    Undecided,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Certified => 0,
            Verdict::Refuted => 2,
            Verdict::Undecided => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StressPayload {
    pub target_tag: SpaceTag,
    /// Coordinates per vertex in the target (`d` for flexes, 1 for normal coordinates).
    pub target_dim: usize,
    pub pins: Vec<usize>,
    /// Orthonormal target basis, one flattened vertex-major vector per entry.
    pub target: Vec<Vec<f64>>,
    pub stress: Vec<f64>,
    pub lambda_min: Option<f64>,
    pub reduced_eigenvalues: Vec<f64>,
    pub omega_norm: f64,
    pub equilibrium_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessPayload {
    pub target_tag: SpaceTag,
    pub target_dim: usize,
    pub pins: Vec<usize>,
    pub gram: Vec<Vec<f64>>,
    pub flex_factor: Vec<Vec<f64>>,
    pub block_dim: usize,
    pub edge_image: Vec<f64>,
    pub colspan_residual: f64,
    pub min_eigenvalue: f64,
    pub second_order: Option<FlexPayload>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlexPayload {
    pub dimension: usize,
    /// `n × dimension` rows.
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
    pub first_residual: f64,
    pub second_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payload {
    Rigidity {
        rank: usize,
        coordinates: usize,
        trivial_dim: usize,
        /// Basis of the nontrivial flex quotient (empty when rigid).
        flexes: Vec<Vec<f64>>,
    },
    PdStress(StressPayload),
    SuperStable {
        certificate: StressPayload,
        omega_eigenvalues: Vec<f64>,
        rank: usize,
        expected_rank: usize,
    },
    FarkasWitness(WitnessPayload),
    SecondOrderFlex(FlexPayload),
    /// A flex whose restriction to `skeleton` is not a rigid motion.
    SkeletonFlex { flex: Vec<f64>, skeleton: Vec<usize>, residual: f64 },
    /// A quotient flex with nonpositive energy under `stress`.
    NonPositive { stress: Vec<f64>, flex: Vec<f64>, lambda_min: f64 },
    Refutation {
        reason: String,
        stress_space_dim: usize,
        conic: Option<Vec<Vec<f64>>>,
        certificate: Option<StressPayload>,
    },
    Undecided { lower: f64, upper: f64, iterations: usize, reason: String },
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Rigidity { .. } => "rigidity",
            Payload::PdStress(_) => "pd_stress",
            Payload::SuperStable { .. } => "super_stable",
            Payload::FarkasWitness(_) => "farkas_witness",
            Payload::SecondOrderFlex(_) => "second_order_flex",
            Payload::SkeletonFlex { .. } => "skeleton_flex",
            Payload::NonPositive { .. } => "non_positive",
            Payload::Refutation { .. } => "refutation",
            Payload::Undecided { .. } => "undecided",
        }
    }
}

/// Everything needed to re-check a verdict without rerunning the search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub fixture: String,
    pub analysis: Analysis,
    pub seed: u64,
    pub tolerances: Tolerances,
    /// The analyzed framework, already embedded in the analysis dimension.
    pub framework: FrameworkDoc,
    pub verdict: Verdict,
    pub payload: Payload,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Structure checks that accompany the verdict (holeyhedron validation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let r: Self = serde_json::from_str(text).map_err(|e| ReportError::Schema(e.to_string()))?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(ReportError::Schema(format!("unsupported schema version {}", r.schema_version)));
        }
        Ok(r)
    }
}

/// Wall-clock timings, kept out of the report so reports stay byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub analysis_seconds: f64,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("input: {0}")]
    Input(String),
    #[error("report schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Framework(#[from] FrameworkError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    SecondOrder(#[from] SecondOrderError),
    #[error(transparent)]
    Holey(#[from] HoleyError),
}

#[derive(Clone, Debug)]
pub enum Subject {
    Framework(Framework),
    Surface(Box<Holeyhedron>, SurfaceOptions),
}

/// Resolves a fixture name or reads a framework / holeyhedron JSON document.
pub fn load_subject(example: Option<&str>, input: Option<&str>, text: Option<&str>) -> Result<(String, Subject), ReportError> {
    if let Some(name) = example {
        if let Some((h, o)) = holeyhedron::surface_fixture(name) {
            return Ok((name.to_string(), Subject::Surface(Box::new(h), o)));
        }
        return Ok((name.to_string(), Subject::Framework(fixtures::make_example(name, &[])?)));
    }
    let text = text.ok_or_else(|| ReportError::Input("no input given".into()))?;
    let label = input.unwrap_or("stdin").to_string();
    let value: Value = serde_json::from_str(text).map_err(|e| ReportError::Input(format!("{label}: {e}")))?;
    if value.get("polytope").is_some() {
        let h = Holeyhedron::from_json(text)?;
        return Ok((label, Subject::Surface(Box::new(h), SurfaceOptions::centered())));
    }
    Ok((label, Subject::Framework(Framework::from_json(text)?)))
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub seed: u64,
    pub tol: Tolerances,
    pub dimension: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { seed: 0, tol: Tolerances::default(), dimension: None }
    }
}

pub(crate) fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn vector(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn stress_payload(c: &PdCertificate) -> StressPayload {
    target_payload(&c.target, c)
}

fn target_payload(t: &FlexBasis, c: &PdCertificate) -> StressPayload {
    StressPayload {
        target_tag: t.tag,
        target_dim: t.dim,
        pins: t.pins.clone(),
        target: columns(&t.vectors),
        stress: vector(&c.stress),
        lambda_min: c.lambda_min,
        reduced_eigenvalues: c.reduced_eigenvalues.clone(),
        omega_norm: c.omega_norm,
        equilibrium_residual: c.equilibrium_residual,
    }
}

fn flex_payload(s: &SecondOrderFlex) -> FlexPayload {
    FlexPayload {
        dimension: s.first.ncols(),
        first: rows(&s.first),
        second: rows(&s.second),
        first_residual: s.first_residual,
        second_residual: s.second_residual,
    }
}

fn witness_payload(w: &FarkasWitness, s: Option<&SecondOrderFlex>) -> WitnessPayload {
    WitnessPayload {
        target_tag: w.target.tag,
        target_dim: w.target.dim,
        pins: w.target.pins.clone(),
        gram: rows(&w.gram),
        flex_factor: rows(&w.flex_factor),
        block_dim: w.block_dim,
        edge_image: vector(&w.edge_image),
        colspan_residual: w.colspan_residual,
        min_eigenvalue: w.min_eigenvalue,
        second_order: s.map(flex_payload),
    }
}

fn undecided(u: &Undecided) -> (Verdict, Payload) {
    (
        Verdict::Undecided,
        Payload::Undecided { lower: u.lower, upper: u.upper, iterations: u.iterations, reason: u.reason.clone() },
    )
}

fn synthesis_result(f: &Framework, out: &SynthesisOutcome) -> (Verdict, Payload) {
    match out {
        SynthesisOutcome::Certificate(c) => (Verdict::Certified, Payload::PdStress(stress_payload(c))),
        SynthesisOutcome::Witness(w) => {
            // Only normal-coordinate witnesses unpack to second-order flexes; a
            // quotient witness placed in orthogonal coordinates is a rigid motion.
            let normal = matches!(w.target.tag, SpaceTag::NormalPinned | SpaceTag::NormalNontrivial);
            let flex = if normal { second_order::unpack_witness(f, w).ok() } else { None };
            (Verdict::Refuted, Payload::FarkasWitness(witness_payload(w, flex.as_ref())))
        }
        SynthesisOutcome::Undecided(u) => undecided(u),
    }
}

/// Runs one analysis and returns the report with its timing.
pub fn run_analysis(
    fixture: &str,
    subject: &Subject,
    analysis: Analysis,
    opts: &RunOptions,
) -> Result<(AnalysisReport, Timing), ReportError> {
    let start = Instant::now();
    let solver = SolverOptions { seed: opts.seed, tol: opts.tol, ..SolverOptions::default() };
    let mut notes = Vec::new();
    let mut details = None;
    let (framework, verdict, payload) = match (analysis, subject) {
        (Analysis::Holeyhedron, Subject::Surface(h, so)) => {
            let so = SurfaceOptions { seed: opts.seed, ..so.clone() };
            let t = holeyhedron::triangulate_surface(h, &so)?;
            let validation = holeyhedron::validate_holeyhedron(h, &t, &ValidateOptions::default())?;
            if !validation.passed {
                notes.push("holeyhedron validation failed; the verdict concerns the triangulated framework only".into());
            }
            details = Some(serde_json::to_value(&validation).expect("validation serializes"));
            let f = t.framework.clone();
            let (verdict, payload) = match holeyhedron::assemble_face_stresses(h, &t, &solver) {
                Err(HoleyError::FaceSynthesis { face, reason }) => {
                    notes.push(format!("face {face} synthesis: {reason}"));
                    let v = if reason == "undecided" { Verdict::Undecided } else { Verdict::Refuted };
                    let p = Payload::Refutation {
                        reason: format!("face {face} admits no positive definite face stress ({reason})"),
                        stress_space_dim: linear::stress_space_tol(&f, opts.tol.rank).ncols(),
                        conic: None,
                        certificate: None,
                    };
                    (v, p)
                }
                Err(e) => return Err(e.into()),
                Ok(a) => {
                    let c = holeyhedron::certify_prestress_3d(h, &t, &a, &opts.tol)?;
                    match c.outcome {
                        Certify3dOutcome::Certificate(cert) => {
                            if cert.is_vacuous() {
                                notes.push("framework is infinitesimally rigid; the zero stress certifies vacuously".into());
                            }
                            (Verdict::Certified, Payload::PdStress(stress_payload(&cert)))
                        }
                        Certify3dOutcome::SkeletonNotRigid { residual, flex } => (
                            Verdict::Refuted,
                            Payload::SkeletonFlex { flex: vector(&flex), skeleton: t.skeleton_vertices.clone(), residual },
                        ),
                        Certify3dOutcome::NotPositive { lambda_min, flex } => {
                            let n = a.omega.norm();
                            let stress = if n > 0.0 { &a.omega / n } else { a.omega.clone() };
                            (Verdict::Refuted, Payload::NonPositive { stress: vector(&stress), flex: vector(&flex), lambda_min })
                        }
                    }
                }
            };
            (f, verdict, payload)
        }
        (Analysis::Holeyhedron, Subject::Framework(_)) => {
            return Err(ReportError::Input("holeyhedron analysis needs a holeyhedron document".into()));
        }
        (_, Subject::Surface(h, so)) => {
            let t = holeyhedron::triangulate_surface(h, so)?;
            let f = t.framework.clone();
            return run_analysis(fixture, &Subject::Framework(f), analysis, opts).map(|(mut r, _)| {
                r.notes.push("analyzed the triangulated surface".into());
                (r, Timing { analysis_seconds: start.elapsed().as_secs_f64() })
            });
        }
        (_, Subject::Framework(f0)) => {
            let f = match opts.dimension {
                Some(d) if d < f0.dimension() => {
                    return Err(ReportError::Input(format!("dimension {d} is below the framework dimension {}", f0.dimension())));
                }
                Some(d) if analysis != Analysis::SecondOrderFalsify => f0.embedded(d),
                _ => f0.clone(),
            };
            let (v, p) = framework_analysis(&f, analysis, opts, &solver, &mut notes)?;
            let recorded = if analysis == Analysis::SecondOrderFalsify {
                f.embedded(opts.dimension.unwrap_or_else(|| second_order::default_analysis_dimension(&f)))
            } else {
                f
            };
            (recorded, v, p)
        }
    };
    let report = AnalysisReport {
        schema_version: SCHEMA_VERSION,
        fixture: fixture.to_string(),
        analysis,
        seed: opts.seed,
        tolerances: opts.tol,
        framework: framework.to_doc(),
        verdict,
        payload,
        notes,
        details,
    };
    Ok((report, Timing { analysis_seconds: start.elapsed().as_secs_f64() }))
}

fn framework_analysis(
    f: &Framework,
    analysis: Analysis,
    opts: &RunOptions,
    solver: &SolverOptions,
    notes: &mut Vec<String>,
) -> Result<(Verdict, Payload), ReportError> {
    Ok(match analysis {
        Analysis::Infinitesimal => {
            let r = linear::is_infinitesimally_rigid_tol(f, opts.tol.rank);
            let flexes = linear::flex_space_tol(f, SpaceTag::NontrivialQuotient, opts.tol.rank);
            let v = if r.rigid { Verdict::Certified } else { Verdict::Refuted };
            (
                v,
                Payload::Rigidity {
                    rank: r.rank,
                    coordinates: r.coordinates,
                    trivial_dim: r.trivial_dim,
                    flexes: columns(&flexes.vectors),
                },
            )
        }
        Analysis::Prestress => {
            let out = synthesis::prestress_stability_certificate(f, solver)?;
            if let Some(c) = out.certificate() {
                if c.is_vacuous() {
                    notes.push("framework is infinitesimally rigid; the zero stress certifies vacuously".into());
                }
            }
            synthesis_result(f, &out)
        }
        Analysis::Super => match synthesis::super_stability_certificate(f, solver)? {
            SuperOutcome::SuperStable(c) => {
                notes.push("super stable, equivalently universally prestress stable".into());
                (
                    Verdict::Certified,
                    Payload::SuperStable {
                        certificate: stress_payload(&c.pd),
                        omega_eigenvalues: c.omega_eigenvalues,
                        rank: c.rank,
                        expected_rank: c.expected_rank,
                    },
                )
            }
            SuperOutcome::Refuted { synthesis, conic, reason } => {
                let certificate = synthesis.certificate().map(stress_payload);
                (
                    Verdict::Refuted,
                    Payload::Refutation {
                        reason,
                        stress_space_dim: linear::stress_space_tol(f, opts.tol.rank).ncols(),
                        conic: conic.map(|c| rows(&c.q)),
                        certificate,
                    },
                )
            }
            SuperOutcome::Undecided { synthesis, .. } => match synthesis {
                SynthesisOutcome::Undecided(u) => undecided(&u),
                other => synthesis_result(f, &other),
            },
        },
        Analysis::PinnedU2r => {
            if f.pins().is_empty() {
                return Err(ReportError::Input("pinned-u2r needs a framework with pins".into()));
            }
            match second_order::pinned_u2r_decide(f, f.pins(), solver)? {
                PinnedOutcome::Certificate(c) => (Verdict::Certified, Payload::PdStress(stress_payload(&c))),
                PinnedOutcome::Witness { witness, flex } => {
                    (Verdict::Refuted, Payload::FarkasWitness(witness_payload(&witness, Some(&flex))))
                }
                PinnedOutcome::Undecided(u) => undecided(&u),
            }
        }
        Analysis::SecondOrderFalsify => {
            let dim = opts.dimension.unwrap_or_else(|| second_order::default_analysis_dimension(f));
            let fe = f.embedded(dim);
            let quotient = linear::flex_space_tol(&fe, SpaceTag::NontrivialQuotient, opts.tol.rank);
            notes.push(format!("searched flexes in dimension {dim}"));
            if quotient.is_empty() {
                (
                    Verdict::Certified,
                    Payload::Rigidity {
                        rank: linear::rigidity_rank(&fe, opts.tol.rank),
                        coordinates: fe.vertex_count() * dim,
                        trivial_dim: linear::trivial_flex_basis(fe.configuration()).len(),
                        flexes: Vec::new(),
                    },
                )
            } else {
                let fo = FalsifyOptions { seed: opts.seed, ..FalsifyOptions::default() };
                match second_order::second_order_falsify(f, dim, &fo)? {
                    Some(flex) => (Verdict::Refuted, Payload::SecondOrderFlex(flex_payload(&flex))),
                    None => {
                        notes.push("no second-order flex found; second-order rigidity is not decided".into());
                        (
                            Verdict::Undecided,
                            Payload::Undecided {
                                lower: 0.0,
                                upper: 0.0,
                                iterations: fo.restarts,
                                reason: "falsifier found no second-order flex".into(),
                            },
                        )
                    }
                }
            }
        }
        Analysis::Holeyhedron => unreachable!("handled by the caller"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(name: &str, a: Analysis) -> AnalysisReport {
        let (label, s) = load_subject(Some(name), None, None).unwrap();
        run_analysis(&label, &s, a, &RunOptions::default()).unwrap().0
    }

    #[test]
    fn analysis_names_round_trip() {
        for a in [
            Analysis::Infinitesimal,
            Analysis::Prestress,
            Analysis::Super,
            Analysis::PinnedU2r,
            Analysis::SecondOrderFalsify,
            Analysis::Holeyhedron,
        ] {
            assert_eq!(Analysis::parse(a.name()), Some(a));
        }
        assert_eq!(Analysis::parse("bogus"), None);
    }

    #[test]
    fn verdicts_and_round_trip() {
        let r = run("octahedron", Analysis::Infinitesimal);
        assert_eq!(r.verdict, Verdict::Certified);
        let r = run("four_cycle", Analysis::Prestress);
        assert_eq!(r.verdict, Verdict::Refuted);
        let back = AnalysisReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn reports_are_deterministic() {
        let a = run("twisted_triangle", Analysis::PinnedU2r).to_json();
        let b = run("twisted_triangle", Analysis::PinnedU2r).to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn surface_fixture_runs_holeyhedron_pipeline() {
        let r = run("cube_surface", Analysis::Holeyhedron);
        assert_eq!(r.verdict, Verdict::Certified);
        assert!(r.details.is_some());
        assert_eq!(r.framework.points.len(), 14);
    }

    #[test]
    fn pinned_analysis_needs_pins() {
        let (_, s) = load_subject(Some("four_cycle"), None, None).unwrap();
        assert!(matches!(
            run_analysis("four_cycle", &s, Analysis::PinnedU2r, &RunOptions::default()),
            Err(ReportError::Input(_))
        ));
    }
}
