//! Search the equilibrium-stress space for a stress whose energy is positive
//! definite on a target subspace, or produce a dual Gram witness showing that
//! none exists.
//!
//! With `S` an orthonormal stress basis and `V` an orthonormal target basis the
//! reduced energy of the stress `S c` is `F(c) = Σ_k c_k A_k`, where
//! `A_k = Vᵀ (Ω(S e_k) ⊗ I_D) V`. The solver maximizes `λ_min(F(c))` over the
//! unit ball. Its dual asks for the minimum of `|g(X)|` over trace-one PSD `X`,
//! with `g(X)_k = ⟨A_k, X⟩`; a zero of `g` is the Farkas witness.
//!
//! Phase one is projected subgradient ascent with Polyak steps. Phase two is a
//! cutting-plane (Kelley) polish whose master problem is solved in dual form as
//! a minimum-norm point over the collected eigenvector cuts. Both phases keep a
//! valid lower bound (the best `λ_min` seen) and upper bound (the min-norm
//! value).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::framework::{Framework, FrameworkError};
use crate::linalg::{self, Tol};
use crate::linear::{
    self, ConicWitness, FlexBasis, LinearError, RigidityReport, SpaceTag,
};
use crate::tolerances::Tolerances;
use crate::wolfe;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SynthesisError {
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Framework(#[from] FrameworkError),
    #[error("target basis does not fit the framework: {0}")]
    TargetShape(String),
    #[error("target vector {index} is not a flex (relative residual {residual:.3e})")]
    TargetNotFlex { index: usize, residual: f64 },
    #[error("pins span an affine space of dimension {pins} but the configuration spans {span}")]
    PinSpan { pins: usize, span: usize },
    #[error("no cable or strut members are tagged")]
    NoMembers,
    #[error("the rigid subgraph is not infinitesimally rigid in its span ({0:?})")]
    SubgraphNotRigid(RigidityReport),
    #[error("no equilibrium stress is positive on the spider edges (best margin {0:.3e})")]
    SpiderInfeasible(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub seed: u64,
    pub subgradient_iters: usize,
    pub cutting_iters: usize,
    pub tol: Tolerances,
    /// Starting stress in edge coordinates; projected onto the stress space.
    pub initial: Option<DVector<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { seed: 0, subgradient_iters: 300, cutting_iters: 3000, tol: Tolerances::default(), initial: None }
    }
}

/// A stress whose energy is positive definite on `target`.
#[derive(Clone, Debug)]
pub struct PdCertificate {
    /// Unit-norm stress in canonical edge order (zero when the target is empty).
    pub stress: DVector<f64>,
    pub target: FlexBasis,
    /// Smallest eigenvalue of the reduced form; `None` when the target is empty.
    pub lambda_min: Option<f64>,
    pub reduced_eigenvalues: Vec<f64>,
    /// Spectral norm of the stress matrix.
    pub omega_norm: f64,
    /// Vertex force imbalance relative to `|ω|_∞ ·` edge scale.
    pub equilibrium_residual: f64,
    /// Best dual bound on the optimal `λ_min` when the solver ran.
    pub upper_bound: Option<f64>,
}

impl PdCertificate {
    pub fn is_vacuous(&self) -> bool {
        self.target.is_empty()
    }
}

/// A nonzero PSD Gram matrix whose edge image lies in the column span of `R(p)`.
#[derive(Clone, Debug)]
pub struct FarkasWitness {
    /// `n × n` Gram matrix with unit trace.
    pub gram: DMatrix<f64>,
    /// `n × (D·r)` factor with `gram = flex_factor · flex_factorᵀ`.
    pub flex_factor: DMatrix<f64>,
    /// Coordinates per vertex of each factor block (the target's `D`).
    pub block_dim: usize,
    /// `M(X)_ij = X_ii + X_jj - 2 X_ij` in canonical edge order.
    pub edge_image: DVector<f64>,
    /// Distance of the edge image from the column span, relative to its norm.
    pub colspan_residual: f64,
    /// Smallest Gram eigenvalue relative to the largest.
    pub min_eigenvalue: f64,
    pub target: FlexBasis,
}

#[derive(Clone, Debug, Serialize)]
pub struct Undecided {
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub enum SynthesisOutcome {
    Certificate(PdCertificate),
    Witness(FarkasWitness),
    Undecided(Undecided),
}

impl SynthesisOutcome {
    pub fn certificate(&self) -> Option<&PdCertificate> {
        match self {
            SynthesisOutcome::Certificate(c) => Some(c),
            _ => None,
        }
    }

    pub fn witness(&self) -> Option<&FarkasWitness> {
        match self {
            SynthesisOutcome::Witness(w) => Some(w),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SynthesisOutcome::Certificate(_) => "pd_stress",
            SynthesisOutcome::Witness(_) => "farkas_witness",
            SynthesisOutcome::Undecided(_) => "undecided",
        }
    }
}

/// Reduced energy matrices `A_k` of one synthesis problem.
struct Problem {
    a: Vec<DMatrix<f64>>,
    m: usize,
    scale: f64,
}

impl Problem {
    fn new(f: &Framework, stresses: &DMatrix<f64>, target: &FlexBasis) -> Self {
        let m = target.len();
        let d = target.dim;
        let v = &target.vectors;
        let grams: Vec<DMatrix<f64>> = f
            .edges()
            .iter()
            .map(|&(i, j)| {
                let b = v.rows(i * d, d) - v.rows(j * d, d);
                b.transpose() * b
            })
            .collect();
        let a: Vec<DMatrix<f64>> = (0..stresses.ncols())
            .map(|k| {
                let mut acc = DMatrix::zeros(m, m);
                for (e, g) in grams.iter().enumerate() {
                    let w = stresses[(e, k)];
                    if w != 0.0 {
                        acc += g * w;
                    }
                }
                (&acc + acc.transpose()) * 0.5
            })
            .collect();
        // Measured on the full stress matrices: the reduced forms can all vanish.
        let scale = (0..stresses.ncols())
            .map(|k| linalg::sym_norm(&linear::stress_matrix(f, &stresses.column(k).into_owned()).expect("lengths agree")))
            .chain(a.iter().map(linalg::sym_norm))
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        Self { a, m, scale }
    }

    fn matrix(&self, c: &DVector<f64>) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(self.m, self.m);
        for (k, a) in self.a.iter().enumerate() {
            if c[k] != 0.0 {
                acc += a * c[k];
            }
        }
        acc
    }

    fn g(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.a.len(), self.a.iter().map(|a| (x.transpose() * a * x)[(0, 0)]))
    }

    fn g_matrix(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.a.len(), self.a.iter().map(|a| a.component_mul(x).sum()))
    }
}

struct Cuts {
    xs: Vec<DVector<f64>>,
    gs: Vec<DVector<f64>>,
}

impl Cuts {
    fn push(&mut self, p: &Problem, x: DVector<f64>) {
        self.gs.push(p.g(&x));
        self.xs.push(x);
    }

    fn min_norm(&self) -> wolfe::MinNormPoint {
        wolfe::min_norm_point(&self.gs)
    }

    /// Keep the atoms carrying weight plus the most recent `keep` others.
    fn prune(&mut self, active: &[(usize, f64)], keep: usize) {
        if self.xs.len() <= 2 * keep {
            return;
        }
        let cutoff = self.xs.len() - keep;
        let retain: Vec<bool> =
            (0..self.xs.len()).map(|k| k >= cutoff || active.iter().any(|&(i, _)| i == k)).collect();
        let mut it = retain.iter();
        self.xs.retain(|_| *it.next().unwrap());
        let mut it = retain.iter();
        self.gs.retain(|_| *it.next().unwrap());
    }

    fn gram(&self, weights: &[(usize, f64)], m: usize) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(m, m);
        for &(k, w) in weights {
            x += &self.xs[k] * self.xs[k].transpose() * w;
        }
        x
    }
}

fn check_target(f: &Framework, target: &FlexBasis, tol: &Tolerances) -> Result<(), SynthesisError> {
    let n = f.vertex_count();
    if target.dim == 0 || target.vectors.nrows() != n * target.dim {
        return Err(SynthesisError::TargetShape(format!(
            "basis has {} rows, expected {} vertices times {} coordinates",
            target.vectors.nrows(),
            n,
            target.dim
        )));
    }
    if matches!(target.tag, SpaceTag::NormalPinned | SpaceTag::NormalNontrivial) {
        // Velocities along a fresh orthogonal axis are flexes of every framework.
        return Ok(());
    }
    if target.dim < f.dimension() {
        return Err(SynthesisError::TargetShape("target dimension below the framework dimension".into()));
    }
    let fe = f.embedded(target.dim);
    let diam = f.configuration().diameter().max(f64::MIN_POSITIVE);
    for k in 0..target.len() {
        let v = target.assignment(k);
        let vmax = (0..n).map(|i| v.row(i).norm()).fold(0.0, f64::max);
        if vmax == 0.0 {
            continue;
        }
        let res = linear::rigidity_form_at(&fe, &v)?.amax() / (vmax * diam);
        if res > 10.0 * tol.flex.max(1e-9) {
            return Err(SynthesisError::TargetNotFlex { index: k, residual: res });
        }
    }
    Ok(())
}

/// Maximize the smallest reduced stress-energy eigenvalue over the unit ball of
/// the stress space.
pub fn synthesize_pd_stress(
    f: &Framework,
    target: &FlexBasis,
    opts: &SolverOptions,
) -> Result<SynthesisOutcome, SynthesisError> {
    if target.is_empty() {
        return Ok(SynthesisOutcome::Certificate(vacuous_certificate(f, target)));
    }
    check_target(f, target, &opts.tol)?;
    let stresses = linear::stress_space_tol(f, opts.tol.rank);
    let problem = Problem::new(f, &stresses, target);
    if stresses.ncols() == 0 {
        let mut x = DMatrix::zeros(problem.m, problem.m);
        x[(0, 0)] = 1.0;
        return Ok(SynthesisOutcome::Witness(build_witness(f, target, &stresses, &x)));
    }
    Ok(solve(f, target, &stresses, &problem, opts))
}

fn vacuous_certificate(f: &Framework, target: &FlexBasis) -> PdCertificate {
    PdCertificate {
        stress: DVector::zeros(f.edge_count()),
        target: target.clone(),
        lambda_min: None,
        reduced_eigenvalues: Vec::new(),
        omega_norm: 0.0,
        equilibrium_residual: 0.0,
        upper_bound: None,
    }
}

fn random_unit(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(len, |_, _| StandardNormal.sample(rng));
        let n: f64 = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

fn solve(
    f: &Framework,
    target: &FlexBasis,
    stresses: &DMatrix<f64>,
    p: &Problem,
    opts: &SolverOptions,
) -> SynthesisOutcome {
    let s = stresses.ncols();
    let m = p.m;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut cuts = Cuts { xs: Vec::new(), gs: Vec::new() };
    for i in 0..m {
        let mut x = DVector::zeros(m);
        x[i] = 1.0;
        cuts.push(p, x);
    }

    let mut c = match &opts.initial {
        Some(w0) if w0.len() == f.edge_count() => {
            let c0 = stresses.transpose() * w0;
            if c0.norm() > 1e-12 {
                c0.normalize()
            } else {
                random_unit(&mut rng, s)
            }
        }
        _ => random_unit(&mut rng, s),
    };

    let mut best_c = c.clone();
    let mut best_lb = f64::NEG_INFINITY;
    let mut mn = cuts.min_norm();
    let mut ub = mn.norm();
    let mut iterations = 0;
    let witness_floor = 1e-9 * p.scale;
    let gap_ok = |lb: f64, ub: f64| lb > witness_floor && ub - lb <= 1e-3 * ub;

    let evaluate = |c: &DVector<f64>, cuts: &mut Cuts| -> (f64, DVector<f64>) {
        let (vals, vecs) = linalg::sym_eigen(&p.matrix(c));
        let lam = vals[0];
        for k in 0..m.min(3) {
            if k == 0 || vals[k] - lam <= 1e-6 * p.scale {
                cuts.push(p, vecs.column(k).into_owned());
            }
        }
        (lam, p.g(&vecs.column(0).into_owned()))
    };

    // Phase one: Polyak-step subgradient ascent.
    for it in 0..opts.subgradient_iters {
        iterations += 1;
        let (lam, grad) = evaluate(&c, &mut cuts);
        if lam > best_lb {
            best_lb = lam;
            best_c = c.clone();
        }
        if it % 10 == 9 {
            mn = cuts.min_norm();
            ub = mn.norm();
            if gap_ok(best_lb, ub) || ub <= witness_floor {
                break;
            }
        }
        let gn = grad.norm_squared();
        if gn == 0.0 {
            break;
        }
        let step = ((ub - lam).max(1e-3 * p.scale)) / gn;
        c += grad * step;
        let cn = c.norm();
        if cn > 1.0 {
            c /= cn;
        }
    }

    // Phase two: cutting-plane polish with a min-norm-point master problem.
    if !gap_ok(best_lb, ub) {
        for it in 0..opts.cutting_iters {
            iterations += 1;
            mn = cuts.min_norm();
            ub = mn.norm();
            if best_lb <= witness_floor && (it % 10 == 0 || ub <= witness_floor) {
                if let Some(x) = polish_witness(p, &cuts, &mn.weights) {
                    let w = build_witness(f, target, stresses, &x);
                    if w.colspan_residual <= opts.tol.witness {
                        return SynthesisOutcome::Witness(w);
                    }
                }
            }
            if ub <= witness_floor {
                break;
            }
            let cc = &mn.point / ub;
            let (lam, _) = evaluate(&cc, &mut cuts);
            if lam > best_lb {
                best_lb = lam;
                best_c = cc;
            }
            if gap_ok(best_lb, ub) {
                break;
            }
            cuts.prune(&mn.weights, 400);
        }
    }

    let cert = certificate_for(f, target, stresses, &best_c, Some(ub));
    if let Some(lam) = cert.lambda_min {
        if lam > opts.tol.pd * cert.omega_norm {
            return SynthesisOutcome::Certificate(cert);
        }
    }
    mn = cuts.min_norm();
    if let Some(x) = polish_witness(p, &cuts, &mn.weights) {
        let w = build_witness(f, target, stresses, &x);
        if w.colspan_residual <= opts.tol.witness {
            return SynthesisOutcome::Witness(w);
        }
    }
    SynthesisOutcome::Undecided(Undecided {
        lower: best_lb,
        upper: mn.norm(),
        iterations,
        reason: if best_lb > witness_floor {
            "best reduced eigenvalue is positive but below the definiteness threshold".into()
        } else {
            "dual bound did not reach an exact Gram witness".into()
        },
    })
}

fn certificate_for(
    f: &Framework,
    target: &FlexBasis,
    stresses: &DMatrix<f64>,
    c: &DVector<f64>,
    upper: Option<f64>,
) -> PdCertificate {
    let mut w = stresses * c;
    let wn = w.norm();
    if wn > 0.0 {
        w /= wn;
    }
    let omega = linear::stress_matrix(f, &w).expect("stress length matches edges");
    let reduced = target.vectors.transpose() * linear::energy_form(&omega, target.dim) * &target.vectors;
    let (vals, _) = linalg::sym_eigen(&reduced);
    PdCertificate {
        equilibrium_residual: linear::relative_equilibrium_residual(f, &w).unwrap_or(f64::INFINITY),
        omega_norm: linalg::sym_norm(&omega),
        lambda_min: vals.first().copied(),
        reduced_eigenvalues: vals,
        stress: w,
        target: target.clone(),
        upper_bound: upper.map(|u| if wn > 0.0 { u / wn } else { u }),
    }
}

/// Identify the face of the PSD cone carrying the approximate dual solution and
/// solve the linear conditions on that face exactly.
fn polish_witness(p: &Problem, cuts: &Cuts, weights: &[(usize, f64)]) -> Option<DMatrix<f64>> {
    let m = p.m;
    let xt = cuts.gram(weights, m);
    let (vals, vecs) = linalg::sym_eigen(&xt);
    let top = vals.last().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return None;
    }
    let mut ranks: Vec<usize> = [1e-2, 1e-4, 1e-6, 1e-8, 1e-10]
        .iter()
        .map(|t| vals.iter().filter(|&&v| v > t * top).count())
        .collect();
    ranks.dedup();
    for r in ranks {
        let u = vecs.columns(m - r, r).into_owned();
        let unknowns = r * (r + 1) / 2;
        let mut lhs = DMatrix::zeros(p.a.len() + 1, unknowns);
        for (k, a) in p.a.iter().enumerate() {
            let ak = u.transpose() * a * &u;
            let mut col = 0;
            for i in 0..r {
                for j in i..r {
                    lhs[(k, col)] = if i == j { ak[(i, i)] } else { 2.0 * ak[(i, j)] } / p.scale;
                    col += 1;
                }
            }
        }
        let mut col = 0;
        for i in 0..r {
            for j in i..r {
                lhs[(p.a.len(), col)] = if i == j { 1.0 } else { 0.0 };
                col += 1;
            }
        }
        let reduced = u.transpose() * &xt * &u;
        let tr = reduced.trace();
        let mut w0 = DVector::zeros(unknowns);
        let mut col = 0;
        for i in 0..r {
            for j in i..r {
                w0[col] = reduced[(i, j)] / tr;
                col += 1;
            }
        }
        let mut rhs = DVector::zeros(p.a.len() + 1);
        rhs[p.a.len()] = 1.0;
        let delta = linalg::least_squares(&lhs, &(&rhs - &lhs * &w0), Tol::Rel(1e-12));
        let wv = w0 + delta;
        let mut w = DMatrix::zeros(r, r);
        let mut col = 0;
        for i in 0..r {
            for j in i..r {
                w[(i, j)] = wv[col];
                w[(j, i)] = wv[col];
                col += 1;
            }
        }
        let (wvals, _) = linalg::sym_eigen(&w);
        let wmax = wvals.last().copied().unwrap_or(0.0);
        if wmax <= 0.0 || wvals[0] < -1e-10 * wmax {
            continue;
        }
        let x = &u * w * u.transpose();
        let x = &x / x.trace();
        if p.g_matrix(&x).norm() <= 1e-10 * p.scale {
            return Some(x);
        }
    }
    None
}

/// Expand a target-space Gram matrix into a vertex Gram witness.
fn build_witness(f: &Framework, target: &FlexBasis, stresses: &DMatrix<f64>, x: &DMatrix<f64>) -> FarkasWitness {
    let n = f.vertex_count();
    let d = target.dim;
    let (vals, vecs) = linalg::sym_eigen(x);
    let top = vals.last().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > 1e-12 * top).collect();
    let mut factor = DMatrix::zeros(n, d * keep.len());
    for (b, &k) in keep.iter().enumerate() {
        let y = &target.vectors * vecs.column(k) * vals[k].sqrt();
        for i in 0..n {
            for a in 0..d {
                factor[(i, b * d + a)] = y[i * d + a];
            }
        }
    }
    let fnorm = factor.norm();
    if fnorm > 0.0 {
        factor /= fnorm;
    }
    witness_from_factor(f, factor, d, target, stresses)
}

pub(crate) fn witness_from_factor(
    f: &Framework,
    factor: DMatrix<f64>,
    block_dim: usize,
    target: &FlexBasis,
    stresses: &DMatrix<f64>,
) -> FarkasWitness {
    let gram = &factor * factor.transpose();
    let edge_image = DVector::from_iterator(
        f.edge_count(),
        f.edges().iter().map(|&(i, j)| gram[(i, i)] + gram[(j, j)] - 2.0 * gram[(i, j)]),
    );
    let en = edge_image.norm();
    let colspan_residual = if stresses.ncols() == 0 || en == 0.0 {
        0.0
    } else {
        (stresses.transpose() * &edge_image).norm() / en
    };
    let (gv, _) = linalg::sym_eigen(&gram);
    let gmax = gv.last().copied().unwrap_or(0.0);
    FarkasWitness {
        min_eigenvalue: if gmax > 0.0 { gv[0] / gmax } else { 0.0 },
        gram,
        flex_factor: factor,
        block_dim,
        edge_image,
        colspan_residual,
        target: target.clone(),
    }
}

/// Prestress stability in the framework's own dimension.
pub fn prestress_stability_certificate(
    f: &Framework,
    opts: &SolverOptions,
) -> Result<SynthesisOutcome, SynthesisError> {
    let target = linear::flex_space_tol(f, SpaceTag::NontrivialQuotient, opts.tol.rank);
    synthesize_pd_stress(f, &target, opts)
}

#[derive(Clone, Debug)]
pub struct SuperStabilityCertificate {
    pub stress: DVector<f64>,
    pub omega_eigenvalues: Vec<f64>,
    pub rank: usize,
    pub expected_rank: usize,
    pub pd: PdCertificate,
}

#[derive(Clone, Debug)]
pub enum SuperOutcome {
    /// Super stable, equivalently universally prestress stable.
    SuperStable(SuperStabilityCertificate),
    Refuted { synthesis: SynthesisOutcome, conic: Option<ConicWitness>, reason: String },
    Undecided { synthesis: SynthesisOutcome, conic: Option<ConicWitness> },
}

/// Spectrum summary of a stress matrix: eigenvalues, numerical rank, PSD flag.
pub fn omega_spectrum(f: &Framework, w: &DVector<f64>, tol: &Tolerances) -> (Vec<f64>, usize, bool) {
    let omega = linear::stress_matrix(f, w).expect("stress length matches edges");
    let (vals, _) = linalg::sym_eigen(&omega);
    let norm = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let rank = vals.iter().filter(|&&v| v > tol.psd * norm).count();
    let psd = vals.first().is_none_or(|&v| v >= -tol.psd * norm);
    (vals, rank, psd)
}

pub fn super_stability_certificate(f: &Framework, opts: &SolverOptions) -> Result<SuperOutcome, SynthesisError> {
    let target = linear::normal_nontrivial_basis(f.configuration());
    let synthesis = synthesize_pd_stress(f, &target, opts)?;
    let conic = linear::find_conic_at_infinity(f);
    let expected_rank = f.vertex_count() - f.span_dim() - 1;
    Ok(match synthesis {
        SynthesisOutcome::Certificate(cert) => {
            let (vals, rank, psd) = omega_spectrum(f, &cert.stress, &opts.tol);
            if psd && rank == expected_rank && conic.is_none() {
                SuperOutcome::SuperStable(SuperStabilityCertificate {
                    stress: cert.stress.clone(),
                    omega_eigenvalues: vals,
                    rank,
                    expected_rank,
                    pd: cert,
                })
            } else {
                let reason = if conic.is_some() {
                    "edge directions lie on a conic at infinity".to_string()
                } else {
                    format!("stress matrix rank {rank} (PSD: {psd}) differs from {expected_rank}")
                };
                SuperOutcome::Refuted { synthesis: SynthesisOutcome::Certificate(cert), conic, reason }
            }
        }
        SynthesisOutcome::Witness(w) => SuperOutcome::Refuted {
            synthesis: SynthesisOutcome::Witness(w),
            reason: "no PSD stress matrix of rank n-d-1 exists".into(),
            conic,
        },
        u @ SynthesisOutcome::Undecided(_) => SuperOutcome::Undecided { synthesis: u, conic },
    })
}

/// Whether the pins' affine span has the configuration's span dimension.
pub fn pins_span_configuration(f: &Framework, pins: &[usize]) -> Result<(), SynthesisError> {
    let n = f.vertex_count();
    if let Some(&bad) = pins.iter().find(|&&v| v >= n) {
        return Err(FrameworkError::IndexOutOfRange { index: bad, n }.into());
    }
    let span = f.span_dim();
    let rank = if pins.is_empty() {
        0
    } else {
        let rows: Vec<Vec<f64>> = pins.iter().map(|&v| f.configuration().point(v).iter().copied().collect()).collect();
        crate::framework::Configuration::from_rows(f.dimension(), &rows)?.span_dim()
    };
    if pins.is_empty() || rank != span {
        return Err(SynthesisError::PinSpan { pins: if pins.is_empty() { 0 } else { rank }, span });
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct UniversalReport {
    pub pins: Vec<usize>,
    pub synthesis: SynthesisOutcome,
    pub omega_eigenvalues: Vec<f64>,
    pub rank: Option<usize>,
    pub expected_rank: usize,
    pub psd: Option<bool>,
    pub conic: Option<ConicWitness>,
    /// Super stable, equivalently universally prestress stable.
    pub super_stable: bool,
}

/// Pinned PD stress on `C(1, pins)`, then the PSD / rank / conic checks on `R^n`.
pub fn universal_second_order_to_prestress(
    f: &Framework,
    pins: &[usize],
    opts: &SolverOptions,
) -> Result<UniversalReport, SynthesisError> {
    pins_span_configuration(f, pins)?;
    let mut pins = pins.to_vec();
    pins.sort_unstable();
    pins.dedup();
    let target = linear::normal_pinned_basis(f.vertex_count(), &pins);
    let synthesis = synthesize_pd_stress(f, &target, opts)?;
    let conic = linear::find_conic_at_infinity(f);
    let expected_rank = f.vertex_count() - f.span_dim() - 1;
    let (vals, rank, psd) = match &synthesis {
        SynthesisOutcome::Certificate(c) => {
            let (v, r, p) = omega_spectrum(f, &c.stress, &opts.tol);
            (v, Some(r), Some(p))
        }
        _ => (Vec::new(), None, None),
    };
    let super_stable = psd == Some(true) && rank == Some(expected_rank) && conic.is_none();
    Ok(UniversalReport { pins, synthesis, omega_eigenvalues: vals, rank, expected_rank, psd, conic, super_stable })
}

/// Best stress for sign constraints `sign_e · ω_e > 0`, as (unit stress, margin).
///
/// Maximizing the smallest signed entry over the unit ball of the stress space is
/// the distance from the origin to the convex hull of the signed stress-basis rows.
pub(crate) fn best_signed_stress(stresses: &DMatrix<f64>, signs: &[(usize, f64)]) -> (DVector<f64>, f64) {
    let e = stresses.nrows();
    let s = stresses.ncols();
    if signs.is_empty() {
        return (DVector::zeros(e), f64::INFINITY);
    }
    if s == 0 {
        return (DVector::zeros(e), 0.0);
    }
    let rows: Vec<DVector<f64>> =
        signs.iter().map(|&(k, sg)| stresses.row(k).transpose() * sg).collect();
    let mn = wolfe::min_norm_point(&rows);
    let z = mn.norm();
    if z <= 1e-14 {
        return (DVector::zeros(e), 0.0);
    }
    let c = &mn.point / z;
    let w = stresses * c;
    let margin = signs.iter().map(|&(k, sg)| sg * w[k]).fold(f64::INFINITY, f64::min);
    (w, margin)
}

#[derive(Clone, Debug)]
pub struct RothWhiteleyReport {
    pub holds: bool,
    pub rigid: RigidityReport,
    /// Unit stress maximizing the smallest signed member entry.
    pub stress: DVector<f64>,
    pub margin: f64,
}

/// Infinitesimal rigidity of the bar version plus a stress with the member signs.
pub fn roth_whiteley_check(f: &Framework) -> Result<RothWhiteleyReport, SynthesisError> {
    roth_whiteley_check_tol(f, &Tolerances::default())
}

pub fn roth_whiteley_check_tol(f: &Framework, tol: &Tolerances) -> Result<RothWhiteleyReport, SynthesisError> {
    if !f.has_members() {
        return Err(SynthesisError::NoMembers);
    }
    let rigid = linear::is_infinitesimally_rigid_tol(f, tol.rank);
    let stresses = linear::stress_space_tol(f, tol.rank);
    let signs: Vec<(usize, f64)> = f
        .members()
        .iter()
        .enumerate()
        .filter_map(|(k, m)| match m {
            crate::framework::Member::Cable => Some((k, 1.0)),
            crate::framework::Member::Strut => Some((k, -1.0)),
            crate::framework::Member::Bar => None,
        })
        .collect();
    let (stress, margin) = best_signed_stress(&stresses, &signs);
    let holds = rigid.rigid && margin >= 1e-6;
    Ok(RothWhiteleyReport { holds, rigid, stress, margin })
}

#[derive(Clone, Debug)]
pub struct SpiderPrestress {
    pub spider_stress: DVector<f64>,
    pub spider_margin: f64,
    pub outcome: SynthesisOutcome,
}

/// Prestress stability from a spider stress plus a rigid subgraph.
pub fn spider_face_prestress(
    f: &Framework,
    spider_edges: &[(usize, usize)],
    rigid_subgraph: &[usize],
    opts: &SolverOptions,
) -> Result<SpiderPrestress, SynthesisError> {
    let n = f.vertex_count();
    if let Some(&bad) = rigid_subgraph.iter().find(|&&v| v >= n) {
        return Err(FrameworkError::IndexOutOfRange { index: bad, n }.into());
    }
    let mut g0 = rigid_subgraph.to_vec();
    g0.sort_unstable();
    g0.dedup();
    let sub = induced(f, &g0)?;
    let rep = linear::is_infinitesimally_rigid_tol(&sub, opts.tol.rank);
    if !rep.rigid {
        return Err(SynthesisError::SubgraphNotRigid(rep));
    }
    let mut edge_ids = Vec::with_capacity(spider_edges.len());
    for &(a, b) in spider_edges {
        let k = f
            .graph()
            .edge_index(a, b)
            .ok_or_else(|| SynthesisError::Invalid(format!("spider edge [{a}, {b}] is not an edge")))?;
        edge_ids.push(k);
    }
    edge_ids.sort_unstable();
    edge_ids.dedup();
    let spider_pairs: Vec<(usize, usize)> = edge_ids.iter().map(|&k| f.edges()[k]).collect();
    let spider = Framework::new(
        crate::framework::Graph::new(n, spider_pairs.iter().copied())?,
        f.configuration().clone(),
    )?;
    let sstress = linear::stress_space_tol(&spider, opts.tol.rank);
    let signs: Vec<(usize, f64)> = spider_pairs
        .iter()
        .enumerate()
        .filter(|(_, (a, b))| g0.binary_search(a).is_err() || g0.binary_search(b).is_err())
        .map(|(k, _)| (k, 1.0))
        .collect();
    let (ws, margin) = best_signed_stress(&sstress, &signs);
    if margin < 1e-6 {
        return Err(SynthesisError::SpiderInfeasible(margin));
    }
    let mut seed_stress = DVector::zeros(f.edge_count());
    for (k, &id) in edge_ids.iter().enumerate() {
        seed_stress[id] = ws[k];
    }
    let target = linear::flex_space_tol(f, SpaceTag::NontrivialQuotient, opts.tol.rank);
    let mut o = opts.clone();
    o.initial = Some(seed_stress.clone());
    let outcome = synthesize_pd_stress(f, &target, &o)?;
    Ok(SpiderPrestress { spider_stress: seed_stress, spider_margin: margin.min(1e300), outcome })
}

/// Framework induced on a sorted vertex subset, with vertices renumbered.
pub(crate) fn induced(f: &Framework, verts: &[usize]) -> Result<Framework, FrameworkError> {
    let pos = |v: usize| verts.binary_search(&v).ok();
    let edges: Vec<(usize, usize)> = f
        .edges()
        .iter()
        .filter_map(|&(a, b)| Some((pos(a)?, pos(b)?)))
        .collect();
    let rows: Vec<Vec<f64>> = verts.iter().map(|&v| f.configuration().point(v).iter().copied().collect()).collect();
    Framework::from_parts(f.dimension(), &rows, &edges)
}
