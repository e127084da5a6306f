//! First-order rigidity: the rigidity matrix and form, flex and stress spaces,
//! stress matrices, conics at infinity and the trivial/affine/effective flex
//! taxonomy.
//!
//! Velocity assignments are `n × D` matrices. Flattened vectors use vertex-major
//! order, so coordinate `a` of vertex `i` sits at index `i * D + a`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::framework::{Assignment, Configuration, Framework};
use crate::linalg::{self, Tol};

/// Default relative threshold for rank and kernel decisions.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LinearError {
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("velocity assignment is not a first-order flex (relative residual {0:.3e})")]
    NotAFlex(f64),
}

/// Which subspace of flexes a [`FlexBasis`] spans.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceTag {
    AllFlexes,
    PinnedFlexes,
    NontrivialQuotient,
    /// Single-coordinate velocities vanishing on the pins.
    NormalPinned,
    /// Single-coordinate velocities orthogonal to `1` and the coordinate columns.
    NormalNontrivial,
    Trivial,
}

/// Orthonormal basis (columns of `vectors`) of a space of assignments in `R^{n·dim}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlexBasis {
    pub vectors: DMatrix<f64>,
    pub dim: usize,
    pub tag: SpaceTag,
    pub pins: Vec<usize>,
}

impl FlexBasis {
    pub fn len(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.ncols() == 0
    }

    pub fn vertex_count(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.vectors.nrows() / self.dim
        }
    }

    /// The `k`-th basis vector as an `n × dim` assignment.
    pub fn assignment(&self, k: usize) -> Assignment {
        linalg::unflatten(&self.vectors.column(k).into_owned(), self.vertex_count(), self.dim)
    }
}

/// Rigidity matrix in the framework's own dimension.
pub fn rigidity_matrix(f: &Framework) -> DMatrix<f64> {
    let (n, d) = (f.vertex_count(), f.dimension());
    let mut r = DMatrix::zeros(f.edge_count(), n * d);
    for (k, &(i, j)) in f.edges().iter().enumerate() {
        let diff = f.edge_vector(k);
        for a in 0..d {
            r[(k, i * d + a)] = diff[a];
            r[(k, j * d + a)] = -diff[a];
        }
    }
    r
}

/// Rank of the rigidity matrix at relative tolerance `tol`.
pub fn rigidity_rank(f: &Framework, tol: f64) -> usize {
    linalg::rank(&rigidity_matrix(f), Tol::Rel(tol))
}

/// `(p_i - p_j)·(q_i - q_j)` per edge. Either argument may have fewer columns;
/// missing coordinates count as zero.
pub fn rigidity_form(
    f: &Framework,
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<DVector<f64>, LinearError> {
    let n = f.vertex_count();
    if p.nrows() != n || q.nrows() != n {
        return Err(LinearError::Shape(format!(
            "assignments have {} and {} rows for {n} vertices",
            p.nrows(),
            q.nrows()
        )));
    }
    let d = p.ncols().min(q.ncols());
    Ok(DVector::from_iterator(
        f.edge_count(),
        f.edges().iter().map(|&(i, j)| {
            (0..d).map(|a| (p[(i, a)] - p[(j, a)]) * (q[(i, a)] - q[(j, a)])).sum::<f64>()
        }),
    ))
}

/// `R(p, q)` with `p` the framework's own configuration.
pub fn rigidity_form_at(f: &Framework, q: &DMatrix<f64>) -> Result<DVector<f64>, LinearError> {
    rigidity_form(f, f.points(), q)
}

/// Generators `A p + b` of the trivial flexes as flattened columns.
fn trivial_generators(points: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = points.shape();
    let count = d + d * d.saturating_sub(1) / 2;
    let mut g = DMatrix::zeros(n * d, count);
    let mut col = 0;
    for a in 0..d {
        for i in 0..n {
            g[(i * d + a, col)] = 1.0;
        }
        col += 1;
    }
    for a in 0..d {
        for b in a + 1..d {
            for i in 0..n {
                g[(i * d + a, col)] = points[(i, b)];
                g[(i * d + b, col)] = -points[(i, a)];
            }
            col += 1;
        }
    }
    g
}

/// Orthonormal basis of the trivial flexes of the configuration.
pub fn trivial_flex_basis(c: &Configuration) -> FlexBasis {
    let g = trivial_generators(c.points());
    FlexBasis {
        vectors: linalg::column_space(&g, Tol::Rel(RANK_TOL)),
        dim: c.dimension(),
        tag: SpaceTag::Trivial,
        pins: Vec::new(),
    }
}

fn pin_selector(f: &Framework) -> DMatrix<f64> {
    let d = f.dimension();
    let pins = f.pins();
    let mut s = DMatrix::zeros(pins.len() * d, f.vertex_count() * d);
    for (r, &v) in pins.iter().enumerate() {
        for a in 0..d {
            s[(r * d + a, v * d + a)] = 1.0;
        }
    }
    s
}

fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    m
}

/// Kernel of the rigidity matrix, optionally restricted.
pub fn flex_space(f: &Framework, mode: SpaceTag) -> FlexBasis {
    flex_space_tol(f, mode, RANK_TOL)
}

pub fn flex_space_tol(f: &Framework, mode: SpaceTag, tol: f64) -> FlexBasis {
    let r = rigidity_matrix(f);
    let scale = r.norm().max(1.0);
    let vectors = match mode {
        SpaceTag::AllFlexes => linalg::null_space(&r, Tol::Rel(tol)),
        SpaceTag::PinnedFlexes => {
            let s = pin_selector(f) * scale;
            linalg::null_space(&stack(&r, &s), Tol::Rel(tol))
        }
        SpaceTag::NontrivialQuotient => {
            let t = trivial_flex_basis(f.configuration()).vectors.transpose() * scale;
            linalg::null_space(&stack(&r, &t), Tol::Rel(tol))
        }
        other => panic!("flex_space does not produce {other:?} bases"),
    };
    let pins = if mode == SpaceTag::PinnedFlexes { f.pins().to_vec() } else { Vec::new() };
    let n = f.vertex_count() * f.dimension();
    let vectors = if vectors.nrows() == n { vectors } else { DMatrix::zeros(n, 0) };
    FlexBasis { vectors, dim: f.dimension(), tag: mode, pins }
}

/// `C(1, G0)`: one coordinate per vertex, zero on `pins`.
pub fn normal_pinned_basis(n: usize, pins: &[usize]) -> FlexBasis {
    let free: Vec<usize> = (0..n).filter(|v| !pins.contains(v)).collect();
    let mut m = DMatrix::zeros(n, free.len());
    for (c, &v) in free.iter().enumerate() {
        m[(v, c)] = 1.0;
    }
    FlexBasis { vectors: m, dim: 1, tag: SpaceTag::NormalPinned, pins: pins.to_vec() }
}

/// Orthogonal complement in `R^n` of the all-ones vector and the coordinate columns.
pub fn normal_nontrivial_basis(c: &Configuration) -> FlexBasis {
    let n = c.len();
    let d = c.dimension();
    let mut a = DMatrix::zeros(d + 1, n);
    for i in 0..n {
        a[(0, i)] = 1.0;
        for k in 0..d {
            a[(k + 1, i)] = c.points()[(i, k)];
        }
    }
    FlexBasis {
        vectors: linalg::null_space(&a, Tol::Rel(RANK_TOL)),
        dim: 1,
        tag: SpaceTag::NormalNontrivial,
        pins: Vec::new(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RigidityReport {
    pub rigid: bool,
    pub rank: usize,
    pub flex_dim: usize,
    pub trivial_dim: usize,
    pub nontrivial_dim: usize,
    pub coordinates: usize,
}

pub fn is_infinitesimally_rigid(f: &Framework) -> RigidityReport {
    is_infinitesimally_rigid_tol(f, RANK_TOL)
}

pub fn is_infinitesimally_rigid_tol(f: &Framework, tol: f64) -> RigidityReport {
    let coords = f.vertex_count() * f.dimension();
    let rank = rigidity_rank(f, tol);
    let flex_dim = coords - rank;
    let trivial_dim = trivial_flex_basis(f.configuration()).len();
    RigidityReport {
        rigid: flex_dim == trivial_dim,
        rank,
        flex_dim,
        trivial_dim,
        nontrivial_dim: flex_dim.saturating_sub(trivial_dim),
        coordinates: coords,
    }
}

/// Orthonormal basis (columns, `e × s`) of the equilibrium stresses.
pub fn stress_space(f: &Framework) -> DMatrix<f64> {
    stress_space_tol(f, RANK_TOL)
}

pub fn stress_space_tol(f: &Framework, tol: f64) -> DMatrix<f64> {
    let e = f.edge_count();
    if e == 0 {
        return DMatrix::zeros(0, 0);
    }
    let r = rigidity_matrix(f);
    if r.ncols() == 0 {
        return DMatrix::identity(e, e);
    }
    linalg::left_null_space(&r, Tol::Rel(tol))
}

fn check_len(f: &Framework, w: &DVector<f64>) -> Result<(), LinearError> {
    if w.len() != f.edge_count() {
        return Err(LinearError::Shape(format!(
            "stress has {} entries for {} edges",
            w.len(),
            f.edge_count()
        )));
    }
    Ok(())
}

/// `n × n` stress matrix: off-diagonal `-ω_ij`, zero row sums.
pub fn stress_matrix(f: &Framework, w: &DVector<f64>) -> Result<DMatrix<f64>, LinearError> {
    check_len(f, w)?;
    let n = f.vertex_count();
    let mut m = DMatrix::zeros(n, n);
    for (k, &(i, j)) in f.edges().iter().enumerate() {
        m[(i, j)] -= w[k];
        m[(j, i)] -= w[k];
        m[(i, i)] += w[k];
        m[(j, j)] += w[k];
    }
    Ok(m)
}

/// `Ω ⊗ I_dim` in vertex-major order.
pub fn energy_form(omega: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let n = omega.nrows();
    let mut m = DMatrix::zeros(n * dim, n * dim);
    for i in 0..n {
        for j in 0..n {
            let v = omega[(i, j)];
            if v != 0.0 {
                for a in 0..dim {
                    m[(i * dim + a, j * dim + a)] = v;
                }
            }
        }
    }
    m
}

/// `Σ_ij ω_ij |q_i - q_j|²`.
pub fn stress_energy(f: &Framework, w: &DVector<f64>, q: &DMatrix<f64>) -> Result<f64, LinearError> {
    check_len(f, w)?;
    if q.nrows() != f.vertex_count() {
        return Err(LinearError::Shape("assignment row count differs from vertex count".into()));
    }
    Ok(f
        .edges()
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| w[k] * (q.row(i) - q.row(j)).norm_squared())
        .sum())
}

/// Largest per-vertex force imbalance `|Σ_j ω_ij (p_i - p_j)|`.
pub fn equilibrium_residual(f: &Framework, w: &DVector<f64>) -> Result<f64, LinearError> {
    let per = vertex_forces(f, w)?;
    Ok((0..per.nrows()).map(|i| per.row(i).norm()).fold(0.0, f64::max))
}

/// Per-vertex net force `Σ_j ω_ij (p_i - p_j)` as an `n × d` matrix.
pub fn vertex_forces(f: &Framework, w: &DVector<f64>) -> Result<DMatrix<f64>, LinearError> {
    check_len(f, w)?;
    let mut out = DMatrix::zeros(f.vertex_count(), f.dimension());
    for (k, &(i, j)) in f.edges().iter().enumerate() {
        let v = f.edge_vector(k) * w[k];
        for a in 0..f.dimension() {
            out[(i, a)] += v[a];
            out[(j, a)] -= v[a];
        }
    }
    Ok(out)
}

/// Equilibrium residual relative to `|ω|_∞ · edge scale`.
pub fn relative_equilibrium_residual(f: &Framework, w: &DVector<f64>) -> Result<f64, LinearError> {
    let res = equilibrium_residual(f, w)?;
    let scale = w.amax() * f.edge_scale();
    Ok(if scale == 0.0 { res } else { res / scale })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConicWitness {
    /// Symmetric `d × d` matrix with unit Frobenius norm, in ambient coordinates.
    pub q: DMatrix<f64>,
    pub violated_pair: Option<(usize, usize)>,
}

/// Linear system whose kernel parametrizes the symmetric `k × k` matrices vanishing
/// on all (span-coordinate) edge directions. Returns the system and the span basis.
fn conic_system(f: &Framework) -> (DMatrix<f64>, DMatrix<f64>) {
    let (_, basis) = f.configuration().span_basis();
    let k = basis.ncols();
    let unknowns = k * (k + 1) / 2;
    let mut sys = DMatrix::zeros(f.edge_count(), unknowns);
    for e in 0..f.edge_count() {
        let u = basis.transpose() * f.edge_vector(e);
        let s = u.norm_squared();
        let mut col = 0;
        for a in 0..k {
            for b in a..k {
                let c = if a == b { 1.0 } else { 2.0 };
                sys[(e, col)] = c * u[a] * u[b] / s;
                col += 1;
            }
        }
    }
    (sys, basis)
}

/// Dimension of the space of symmetric span-coordinate conics through all edge directions.
pub fn conic_kernel_dim(f: &Framework) -> usize {
    let (sys, _) = conic_system(f);
    if sys.ncols() == 0 {
        return 0;
    }
    linalg::null_space(&sys, Tol::Rel(RANK_TOL)).ncols()
}

pub fn find_conic_at_infinity(f: &Framework) -> Option<ConicWitness> {
    let (sys, basis) = conic_system(f);
    let k = basis.ncols();
    if sys.ncols() == 0 {
        return None;
    }
    let ker = linalg::null_space(&sys, Tol::Rel(RANK_TOL));
    if ker.ncols() == 0 {
        return None;
    }
    let x = ker.column(0);
    let mut qs = DMatrix::zeros(k, k);
    let mut col = 0;
    for a in 0..k {
        for b in a..k {
            qs[(a, b)] = x[col];
            qs[(b, a)] = x[col];
            col += 1;
        }
    }
    let mut q = &basis * qs * basis.transpose();
    q /= q.norm();
    if let Some(first) = q.iter().find(|v| v.abs() > 1e-12) {
        if *first < 0.0 {
            q = -q;
        }
    }
    let mut worst: Option<((usize, usize), f64)> = None;
    for (a, b) in f.graph().non_edges() {
        let d = f.configuration().point(a) - f.configuration().point(b);
        let val = (d.transpose() * &q * &d)[(0, 0)].abs() / d.norm_squared().max(f64::MIN_POSITIVE);
        if val > 1e-9 && worst.is_none_or(|(_, w)| val > w) {
            worst = Some(((a, b), val));
        }
    }
    Some(ConicWitness { q, violated_pair: worst.map(|(p, _)| p) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlexKind {
    Trivial,
    AffineNontrivial,
    NonAffine,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlexClass {
    pub kind: FlexKind,
    pub effective: bool,
    /// Relative distance of the flex from the trivial flexes.
    pub trivial_residual: f64,
    /// Relative distance of the flex from the affine fields `M p_i + t`.
    pub affine_residual: f64,
    /// Non-edge pair with the largest length change, if effective.
    pub effective_pair: Option<(usize, usize)>,
}

/// Classify a first-order flex `v` (`n × D`, `D ≥ d`).
pub fn classify_flex(f: &Framework, v: &Assignment) -> Result<FlexClass, LinearError> {
    classify_flex_tol(f, v, RANK_TOL)
}

pub fn classify_flex_tol(f: &Framework, v: &Assignment, tol: f64) -> Result<FlexClass, LinearError> {
    let n = f.vertex_count();
    let dim = v.ncols();
    if v.nrows() != n || dim < f.dimension() {
        return Err(LinearError::Shape(format!(
            "flex is {}×{} but the framework has {n} vertices in R^{}",
            v.nrows(),
            dim,
            f.dimension()
        )));
    }
    let vnorm = v.norm();
    let diam = f.configuration().diameter().max(f64::MIN_POSITIVE);
    let vmax = (0..n).map(|i| v.row(i).norm()).fold(0.0, f64::max);
    let form = rigidity_form_at(f, v)?;
    let flex_res = if vmax == 0.0 { 0.0 } else { form.amax() / (vmax * diam) };
    if flex_res > tol.max(1e-9) * 10.0 {
        return Err(LinearError::NotAFlex(flex_res));
    }
    if vnorm == 0.0 {
        return Ok(FlexClass {
            kind: FlexKind::Trivial,
            effective: false,
            trivial_residual: 0.0,
            affine_residual: 0.0,
            effective_pair: None,
        });
    }
    let fe = f.embedded(dim);
    let flat = linalg::flatten(v);
    let t = trivial_flex_basis(fe.configuration()).vectors;
    let trivial_residual = (&flat - &t * (t.transpose() * &flat)).norm() / vnorm;

    let d = f.dimension();
    let mut design = DMatrix::zeros(n, d + 1);
    for i in 0..n {
        for a in 0..d {
            design[(i, a)] = f.points()[(i, a)];
        }
        design[(i, d)] = 1.0;
    }
    let mut fit_sq = 0.0;
    for c in 0..dim {
        let col = v.column(c).into_owned();
        let coeff = linalg::least_squares(&design, &col, Tol::Rel(1e-12));
        fit_sq += (&design * coeff - col).norm_squared();
    }
    let affine_residual = fit_sq.sqrt() / vnorm;

    let mut best: Option<((usize, usize), f64)> = None;
    for (a, b) in f.graph().non_edges() {
        let dp = f.configuration().point(a) - f.configuration().point(b);
        let dv = (v.row(a) - v.row(b)).transpose();
        let val = dp.iter().zip(dv.iter()).map(|(x, y)| x * y).sum::<f64>().abs() / (vmax * diam);
        if val > tol && best.is_none_or(|(_, w)| val > w) {
            best = Some(((a, b), val));
        }
    }
    let kind = if trivial_residual <= tol * 10.0 {
        FlexKind::Trivial
    } else if affine_residual <= tol * 10.0 {
        FlexKind::AffineNontrivial
    } else {
        FlexKind::NonAffine
    };
    Ok(FlexClass {
        kind,
        effective: best.is_some(),
        trivial_residual,
        affine_residual,
        effective_pair: best.map(|(p, _)| p),
    })
}
