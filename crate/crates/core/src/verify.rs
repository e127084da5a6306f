//! Independent re-checking of analysis reports.
//!
//! Only residuals, ranks and eigenvalues are recomputed here, from the raw
//! report data and with local matrix assembly; no search or optimizer runs.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::framework::FrameworkDoc;
use crate::linear::SpaceTag;
use crate::report::{AnalysisReport, FlexPayload, Payload, StressPayload, Verdict, WitnessPayload};
use crate::tolerances::Tolerances;

/// Allowed gap between a reported and a recomputed eigenvalue, relative to `max(1, |Ω|₂)`.
pub const EIGEN_MATCH_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verification {
    pub passed: bool,
    pub checks: Vec<Check>,
}

struct Checks(Vec<Check>);

impl Checks {
    fn add(&mut self, name: &str, passed: bool, detail: impl Into<String>) -> bool {
        self.0.push(Check { name: name.to_string(), passed, detail: detail.into() });
        passed
    }
}

struct Geo {
    n: usize,
    d: usize,
    p: DMatrix<f64>,
    edges: Vec<(usize, usize)>,
    pins: Vec<usize>,
}

impl Geo {
    fn new(doc: &FrameworkDoc) -> Result<Self, String> {
        let n = doc.points.len();
        let d = doc.dimension;
        if d == 0 || doc.points.iter().any(|r| r.len() != d) {
            return Err("framework points have inconsistent dimension".into());
        }
        let p = DMatrix::from_fn(n, d, |i, a| doc.points[i][a]);
        let mut edges: Vec<(usize, usize)> = doc.edges.iter().map(|e| (e[0].min(e[1]), e[0].max(e[1]))).collect();
        if edges.iter().any(|&(i, j)| j >= n || i == j) {
            return Err("edge endpoint out of range".into());
        }
        edges.sort_unstable();
        let mut pins = doc.pins.clone();
        pins.sort_unstable();
        pins.dedup();
        Ok(Self { n, d, p, edges, pins })
    }

    fn embed(&self, dim: usize) -> Geo {
        let mut p = DMatrix::zeros(self.n, dim);
        p.view_mut((0, 0), (self.n, self.d)).copy_from(&self.p);
        Geo { n: self.n, d: dim, p, edges: self.edges.clone(), pins: self.pins.clone() }
    }

    fn diff(&self, i: usize, j: usize) -> DVector<f64> {
        (self.p.row(i) - self.p.row(j)).transpose()
    }

    fn edge_scale(&self) -> f64 {
        self.edges.iter().map(|&(i, j)| self.diff(i, j).norm()).fold(0.0, f64::max)
    }

    fn rigidity(&self) -> DMatrix<f64> {
        let mut r = DMatrix::zeros(self.edges.len(), self.n * self.d);
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            let v = self.diff(i, j);
            for a in 0..self.d {
                r[(k, i * self.d + a)] = v[a];
                r[(k, j * self.d + a)] = -v[a];
            }
        }
        r
    }

    fn stress_matrix(&self, w: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            m[(i, j)] -= w[k];
            m[(j, i)] -= w[k];
            m[(i, i)] += w[k];
            m[(j, j)] += w[k];
        }
        m
    }

    fn equilibrium(&self, w: &[f64]) -> f64 {
        let mut f = DMatrix::<f64>::zeros(self.n, self.d);
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            let v = self.diff(i, j) * w[k];
            for a in 0..self.d {
                f[(i, a)] += v[a];
                f[(j, a)] -= v[a];
            }
        }
        let scale = w.iter().fold(0.0_f64, |a, x| a.max(x.abs())) * self.edge_scale();
        let res = f.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            res
        } else {
            res / scale
        }
    }

    /// Orthonormal basis of rigid-motion velocities.
    fn trivial(&self) -> DMatrix<f64> {
        let d = self.d;
        let mut cols = Vec::new();
        for a in 0..d {
            cols.push(DVector::from_fn(self.n * d, |k, _| if k % d == a { 1.0 } else { 0.0 }));
        }
        for a in 0..d {
            for b in a + 1..d {
                let mut v = DVector::zeros(self.n * d);
                for i in 0..self.n {
                    v[i * d + a] = -self.p[(i, b)];
                    v[i * d + b] = self.p[(i, a)];
                }
                cols.push(v);
            }
        }
        orthonormal(&DMatrix::from_columns(&cols), 1e-9)
    }

    fn span_dim(&self) -> usize {
        let mut c = self.p.clone();
        for a in 0..self.d {
            let mean = c.column(a).mean();
            for i in 0..self.n {
                c[(i, a)] -= mean;
            }
        }
        rank(&c, 1e-9)
    }
}

fn singular(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let s = singular(m);
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&x| x > tol * top.max(f64::MIN_POSITIVE)).count()
}

fn orthonormal(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.unwrap();
    let top = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] > tol * top).collect();
    DMatrix::from_fn(m.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

/// Orthonormal basis of the left kernel (equilibrium stresses).
fn left_kernel(r: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (e, c) = r.shape();
    if e == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Rᵀ padded with zero rows to a square matrix, so the SVD returns a full right basis.
    let mut m = DMatrix::zeros(c.max(e), e);
    m.view_mut((0, 0), (c, e)).copy_from(&r.transpose());
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("right vectors requested");
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] <= tol * top).collect();
    DMatrix::from_fn(e, keep.len(), |row, col| vt[(keep[col], row)])
}

fn sym_eigs(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let sym = (m + m.transpose()) * 0.5;
    let mut v: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn spectral(m: &DMatrix<f64>) -> f64 {
    sym_eigs(m).iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

fn energy(omega: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let n = omega.nrows();
    DMatrix::from_fn(n * dim, n * dim, |r, c| if r % dim == c % dim { omega[(r / dim, c / dim)] } else { 0.0 })
}

fn from_columns(cols: &[Vec<f64>], len: usize) -> Option<DMatrix<f64>> {
    if cols.iter().any(|c| c.len() != len) {
        return None;
    }
    Some(DMatrix::from_fn(len, cols.len(), |r, c| cols[c][r]))
}

fn from_rows(rows: &[Vec<f64>], ncols: usize) -> Option<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

fn quotient_dim(g: &Geo, tol: &Tolerances) -> usize {
    let r = rank(&g.rigidity(), tol.rank);
    (g.n * g.d).saturating_sub(r).saturating_sub(g.trivial().ncols())
}

fn check_target(g: &Geo, sp: &StressPayload, tol: &Tolerances, c: &mut Checks) -> Option<DMatrix<f64>> {
    let dim = sp.target_dim;
    let Some(v) = from_columns(&sp.target, g.n * dim) else {
        c.add("target_shape", false, "target vectors have the wrong length");
        return None;
    };
    let k = v.ncols();
    let gram_err = (v.transpose() * &v - DMatrix::identity(k, k)).amax();
    c.add("target_orthonormal", gram_err <= 1e-8, format!("|VᵀV - I| = {gram_err:.2e}"));
    let scale = g.edge_scale().max(f64::MIN_POSITIVE);
    match sp.target_tag {
        SpaceTag::NontrivialQuotient => {
            if !c.add("target_dimension", dim == g.d, format!("target uses {dim} coordinates, framework {}", g.d)) {
                return None;
            }
            let want = quotient_dim(g, tol);
            c.add("target_size", k == want, format!("{k} target vectors, nontrivial flex quotient has dimension {want}"));
            let res = if k == 0 { 0.0 } else { (g.rigidity() * &v).amax() / scale };
            c.add("target_are_flexes", res <= 1e-7, format!("|R V| / edge scale = {res:.2e}"));
            let t = g.trivial();
            let overlap = if k == 0 { 0.0 } else { (t.transpose() * &v).amax() };
            c.add("target_orthogonal_to_trivial", overlap <= 1e-7, format!("|TᵀV| = {overlap:.2e}"));
        }
        SpaceTag::NormalPinned => {
            if !c.add("target_dimension", dim == 1, format!("target uses {dim} coordinates")) {
                return None;
            }
            c.add("target_pins", sp.pins == g.pins, format!("target pins {:?}, framework pins {:?}", sp.pins, g.pins));
            let want = g.n - sp.pins.iter().filter(|&&p| p < g.n).count();
            c.add("target_size", k == want, format!("{k} target vectors, {want} unpinned vertices"));
            let on_pins = sp.pins.iter().filter(|&&p| p < g.n).map(|&p| v.row(p).amax()).fold(0.0, f64::max);
            c.add("target_vanishes_on_pins", on_pins <= 1e-12, format!("largest pinned entry {on_pins:.2e}"));
        }
        SpaceTag::NormalNontrivial => {
            if !c.add("target_dimension", dim == 1, format!("target uses {dim} coordinates")) {
                return None;
            }
            let want = g.n - g.span_dim() - 1;
            c.add("target_size", k == want, format!("{k} target vectors, expected {want}"));
            let mut a = DMatrix::from_element(g.n, g.d + 1, 1.0);
            a.view_mut((0, 0), (g.n, g.d)).copy_from(&g.p);
            let overlap = if k == 0 { 0.0 } else { (a.transpose() * &v).amax() / a.norm().max(1.0) };
            c.add("target_orthogonal_to_affine", overlap <= 1e-8, format!("overlap {overlap:.2e}"));
        }
        other => {
            c.add("target_tag", false, format!("unsupported target space {other:?}"));
            return None;
        }
    }
    Some(v)
}

fn check_stress(g: &Geo, sp: &StressPayload, tol: &Tolerances, c: &mut Checks) {
    if !c.add("stress_length", sp.stress.len() == g.edges.len(), format!("{} entries for {} edges", sp.stress.len(), g.edges.len())) {
        return;
    }
    let Some(v) = check_target(g, sp, tol, c) else { return };
    let eq = g.equilibrium(&sp.stress);
    c.add("equilibrium", eq <= tol.equilibrium, format!("relative residual {eq:.2e}"));
    let omega = g.stress_matrix(&sp.stress);
    let norm = spectral(&omega);
    let norm_ok = (norm - sp.omega_norm).abs() <= 1e-8 * norm.max(1.0);
    c.add("omega_norm", norm_ok, format!("reported {:.6e}, recomputed {norm:.6e}", sp.omega_norm));
    if v.ncols() == 0 {
        c.add("positive_definite", sp.lambda_min.is_none(), "empty target: certificate is vacuous");
        return;
    }
    let reduced = v.transpose() * energy(&omega, sp.target_dim) * &v;
    let eigs = sym_eigs(&reduced);
    let lmin = eigs[0];
    match sp.lambda_min {
        Some(rep) => {
            let gap = (rep - lmin).abs();
            c.add(
                "lambda_min_matches",
                gap <= EIGEN_MATCH_TOL * norm.max(1.0),
                format!("reported {rep:.10e}, recomputed {lmin:.10e}"),
            );
        }
        None => {
            c.add("lambda_min_matches", false, "nonempty target without lambda_min");
        }
    }
    c.add(
        "positive_definite",
        norm > 0.0 && lmin > tol.pd * norm,
        format!("lambda_min {lmin:.3e} against threshold {:.3e}", tol.pd * norm),
    );
}

fn check_flex(g: &Geo, fp: &FlexPayload, tol: &Tolerances, pinned: bool, c: &mut Checks) {
    let dim = fp.dimension;
    if !c.add("flex_dimension", dim >= g.d, format!("flex dimension {dim}, framework {}", g.d)) {
        return;
    }
    let ge = g.embed(dim);
    let (Some(p1), Some(p2)) = (from_rows(&fp.first, dim), from_rows(&fp.second, dim)) else {
        c.add("flex_shape", false, "flex rows have the wrong length");
        return;
    };
    if !c.add("flex_shape", p1.nrows() == g.n && p2.nrows() == g.n, "one row per vertex") {
        return;
    }
    let mut r1: f64 = 0.0;
    let mut r2: f64 = 0.0;
    let mut bmax: f64 = 0.0;
    for &(i, j) in &ge.edges {
        let e = ge.diff(i, j);
        let d1 = (p1.row(i) - p1.row(j)).transpose();
        let d2 = (p2.row(i) - p2.row(j)).transpose();
        r1 = r1.max(e.dot(&d1).abs());
        r2 = r2.max((e.dot(&d2) + d1.norm_squared()).abs());
        bmax = bmax.max(d1.norm_squared());
    }
    let scale = (ge.edge_scale() * p1.norm()).max(1.0);
    c.add("first_order", r1 <= tol.flex.max(1e-9) * scale, format!("|R(p,p')| = {r1:.2e}"));
    let ok2 = r2 <= tol.second_order * bmax.max(1e-300) || bmax <= 1e-14 * p1.norm_squared();
    c.add("second_order", ok2, format!("|R(p,p'') + R(p',p')| = {r2:.2e}"));
    let flat = DVector::from_iterator(g.n * dim, p1.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()));
    let t = ge.trivial();
    let nontrivial = (&flat - &t * (t.transpose() * &flat)).norm();
    c.add("nontrivial", nontrivial > 1e-6 * flat.norm().max(f64::MIN_POSITIVE), format!("nontrivial part {nontrivial:.2e}"));
    if pinned {
        let on = g.pins.iter().map(|&p| p1.row(p).amax()).fold(0.0, f64::max);
        c.add("pins_fixed", on <= 1e-12, format!("largest pinned velocity {on:.2e}"));
    }
}

fn check_witness(g: &Geo, w: &WitnessPayload, tol: &Tolerances, pinned: bool, c: &mut Checks) {
    let Some(x) = from_rows(&w.gram, g.n) else {
        c.add("gram_shape", false, "gram rows have the wrong length");
        return;
    };
    if !c.add("gram_shape", x.nrows() == g.n, "n × n gram") {
        return;
    }
    let eigs = sym_eigs(&x);
    let top = eigs.last().copied().unwrap_or(0.0);
    c.add("gram_nonzero", top > 0.0, format!("largest eigenvalue {top:.3e}"));
    c.add("gram_psd", eigs[0] >= -1e-9 * top, format!("smallest eigenvalue {:.3e}", eigs[0]));
    let asym = (&x - x.transpose()).amax();
    c.add("gram_symmetric", asym <= 1e-12 * top.max(1.0), format!("asymmetry {asym:.2e}"));
    let m = w.flex_factor.first().map_or(0, |r| r.len());
    if let Some(fac) = from_rows(&w.flex_factor, m) {
        let err = (&fac * fac.transpose() - &x).amax();
        c.add("factor_matches_gram", err <= 1e-9 * top.max(1.0), format!("|F Fᵀ - X| = {err:.2e}"));
        let dim = w.block_dim.max(1);
        if w.target_tag == SpaceTag::NontrivialQuotient && m % dim == 0 {
            let r = g.rigidity();
            let t = g.trivial();
            let mut worst: f64 = 0.0;
            let mut best_nontrivial: f64 = 0.0;
            for b in 0..m / dim {
                let v = DVector::from_fn(g.n * dim, |k, _| fac[(k / dim, b * dim + k % dim)]);
                worst = worst.max((&r * &v).amax());
                best_nontrivial = best_nontrivial.max((&v - &t * (t.transpose() * &v)).norm());
            }
            c.add("factor_blocks_are_flexes", worst <= 1e-7 * g.edge_scale().max(1.0), format!("|R F_b| = {worst:.2e}"));
            c.add("factor_nontrivial", best_nontrivial > 1e-6, format!("largest nontrivial block part {best_nontrivial:.2e}"));
        }
    } else {
        c.add("factor_matches_gram", false, "factor rows have inconsistent length");
    }
    if pinned || w.target_tag == SpaceTag::NormalPinned {
        let on = w.pins.iter().filter(|&&p| p < g.n).map(|&p| x.row(p).amax()).fold(0.0, f64::max);
        c.add("gram_vanishes_on_pins", on <= 1e-12, format!("largest pinned entry {on:.2e}"));
    }
    let image = DVector::from_iterator(g.edges.len(), g.edges.iter().map(|&(i, j)| x[(i, i)] + x[(j, j)] - 2.0 * x[(i, j)]));
    let reported = DVector::from_vec(w.edge_image.clone());
    let image_ok = reported.len() == image.len() && (&reported - &image).amax() <= 1e-10 * image.amax().max(1.0);
    c.add("edge_image", image_ok, "M(X) recomputed from the gram");
    let s = left_kernel(&g.rigidity(), tol.rank);
    let res = if s.ncols() == 0 || image.norm() == 0.0 { 0.0 } else { (s.transpose() * &image).norm() / image.norm() };
    c.add("colspan", res <= tol.witness, format!("relative distance to col-span R(p) {res:.2e}"));
    if let Some(fp) = &w.second_order {
        check_flex(g, fp, tol, pinned, c);
    }
}

fn check_conic(g: &Geo, q: Option<&Vec<Vec<f64>>>, c: &mut Checks) {
    // Span coordinates from the centered configuration.
    let mut centered = g.p.clone();
    for a in 0..g.d {
        let mean = centered.column(a).mean();
        for i in 0..g.n {
            centered[(i, a)] -= mean;
        }
    }
    let basis = orthonormal(&centered.transpose(), 1e-9);
    let k = basis.ncols();
    let unknowns = k * (k + 1) / 2;
    let mut sys = DMatrix::zeros(g.edges.len(), unknowns);
    for (e, &(i, j)) in g.edges.iter().enumerate() {
        let u = basis.transpose() * g.diff(i, j);
        let s = u.norm_squared();
        let mut col = 0;
        for a in 0..k {
            for b in a..k {
                sys[(e, col)] = if a == b { 1.0 } else { 2.0 } * u[a] * u[b] / s;
                col += 1;
            }
        }
    }
    let kernel = unknowns - rank(&sys, 1e-9).min(unknowns);
    match q {
        None => {
            c.add("no_conic", kernel == 0, format!("conic kernel dimension {kernel}"));
        }
        Some(rows) => {
            let Some(qm) = from_rows(rows, g.d) else {
                c.add("conic_shape", false, "conic has the wrong shape");
                return;
            };
            let worst = g
                .edges
                .iter()
                .map(|&(i, j)| {
                    let u = g.diff(i, j);
                    (u.transpose() * &qm * &u)[(0, 0)].abs() / u.norm_squared()
                })
                .fold(0.0, f64::max);
            let nonzero = qm.norm() > 0.5;
            c.add("conic", nonzero && worst <= 1e-9, format!("largest edge value {worst:.2e}, |Q| = {:.3}", qm.norm()));
        }
    }
}

fn expected_verdict(p: &Payload) -> Verdict {
    match p {
        Payload::Rigidity { flexes, .. } if flexes.is_empty() => Verdict::Certified,
        Payload::Rigidity { .. } => Verdict::Refuted,
        Payload::PdStress(_) | Payload::SuperStable { .. } => Verdict::Certified,
        Payload::Undecided { .. } => Verdict::Undecided,
        _ => Verdict::Refuted,
    }
}

/// Re-checks every numerical claim in the report.
pub fn verify_report(r: &AnalysisReport) -> Verification {
    let mut c = Checks(Vec::new());
    let tol = &r.tolerances;
    let g = match Geo::new(&r.framework) {
        Ok(g) => g,
        Err(e) => {
            c.add("framework", false, e);
            return Verification { passed: false, checks: c.0 };
        }
    };
    let want = expected_verdict(&r.payload);
    c.add("verdict", want == r.verdict, format!("{} payload with verdict {:?}", r.payload.kind(), r.verdict));
    let pinned = r.analysis == crate::report::Analysis::PinnedU2r;
    match &r.payload {
        Payload::Rigidity { rank: rep, coordinates, trivial_dim, flexes } => {
            let rk = rank(&g.rigidity(), tol.rank);
            c.add("rank", rk == *rep, format!("reported {rep}, recomputed {rk}"));
            c.add("coordinates", *coordinates == g.n * g.d, format!("{coordinates} coordinates"));
            let t = g.trivial();
            c.add("trivial_dim", t.ncols() == *trivial_dim, format!("reported {trivial_dim}, recomputed {}", t.ncols()));
            let want = (g.n * g.d).saturating_sub(rk).saturating_sub(t.ncols());
            c.add("flex_count", flexes.len() == want, format!("{} flexes, quotient dimension {want}", flexes.len()));
            if let Some(v) = from_columns(flexes, g.n * g.d) {
                if v.ncols() > 0 {
                    let res = (g.rigidity() * &v).amax() / g.edge_scale().max(f64::MIN_POSITIVE);
                    c.add("flexes", res <= 1e-7, format!("|R V| / edge scale = {res:.2e}"));
                    let overlap = (t.transpose() * &v).amax();
                    c.add("flexes_nontrivial", overlap <= 1e-7, format!("|TᵀV| = {overlap:.2e}"));
                }
            } else {
                c.add("flexes", false, "flex vectors have the wrong length");
            }
        }
        Payload::PdStress(sp) => check_stress(&g, sp, tol, &mut c),
        Payload::SuperStable { certificate, omega_eigenvalues: _, rank: rep, expected_rank } => {
            check_stress(&g, certificate, tol, &mut c);
            let omega = g.stress_matrix(&certificate.stress);
            let eigs = sym_eigs(&omega);
            let norm = eigs.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            let psd = eigs.first().is_none_or(|&v| v >= -tol.psd * norm);
            let rk = eigs.iter().filter(|&&v| v > tol.psd * norm).count();
            let want = g.n - g.span_dim() - 1;
            c.add("omega_psd", psd, format!("smallest eigenvalue {:.3e}", eigs.first().copied().unwrap_or(0.0)));
            c.add("omega_rank", rk == want && *rep == rk && *expected_rank == want, format!("rank {rk}, expected {want}"));
            check_conic(&g, None, &mut c);
        }
        Payload::FarkasWitness(w) => check_witness(&g, w, tol, pinned, &mut c),
        Payload::SecondOrderFlex(fp) => check_flex(&g, fp, tol, pinned, &mut c),
        Payload::SkeletonFlex { flex, skeleton, residual } => {
            if !c.add("flex_length", flex.len() == g.n * g.d, "one velocity per vertex coordinate") {
                return Verification { passed: false, checks: c.0 };
            }
            let v = DVector::from_vec(flex.clone());
            let res = (g.rigidity() * &v).amax() / g.edge_scale().max(f64::MIN_POSITIVE);
            c.add("is_flex", res <= 1e-7 * v.norm().max(1.0), format!("|R v| = {res:.2e}"));
            if skeleton.iter().any(|&s| s >= g.n) {
                c.add("skeleton", false, "skeleton vertex out of range");
            } else {
                let sub = Geo {
                    n: skeleton.len(),
                    d: g.d,
                    p: DMatrix::from_fn(skeleton.len(), g.d, |r, a| g.p[(skeleton[r], a)]),
                    edges: Vec::new(),
                    pins: Vec::new(),
                };
                let vs = DVector::from_fn(skeleton.len() * g.d, |k, _| v[skeleton[k / g.d] * g.d + k % g.d]);
                let t = sub.trivial();
                let off = (&vs - &t * (t.transpose() * &vs)).norm() / v.norm().max(f64::MIN_POSITIVE);
                c.add("nontrivial_on_skeleton", off > 1e-7, format!("nontrivial part on the skeleton {off:.3e}"));
                c.add("residual_matches", (off - residual).abs() <= 1e-6 * off.max(1.0), format!("reported {residual:.3e}"));
            }
        }
        Payload::NonPositive { stress, flex, lambda_min } => {
            if stress.len() == g.edges.len() && flex.len() == g.n * g.d {
                let v = DVector::from_vec(flex.clone());
                let res = (g.rigidity() * &v).amax() / g.edge_scale().max(f64::MIN_POSITIVE);
                c.add("is_flex", res <= 1e-7 * v.norm().max(1.0), format!("|R v| = {res:.2e}"));
                let omega = g.stress_matrix(stress);
                let e = (v.transpose() * energy(&omega, g.d) * &v)[(0, 0)] / v.norm_squared().max(f64::MIN_POSITIVE);
                c.add("energy_not_positive", e <= tol.pd * spectral(&omega) + 1e-12, format!("energy {e:.3e}, reported {lambda_min:.3e}"));
            } else {
                c.add("shape", false, "stress or flex has the wrong length");
            }
        }
        Payload::Refutation { stress_space_dim, conic, certificate, .. } => {
            let s = left_kernel(&g.rigidity(), tol.rank).ncols();
            c.add("stress_space_dim", s == *stress_space_dim, format!("reported {stress_space_dim}, recomputed {s}"));
            if let Some(q) = conic {
                check_conic(&g, Some(q), &mut c);
            }
            if let Some(sp) = certificate {
                check_stress(&g, sp, tol, &mut c);
            }
        }
        Payload::Undecided { lower, upper, .. } => {
            c.add("bounds", *lower <= upper + 1e-12 * lower.abs().max(upper.abs()), format!("[{lower:.3e}, {upper:.3e}]"));
        }
    }
    let passed = c.0.iter().all(|k| k.passed);
    Verification { passed, checks: c.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::{load_subject, run_analysis, Analysis, RunOptions};

    fn report(name: &str, a: Analysis) -> AnalysisReport {
        let (label, s) = load_subject(Some(name), None, None).unwrap();
        run_analysis(&label, &s, a, &RunOptions::default()).unwrap().0
    }

    #[test]
    fn honest_reports_verify() {
        for (name, a) in [
            ("octahedron", Analysis::Infinitesimal),
            ("four_cycle", Analysis::Infinitesimal),
            ("four_cycle", Analysis::Prestress),
            ("cube_face_centers", Analysis::Prestress),
            ("square_with_diagonals", Analysis::Super),
            ("four_cycle", Analysis::Super),
            ("y_pinned", Analysis::PinnedU2r),
            ("y_braced", Analysis::PinnedU2r),
        ] {
            let r = report(name, a);
            let v = verify_report(&r);
            assert!(v.passed, "{name} {a:?}: {:?}", v.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
        }
    }

    #[test]
    fn flipped_stress_fails() {
        let mut r = report("cube_face_centers", Analysis::Prestress);
        if let Payload::PdStress(sp) = &mut r.payload {
            sp.stress.iter_mut().for_each(|w| *w = -*w);
        }
        assert!(!verify_report(&r).passed);
    }

    #[test]
    fn inflated_lambda_fails() {
        let mut r = report("cube_face_centers", Analysis::Prestress);
        if let Payload::PdStress(sp) = &mut r.payload {
            *sp.lambda_min.as_mut().unwrap() += 1e-6;
        }
        let v = verify_report(&r);
        assert!(!v.passed);
        assert!(v.checks.iter().any(|c| c.name == "lambda_min_matches" && !c.passed));
    }

    #[test]
    fn shrunken_target_fails() {
        let mut r = report("cube_face_centers", Analysis::Prestress);
        if let Payload::PdStress(sp) = &mut r.payload {
            sp.target.pop();
            sp.reduced_eigenvalues.pop();
        }
        assert!(!verify_report(&r).passed);
    }

    #[test]
    fn wrong_verdict_fails() {
        let mut r = report("four_cycle", Analysis::Prestress);
        r.verdict = Verdict::Certified;
        assert!(!verify_report(&r).passed);
    }
}
