//! Acceptance corpus. Each test prints one `PASS`/`FAIL` line before asserting.

mod common;

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rigidity_core::fixtures::CATALOG;
use rigidity_core::framework::{evaluate_trivial_flex, Framework};
use rigidity_core::holeyhedron::{self, Certify3dOutcome, SurfaceOptions, ValidateOptions};
use rigidity_core::lift;
use rigidity_core::linear::{self, FlexKind, SpaceTag};
use rigidity_core::second_order::{self, FalsifyOptions, PinnedOutcome};
use rigidity_core::synthesis::{self, PdCertificate, SolverOptions, SuperOutcome, SynthesisOutcome};
use rigidity_core::triangulate::{self, Region, TriangulateOptions};
use rigidity_core::make_example;

fn line(k: usize, ok: bool, detail: &str) {
    println!("criterion {k:>2}: {} {detail}", if ok { "PASS" } else { "FAIL" });
}

fn ex(name: &str) -> Framework {
    make_example(name, &[]).unwrap()
}

/// Stress matrix rebuilt from edge data, independent of the library.
fn omega_of(f: &Framework, w: &DVector<f64>) -> DMatrix<f64> {
    let n = f.vertex_count();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (k, &(i, j)) in f.edges().iter().enumerate() {
        m[(i, j)] -= w[k];
        m[(j, i)] -= w[k];
        m[(i, i)] += w[k];
        m[(j, j)] += w[k];
    }
    m
}

fn max_force(f: &Framework, w: &DVector<f64>) -> f64 {
    let d = f.dimension();
    let mut force = DMatrix::<f64>::zeros(f.vertex_count(), d);
    for (k, &(i, j)) in f.edges().iter().enumerate() {
        for a in 0..d {
            let v = w[k] * (f.points()[(i, a)] - f.points()[(j, a)]);
            force[(i, a)] += v;
            force[(j, a)] -= v;
        }
    }
    (0..force.nrows()).map(|i| force.row(i).norm()).fold(0.0, f64::max)
}

fn edge_scale(f: &Framework) -> f64 {
    (0..f.edge_count()).map(|k| f.edge_vector(k).norm()).fold(0.0, f64::max)
}

/// `R(p, q)` with `q` in any dimension `D ≥ d`.
fn form(f: &Framework, p: &DMatrix<f64>, q: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        f.edge_count(),
        f.edges().iter().map(|&(i, j)| (0..p.ncols().min(q.ncols())).map(|a| (p[(i, a)] - p[(j, a)]) * (q[(i, a)] - q[(j, a)])).sum()),
    )
}

fn padded(f: &Framework, dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(f.vertex_count(), dim, |i, a| if a < f.dimension() { f.points()[(i, a)] } else { 0.0 })
}

/// Residual and smallest reduced eigenvalue of a certificate, recomputed from scratch.
fn recheck_certificate(f: &Framework, c: &PdCertificate) -> (f64, Option<f64>) {
    let w = &c.stress;
    let residual = if w.amax() == 0.0 { 0.0 } else { max_force(f, w) / (w.amax() * edge_scale(f)) };
    if c.target.is_empty() {
        return (residual, None);
    }
    let omega = omega_of(f, w);
    let d = c.target.dim;
    let mut big = DMatrix::zeros(omega.nrows() * d, omega.nrows() * d);
    for i in 0..omega.nrows() {
        for j in 0..omega.nrows() {
            for a in 0..d {
                big[(i * d + a, j * d + a)] = omega[(i, j)];
            }
        }
    }
    let reduced = c.target.vectors.transpose() * big * &c.target.vectors;
    let reduced = 0.5 * (&reduced + reduced.transpose());
    let min = reduced.symmetric_eigen().eigenvalues.min();
    (residual, Some(min))
}

/// Smallest Gram eigenvalue relative to the largest, and the column-span residual of the edge image.
fn recheck_witness(f: &Framework, gram: &DMatrix<f64>) -> (f64, f64) {
    let eig = gram.clone().symmetric_eigen().eigenvalues;
    let top = eig.amax();
    let psd = eig.min() / top;
    let image = DVector::from_iterator(
        f.edge_count(),
        f.edges().iter().map(|&(i, j)| gram[(i, i)] + gram[(j, j)] - 2.0 * gram[(i, j)]),
    );
    let r = linear::rigidity_matrix(f);
    let svd = r.svd(true, false);
    let u = svd.u.unwrap();
    let smax = svd.singular_values.max();
    let mut proj = DVector::zeros(image.len());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > 1e-9 * smax {
            let col = u.column(k);
            proj += col * col.dot(&image);
        }
    }
    (psd, (&image - proj).norm() / image.norm())
}

#[test]
fn criterion_01_infinitesimal_baseline() {
    let t = Instant::now();
    let oct = linear::is_infinitesimally_rigid_tol(&ex("octahedron"), 1e-9);
    let t_oct = t.elapsed();
    let t = Instant::now();
    let four = ex("four_cycle");
    let rep = linear::is_infinitesimally_rigid_tol(&four, 1e-9);
    let quotient = linear::flex_space(&four, SpaceTag::NontrivialQuotient).len();
    let t_four = t.elapsed();
    let limit = Duration::from_millis(100);
    let ok = oct.rigid && oct.rank == 12 && !rep.rigid && quotient == 1 && t_oct < limit && t_four < limit;
    line(1, ok, &format!("octahedron rank {} rigid {}; four_cycle quotient {quotient}; {t_oct:?} / {t_four:?}", oct.rank, oct.rigid));
    assert!(ok);
}

#[test]
fn criterion_02_farkas_alternative() {
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for (name, _) in CATALOG {
        let f = ex(name);
        let pins = if f.pins().is_empty() { common::spanning_pins(&f) } else { f.pins().to_vec() };
        let t = Instant::now();
        let out = second_order::pinned_u2r_decide(&f, &pins, &SolverOptions::default()).unwrap();
        let elapsed = t.elapsed();
        let verdict = match &out {
            PinnedOutcome::Certificate(c) => {
                let (res, lam) = recheck_certificate(&f, c);
                let lam_ok = match lam {
                    Some(l) => l >= 1e-7,
                    None => c.target.is_empty(),
                };
                if res > 1e-8 || !lam_ok {
                    failures.push(format!("{name}: certificate residual {res:e} lambda {lam:?}"));
                }
                "certificate"
            }
            PinnedOutcome::Witness { witness, .. } => {
                let (psd, colspan) = recheck_witness(&f, &witness.gram);
                if psd < -1e-9 || colspan > 1e-7 || witness.gram.trace() <= 0.0 {
                    failures.push(format!("{name}: witness psd {psd:e} colspan {colspan:e}"));
                }
                "witness"
            }
            PinnedOutcome::Undecided(u) => {
                failures.push(format!("{name}: undecided ({})", u.reason));
                "undecided"
            }
        };
        if elapsed > Duration::from_secs(5) {
            failures.push(format!("{name}: {elapsed:?}"));
        }
        summary.push(format!("{name}={verdict}"));
    }
    let ok = failures.is_empty() && CATALOG.len() >= 12;
    line(2, ok, &format!("{} fixtures [{}] {failures:?}", CATALOG.len(), summary.join(", ")));
    assert!(ok);
}

#[test]
fn criterion_03_pinned_y() {
    let f = ex("y_pinned");
    let out = second_order::pinned_u2r_decide(&f, f.pins(), &SolverOptions::default()).unwrap();
    let mut notes = Vec::new();
    let mut ok = false;
    if let PinnedOutcome::Witness { flex, .. } = &out {
        let dim = flex.first.ncols();
        let p = padded(&f, dim);
        let p1 = &flex.first;
        let scale = edge_scale(&f) * p1.norm();
        let r1 = form(&f, &p, p1).amax() / scale;
        let rhs = form(&f, p1, p1);
        let r2 = (form(&f, &p, &flex.second) + &rhs).amax() / rhs.amax().max(1e-300);
        let off_center = f.pins().iter().map(|&v| p1.row(v).norm()).fold(0.0, f64::max) / p1.norm();
        ok = r1 <= 1e-8 && r2 <= 1e-8 && off_center <= 1e-12 && p1.row(3).norm() > 0.0;
        notes.push(format!("y_pinned witness r1 {r1:.1e} r2 {r2:.1e} off-center {off_center:.1e}"));
    } else {
        notes.push("y_pinned gave no witness".into());
    }
    for name in ["y_braced", "y_subdivided"] {
        let g = ex(name);
        let out = second_order::pinned_u2r_decide(&g, g.pins(), &SolverOptions::default()).unwrap();
        let cert = matches!(&out, PinnedOutcome::Certificate(c) if recheck_certificate(&g, c).1.is_some_and(|l| l >= 1e-7));
        ok &= cert;
        notes.push(format!("{name} certificate {cert}"));
    }
    line(3, ok, &notes.join("; "));
    assert!(ok);
}

#[test]
fn criterion_04_twisted_triangle_needs_a_strut() {
    let f = ex("twisted_triangle");
    let out = second_order::pinned_u2r_decide(&f, f.pins(), &SolverOptions::default()).unwrap();
    let (ok, detail) = match &out {
        PinnedOutcome::Certificate(c) => {
            let (res, lam) = recheck_certificate(&f, c);
            let scale = c.stress.amax();
            let pins = f.pins();
            let most_negative = f
                .edges()
                .iter()
                .enumerate()
                .filter(|(_, (i, j))| !(pins.contains(i) && pins.contains(j)))
                .map(|(k, _)| c.stress[k] / scale)
                .fold(f64::INFINITY, f64::min);
            let ok = res <= 1e-8 && lam.is_some_and(|l| l > 0.0) && most_negative <= -1e-6;
            (ok, format!("lambda_min {lam:?}, most negative interior stress {most_negative:.4} of scale"))
        }
        other => (false, format!("no certificate: {other:?}")),
    };
    line(4, ok, &detail);
    assert!(ok);
}

#[test]
fn criterion_05_universal_chain() {
    let f = ex("square_with_diagonals");
    let rep = synthesis::universal_second_order_to_prestress(&f, &[0, 1, 2], &SolverOptions::default()).unwrap();
    let mut ok = false;
    let mut detail = String::from("no certificate");
    if let SynthesisOutcome::Certificate(c) = &rep.synthesis {
        let omega = omega_of(&f, &c.stress);
        let eig = omega.symmetric_eigen().eigenvalues;
        let norm = eig.amax();
        let min = eig.min();
        let rank = eig.iter().filter(|&&v| v > 1e-9 * norm).count();
        let expected = f.vertex_count() - f.dimension() - 1;
        let conic = linear::find_conic_at_infinity(&f);
        let space = linear::stress_space(&f);
        let cosine = match synthesis::super_stability_certificate(&f, &SolverOptions::default()).unwrap() {
            SuperOutcome::SuperStable(s) => {
                (s.stress.dot(&space.column(0)) / (s.stress.norm() * space.column(0).norm())).abs()
            }
            _ => 0.0,
        };
        ok = min >= -1e-9 * norm && rank == 1 && rank == expected && conic.is_none() && space.ncols() == 1 && cosine >= 1.0 - 1e-8;
        detail = format!("min eig {min:.2e}, rank {rank} (n-d-1 = {expected}), conic {}, cosine {cosine:.12}", conic.is_some());
    }
    line(5, ok, &detail);
    assert!(ok);
}

#[test]
fn criterion_06_spider_battery() {
    let t = Instant::now();
    let mut failures = Vec::new();
    let mut worst_residual: f64 = 0.0;
    let mut worst_margin = f64::INFINITY;
    for seed in 0..100 {
        let lf = common::random_lift(seed);
        let s = match lift::mc_project(&lf) {
            Ok(s) => s,
            Err(e) => {
                failures.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let rep = lift::verify_spider(&s);
        worst_residual = worst_residual.max(rep.residual);
        let margin = rep.margin.unwrap_or(f64::INFINITY);
        worst_margin = worst_margin.min(margin);
        if !rep.passed || rep.residual > 1e-10 || margin <= 0.0 {
            failures.push(format!("seed {seed}: residual {:e} margin {margin:e}", rep.residual));
        }
    }
    let elapsed = t.elapsed();
    let ok = failures.is_empty() && elapsed < Duration::from_secs(10);
    line(6, ok, &format!("100 lifts, worst residual {worst_residual:.1e}, worst margin {worst_margin:.2e}, {elapsed:?} {failures:?}"));
    assert!(ok);
}

#[test]
fn criterion_07_cotangent_weights() {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let mut delaunay_min = f64::INFINITY;
    for seed in 0..100u64 {
        let mut rng = common::rng(1000 + seed);
        let outer = common::random_convex_polygon(&mut rng, 4 + (seed as usize % 5));
        let with_hole = seed % 2 == 1;
        let holes = if with_hole {
            let c = [outer.iter().map(|p| p[0]).sum::<f64>() / outer.len() as f64, outer.iter().map(|p| p[1]).sum::<f64>() / outer.len() as f64];
            let r = 0.3 * triangulate::boundary_distance(c, &outer);
            vec![vec![[c[0] - r, c[1] - r], [c[0] + r, c[1] - r], [c[0] + r, c[1] + r], [c[0] - r, c[1] + r]]]
        } else {
            Vec::new()
        };
        let region = Region::new(outer, holes);
        let opts = TriangulateOptions { steiner: Vec::new(), random_steiner: 6 + (seed as usize % 10), seed };
        let t = triangulate::triangulate_region(&region, &opts).unwrap();
        let w = match lift::cotangent_weights(&t) {
            Ok(w) => w,
            Err(e) => {
                failures.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let interior = lift::interior_vertices(&t);
        let diam = t.points.iter().flat_map(|a| t.points.iter().map(move |b| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())).fold(0.0, f64::max);
        let res = lift::planar_residual(&t, &w, &interior) / (w.amax() * diam);
        worst = worst.max(res);
        if res > 1e-9 {
            failures.push(format!("seed {seed}: residual {res:e}"));
        }
        if !with_hole {
            let boundary = t.boundary_vertices();
            let on_boundary = |v: &usize| boundary.binary_search(v).is_ok();
            for (k, (i, j)) in t.edges().iter().enumerate() {
                let hull_edge = on_boundary(i) && on_boundary(j) && {
                    let n = region.outer.len();
                    (0..n).any(|a| {
                        let (p, q) = (region.outer[a], region.outer[(a + 1) % n]);
                        triangulate::segment_distance(t.points[*i], p, q) < 1e-12 && triangulate::segment_distance(t.points[*j], p, q) < 1e-12
                    })
                };
                if !hull_edge {
                    let rel = w[k] / w.amax();
                    delaunay_min = delaunay_min.min(rel);
                    if rel < -1e-12 {
                        failures.push(format!("seed {seed}: Delaunay edge {k} weight {rel:e}"));
                    }
                }
            }
        }
    }
    let hex: Vec<[f64; 2]> = (0..6).map(|k| {
        let a = std::f64::consts::PI / 3.0 * k as f64;
        [a.cos(), a.sin()]
    }).collect();
    let t = triangulate::triangulate_region(&Region::new(hex, Vec::new()), &TriangulateOptions { steiner: vec![[0.0, 0.0]], ..Default::default() }).unwrap();
    let w = lift::cotangent_weights(&t).unwrap();
    let center = t.points.iter().position(|p| p[0].abs() < 1e-15 && p[1].abs() < 1e-15).unwrap();
    let spoke_err = t
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, (i, j))| *i == center || *j == center)
        .map(|(k, _)| (w[k] - 2.0 / 3f64.sqrt()).abs())
        .fold(0.0, f64::max);
    let ok = failures.is_empty() && spoke_err <= 1e-12;
    line(7, ok, &format!("worst residual {worst:.1e}, Delaunay min interior weight {delaunay_min:.3e}, hexagon spoke error {spoke_err:.1e} {failures:?}"));
    assert!(ok);
}

/// Flexes moving one face-center vertex along its face normal.
fn face_normal_oracle(f: &Framework, centers: &[(usize, [f64; 3])]) -> DMatrix<f64> {
    let n = f.vertex_count();
    let mut m = DMatrix::zeros(3 * n, centers.len());
    for (c, &(v, nrm)) in centers.iter().enumerate() {
        for a in 0..3 {
            m[(3 * v + a, c)] = nrm[a];
        }
    }
    m
}

fn quotient_and_certificate(h: &holeyhedron::Holeyhedron, so: &SurfaceOptions) -> (Framework, usize, Option<f64>, String) {
    let t = holeyhedron::triangulate_surface(h, so).unwrap();
    let q = linear::flex_space(&t.framework, SpaceTag::NontrivialQuotient).len();
    let out = holeyhedron::certify_surface(h, &t, &SolverOptions::default()).unwrap();
    let (lam, kind) = match &out.outcome {
        Certify3dOutcome::Certificate(c) => (recheck_certificate(&t.framework, c).1, "certificate".to_string()),
        other => (None, other.kind().to_string()),
    };
    (t.framework, q, lam, kind)
}

#[test]
fn criterion_08_holed_cube() {
    let mut ok = true;
    let mut notes = Vec::new();
    let t0 = Instant::now();
    let (h, so) = holeyhedron::surface_fixture("cube_surface").unwrap();
    let (f, q, lam, kind) = quotient_and_certificate(&h, &so);
    let centers: Vec<(usize, [f64; 3])> = (0..6)
        .map(|face| {
            let frame = h.polytope.frame(face);
            let poly = h.polytope.face_polygon(face);
            let c2 = [poly.iter().map(|p| p[0]).sum::<f64>() / 4.0, poly.iter().map(|p| p[1]).sum::<f64>() / 4.0];
            let c3 = frame.to_space(c2);
            let v = (0..f.vertex_count())
                .find(|&v| (0..3).all(|a| (f.points()[(v, a)] - c3[a]).abs() < 1e-9))
                .expect("face center is a vertex");
            (v, frame.normal)
        })
        .collect();
    let oracle = face_normal_oracle(&f, &centers);
    let image = linear::rigidity_matrix(&f) * &oracle;
    let trivial = linear::trivial_flex_basis(f.configuration()).vectors;
    let modulo_trivial = &oracle - &trivial * (trivial.transpose() * &oracle);
    let oracle_rank = modulo_trivial.rank(1e-9);
    let rep = linear::is_infinitesimally_rigid(&f);
    let rigid = rep.rigid;
    let elapsed = t0.elapsed();
    let good = !rigid && q == 6 && oracle_rank == 6 && image.amax() <= 1e-12 && rep.nontrivial_dim == oracle_rank && lam.is_some_and(|l| l > 0.0) && elapsed < Duration::from_secs(30);
    ok &= good;
    notes.push(format!("face centers: quotient {q}, face-normal oracle rank {oracle_rank}, {kind} lambda {lam:?}, {elapsed:?}"));
    let h = holeyhedron::cube_with_frustum_hole();
    for seed in 0..5u64 {
        let t0 = Instant::now();
        let so = SurfaceOptions::random(seed, 1 + (seed as usize % 3), 1);
        let (f, q, lam, kind) = quotient_and_certificate(&h, &so);
        let elapsed = t0.elapsed();
        let rigid = linear::is_infinitesimally_rigid(&f).rigid;
        let good = !rigid && q > 0 && lam.is_some_and(|l| l > 0.0) && elapsed < Duration::from_secs(30);
        ok &= good;
        notes.push(format!("frustum seed {seed}: quotient {q}, {kind} lambda {lam:?}, {elapsed:?}"));
    }
    line(8, ok, &notes.join("; "));
    assert!(ok);
}

#[test]
fn criterion_09_negative_controls() {
    let (h, so) = holeyhedron::tetra_slit();
    let t = holeyhedron::triangulate_surface(&h, &so).unwrap();
    let val = holeyhedron::validate_holeyhedron(&h, &t, &ValidateOptions::default()).unwrap();
    let f = &t.framework;
    let dim = second_order::default_analysis_dimension(f);
    let flex = second_order::second_order_falsify(f, dim, &FalsifyOptions::default()).unwrap();
    let (flex_ok, flex_detail) = match &flex {
        Some(s) => {
            let p = padded(f, s.first.ncols());
            let r1 = form(f, &p, &s.first).amax() / (edge_scale(f) * s.first.norm());
            let rhs = form(f, &s.first, &s.first);
            let r2 = (form(f, &p, &s.second) + &rhs).amax() / rhs.amax().max(1e-300);
            let cls = linear::classify_flex(f, &s.first).unwrap();
            (r1 <= 1e-8 && r2 <= 1e-8 && cls.kind != FlexKind::Trivial, format!("flex r1 {r1:.1e} r2 {r2:.1e} {:?}", cls.kind))
        }
        None => (false, "no second-order flex found".into()),
    };
    let hv = holeyhedron::cube_hole_vertex_on_edge();
    let tv = holeyhedron::triangulate_surface(&hv, &SurfaceOptions::centered()).unwrap();
    let vc = holeyhedron::validate_holeyhedron(&hv, &tv, &ValidateOptions::default()).unwrap();
    let ok = !val.b_pass && flex_ok && !vc.c_pass;
    line(9, ok, &format!("slit (b) {}, {flex_detail}; hole vertex on edge (c) {}", val.b_pass, vc.c_pass));
    assert!(ok);
}

#[test]
fn criterion_10_appendix_machinery() {
    let mut misclassified = 0;
    for k in 0..1000u64 {
        let d = 2 + (k as usize % 2);
        let f = common::random_framework(k, 4 + (k as usize % 4), d, 0.5);
        let mut rng = common::rng(k ^ 0x5eed);
        let dim = d + (k as usize % 3);
        let t = common::random_trivial(&mut rng, dim);
        let v = evaluate_trivial_flex(&t, f.embedded(dim).configuration()).unwrap();
        let cls = linear::classify_flex(&f, &v).unwrap();
        if cls.kind != FlexKind::Trivial || cls.effective {
            misclassified += 1;
        }
    }
    let four = ex("four_cycle");
    let mech = linear::flex_space(&four, SpaceTag::NontrivialQuotient).assignment(0);
    let cls = linear::classify_flex(&four, &mech).unwrap();
    let conic = linear::find_conic_at_infinity(&four).map(|c| {
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]) / 2f64.sqrt();
        (&c.q - &expected).amax().min((&c.q + &expected).amax())
    });
    let ok = misclassified == 0 && cls.kind == FlexKind::AffineNontrivial && cls.effective && conic.is_some_and(|e| e <= 1e-9);
    line(10, ok, &format!("trivial misclassified {misclassified}/1000; four_cycle {:?} effective {}; conic error {conic:?}", cls.kind, cls.effective));
    assert!(ok);
}
