mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rigidity_core::fixtures::CATALOG;
use rigidity_core::framework::evaluate_trivial_flex;
use rigidity_core::holeyhedron::{self, Certify3dOutcome, Holeyhedron, Polytope3, SurfaceOptions, SURFACE_CATALOG};
use rigidity_core::linear::{self, SpaceTag};
use rigidity_core::report::{self, Analysis, RunOptions};
use rigidity_core::synthesis::SolverOptions;
use rigidity_core::verify;

fn surface(which: usize) -> Holeyhedron {
    match which {
        0 => Holeyhedron::plain(Polytope3::cube()),
        1 => holeyhedron::cube_with_frustum_hole(),
        _ => Holeyhedron::plain(Polytope3::octahedron()),
    }
}

fn force(f: &rigidity_core::Framework, w: &DVector<f64>) -> f64 {
    let mut acc = DMatrix::<f64>::zeros(f.vertex_count(), 3);
    for (k, &(i, j)) in f.edges().iter().enumerate() {
        let d = f.edge_vector(k) * w[k];
        for a in 0..3 {
            acc[(i, a)] += d[a];
            acc[(j, a)] -= d[a];
        }
    }
    (0..acc.nrows()).map(|i| acc.row(i).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn assembled_stress_is_in_equilibrium(seed in 0u64..1000, which in 0usize..3, steiner in 0usize..3) {
        let h = surface(which);
        let t = holeyhedron::triangulate_surface(&h, &SurfaceOptions::random(seed, steiner, 1)).unwrap();
        let a = holeyhedron::assemble_face_stresses(&h, &t, &SolverOptions::default()).unwrap();
        let f = &t.framework;
        let scale = a.omega.amax() * f.edge_scale();
        prop_assert!(force(f, &a.omega) <= 1e-8 * scale.max(1e-300));
        prop_assert!(a.equilibrium_residual <= 1e-8);
    }

    #[test]
    fn trivial_flexes_do_not_change_energy(seed in 0u64..1000, which in 0usize..2) {
        let h = surface(which);
        let t = holeyhedron::triangulate_surface(&h, &SurfaceOptions::random(seed, 1, 1)).unwrap();
        let a = holeyhedron::assemble_face_stresses(&h, &t, &SolverOptions::default()).unwrap();
        let f = &t.framework;
        let q = linear::flex_space(f, SpaceTag::NontrivialQuotient);
        let mut rng = common::rng(seed);
        let v = &q.vectors * common::gaussian_vector(&mut rng, q.len());
        let p1 = DMatrix::from_fn(f.vertex_count(), 3, |i, c| v[3 * i + c]);
        let moved = &p1 + evaluate_trivial_flex(&common::random_trivial(&mut rng, 3), f.configuration()).unwrap();
        let e0 = linear::stress_energy(f, &a.omega, &p1).unwrap();
        let e1 = linear::stress_energy(f, &a.omega, &moved).unwrap();
        let scale = a.omega.amax() * moved.norm_squared().max(1.0);
        prop_assert!((e0 - e1).abs() <= 1e-10 * scale, "{e0} vs {e1}");
    }

    #[test]
    fn extra_edges_keep_the_certificate(seed in 0u64..1000, which in 0usize..2, extra in 1usize..6) {
        let h = surface(which);
        let t = holeyhedron::triangulate_surface(&h, &SurfaceOptions::random(seed, 1, 1)).unwrap();
        let out = holeyhedron::certify_surface(&h, &t, &SolverOptions::default()).unwrap();
        let Certify3dOutcome::Certificate(cert) = out.outcome else { panic!("surface is certified") };
        let f = &t.framework;
        let mut rng = common::rng(seed);
        let mut non_edges = f.graph().non_edges();
        let mut added = Vec::new();
        for _ in 0..extra.min(non_edges.len()) {
            added.push(non_edges.swap_remove(rng.random_range(0..non_edges.len())));
        }
        let g = f.with_extra_edges(&added).unwrap();
        let mut w = DVector::zeros(g.edge_count());
        for (k, &(i, j)) in f.edges().iter().enumerate() {
            w[g.graph().edge_index(i, j).unwrap()] = cert.stress[k];
        }
        prop_assert!(linear::relative_equilibrium_residual(&g, &w).unwrap() <= 1e-8);
        let q = linear::flex_space(&g, SpaceTag::NontrivialQuotient);
        prop_assert!(q.len() <= out.quotient_dim);
        if !q.is_empty() {
            let omega = linear::stress_matrix(&g, &w).unwrap();
            let m = q.vectors.transpose() * linear::energy_form(&omega, 3) * &q.vectors;
            let min = (0.5 * (&m + m.transpose())).symmetric_eigen().eigenvalues.min();
            prop_assert!(min > 1e-7 * cert.omega_norm, "lambda {min}");
        }
    }
}

#[test]
fn reports_are_byte_deterministic() {
    let analyses = [Analysis::Infinitesimal, Analysis::Prestress, Analysis::Super, Analysis::SecondOrderFalsify];
    for (name, _) in CATALOG {
        let (label, subject) = report::load_subject(Some(name), None, None).unwrap();
        for a in analyses {
            for seed in [0, 7] {
                let opts = RunOptions { seed, ..RunOptions::default() };
                let r1 = report::run_analysis(&label, &subject, a, &opts).unwrap().0.to_json();
                let r2 = report::run_analysis(&label, &subject, a, &opts).unwrap().0.to_json();
                assert_eq!(r1, r2, "{name} {a:?}");
                assert!(verify::verify_report(&report::AnalysisReport::from_json(&r1).unwrap()).passed, "{name} {a:?}");
            }
        }
    }
    for name in SURFACE_CATALOG {
        let (label, subject) = report::load_subject(Some(name), None, None).unwrap();
        let r1 = report::run_analysis(&label, &subject, Analysis::Holeyhedron, &RunOptions::default()).unwrap().0.to_json();
        let r2 = report::run_analysis(&label, &subject, Analysis::Holeyhedron, &RunOptions::default()).unwrap().0.to_json();
        assert_eq!(r1, r2, "{name}");
        assert!(verify::verify_report(&report::AnalysisReport::from_json(&r1).unwrap()).passed, "{name}");
    }
}

#[test]
fn verifier_does_not_call_the_search_code() {
    let src = include_str!("../src/verify.rs");
    for forbidden in ["synthesis::", "wolfe::", "second_order::", "linalg::", "linear::stress", "linear::flex", "linear::rigidity"] {
        assert!(!src.contains(forbidden), "verify.rs uses {forbidden}");
    }
}
