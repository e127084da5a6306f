//! Seeded generators shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rigidity_core::framework::{Framework, TrivialFlex};
use rigidity_core::lift::LiftedFace;
use rigidity_core::triangulate::P2;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Generic points in `R^d` with each pair joined with probability `density`.
pub fn random_framework(seed: u64, n: usize, d: usize, density: f64) -> Framework {
    let mut rng = rng(seed);
    let rows: Vec<Vec<f64>> =
        (0..n).map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < density {
                edges.push((i, j));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1));
    }
    Framework::from_parts(d, &rows, &edges).expect("generic framework")
}

/// A random rigid motion velocity in `R^dim`.
pub fn random_trivial(rng: &mut ChaCha8Rng, dim: usize) -> TrivialFlex {
    let upper: Vec<f64> = (0..dim * (dim - 1) / 2).map(|_| StandardNormal.sample(rng)).collect();
    TrivialFlex::new(dim, upper, gaussian_vector(rng, dim)).expect("sizes agree")
}

/// Strictly convex polygon with `k` vertices on a random ellipse.
pub fn random_convex_polygon(rng: &mut ChaCha8Rng, k: usize) -> Vec<P2> {
    let angles = loop {
        let mut a: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * TAU).collect();
        a.sort_by(f64::total_cmp);
        let mut gap = a[0] + TAU - a[k - 1];
        for w in a.windows(2) {
            gap = gap.min(w[1] - w[0]);
        }
        if gap > 0.25 && a.windows(2).all(|w| w[1] - w[0] < 3.0) && a[0] + TAU - a[k - 1] < 3.0 {
            break a;
        }
    };
    let (ax, ay) = (rng.random_range(0.6..2.0), rng.random_range(0.6..2.0));
    let rot: f64 = rng.random::<f64>() * TAU;
    let (c, s) = (rot.cos(), rot.sin());
    let (tx, ty) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    angles
        .iter()
        .map(|t| {
            let (x, y) = (ax * t.cos(), ay * t.sin());
            [tx + c * x - s * y, ty + s * x + c * y]
        })
        .collect()
}

/// Envelope lift over a random convex polygon with random slopes and up to two caps.
pub fn random_lift(seed: u64) -> LiftedFace {
    let mut rng = rng(seed);
    let k = rng.random_range(3..=7);
    let base = random_convex_polygon(&mut rng, k);
    let slopes: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..4.0)).collect();
    let caps_n = rng.random_range(0..=2);
    let caps: Vec<[f64; 3]> = (0..caps_n)
        .map(|_| {
            let a = [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)];
            let lowest = base.iter().map(|p| a[0] * p[0] + a[1] * p[1]).fold(f64::INFINITY, f64::min);
            [a[0], a[1], rng.random_range(0.1..0.8) - lowest]
        })
        .collect();
    LiftedFace::from_envelope(base, &slopes, &caps).expect("random envelope lift")
}

/// Vertices greedily chosen so that they affinely span the configuration.
pub fn spanning_pins(f: &Framework) -> Vec<usize> {
    let target = f.span_dim();
    let mut pins: Vec<usize> = vec![0];
    for v in 1..f.vertex_count() {
        if pins_span(f, &pins) == target {
            break;
        }
        let mut trial = pins.clone();
        trial.push(v);
        if pins_span(f, &trial) > pins_span(f, &pins) {
            pins = trial;
        }
    }
    pins
}

fn pins_span(f: &Framework, pins: &[usize]) -> usize {
    let d = f.dimension();
    let p0 = f.configuration().point(pins[0]);
    let m = DMatrix::from_fn(pins.len(), d, |r, c| f.points()[(pins[r], c)] - p0[c]);
    m.rank(1e-9 * f.configuration().diameter().max(1.0))
}
