//! Minimum-norm point of a polytope given as the convex hull of finitely many
//! points (Wolfe's active-set method).

use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, Tol};

#[derive(Clone, Debug)]
pub struct MinNormPoint {
    pub point: DVector<f64>,
    /// Convex weights over the input points, as `(index, weight)` pairs.
    pub weights: Vec<(usize, f64)>,
}

impl MinNormPoint {
    pub fn norm(&self) -> f64 {
        self.point.norm()
    }
}

/// Minimize `|x|` over `conv(points)`. All points must share one dimension.
pub fn min_norm_point(points: &[DVector<f64>]) -> MinNormPoint {
    assert!(!points.is_empty(), "min_norm_point needs at least one point");
    let dim = points[0].len();
    let scale = points.iter().map(|p| p.norm_squared()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let eps_stop = 1e-13 * scale;
    let eps_weight = 1e-13;

    let start = (0..points.len())
        .min_by(|&a, &b| points[a].norm_squared().total_cmp(&points[b].norm_squared()))
        .unwrap();
    let mut active = vec![start];
    let mut lambda = vec![1.0];
    let mut x = points[start].clone();
    if dim == 0 {
        return MinNormPoint { point: x, weights: vec![(start, 1.0)] };
    }

    for _major in 0..(50 * points.len() + 100) {
        let (j, best) = (0..points.len())
            .map(|k| (k, x.dot(&points[k])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if x.norm_squared() - best <= eps_stop || active.contains(&j) {
            break;
        }
        active.push(j);
        lambda.push(0.0);

        loop {
            let mu = affine_minimizer(points, &active);
            if mu.iter().all(|&m| m > eps_weight) {
                lambda = mu;
                break;
            }
            let mut theta = 1.0_f64;
            for (l, m) in lambda.iter().zip(mu.iter()) {
                if *m <= eps_weight && l - m > 0.0 {
                    theta = theta.min(l / (l - m));
                }
            }
            for (l, m) in lambda.iter_mut().zip(mu.iter()) {
                *l = (1.0 - theta) * *l + theta * m;
            }
            let mut k = 0;
            while k < active.len() {
                if lambda[k] <= eps_weight {
                    active.remove(k);
                    lambda.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
            if active.len() <= 1 {
                break;
            }
        }
        x = combine(points, &active, &lambda);
    }
    let weights = active.into_iter().zip(lambda).collect();
    MinNormPoint { point: x, weights }
}

fn combine(points: &[DVector<f64>], active: &[usize], lambda: &[f64]) -> DVector<f64> {
    let mut x = DVector::zeros(points[0].len());
    for (&k, &l) in active.iter().zip(lambda) {
        x += &points[k] * l;
    }
    x
}

/// Affine weights (summing to one) of the minimum-norm point of `aff(active)`.
fn affine_minimizer(points: &[DVector<f64>], active: &[usize]) -> Vec<f64> {
    let p0 = &points[active[0]];
    let k = active.len() - 1;
    if k == 0 {
        return vec![1.0];
    }
    let mut d = DMatrix::zeros(p0.len(), k);
    for (c, &a) in active[1..].iter().enumerate() {
        d.set_column(c, &(&points[a] - p0));
    }
    let beta = linalg::least_squares(&d, &(-p0), Tol::Rel(1e-12));
    let mut mu = Vec::with_capacity(k + 1);
    mu.push(1.0 - beta.sum());
    mu.extend(beta.iter().copied());
    mu
}
