//! Dense numerical helpers shared by the rigidity modules.
//!
//! Rank decisions go through singular values. Full orthonormal null spaces
//! come from a square-padded SVD so that wide matrices still yield a complete
//! right singular basis.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

/// Cutoff rule for deciding which singular values are zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tol {
    /// Values at or below `rel * sigma_max` count as zero.
    Rel(f64),
    /// Values at or below the given absolute threshold count as zero.
    Abs(f64),
}

impl Tol {
    fn cutoff(self, sigma_max: f64) -> f64 {
        match self {
            Tol::Rel(r) => r * sigma_max,
            Tol::Abs(a) => a,
        }
    }
}

/// Singular values in descending order (length `min(rows, cols)`).
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    SVD::new(m.clone(), false, false).singular_values.iter().copied().collect()
}

pub fn rank(m: &DMatrix<f64>, tol: Tol) -> usize {
    let sv = singular_values(m);
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    let cut = tol.cutoff(smax);
    sv.iter().filter(|&&s| s > cut).count()
}

/// Orthonormal basis (as columns) of `{x : m x = 0}`.
pub fn null_space(m: &DMatrix<f64>, tol: Tol) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    if r == 0 {
        return DMatrix::identity(c, c);
    }
    let padded = if r < c {
        let mut p = DMatrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = SVD::new(padded, false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sv = &svd.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let cut = if smax == 0.0 { f64::INFINITY } else { tol.cutoff(smax) };
    let keep: Vec<usize> = (0..c).filter(|&k| sv[k] <= cut).collect();
    let mut out = DMatrix::zeros(c, keep.len());
    for (col, &k) in keep.iter().enumerate() {
        out.set_column(col, &v_t.row(k).transpose());
    }
    out
}

/// Orthonormal basis of `{y : yᵀ m = 0}`.
pub fn left_null_space(m: &DMatrix<f64>, tol: Tol) -> DMatrix<f64> {
    null_space(&m.transpose(), tol)
}

/// Orthonormal basis of the column space of `m`.
pub fn column_space(m: &DMatrix<f64>, tol: Tol) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(r, 0);
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sv = &svd.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return DMatrix::zeros(r, 0);
    }
    let cut = tol.cutoff(smax);
    let keep: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] > cut).collect();
    let mut out = DMatrix::zeros(r, keep.len());
    for (col, &k) in keep.iter().enumerate() {
        out.set_column(col, &u.column(k));
    }
    out
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues ascending.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, tol: Tol) -> DVector<f64> {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return DVector::zeros(c);
    }
    let svd = SVD::new(a.clone(), true, true);
    let u = svd.u.as_ref().expect("u");
    let v_t = svd.v_t.as_ref().expect("v_t");
    let sv = &svd.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let mut x = DVector::zeros(c);
    if smax == 0.0 {
        return x;
    }
    let cut = tol.cutoff(smax);
    for k in 0..sv.len() {
        if sv[k] > cut {
            let coeff = u.column(k).dot(b) / sv[k];
            x += v_t.row(k).transpose() * coeff;
        }
    }
    x
}

/// Row-major flattening of an `n × d` assignment into `R^{nd}` (vertex-major).
pub fn flatten(v: &DMatrix<f64>) -> DVector<f64> {
    let (n, d) = v.shape();
    DVector::from_fn(n * d, |k, _| v[(k / d, k % d)])
}

pub fn unflatten(x: &DVector<f64>, n: usize, d: usize) -> DMatrix<f64> {
    assert_eq!(x.len(), n * d, "flat vector length does not match n*d");
    DMatrix::from_fn(n, d, |i, a| x[i * d + a])
}

/// Spectral norm of a symmetric matrix.
pub fn sym_norm(m: &DMatrix<f64>) -> f64 {
    let (vals, _) = sym_eigen(m);
    vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
