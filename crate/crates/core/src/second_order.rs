//! Second-order flexes: extension of a first-order flex, per-flex blocking by a
//! stress, a heuristic falsifier for second-order rigidity, and the pinned
//! universal second-order rigidity decision.
//!
//! Second-order rigidity is not decided in general. [`second_order_falsify`]
//! can refute it by exhibiting a witness, never certify it.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::framework::{Assignment, Framework};
use crate::linalg::{self, Tol};
use crate::linear::{self, FlexKind, LinearError, SpaceTag};
use crate::synthesis::{self, FarkasWitness, PdCertificate, SolverOptions, SynthesisError, SynthesisOutcome, Undecided};
use crate::tolerances::Tolerances;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SecondOrderError {
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error("first-order residual {0:.3e} exceeds the flex tolerance")]
    NotAFlex(f64),
    #[error("analysis dimension {dim} is below the framework dimension {framework}")]
    Dimension { dim: usize, framework: usize },
}

/// A pair `(p', p'')` with `R(p,p') = 0` and `R(p,p'') + R(p',p') = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondOrderFlex {
    pub first: Assignment,
    pub second: Assignment,
    /// `|R(p, p')|_∞`.
    pub first_residual: f64,
    /// `|R(p, p'') + R(p', p')|_∞`.
    pub second_residual: f64,
}

fn embed_for(f: &Framework, v: &Assignment) -> Result<Framework, SecondOrderError> {
    if v.nrows() != f.vertex_count() {
        return Err(LinearError::Shape("assignment row count differs from vertex count".into()).into());
    }
    if v.ncols() < f.dimension() {
        return Err(SecondOrderError::Dimension { dim: v.ncols(), framework: f.dimension() });
    }
    Ok(f.embedded(v.ncols()))
}

fn first_order_check(fe: &Framework, v: &Assignment, tol: &Tolerances) -> Result<f64, SecondOrderError> {
    let res = linear::rigidity_form_at(fe, v)?.amax();
    let scale = fe.edge_scale() * v.norm();
    if res > tol.flex.max(1e-9) * scale.max(1.0) {
        return Err(SecondOrderError::NotAFlex(res));
    }
    Ok(res)
}

/// Solve `R(p) p'' = -R(p', p')` by least squares.
pub fn extend_to_second_order(f: &Framework, p1: &Assignment) -> Result<Option<SecondOrderFlex>, SecondOrderError> {
    extend_to_second_order_tol(f, p1, &Tolerances::default())
}

pub fn extend_to_second_order_tol(
    f: &Framework,
    p1: &Assignment,
    tol: &Tolerances,
) -> Result<Option<SecondOrderFlex>, SecondOrderError> {
    let fe = embed_for(f, p1)?;
    let first_residual = first_order_check(&fe, p1, tol)?;
    let b = -linear::rigidity_form(&fe, p1, p1)?;
    let r = linear::rigidity_matrix(&fe);
    let x = linalg::least_squares(&r, &b, Tol::Rel(1e-12));
    let second = linalg::unflatten(&x, fe.vertex_count(), fe.dimension());
    let second_residual = (&r * &x - &b).amax();
    let scale = b.amax().max(1e-300);
    if second_residual <= tol.second_order * scale || b.amax() <= 1e-14 * p1.norm_squared() {
        Ok(Some(SecondOrderFlex { first: p1.clone(), second, first_residual, second_residual }))
    } else {
        Ok(None)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockVerdict {
    Blocked,
    NotBlocked,
    /// The stress projection ratio falls in the band between the two thresholds.
    Undecided,
    /// Trivial flexes have zero energy under every stress.
    Trivial,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockReport {
    pub verdict: BlockVerdict,
    /// Unit stress with positive energy on the flex, when blocked.
    pub stress: Option<DVector<f64>>,
    /// `wᵀ R(p', p')` for the reported stress.
    pub energy: f64,
    /// `|Sᵀ R(p',p')| / |R(p',p')|` for an orthonormal stress basis `S`.
    pub ratio: f64,
}

pub const BLOCK_UPPER: f64 = 1e-8;
pub const BLOCK_LOWER: f64 = 1e-9;

/// Whether some equilibrium stress has positive energy on `p1`.
pub fn is_blocked(f: &Framework, p1: &Assignment) -> Result<BlockReport, SecondOrderError> {
    let fe = embed_for(f, p1)?;
    first_order_check(&fe, p1, &Tolerances::default())?;
    let cls = linear::classify_flex(&fe, p1)?;
    if cls.kind == FlexKind::Trivial {
        return Ok(BlockReport { verdict: BlockVerdict::Trivial, stress: None, energy: 0.0, ratio: 0.0 });
    }
    let b = linear::rigidity_form(&fe, p1, p1)?;
    let s = linear::stress_space(f);
    let bn = b.norm();
    if s.ncols() == 0 || bn <= 1e-14 * p1.norm_squared() {
        return Ok(BlockReport { verdict: BlockVerdict::NotBlocked, stress: None, energy: 0.0, ratio: 0.0 });
    }
    let coeff = s.transpose() * &b;
    let ratio = coeff.norm() / bn;
    let verdict = if ratio > BLOCK_UPPER {
        BlockVerdict::Blocked
    } else if ratio < BLOCK_LOWER {
        BlockVerdict::NotBlocked
    } else {
        BlockVerdict::Undecided
    };
    let (stress, energy) = if verdict == BlockVerdict::Blocked {
        let w = (&s * &coeff).normalize();
        let e = w.dot(&b);
        (Some(w), e)
    } else {
        (None, 0.0)
    };
    Ok(BlockReport { verdict, stress, energy, ratio })
}

/// Default universal analysis dimension `min(n - 1, span + 3)`, at least `d`.
pub fn default_analysis_dimension(f: &Framework) -> usize {
    let n = f.vertex_count();
    (f.span_dim() + 3).min(n.saturating_sub(1)).max(f.dimension())
}

#[derive(Clone, Debug)]
pub struct FalsifyOptions {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for FalsifyOptions {
    fn default() -> Self {
        Self { restarts: 50, iterations: 200, seed: 0 }
    }
}

/// Search the unit sphere of nontrivial flexes in `R^dim` for one whose
/// `R(p', p')` lies in the column span of `R(p)`.
pub fn second_order_falsify(
    f: &Framework,
    dim: usize,
    opts: &FalsifyOptions,
) -> Result<Option<SecondOrderFlex>, SecondOrderError> {
    if dim < f.dimension() {
        return Err(SecondOrderError::Dimension { dim, framework: f.dimension() });
    }
    let fe = f.embedded(dim);
    let basis = linear::flex_space(&fe, SpaceTag::NontrivialQuotient);
    let k = basis.len();
    if k == 0 {
        return Ok(None);
    }
    let s = linear::stress_space(f);
    let h: Vec<DMatrix<f64>> = (0..s.ncols())
        .map(|c| {
            let omega = linear::stress_matrix(f, &s.column(c).into_owned()).expect("lengths agree");
            basis.vectors.transpose() * linear::energy_form(&omega, dim) * &basis.vectors
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts.max(1) {
        let mut y = DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
        y /= y.norm();
        let y = levenberg_marquardt(&h, y, opts.iterations);
        let p1 = linalg::unflatten(&(&basis.vectors * y.normalize()), fe.vertex_count(), dim);
        if let Some(flex) = extend_to_second_order(&fe, &p1)? {
            return Ok(Some(flex));
        }
    }
    Ok(None)
}

/// Minimize `Σ_k (yᵀ H_k y)² + (yᵀy - 1)²`.
fn levenberg_marquardt(h: &[DMatrix<f64>], mut y: DVector<f64>, iters: usize) -> DVector<f64> {
    let k = y.len();
    let residual = |y: &DVector<f64>| {
        let mut r = DVector::zeros(h.len() + 1);
        for (i, hk) in h.iter().enumerate() {
            r[i] = (y.transpose() * hk * y)[(0, 0)];
        }
        r[h.len()] = y.norm_squared() - 1.0;
        r
    };
    let mut r = residual(&y);
    let mut mu = 1e-3;
    for _ in 0..iters {
        if r.norm() < 1e-15 {
            break;
        }
        let mut jac = DMatrix::zeros(h.len() + 1, k);
        for (i, hk) in h.iter().enumerate() {
            jac.set_row(i, &((hk * &y) * 2.0).transpose());
        }
        jac.set_row(h.len(), &(&y * 2.0).transpose());
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..30 {
            let a = &jtj + DMatrix::identity(k, k) * mu;
            let step = match a.clone().cholesky() {
                Some(ch) => ch.solve(&jtr),
                None => linalg::least_squares(&a, &jtr, Tol::Rel(1e-14)),
            };
            let cand = &y - step;
            let rc = residual(&cand);
            if rc.norm() < r.norm() {
                y = cand;
                r = rc;
                mu = (mu * 0.3).max(1e-15);
                improved = true;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    y
}

#[derive(Clone, Debug)]
pub enum PinnedOutcome {
    /// Pinned universally second-order rigid.
    Certificate(PdCertificate),
    /// A pinned second-order flex in dimension `d + r`.
    Witness { witness: FarkasWitness, flex: SecondOrderFlex },
    Undecided(Undecided),
}

impl PinnedOutcome {
    pub fn certificate(&self) -> Option<&PdCertificate> {
        match self {
            PinnedOutcome::Certificate(c) => Some(c),
            _ => None,
        }
    }

    pub fn witness(&self) -> Option<(&FarkasWitness, &SecondOrderFlex)> {
        match self {
            PinnedOutcome::Witness { witness, flex } => Some((witness, flex)),
            _ => None,
        }
    }
}

/// Decide pinned universal second-order rigidity with pin set `pins`.
pub fn pinned_u2r_decide(
    f: &Framework,
    pins: &[usize],
    opts: &SolverOptions,
) -> Result<PinnedOutcome, SecondOrderError> {
    synthesis::pins_span_configuration(f, pins)?;
    let mut pins = pins.to_vec();
    pins.sort_unstable();
    pins.dedup();
    let target = linear::normal_pinned_basis(f.vertex_count(), &pins);
    match synthesis::synthesize_pd_stress(f, &target, opts)? {
        SynthesisOutcome::Certificate(c) => Ok(PinnedOutcome::Certificate(c)),
        SynthesisOutcome::Undecided(u) => Ok(PinnedOutcome::Undecided(u)),
        SynthesisOutcome::Witness(w) => {
            let flex = unpack_witness(f, &w)?;
            Ok(PinnedOutcome::Witness { witness: w, flex })
        }
    }
}

/// Turn a Gram witness on normal coordinates into `(p', p'')` in `R^{d + r}`:
/// each factor column moves along its own axis orthogonal to the configuration.
pub fn unpack_witness(f: &Framework, w: &FarkasWitness) -> Result<SecondOrderFlex, SecondOrderError> {
    let n = f.vertex_count();
    let d = f.dimension();
    let extra = w.flex_factor.ncols();
    let dim = d + extra;
    let mut first = DMatrix::zeros(n, dim);
    first.view_mut((0, d), (n, extra)).copy_from(&w.flex_factor);
    let r = linear::rigidity_matrix(f);
    let x = linalg::least_squares(&r, &(-&w.edge_image), Tol::Rel(1e-12));
    let p2 = linalg::unflatten(&x, n, d);
    let mut second = DMatrix::zeros(n, dim);
    second.view_mut((0, 0), (n, d)).copy_from(&p2);
    let fe = f.embedded(dim);
    let first_residual = linear::rigidity_form_at(&fe, &first)?.amax();
    let b = linear::rigidity_form_at(&fe, &second)? + linear::rigidity_form(&fe, &first, &first)?;
    Ok(SecondOrderFlex { first, second, first_residual, second_residual: b.amax() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::make_example;
    use crate::framework::TrivialFlex;

    #[test]
    fn trivial_flexes_extend() {
        let f = make_example("octahedron", &[]).unwrap();
        let t = TrivialFlex::new(3, vec![0.2, 0.5, -0.3], DVector::from_vec(vec![0.1, 0.0, 1.0])).unwrap();
        let v = t.evaluate(f.configuration()).unwrap();
        let ext = extend_to_second_order(&f, &v).unwrap().expect("extension");
        assert!(ext.second_residual < 1e-10);
        assert_eq!(is_blocked(&f, &v).unwrap().verdict, BlockVerdict::Trivial);
    }

    #[test]
    fn y_pinned_center_lift_extends_with_legs_pulled_in() {
        let f = make_example("y_pinned", &[]).unwrap().embedded(3);
        let mut v = DMatrix::zeros(4, 3);
        v[(3, 2)] = 1.0;
        let ext = extend_to_second_order(&f, &v).unwrap().expect("extension");
        assert!(ext.second_residual < 1e-12);
        // Each leg's length equation: (p_i - p_c)·(p''_i - p''_c) = -|p'_c|².
        for k in 0..3 {
            let dp = f.configuration().point(k) - f.configuration().point(3);
            let dq = (ext.second.row(k) - ext.second.row(3)).transpose();
            assert!((dp.dot(&dq) + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn four_cycle_mechanism_is_not_blocked() {
        let f = make_example("four_cycle", &[]).unwrap();
        let b = linear::flex_space(&f, SpaceTag::NontrivialQuotient);
        let r = is_blocked(&f, &b.assignment(0)).unwrap();
        assert_eq!(r.verdict, BlockVerdict::NotBlocked);
        assert!(extend_to_second_order(&f, &b.assignment(0)).unwrap().is_some());
    }

    #[test]
    fn twisted_triangle_pinned_flexes_are_blocked() {
        let f = make_example("twisted_triangle", &[]).unwrap().embedded(3);
        let pinned = linear::flex_space(&f, SpaceTag::PinnedFlexes);
        assert_eq!(pinned.len(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let c = DVector::from_fn(3, |_, _| StandardNormal.sample(&mut rng));
            let v = linalg::unflatten(&(&pinned.vectors * c), 6, 3);
            let r = is_blocked(&f, &v).unwrap();
            assert_eq!(r.verdict, BlockVerdict::Blocked);
            assert!(r.energy > 0.0);
            assert!(extend_to_second_order(&f, &v).unwrap().is_none());
        }
    }

    #[test]
    fn falsifier_verdicts() {
        let fc = make_example("four_cycle", &[]).unwrap();
        let w = second_order_falsify(&fc, 2, &FalsifyOptions::default()).unwrap().expect("witness");
        assert!(w.first_residual < 1e-9 && w.second_residual < 1e-8);
        let oct = make_example("octahedron", &[]).unwrap();
        assert!(second_order_falsify(&oct, 3, &FalsifyOptions::default()).unwrap().is_none());
    }

    #[test]
    fn pinned_decisions() {
        let o = SolverOptions::default();
        let y = make_example("y_pinned", &[]).unwrap();
        let out = pinned_u2r_decide(&y, &[0, 1, 2], &o).unwrap();
        let (_, flex) = out.witness().expect("witness");
        assert!(flex.first_residual <= 1e-9 && flex.second_residual <= 1e-8);
        for p in 0..3 {
            assert_eq!(flex.first.row(p).norm(), 0.0);
        }
        let t = make_example("twisted_triangle", &[]).unwrap();
        assert!(pinned_u2r_decide(&t, &[0, 1, 2], &o).unwrap().certificate().is_some());
        assert!(matches!(
            pinned_u2r_decide(&y, &[0, 3], &o),
            Err(SecondOrderError::Synthesis(SynthesisError::PinSpan { .. }))
        ));
    }

    #[test]
    fn non_flex_is_rejected() {
        let f = make_example("segment", &[]).unwrap();
        let v = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert!(matches!(extend_to_second_order(&f, &v), Err(SecondOrderError::NotAFlex(_))));
    }
}
