use serde::{Deserialize, Serialize};

/// Numerical thresholds used by every decision procedure. Values are relative
/// to the natural scale of the quantity they test unless noted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Singular-value cutoff for ranks and kernels.
    pub rank: f64,
    /// Smallest reduced eigenvalue, relative to `|Ω|₂`, accepted as positive definite.
    pub pd: f64,
    /// Column-span residual of a Farkas witness's edge image.
    pub witness: f64,
    /// Vertex force imbalance, relative to `|ω|_∞ ·` edge scale.
    pub equilibrium: f64,
    /// Second-order residual `|R(p,p'') + R(p',p')|`.
    pub second_order: f64,
    /// First-order residual `|R(p,p')|`.
    pub flex: f64,
    /// Negative eigenvalue allowance for PSD checks, relative to the largest.
    pub psd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: 1e-9,
            pd: 1e-7,
            witness: 1e-7,
            equilibrium: 1e-8,
            second_order: 1e-8,
            flex: 1e-9,
            psd: 1e-9,
        }
    }
}

impl Tolerances {
    /// Defaults with the rank and flex cutoffs replaced by `tol`.
    pub fn with_rank(tol: f64) -> Self {
        Self { rank: tol, flex: tol, ..Self::default() }
    }
}
