use nalgebra::DMatrix;

use super::{ln_laplace_m, MeasureSpec, NcwParams};
use crate::error::{Error, Result};
use crate::symcore::SymMatrix;

/// `q` and `k` with `2(2Σ)⁻¹w(2Σ)⁻¹ = q⁻¹ I(k,d) q⁻ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub q: DMatrix<f64>,
    pub k: usize,
    /// `(2Σ)⁻¹`.
    pub b: SymMatrix,
    /// Max-norm residual of the factorisation.
    pub residual: f64,
    /// Set when an eigenvalue of `w` sits close to the rank threshold.
    pub warning: Option<String>,
}

impl Reduction {
    /// `q s qᵀ`.
    pub fn a(&self, s: &SymMatrix) -> SymMatrix {
        s.congruence(&self.q)
    }
}

/// Diagonalises `2(2Σ)⁻¹w(2Σ)⁻¹ = u Δ uᵀ` with the zero eigenvalues first
/// and sets `q = diag(1,…,1,λ₁⁻¹,…,λ_k⁻¹) uᵀ`, `λ_i² ` the nonzero eigenvalues.
/// `tol ≤ 0` selects `w.default_tol()` for the rank of `w`.
pub fn reduce_to_canonical(params: &NcwParams, tol: f64) -> Result<Reduction> {
    let d = params.dim();
    let b = params.sigma.scale(2.0).inverse()?;
    let m = params.w.congruence(b.as_matrix()).scale(2.0);
    let tol = if tol > 0.0 {
        tol
    } else {
        params.w.default_tol()
    };

    let w_eigs = params.w.eigenvalues();
    let k = w_eigs.iter().filter(|&&v| v > tol).count();
    let warning = w_eigs
        .iter()
        .find(|&&v| v > 0.1 * tol && v <= 10.0 * tol)
        .map(|v| {
            format!("eigenvalue {v:e} of w is within a factor 10 of the rank tolerance {tol:e}")
        });

    let (vals, u) = m.eigen();
    let mut scale = vec![1.0; d];
    let mut lam = vec![0.0; d];
    for i in d - k..d {
        if vals[i] <= 0.0 {
            return Err(Error::Domain(format!(
                "noncentrality has {k} positive eigenvalues expected, found {}",
                vals[i]
            )));
        }
        lam[i] = vals[i].sqrt();
        scale[i] = 1.0 / lam[i];
    }
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(scale)) * u.transpose();

    let q_inv = &u
        * DMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |i, _| {
            if i >= d - k {
                lam[i]
            } else {
                1.0
            }
        }));
    let rebuilt = SymMatrix::canonical_noncentrality(k, d).congruence(&q_inv);
    let residual = rebuilt.max_abs_diff(&m);
    Ok(Reduction {
        q,
        k,
        b,
        residual,
        warning,
    })
}

/// `L_m(a(s+b)) / L_m(a(b))` with `m = m(2p, k, d)`, which equals the
/// non-central Wishart transform at `s`.
pub fn laplace_ncw_via_reduction(s: &SymMatrix, params: &NcwParams, tol: f64) -> Result<f64> {
    let r = reduce_to_canonical(params, tol)?;
    let spec = MeasureSpec::new(params.two_p, r.k, params.dim())?;
    let num = ln_laplace_m(&r.a(&s.add(&r.b)), &spec)?;
    let den = ln_laplace_m(&r.a(&r.b), &spec)?;
    Ok((num - den).exp())
}
