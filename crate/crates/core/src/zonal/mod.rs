//! Partitions, zonal polynomials and the Haar-averaged minor products `Φ_κ`.

pub mod coeffs;
mod gamma;
mod partition;

pub use gamma::{
    ln_multivariate_gamma, multivariate_gamma, pochhammer_half_integer_exact, pochhammer_kappa,
    GammaArgs,
};
pub use partition::{partitions_of, partitions_up_to, Partition};

use nalgebra::DMatrix;
use num::{BigInt, BigRational, One, ToPrimitive};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::mc::{self, Estimate};
use crate::symcore::{haar_orthogonal_into, SymMatrix};

/// `C_κ(I_d)` in exact arithmetic:
/// `2^{2|κ|} |κ|! (d/2)_κ Π_{i<j≤ℓ}(2m_i − 2m_j − i + j) / Π_{i≤ℓ}(2m_i + ℓ − i)!`.
pub fn c_kappa_identity(kappa: &Partition, d: usize) -> Result<BigRational> {
    gamma::check_kappa(kappa, d)?;
    let m = kappa.parts();
    let l = m.len() as i64;
    let k = kappa.weight();
    let fact = |n: i64| (1..=n).fold(BigInt::one(), |acc, v| acc * BigInt::from(v));
    let mut num = BigInt::one() << (2 * k);
    num *= fact(k as i64);
    for i in 0..m.len() {
        for j in i + 1..m.len() {
            num *= BigInt::from(2 * m[i] as i64 - 2 * m[j] as i64 - i as i64 + j as i64);
        }
    }
    let den = (0..m.len()).fold(BigInt::one(), |acc, i| {
        acc * fact(2 * m[i] as i64 + l - i as i64 - 1)
    });
    Ok(BigRational::new(num, den) * pochhammer_half_integer_exact(d as i64, kappa))
}

pub(crate) fn c_kappa_identity_f64(kappa: &Partition, d: usize) -> f64 {
    c_kappa_identity(kappa, d)
        .ok()
        .and_then(|c| c.to_f64())
        .unwrap_or(f64::NAN)
}

/// `Δ_κ(x) = Δ₁^{m₁−m₂} ⋯ Δ_d^{m_d}` for real exponents `exps = (m₁,…,m_d)`.
///
/// Only the leading minors carrying a nonzero exponent must be positive.
pub fn delta_kappa(x: &SymMatrix, exps: &[f64]) -> Result<f64> {
    let d = x.dim();
    if exps.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: exps.len(),
        });
    }
    if let Some(l) = x.cholesky() {
        return Ok(delta_from_cholesky(&l, exps));
    }
    let mut log = 0.0;
    for k in 1..=d {
        let e = exps[k - 1] - if k < d { exps[k] } else { 0.0 };
        if e == 0.0 {
            continue;
        }
        let minor = x.leading_block(k).det();
        if !(minor > 0.0) {
            return Err(Error::Domain(format!(
                "leading minor Δ_{k} = {minor} is not positive"
            )));
        }
        log += e * minor.ln();
    }
    Ok(log.exp())
}

/// `Δ_κ` for a partition (integer exponents).
pub fn delta_partition(x: &SymMatrix, kappa: &Partition) -> Result<f64> {
    gamma::check_kappa(kappa, x.dim())?;
    let exps: Vec<f64> = kappa
        .with_ambient(x.dim())?
        .padded()
        .into_iter()
        .map(|m| m as f64)
        .collect();
    delta_kappa(x, &exps)
}

// Δ_k = Π_{i≤k} L_ii², hence Δ_κ = Π_i L_ii^{2 m_i}.
fn delta_from_cholesky(l: &DMatrix<f64>, exps: &[f64]) -> f64 {
    exps.iter()
        .enumerate()
        .map(|(i, &m)| 2.0 * m * l[(i, i)].ln())
        .sum::<f64>()
        .exp()
}

fn delta_of_congruence(x: &DMatrix<f64>, u: &DMatrix<f64>, exps: &[f64]) -> f64 {
    let y = u * x * u.transpose();
    let y = (&y + y.transpose()) * 0.5;
    match y.cholesky() {
        Some(c) => delta_from_cholesky(&c.unpack(), exps),
        None => f64::NAN,
    }
}

/// Monte-Carlo estimate of `Φ_κ(x) = ∫_{O(d)} Δ_κ(u x uᵀ) du` from `n` Haar
/// draws. Exponents may be any reals.
pub fn phi_kappa_mc(x: &SymMatrix, exps: &[f64], n: u64, seed: u64) -> Result<Estimate> {
    let d = x.dim();
    if exps.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: exps.len(),
        });
    }
    if !x.is_positive_definite() {
        return Err(Error::NotPositiveDefinite);
    }
    if n < 2 {
        return Err(Error::Invalid("phi_kappa_mc needs n >= 2".into()));
    }
    let xm = x.as_matrix().clone();
    Ok(mc::estimate(seed, n, |rng| {
        let mut u = DMatrix::zeros(d, d);
        haar_orthogonal_into(&mut u, rng);
        delta_of_congruence(&xm, &u, exps)
    }))
}

fn check_spectrum(eigs: &[f64], kappa: &Partition) -> Result<()> {
    if eigs.is_empty() {
        return Err(Error::Empty("spectrum"));
    }
    gamma::check_kappa(kappa, eigs.len())?;
    if let Some(&bad) = eigs.iter().find(|&&e| !(e >= 0.0)) {
        return Err(Error::Domain(format!(
            "zonal polynomials are evaluated on nonnegative spectra, got {bad}"
        )));
    }
    Ok(())
}

/// `C_κ(x)` at a matrix with spectrum `eigs`.
pub fn zonal_c(eigs: &[f64], kappa: &Partition) -> Result<f64> {
    check_spectrum(eigs, kappa)?;
    let t = coeffs::table(kappa.weight(), eigs.len());
    let row = t
        .index_of(kappa.parts())
        .expect("partition of the table weight");
    let mons = coeffs::monomials(&t.partitions, eigs, 0);
    Ok(t.coeffs[row].iter().zip(&mons).map(|(c, m)| c * m).sum())
}

/// `C_κ(x) / det x` for `κ ∈ E′_d`, finite on the whole closed cone.
pub fn zonal_c_over_det(eigs: &[f64], kappa: &Partition) -> Result<f64> {
    check_spectrum(eigs, kappa)?;
    if kappa.length() != eigs.len() {
        return Err(Error::Domain(format!(
            "C_κ/det needs m_d > 0, got κ = {kappa}"
        )));
    }
    let t = coeffs::table(kappa.weight(), eigs.len());
    let row = t
        .index_of(kappa.parts())
        .expect("partition of the table weight");
    let mons = coeffs::monomials(&t.partitions, eigs, 1);
    Ok(t.coeffs[row].iter().zip(&mons).map(|(c, m)| c * m).sum())
}

/// Exact `C_κ(I_d)` evaluated from the coefficient table (`Σ_λ c_{κλ} m_λ(1^d)`);
/// `None` above the exact weight range.
pub fn zonal_c_identity_from_table(kappa: &Partition, d: usize) -> Result<Option<BigRational>> {
    gamma::check_kappa(kappa, d)?;
    let t = coeffs::table(kappa.weight(), d);
    let Some(exact) = t.exact.as_ref() else {
        return Ok(None);
    };
    let row = t
        .index_of(kappa.parts())
        .expect("partition of the table weight");
    let mut total = BigRational::from_integer(BigInt::from(0));
    for (c, lam) in exact[row].iter().zip(&t.partitions) {
        total += c * BigRational::from_integer(monomial_count_at_ones(lam, d));
    }
    Ok(Some(total))
}

/// `m_λ(1,…,1)` in `d` variables: the number of distinct arrangements.
fn monomial_count_at_ones(lam: &[usize], d: usize) -> BigInt {
    if lam.len() > d {
        return BigInt::from(0);
    }
    let fact = |n: usize| (1..=n).fold(BigInt::one(), |acc, v| acc * BigInt::from(v));
    let mut den = fact(d - lam.len());
    let mut i = 0;
    while i < lam.len() {
        let j = lam[i..].iter().take_while(|&&v| v == lam[i]).count();
        den *= fact(j);
        i += j;
    }
    fact(d) / den
}

/// `Σ_{|κ| ≤ weight_max} C_κ(x)/|κ|!`, the truncated expansion of `e^{tr x}`.
pub fn exp_trace_partial_sum(eigs: &[f64], weight_max: usize) -> Result<f64> {
    check_spectrum(eigs, &Partition::empty(eigs.len()))?;
    let mut total = 0.0;
    let mut fact = 1.0;
    for k in 0..=weight_max {
        if k > 0 {
            fact *= k as f64;
        }
        let t = coeffs::table(k, eigs.len());
        total += t.evaluate_all(eigs).iter().sum::<f64>() / fact;
    }
    Ok(total)
}

/// Outcome of comparing two estimates of the same quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// `|lhs − rhs|` in pooled standard errors.
    pub z: f64,
    pub pass: bool,
}

impl IdentityCheck {
    pub fn compare(name: impl Into<String>, lhs: Estimate, rhs: Estimate, sigmas: f64) -> Self {
        let scale = lhs.mean.abs().max(rhs.mean.abs());
        let z = if (lhs.mean - rhs.mean).abs() <= 1e-12 * scale {
            0.0
        } else {
            lhs.z_against(&rhs)
        };
        Self {
            name: name.into(),
            lhs,
            rhs,
            z,
            pass: z <= sigmas,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiIdentityReport {
    /// `Φ_{m₁..m_d}(x) = (det x)^{m_d} ∫ Φ_{m₁−m_d..m_{d−1}−m_d}([u x uᵀ]₁) du`,
    /// `[y]₁` the leading `(d−1)×(d−1)` block. Since
    /// `Δ_{m₁..m_d}(y) = (det y)^{m_d} Δ_{m₁−m_d..m_{d−1}−m_d}([y]₁)`, the
    /// shift by `m_d` is needed unless `m_d = 0`.
    pub leading_block: IdentityCheck,
    /// `Φ_{m₁..m_d}(x⁻¹) = Φ_{−m_d..−m₁}(x)`.
    pub inverse: IdentityCheck,
    /// `Φ_κ(x) (det x)^p = Φ_{κ+p}(x)`.
    pub det_shift: IdentityCheck,
}

impl PhiIdentityReport {
    pub fn all_pass(&self) -> bool {
        self.leading_block.pass && self.inverse.pass && self.det_shift.pass
    }
}

/// Monte-Carlo checks of the three `Φ_κ` identities at `(x, exps, p)`, each
/// side from `n` independent Haar draws, pass/fail at 4 pooled standard errors.
pub fn phi_identity_checks(
    x: &SymMatrix,
    exps: &[f64],
    p: f64,
    n: u64,
    seed: u64,
) -> Result<PhiIdentityReport> {
    let d = x.dim();
    if exps.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: exps.len(),
        });
    }
    if !x.is_positive_definite() {
        return Err(Error::NotPositiveDefinite);
    }
    let det = x.det();
    let sub = |k: u64| seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k);

    let lhs = phi_kappa_mc(x, exps, n, sub(1))?;
    let rhs = if d == 1 {
        Estimate::exact(det.powf(exps[0]))
    } else {
        let xm = x.as_matrix().clone();
        let head: Vec<f64> = exps[..d - 1].iter().map(|m| m - exps[d - 1]).collect();
        mc::estimate(sub(2), n, |rng| {
            let mut u = DMatrix::zeros(d, d);
            let mut v = DMatrix::zeros(d - 1, d - 1);
            haar_orthogonal_into(&mut u, rng);
            haar_orthogonal_into(&mut v, rng);
            let y = &u * &xm * u.transpose();
            let block = y.view((0, 0), (d - 1, d - 1)).into_owned();
            delta_of_congruence(&block, &v, &head)
        })
        .scale(det.powf(exps[d - 1]))
    };
    let leading_block = IdentityCheck::compare("phi_leading_block", lhs, rhs, 4.0);

    let inv = x.inverse()?;
    let lhs = phi_kappa_mc(&inv, exps, n, sub(3))?;
    let reversed: Vec<f64> = exps.iter().rev().map(|m| -m).collect();
    let rhs = phi_kappa_mc(x, &reversed, n, sub(4))?;
    let inverse = IdentityCheck::compare("phi_inverse", lhs, rhs, 4.0);

    let lhs = phi_kappa_mc(x, exps, n, sub(5))?.scale(det.powf(p));
    let shifted: Vec<f64> = exps.iter().map(|m| m + p).collect();
    let rhs = phi_kappa_mc(x, &shifted, n, sub(6))?;
    let det_shift = IdentityCheck::compare("phi_det_shift", lhs, rhs, 4.0);

    Ok(PhiIdentityReport {
        leading_block,
        inverse,
        det_shift,
    })
}

/// Random positive definite matrix with eigenvalues uniform in `[lo, hi]`.
pub fn random_pd<R: Rng + ?Sized>(d: usize, lo: f64, hi: f64, rng: &mut R) -> SymMatrix {
    let eigs: Vec<f64> = (0..d).map(|_| rng.random_range(lo..hi)).collect();
    let mut u = DMatrix::zeros(d, d);
    haar_orthogonal_into(&mut u, rng);
    SymMatrix::diag(&eigs).congruence(&u)
}
