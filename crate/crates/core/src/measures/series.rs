//! Zonal-polynomial series: the full-rank density of `m(2p,d,d)`, the
//! absolutely continuous part `f_d` of `m(d−1,d,d)`, and the Laplace
//! transforms of its two parts.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{laplace_m, MeasureSpec};
use crate::error::{Error, Result};
use crate::symcore::SymMatrix;
use crate::zonal::{coeffs, ln_multivariate_gamma, GammaArgs, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TruncationMode {
    /// Sum every weight up to `weight_max`.
    FixedWeight,
    /// Stop once two consecutive weight blocks fall below `rel_tol` times the
    /// running sum; fail if that has not happened by `weight_max`.
    AdaptiveTail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub weight_max: usize,
    pub rel_tol: f64,
    pub mode: TruncationMode,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            weight_max: 64,
            rel_tol: 1e-10,
            mode: TruncationMode::AdaptiveTail,
        }
    }
}

impl TruncationPolicy {
    pub fn fixed(weight_max: usize) -> Self {
        Self {
            weight_max,
            rel_tol: 0.0,
            mode: TruncationMode::FixedWeight,
        }
    }

    pub fn adaptive(rel_tol: f64, weight_max: usize) -> Self {
        Self {
            weight_max,
            rel_tol,
            mode: TruncationMode::AdaptiveTail,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.mode == TruncationMode::AdaptiveTail && !(self.rel_tol > 0.0) {
            return Err(Error::Domain(format!(
                "adaptive truncation needs rel_tol > 0, got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

/// A truncated series: its value, the last weight summed and that block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub weight_used: usize,
    pub last_block: f64,
}

/// `(2π)^{-d(d−1)/4}`: converts the series below, written with
/// `Γ_d(z) = Π_j Γ(z_j − (j−1)/2)`, into densities for the isometric
/// Lebesgue measure of `lebesgue_coords`.
pub fn isometric_density_factor(d: usize) -> f64 {
    (-((d * (d - 1)) as f64) / 4.0 * (2.0 * std::f64::consts::PI).ln()).exp()
}

fn sum_blocks(
    policy: &TruncationPolicy,
    mut block: impl FnMut(usize) -> Result<f64>,
) -> Result<SeriesValue> {
    policy.validate()?;
    let mut total = 0.0;
    let mut small = 0;
    let mut last = 0.0;
    for k in 0..=policy.weight_max {
        last = block(k)?;
        total += last;
        if policy.mode == TruncationMode::AdaptiveTail {
            if total > 0.0 && last.abs() <= policy.rel_tol * total.abs() {
                small += 1;
                if small == 2 {
                    return Ok(SeriesValue {
                        value: total,
                        weight_used: k,
                        last_block: last,
                    });
                }
            } else {
                small = 0;
            }
        }
    }
    match policy.mode {
        TruncationMode::FixedWeight => Ok(SeriesValue {
            value: total,
            weight_used: policy.weight_max,
            last_block: last,
        }),
        TruncationMode::AdaptiveTail => Err(Error::Truncation {
            partial: total,
            weight: policy.weight_max,
            rel_tol: policy.rel_tol,
        }),
    }
}

fn scale(v: SeriesValue, c: f64) -> SeriesValue {
    SeriesValue {
        value: v.value * c,
        weight_used: v.weight_used,
        last_block: v.last_block * c,
    }
}

fn pd_spectrum(x: &SymMatrix) -> Result<Vec<f64>> {
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    if !x.is_positive_definite() {
        return Err(Error::NotPositiveDefinite);
    }
    let eigs = x.eigenvalues();
    if eigs[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(eigs)
}

fn ln_fact(k: usize) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

/// `Σ_{|κ|=k, κ ∈ keep} value_κ / (k! Γ_d(κ + p))`.
fn weighted_block(
    k: usize,
    d: usize,
    p: f64,
    values: &[f64],
    parts: &[Vec<usize>],
    keep: impl Fn(&[usize]) -> bool,
) -> Result<f64> {
    let lf = ln_fact(k);
    let mut total = 0.0;
    for (v, kp) in values.iter().zip(parts) {
        if !keep(kp) {
            continue;
        }
        let kappa = Partition::new(kp, d)?;
        let lg = ln_multivariate_gamma(&GammaArgs::partition_shifted(&kappa, p))?;
        total += v * (-lf - lg).exp();
    }
    Ok(total)
}

/// Density of `m(2p, d, d)` at `x ≻ 0`, `2p > d−1`, for the isometric
/// Lebesgue measure.
pub fn density_m_fullrank(
    x: &SymMatrix,
    two_p: f64,
    trunc: &TruncationPolicy,
) -> Result<SeriesValue> {
    density_m_fullrank_spectrum(&pd_spectrum(x)?, two_p, trunc)
}

pub(crate) fn density_m_fullrank_spectrum(
    eigs: &[f64],
    two_p: f64,
    trunc: &TruncationPolicy,
) -> Result<SeriesValue> {
    let d = eigs.len();
    if !(two_p > d as f64 - 1.0) || !two_p.is_finite() {
        return Err(Error::Domain(format!(
            "full-rank density needs 2p > d-1 = {}, got {two_p}",
            d - 1
        )));
    }
    let p = two_p / 2.0;
    let ln_det: f64 = eigs.iter().map(|v| v.ln()).sum();
    let series = sum_blocks(trunc, |k| {
        let t = coeffs::table(k, d);
        weighted_block(k, d, p, &t.evaluate_all(eigs), &t.partitions, |_| true)
    })?;
    let pre = (p - (d as f64 + 1.0) / 2.0) * ln_det;
    Ok(scale(series, isometric_density_factor(d) * pre.exp()))
}

/// `f_d(t)`, the density of the absolutely continuous part of `m(d−1,d,d)`
/// for the isometric Lebesgue measure. Requires `t ≻ 0` and `d ≥ 2`.
pub fn density_fd(t: &SymMatrix, trunc: &TruncationPolicy) -> Result<SeriesValue> {
    density_fd_spectrum(&pd_spectrum(t)?, trunc)
}

/// [`density_fd`] from a spectrum; zero eigenvalues are allowed and give
/// the continuous extension to the boundary.
pub fn density_fd_spectrum(eigs: &[f64], trunc: &TruncationPolicy) -> Result<SeriesValue> {
    let d = eigs.len();
    if d < 2 {
        return Err(Error::Domain("f_d needs d >= 2".into()));
    }
    if let Some(bad) = eigs.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!(
            "spectrum must be nonnegative, got {bad}"
        )));
    }
    let p = (d as f64 - 1.0) / 2.0;
    let series = sum_blocks(trunc, |k| {
        if k < d {
            return Ok(0.0);
        }
        let t = coeffs::table(k, d);
        weighted_block(
            k,
            d,
            p,
            &t.evaluate_all_over_det(eigs),
            &t.partitions,
            |kp| kp.len() == d,
        )
    })?;
    Ok(scale(series, isometric_density_factor(d)))
}

/// `(det s)^{-(d−1)/2} Σ_{κ ∈ keep} C_κ(s⁻¹)/|κ|!`.
fn inverse_series(
    s: &SymMatrix,
    trunc: &TruncationPolicy,
    keep: impl Fn(&[usize], usize) -> bool,
) -> Result<SeriesValue> {
    let eigs = pd_spectrum(s)?;
    let d = eigs.len();
    let inv: Vec<f64> = eigs.iter().map(|v| 1.0 / v).collect();
    let series = sum_blocks(trunc, |k| {
        let t = coeffs::table(k, d);
        let lf = ln_fact(k);
        Ok(t.evaluate_all(&inv)
            .iter()
            .zip(&t.partitions)
            .filter(|(_, kp)| keep(kp, d))
            .map(|(v, _)| v)
            .sum::<f64>()
            * (-lf).exp())
    })?;
    let ln_det: f64 = eigs.iter().map(|v| v.ln()).sum();
    Ok(scale(series, (-(d as f64 - 1.0) / 2.0 * ln_det).exp()))
}

/// Laplace transform of `f_d 1_{P_d}` at `s ≻ 0`.
pub fn fd_laplace_series(s: &SymMatrix, trunc: &TruncationPolicy) -> Result<SeriesValue> {
    if s.dim() < 2 {
        return Err(Error::Domain("f_d needs d >= 2".into()));
    }
    inverse_series(s, trunc, |kp, d| kp.len() == d)
}

/// Laplace transform of the singular part `r` of `m(d−1,d,d)` at `s ≻ 0`.
pub fn singular_r_laplace(s: &SymMatrix, trunc: &TruncationPolicy) -> Result<SeriesValue> {
    if s.dim() < 2 {
        return Err(Error::Domain("r needs d >= 2".into()));
    }
    inverse_series(s, trunc, |kp, d| kp.len() < d)
}

/// Series form of the Laplace transform of `m(d−1,d,d)`, summing every
/// partition.
pub fn m_full_laplace_series(s: &SymMatrix, trunc: &TruncationPolicy) -> Result<SeriesValue> {
    inverse_series(s, trunc, |_, _| true)
}

/// `L_r(s) + L_{f_d}(s)` against the closed form of `m(d−1,d,d)` at a
/// sequence of fixed truncation weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSweep {
    pub closed_form: f64,
    pub weights: Vec<usize>,
    pub rel_errors: Vec<f64>,
    /// Errors never increase from one weight to the next (ties at the
    /// rounding floor allowed).
    pub monotone: bool,
}

impl DecompositionSweep {
    pub fn final_rel_err(&self) -> f64 {
        self.rel_errors.last().copied().unwrap_or(f64::NAN)
    }
}

pub fn decomposition_sweep(s: &SymMatrix, weights: &[usize]) -> Result<DecompositionSweep> {
    let d = s.dim();
    let closed_form = laplace_m(s, &MeasureSpec::new(d as f64 - 1.0, d, d)?)?;
    let mut rel_errors = Vec::with_capacity(weights.len());
    for &w in weights {
        let tp = TruncationPolicy::fixed(w);
        let v = singular_r_laplace(s, &tp)?.value + fd_laplace_series(s, &tp)?.value;
        rel_errors.push((v / closed_form - 1.0).abs());
    }
    let monotone = rel_errors.windows(2).all(|p| p[1] <= p[0] || p[1] < 1e-14);
    Ok(DecompositionSweep {
        closed_form,
        weights: weights.to_vec(),
        rel_errors,
        monotone,
    })
}
