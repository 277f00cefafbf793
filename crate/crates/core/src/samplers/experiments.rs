//! Monte-Carlo checks that sums of random low-rank matrices land on the
//! expected rank stratum.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::MeasureSampler;
use crate::error::{Error, Result};
use crate::measures::MeasureSpec;
use crate::numeric::mc;
use crate::symcore::{haar_orthogonal, SymMatrix};

/// Eigenvalues at or below this fraction of the largest count as zero.
pub const RANK_REL_TOL: f64 = 1e-8;

/// Number of entries of `vals` above `rel_tol · max|v|`.
pub fn relative_rank(vals: &[f64], rel_tol: f64) -> usize {
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if top == 0.0 {
        return 0;
    }
    vals.iter().filter(|&&v| v > rel_tol * top).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionResult {
    pub trials: u64,
    pub hits: u64,
    pub probability: f64,
}

/// Fraction of trials where `k` random vectors fail to be independent of
/// the coordinate subspace `F = span(e_1..e_n)`, i.e. `dim(F+G) < n+k`.
/// With `control`, the vectors are projected into `F` first, so every trial
/// should hit.
pub fn subspace_intersection_experiment(
    d: usize,
    n: usize,
    k: usize,
    trials: u64,
    seed: u64,
    control: bool,
) -> Result<IntersectionResult> {
    if n + k > d {
        return Err(Error::Domain(format!(
            "need k <= d - n, got d={d}, n={n}, k={k}"
        )));
    }
    let hits: u64 = mc::collect_trials(seed, trials, |rng| {
        let mut m = DMatrix::<f64>::zeros(d, n + k);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        for j in 0..k {
            for i in 0..d {
                let v: f64 = rng.sample(StandardNormal);
                m[(i, n + j)] = if control && i >= n { 0.0 } else { v };
            }
        }
        let sv: Vec<f64> = m.singular_values().iter().copied().collect();
        u64::from(n + k > 0 && relative_rank(&sv, RANK_REL_TOL) < n + k)
    })
    .into_iter()
    .sum();
    Ok(IntersectionResult {
        trials,
        hits,
        probability: hits as f64 / trials.max(1) as f64,
    })
}

/// Rank of `F Fᵀ` from the singular values of `F`, so the condition number
/// is not squared before the tolerance is applied.
pub fn factor_rank(f: &DMatrix<f64>, rel_tol: f64) -> usize {
    if f.ncols() == 0 || f.nrows() == 0 {
        return 0;
    }
    let sv: Vec<f64> = f.singular_values().iter().copied().collect();
    relative_rank(&sv, rel_tol)
}

/// Ranks of random matrices, with the spectra kept for auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankHistogram {
    pub d: usize,
    pub trials: u64,
    pub expected: usize,
    /// `counts[r]` trials had rank `r`.
    pub counts: Vec<u64>,
    pub off_target: u64,
    /// Trials whose eigenvalue ratio test, `λ_i > rel_tol · λ_max`, gives a
    /// rank other than `expected`. Reported only; full-rank draws with a
    /// tiny smallest eigenvalue land here.
    pub eigenvalue_off_target: u64,
    pub rel_tol: f64,
    /// For each position of the ascending spectrum, the minimum, quartiles
    /// and maximum over trials of `λ_i / λ_max`.
    pub eigenvalue_quantiles: Vec<[f64; 5]>,
}

impl RankHistogram {
    /// Ranks taken from the spectra themselves.
    pub fn from_spectra(d: usize, expected: usize, spectra: &[Vec<f64>], rel_tol: f64) -> Self {
        let ranks: Vec<usize> = spectra.iter().map(|v| relative_rank(v, rel_tol)).collect();
        Self::new(d, expected, &ranks, spectra, rel_tol)
    }

    pub fn new(
        d: usize,
        expected: usize,
        ranks: &[usize],
        spectra: &[Vec<f64>],
        rel_tol: f64,
    ) -> Self {
        let mut counts = vec![0u64; d + 1];
        let mut eigenvalue_off_target = 0;
        let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(spectra.len()); d];
        for (&r, vals) in ranks.iter().zip(spectra) {
            counts[r] += 1;
            if relative_rank(vals, rel_tol) != expected {
                eigenvalue_off_target += 1;
            }
            let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (i, v) in vals.iter().enumerate() {
                columns[i].push(if top > 0.0 { v / top } else { 0.0 });
            }
        }
        let eigenvalue_quantiles = columns
            .into_iter()
            .map(|mut c| {
                c.sort_by(|a, b| a.total_cmp(b));
                let q = |f: f64| {
                    if c.is_empty() {
                        f64::NAN
                    } else {
                        c[((c.len() - 1) as f64 * f).round() as usize]
                    }
                };
                [q(0.0), q(0.25), q(0.5), q(0.75), q(1.0)]
            })
            .collect();
        let trials = ranks.len() as u64;
        let off_target = trials - counts[expected];
        Self {
            d,
            trials,
            expected,
            counts,
            off_target,
            eigenvalue_off_target,
            rel_tol,
            eigenvalue_quantiles,
        }
    }

    pub fn pass(&self) -> bool {
        self.off_target == 0
    }
}

/// `A` with `m = A Aᵀ`, from the eigenpairs above the relative tolerance.
fn psd_factor(m: &SymMatrix) -> Result<DMatrix<f64>> {
    let (vals, vecs) = m.eigen();
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if vals[0] < -RANK_REL_TOL * top {
        return Err(Error::NotPositiveSemidefinite);
    }
    let keep: Vec<usize> = (0..vals.len())
        .filter(|&i| vals[i] > RANK_REL_TOL * top)
        .collect();
    let mut f = DMatrix::zeros(m.dim(), keep.len());
    for (j, &i) in keep.iter().enumerate() {
        f.set_column(j, &(vecs.column(i) * vals[i].sqrt()));
    }
    Ok(f)
}

fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

fn run_factor_trials<F>(d: usize, expected: usize, trials: u64, seed: u64, draw: F) -> RankHistogram
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> DMatrix<f64> + Sync,
{
    let out = mc::collect_trials(seed, trials, |rng| {
        let f = draw(rng);
        let m = SymMatrix::symmetrize(&f * f.transpose());
        (factor_rank(&f, RANK_REL_TOL), m.eigenvalues())
    });
    let (ranks, spectra): (Vec<usize>, Vec<Vec<f64>>) = out.into_iter().unzip();
    RankHistogram::new(d, expected, &ranks, &spectra, RANK_REL_TOL)
}

/// Rank of `x0 + U y0 Uᵀ` for Haar `U`; all mass should sit on
/// `min(rank x0 + rank y0, d)`.
pub fn rank_additivity_experiment(
    x0: &SymMatrix,
    y0: &SymMatrix,
    trials: u64,
    seed: u64,
) -> Result<RankHistogram> {
    let d = x0.dim();
    if y0.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            got: y0.dim(),
        });
    }
    let (fa, fb) = (psd_factor(x0)?, psd_factor(y0)?);
    let expected = (fa.ncols() + fb.ncols()).min(d);
    Ok(run_factor_trials(d, expected, trials, seed, |rng| {
        let u = haar_orthogonal(d, rng).expect("d >= 1");
        hcat(&fa, &(u * &fb))
    }))
}

/// Rank of `X + Z` with `X` drawn from `m(spec_a)` and `Z` from `m(b,0,d)`
/// (zero when `b = 0`); all mass should sit on `min(a + b, d)`.
pub fn convolution_support_experiment(
    spec_a: &MeasureSpec,
    b: usize,
    trials: u64,
    seed: u64,
) -> Result<RankHistogram> {
    let d = spec_a.d;
    let xs = MeasureSampler::new(spec_a)?;
    let a = spec_a.integer_shape().expect("checked by the sampler");
    let zs = if b > 0 {
        Some(MeasureSampler::new(&MeasureSpec::new(b as f64, 0, d)?)?)
    } else {
        None
    };
    Ok(run_factor_trials(d, (a + b).min(d), trials, seed, |rng| {
        let (x, _) = xs.sample_factor_ln(rng);
        match &zs {
            Some(z) => hcat(&x, &z.sample_factor_ln(rng).0),
            None => x,
        }
    }))
}

/// Rank of draws of the singular part `r`; all mass should sit on `d − 1`.
pub fn singular_r_rank_experiment(d: usize, trials: u64, seed: u64) -> Result<RankHistogram> {
    let sampler = super::SingularRSampler::new(d)?;
    Ok(run_factor_trials(d, d - 1, trials, seed, |rng| {
        sampler.sample_factor_ln(rng).0
    }))
}
