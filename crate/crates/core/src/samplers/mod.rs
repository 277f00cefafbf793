//! Gaussian-sum sampling of integer-shape non-central Wishart laws and
//! importance-weighted sampling of `m(n,k,d)` and of the singular part `r`.

mod experiments;

pub use experiments::{
    convolution_support_experiment, factor_rank, rank_additivity_experiment, relative_rank,
    singular_r_rank_experiment, subspace_intersection_experiment, IntersectionResult,
    RankHistogram, RANK_REL_TOL,
};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::measures::{MeasureSpec, NcwParams};
use crate::numeric::mc::{self, Estimate};
use crate::symcore::{haar_orthogonal, SymMatrix};

/// Largest accepted condition number of `Σ`.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub matrix: SymMatrix,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanDecomposition {
    pub means: Vec<DVector<f64>>,
}

impl MeanDecomposition {
    pub fn outer_sum(&self) -> SymMatrix {
        let d = self.means.first().map_or(0, |m| m.len());
        SymMatrix::outer_sum(&self.means, d)
    }
}

/// `w = Σ_i m_i m_iᵀ` with `m_i = √λ_i v_i` over the eigenpairs above `tol`
/// (`tol ≤ 0` selects `w.default_tol()`), padded with zeros to `n` vectors.
pub fn decompose_w(w: &SymMatrix, n: usize, tol: f64) -> Result<MeanDecomposition> {
    let tol = if tol > 0.0 { tol } else { w.default_tol() };
    let (vals, vecs) = w.eigen();
    if vals[0] < -tol.max(w.default_tol()) * 8.0 {
        return Err(Error::NotPositiveSemidefinite);
    }
    let d = w.dim();
    let rank = vals.iter().filter(|&&v| v > tol).count();
    if rank > n {
        return Err(Error::RankExceedsShape {
            rank,
            shape: n as f64,
        });
    }
    let mut means: Vec<DVector<f64>> = (d - rank..d)
        .map(|i| vecs.column(i).into_owned() * vals[i].sqrt())
        .collect();
    means.resize(n, DVector::zeros(d));
    Ok(MeanDecomposition { means })
}

fn integer_shape(two_p: f64) -> Result<usize> {
    let n = two_p.round();
    if (two_p - n).abs() > crate::measures::INTEGER_SHAPE_TOL || n < 1.0 {
        return Err(Error::Domain(format!(
            "Gaussian-sum sampling needs an integer shape 2p >= 1, got {two_p}"
        )));
    }
    Ok(n as usize)
}

/// Draws of `NCW(n, w, Σ)` as `Σ_i Y_i Y_iᵀ`, `Y_i ~ N(m_i, Σ)`.
///
/// The means satisfy `Σ_i m_i m_iᵀ = 2w`: that is the noncentrality for
/// which the law has transform `det(I+2Σs)^{-p} e^{-tr(2s(I+2Σs)⁻¹w)}`, and
/// gives `E[X] = nΣ + 2w`.
#[derive(Debug, Clone)]
pub struct NcwSampler {
    d: usize,
    means: Vec<DVector<f64>>,
    chol: DMatrix<f64>,
}

impl NcwSampler {
    pub fn new(params: &NcwParams) -> Result<Self> {
        let n = integer_shape(params.two_p)?;
        let eigs = params.sigma.eigenvalues();
        let cond = eigs[eigs.len() - 1] / eigs[0];
        if !(eigs[0] > 0.0) || cond > MAX_CONDITION {
            return Err(Error::IllConditioned(cond));
        }
        let chol = params.sigma.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let w2 = params.w.scale(2.0);
        let tol = 1e-12
            * params
                .w
                .eigenvalues()
                .iter()
                .fold(0.0f64, |a, v| a.max(v.abs()));
        let means = decompose_w(&w2, n, tol)?.means;
        Ok(Self {
            d: params.dim(),
            means,
            chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// The `d × n` matrix `Y` of Gaussian columns; the draw is `Y Yᵀ`.
    pub fn sample_factor<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(self.d, self.means.len());
        let mut z = DVector::zeros(self.d);
        for (j, m) in self.means.iter().enumerate() {
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            y.set_column(j, &(m + &self.chol * &z));
        }
        y
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SymMatrix {
        let y = self.sample_factor(rng);
        SymMatrix::symmetrize(&y * y.transpose())
    }
}

pub fn ncw_sample<R: Rng + ?Sized>(params: &NcwParams, rng: &mut R) -> Result<SymMatrix> {
    Ok(NcwSampler::new(params)?.sample(rng))
}

/// Monte-Carlo estimate of `E[e^{-tr(sX)}]`, `X ~ NCW(params)`.
pub fn ncw_laplace_estimate(
    params: &NcwParams,
    s: &SymMatrix,
    n: u64,
    seed: u64,
) -> Result<Estimate> {
    if s.dim() != params.dim() {
        return Err(Error::Dimension {
            expected: params.dim(),
            got: s.dim(),
        });
    }
    if !s.is_positive_definite() {
        return Err(Error::NotPositiveDefinite);
    }
    let sampler = NcwSampler::new(params)?;
    Ok(mc::estimate(seed, n, |rng| {
        (-s.trace_product(&sampler.sample(rng))).exp()
    }))
}

/// Weighted draws of `m(n,k,d)`: `X ~ NCW(n, 2I(k,d), I_d)` with weight
/// `2^{dn/2} e^{2k} e^{tr X/2}`.
#[derive(Debug, Clone)]
pub struct MeasureSampler {
    spec: MeasureSpec,
    inner: NcwSampler,
    ln_const: f64,
}

impl MeasureSampler {
    pub fn new(spec: &MeasureSpec) -> Result<Self> {
        let n = integer_shape(spec.two_p)?;
        if spec.k > n {
            return Err(Error::RankExceedsShape {
                rank: spec.k,
                shape: n as f64,
            });
        }
        let d = spec.d;
        let params = NcwParams::new(
            n as f64,
            SymMatrix::canonical_noncentrality(spec.k, d).scale(2.0),
            SymMatrix::identity(d),
        )?;
        let inner = NcwSampler::new(&params)?;
        let ln_const = (d * n) as f64 / 2.0 * std::f64::consts::LN_2 + 2.0 * spec.k as f64;
        Ok(Self {
            spec: *spec,
            inner,
            ln_const,
        })
    }

    pub fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    /// The Gaussian factor `Y` of a draw `Y Yᵀ` and the log of its weight.
    pub fn sample_factor_ln<R: Rng + ?Sized>(&self, rng: &mut R) -> (DMatrix<f64>, f64) {
        let y = self.inner.sample_factor(rng);
        let lw = self.ln_const + y.norm_squared() / 2.0;
        (y, lw)
    }

    /// A draw together with the log of its weight.
    pub fn sample_ln<R: Rng + ?Sized>(&self, rng: &mut R) -> (SymMatrix, f64) {
        let (y, lw) = self.sample_factor_ln(rng);
        (SymMatrix::symmetrize(&y * y.transpose()), lw)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> WeightedSample {
        let (matrix, lw) = self.sample_ln(rng);
        WeightedSample {
            matrix,
            weight: lw.exp(),
        }
    }
}

pub fn m_measure_sample<R: Rng + ?Sized>(
    spec: &MeasureSpec,
    rng: &mut R,
) -> Result<WeightedSample> {
    Ok(MeasureSampler::new(spec)?.sample(rng))
}

/// Rejects `s` unless `s − I/2 ≻ 0`, the range where the weighted
/// transform estimators are used.
pub fn check_weighted_domain(s: &SymMatrix, allow_outside: bool) -> Result<()> {
    if !s.is_positive_definite() {
        return Err(Error::NotPositiveDefinite);
    }
    if !allow_outside
        && !s
            .sub(&SymMatrix::identity(s.dim()).scale(0.5))
            .is_positive_definite()
    {
        return Err(Error::Domain(
            "weighted Laplace estimates need s - I/2 positive definite".into(),
        ));
    }
    Ok(())
}

/// Monte-Carlo estimate of `∫ e^{-tr(sx)} m(n,k,d)(dx)`.
pub fn weighted_laplace_estimate(
    spec: &MeasureSpec,
    s: &SymMatrix,
    n: u64,
    seed: u64,
    allow_outside: bool,
) -> Result<Estimate> {
    check_weighted_domain(s, allow_outside)?;
    if s.dim() != spec.d {
        return Err(Error::Dimension {
            expected: spec.d,
            got: s.dim(),
        });
    }
    let sampler = MeasureSampler::new(spec)?;
    Ok(mc::estimate(seed, n, |rng| {
        let (x, lw) = sampler.sample_ln(rng);
        (lw - s.trace_product(&x)).exp()
    }))
}

/// Weighted draws of the singular part `r` of `m(d−1,d,d)`:
/// `t = u diag(x, 0) uᵀ` with `x` from `m(d−1,d−1,d−1)` in dimension `d−1`,
/// `u` Haar on `O(d)`, and the weight multiplied by `(π det x)^{1/2}/Γ(d/2)`.
#[derive(Debug, Clone)]
pub struct SingularRSampler {
    d: usize,
    inner: MeasureSampler,
}

impl SingularRSampler {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("r needs d >= 2, got {d}")));
        }
        let inner = MeasureSampler::new(&MeasureSpec::new((d - 1) as f64, d - 1, d - 1)?)?;
        Ok(Self { d, inner })
    }

    /// A factor `F` of the draw `t = F Fᵀ` (`d × (d−1)`) and the log weight.
    pub fn sample_factor_ln<R: Rng + ?Sized>(&self, rng: &mut R) -> (DMatrix<f64>, f64) {
        let (y, lw) = self.inner.sample_factor_ln(rng);
        let u = haar_orthogonal(self.d, rng).expect("d >= 2");
        let det_x = (&y * y.transpose()).determinant();
        let ln_extra =
            0.5 * (std::f64::consts::PI.ln() + det_x.ln()) - ln_gamma(self.d as f64 / 2.0);
        let f = u.columns(0, self.d - 1) * y;
        (f, lw + ln_extra)
    }

    pub fn sample_ln<R: Rng + ?Sized>(&self, rng: &mut R) -> (SymMatrix, f64) {
        let (f, lw) = self.sample_factor_ln(rng);
        (SymMatrix::symmetrize(&f * f.transpose()), lw)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> WeightedSample {
        let (matrix, lw) = self.sample_ln(rng);
        WeightedSample {
            matrix,
            weight: lw.exp(),
        }
    }
}

pub fn singular_r_sample<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<WeightedSample> {
    Ok(SingularRSampler::new(d)?.sample(rng))
}

/// Monte-Carlo estimate of `∫ e^{-tr(st)} r(dt)`.
pub fn singular_r_laplace_estimate(
    s: &SymMatrix,
    n: u64,
    seed: u64,
    allow_outside: bool,
) -> Result<Estimate> {
    check_weighted_domain(s, allow_outside)?;
    let sampler = SingularRSampler::new(s.dim())?;
    Ok(mc::estimate(seed, n, |rng| {
        let (t, lw) = sampler.sample_ln(rng);
        (lw - s.trace_product(&t)).exp()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{laplace_m, laplace_ncw, singular_r_laplace, TruncationPolicy};
    use crate::numeric::mc::shard_rng;
    use crate::zonal::random_pd;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn decompose_examples() {
        let z = decompose_w(&SymMatrix::zeros(3), 2, 1e-12).unwrap();
        assert_eq!(z.means.len(), 2);
        assert!(z.means.iter().all(|m| m.amax() == 0.0));

        let (k, d) = (2, 4);
        let dec = decompose_w(
            &SymMatrix::canonical_noncentrality(k, d).scale(2.0),
            k,
            1e-12,
        )
        .unwrap();
        let mut hit = vec![false; d];
        for m in &dec.means {
            let j = m.iamax();
            assert!(j >= d - k);
            assert!((m[j].abs() - 2f64.sqrt()).abs() < 1e-15 && m.amax() == m[j].abs());
            assert!((m.norm() - 2f64.sqrt()).abs() < 1e-15);
            hit[j] = true;
        }
        assert!(hit[d - k..].iter().all(|&h| h));

        let v = DVector::from_vec(vec![0.3, -1.2, 0.5]);
        let w = SymMatrix::outer_sum(&[v.clone()], 3);
        let dec = decompose_w(&w, 1, 1e-12).unwrap();
        assert!((&dec.means[0] - &v).amax() < 1e-12 || (&dec.means[0] + &v).amax() < 1e-12);

        assert!(matches!(
            decompose_w(&w, 0, 1e-12),
            Err(Error::RankExceedsShape { rank: 1, .. })
        ));
    }

    #[test]
    fn decompose_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let d = rng.random_range(1..=6);
            let r = rng.random_range(0..=d);
            let vs: Vec<DVector<f64>> = (0..r)
                .map(|_| DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0)))
                .collect();
            let w = SymMatrix::outer_sum(&vs, d);
            let dec = decompose_w(&w, d + 1, 1e-9).unwrap();
            let scale = w.as_matrix().amax().max(1.0);
            assert!(dec.outer_sum().max_abs_diff(&w) <= 1e-10 * scale);
        }
    }

    /// `E[X_ij]` as minus the derivative of the transform at `s = 0`.
    fn mean_by_differentiation(params: &NcwParams) -> DMatrix<f64> {
        let d = params.dim();
        let h = 1e-5;
        DMatrix::from_fn(d, d, |i, j| {
            let mut e = DMatrix::zeros(d, d);
            e[(i, j)] += 0.5;
            e[(j, i)] += 0.5;
            let f = |t: f64| crate::measures::ln_laplace_ncw_formula(&(&e * t), params);
            -(f(h) - f(-h)) / (2.0 * h)
        })
    }

    #[test]
    fn first_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let v = DVector::from_vec(vec![1.0, -0.5, 0.8]);
        let sigma = random_pd(3, 0.5, 1.5, &mut rng);
        let params = NcwParams::new(2.0, SymMatrix::outer_sum(&[v], 3), sigma.clone()).unwrap();
        let oracle = mean_by_differentiation(&params);
        let closed = sigma.scale(2.0).add(&params.w.scale(2.0));
        assert!((&oracle - closed.as_matrix()).amax() < 1e-8);

        let sampler = NcwSampler::new(&params).unwrap();
        let ests = mc::estimate_many(9, 100_000, 9, |rng, out| {
            let x = sampler.sample(rng);
            for (o, v) in out.iter_mut().zip(x.as_matrix().iter()) {
                *o = *v;
            }
        });
        for (e, o) in ests.iter().zip(oracle.iter()) {
            assert!(e.z_against_value(*o) < 4.0, "{e:?} vs {o}");
        }
    }

    #[test]
    fn empirical_laplace_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for (n, d, r) in [(1usize, 2usize, 1usize), (3, 3, 2), (2, 4, 0)] {
            let vs: Vec<DVector<f64>> = (0..r)
                .map(|_| DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)))
                .collect();
            let params = NcwParams::new(
                n as f64,
                SymMatrix::outer_sum(&vs, d),
                random_pd(d, 0.5, 1.5, &mut rng),
            )
            .unwrap();
            let s = SymMatrix::identity(d);
            let est = ncw_laplace_estimate(&params, &s, 100_000, 34).unwrap();
            let exact = laplace_ncw(&s, &params).unwrap();
            assert!(est.z_against_value(exact) < 4.0, "{est:?} vs {exact}");
        }
    }

    #[test]
    fn rank_one_draws_and_reproducibility() {
        let params = NcwParams::new(
            1.0,
            SymMatrix::diag(&[0.0, 0.0, 1.0]),
            SymMatrix::identity(3),
        )
        .unwrap();
        let sampler = NcwSampler::new(&params).unwrap();
        let mut rng = shard_rng(5, 0);
        for _ in 0..200 {
            assert_eq!(
                relative_rank(&sampler.sample(&mut rng).eigenvalues(), RANK_REL_TOL),
                1
            );
        }
        let a = ncw_sample(&params, &mut shard_rng(7, 3)).unwrap();
        let b = ncw_sample(&params, &mut shard_rng(7, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampler_preconditions() {
        let p = NcwParams::new(1.5, SymMatrix::zeros(2), SymMatrix::identity(2)).unwrap();
        assert!(NcwSampler::new(&p).is_err());
        let p = NcwParams::new(1.0, SymMatrix::identity(2), SymMatrix::identity(2)).unwrap();
        assert!(matches!(
            NcwSampler::new(&p),
            Err(Error::RankExceedsShape { .. })
        ));
        let p = NcwParams::new(2.0, SymMatrix::zeros(2), SymMatrix::diag(&[1.0, 1e-13])).unwrap();
        assert!(matches!(NcwSampler::new(&p), Err(Error::IllConditioned(_))));
        assert!(MeasureSampler::new(&MeasureSpec::new(1.0, 2, 3).unwrap()).is_err());
    }

    #[test]
    fn orthogonal_invariance_of_central_law() {
        let d = 3;
        let params = NcwParams::new(2.0, SymMatrix::zeros(d), SymMatrix::identity(d)).unwrap();
        let sampler = NcwSampler::new(&params).unwrap();
        let s = SymMatrix::diag(&[0.3, 0.8, 1.5]);
        let u = haar_orthogonal(d, &mut ChaCha8Rng::seed_from_u64(35)).unwrap();
        let rotated = s.congruence(&u.transpose());
        let a = mc::estimate(36, 100_000, |rng| {
            (-s.trace_product(&sampler.sample(rng).congruence(&u))).exp()
        });
        let b = mc::estimate(37, 100_000, |rng| {
            (-rotated.trace_product(&sampler.sample(rng))).exp()
        });
        assert!(a.z_against(&b) < 4.0);
        let c = mc::estimate(38, 100_000, |rng| {
            (-s.trace_product(&sampler.sample(rng))).exp()
        });
        assert!(a.z_against(&c) < 4.0);
    }

    #[test]
    fn weighted_measure_laplace() {
        let spec = MeasureSpec::new(2.0, 1, 2).unwrap();
        let s = SymMatrix::identity(2);
        let est = weighted_laplace_estimate(&spec, &s, 100_000, 41, false).unwrap();
        let exact = laplace_m(&s, &spec).unwrap();
        assert!(est.z_against_value(exact) < 4.0, "{est:?} vs {exact}");

        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for i in 0..10 {
            let d = rng.random_range(1..=3);
            let n = rng.random_range(1..=d + 1);
            let k = rng.random_range(0..=n.min(d));
            let spec = MeasureSpec::new(n as f64, k, d).unwrap();
            let s = random_pd(d, 0.6, 2.0, &mut rng);
            let est = weighted_laplace_estimate(&spec, &s, 100_000, 43 + i, false).unwrap();
            let exact = laplace_m(&s, &spec).unwrap();
            assert!(
                est.z_against_value(exact) < 4.0,
                "{spec:?}: {est:?} vs {exact}"
            );
        }
    }

    #[test]
    fn weighted_domain_is_enforced() {
        let spec = MeasureSpec::new(2.0, 1, 2).unwrap();
        let s = SymMatrix::identity(2).scale(0.4);
        assert!(weighted_laplace_estimate(&spec, &s, 100, 1, false).is_err());
        assert!(weighted_laplace_estimate(&spec, &s, 100, 1, true).is_ok());
    }

    #[test]
    fn measure_draws_support_and_weights() {
        let sampler = MeasureSampler::new(&MeasureSpec::new(2.0, 1, 4).unwrap()).unwrap();
        let mut rng = shard_rng(44, 0);
        for _ in 0..500 {
            let ws = sampler.sample(&mut rng);
            assert!(ws.weight > 0.0 && ws.weight.is_finite());
            assert_eq!(relative_rank(&ws.matrix.eigenvalues(), RANK_REL_TOL), 2);
        }
    }

    #[test]
    fn singular_part_rank_and_laplace() {
        let tp = TruncationPolicy::default();
        for d in 2..=3 {
            let sampler = SingularRSampler::new(d).unwrap();
            let mut rng = shard_rng(45, 0);
            for _ in 0..300 {
                let ws = sampler.sample(&mut rng);
                assert_eq!(relative_rank(&ws.matrix.eigenvalues(), RANK_REL_TOL), d - 1);
                assert!(ws.weight > 0.0);
            }
            let s = SymMatrix::identity(d);
            let est = singular_r_laplace_estimate(&s, 100_000, 46, false).unwrap();
            let series = singular_r_laplace(&s, &tp).unwrap().value;
            assert!(
                est.z_against_value(series) < 4.0,
                "d={d}: {est:?} vs {series}"
            );
        }
        assert!(SingularRSampler::new(1).is_err());
    }

    #[test]
    fn singular_part_eigenvalue_histogram_d2() {
        // weighted mass of λ₁ in each bin against ∫ cosh(2√λ) dλ
        let anti = |l: f64| l.sqrt() * (2.0 * l.sqrt()).sinh() - (2.0 * l.sqrt()).cosh() / 2.0;
        let edges: Vec<f64> = (0..=10).map(|i| 0.5 * i as f64).collect();
        let sampler = SingularRSampler::new(2).unwrap();
        let bins = edges.len() - 1;
        let est = mc::estimate_many(47, 200_000, bins, |rng, out| {
            let ws = sampler.sample(rng);
            let lam = ws.matrix.trace();
            for (b, o) in out.iter_mut().enumerate() {
                *o = if lam >= edges[b] && lam < edges[b + 1] {
                    ws.weight
                } else {
                    0.0
                };
            }
        });
        let chi2: f64 = (0..bins)
            .map(|b| {
                est[b]
                    .z_against_value(anti(edges[b + 1]) - anti(edges[b]))
                    .powi(2)
            })
            .sum();
        // 99.9% point of χ²(10)
        assert!(chi2 < 29.59, "chi2 = {chi2}");
    }
}
