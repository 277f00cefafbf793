//! Existence, Laplace transforms and explicit densities of non-central
//! Wishart laws `NCW(2p, w, Σ)` and of the measures `m(2p, k, d)`.

mod d2;
mod faa;
mod reduce;
mod series;

pub use d2::{
    cone_boundary_laplace, cone_radial_laplace, m111_density, m111_laplace,
    m111_laplace_quadrature, m122_ac_density, m122_laplace, m122_laplace_quadrature,
    m122_singular_density, M111Quadrature, M122Quadrature,
};
pub use faa::{faa1_closed, faa_closed, faa_di_bruno_check, faa_symbolic_exact, FaaReport};
pub use reduce::{laplace_ncw_via_reduction, reduce_to_canonical, Reduction};
pub use series::{
    decomposition_sweep, density_fd, density_fd_spectrum, density_m_fullrank, fd_laplace_series,
    isometric_density_factor, m_full_laplace_series, singular_r_laplace, DecompositionSweep,
    SeriesValue, TruncationMode, TruncationPolicy,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symcore::SymMatrix;

/// Tolerance for treating `2p` as an integer.
pub const INTEGER_SHAPE_TOL: f64 = 1e-9;

/// The measure `m(2p, k, d)`, with Laplace transform `(det s)^{-p} e^{tr(s⁻¹ I(k,d))}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub two_p: f64,
    pub k: usize,
    pub d: usize,
}

impl MeasureSpec {
    pub fn new(two_p: f64, k: usize, d: usize) -> Result<Self> {
        if !(two_p.is_finite() && two_p > 0.0) {
            return Err(Error::Domain(format!(
                "2p must be positive and finite, got {two_p}"
            )));
        }
        if d == 0 {
            return Err(Error::Empty("dimension"));
        }
        if k > d {
            return Err(Error::Domain(format!("k = {k} exceeds d = {d}")));
        }
        Ok(Self { two_p, k, d })
    }

    pub fn p(&self) -> f64 {
        self.two_p / 2.0
    }

    /// `2p` as an integer when it is one within [`INTEGER_SHAPE_TOL`].
    pub fn integer_shape(&self) -> Option<usize> {
        integer_shape(self.two_p)
    }
}

/// Parameters of `NCW(2p, w, Σ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcwParams {
    pub two_p: f64,
    pub w: SymMatrix,
    pub sigma: SymMatrix,
}

impl NcwParams {
    /// Checks `Σ ≻ 0` and `w ⪰ 0` up to `w.default_tol()`-scaled slack.
    pub fn new(two_p: f64, w: SymMatrix, sigma: SymMatrix) -> Result<Self> {
        if !(two_p.is_finite() && two_p > 0.0) {
            return Err(Error::Domain(format!(
                "2p must be positive and finite, got {two_p}"
            )));
        }
        if w.dim() != sigma.dim() {
            return Err(Error::Dimension {
                expected: sigma.dim(),
                got: w.dim(),
            });
        }
        if !sigma.is_positive_definite() {
            return Err(Error::NotPositiveDefinite);
        }
        let eigs = w.eigenvalues();
        let slack = 8.0 * w.default_tol().max(f64::MIN_POSITIVE);
        if eigs[0] < -slack {
            return Err(Error::NotPositiveSemidefinite);
        }
        Ok(Self { two_p, w, sigma })
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    pub fn p(&self) -> f64 {
        self.two_p / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictReason {
    ShapeNotInLambda,
    RankExceedsShape,
    #[serde(rename = "OK_IntegerShape")]
    OkIntegerShape,
    #[serde(rename = "OK_ContinuousShape")]
    OkContinuousShape,
}

impl VerdictReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ShapeNotInLambda => "ShapeNotInLambda",
            Self::RankExceedsShape => "RankExceedsShape",
            Self::OkIntegerShape => "OK_IntegerShape",
            Self::OkContinuousShape => "OK_ContinuousShape",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExistenceVerdict {
    pub exists: bool,
    pub reason: VerdictReason,
    /// The clause of the existence criterion that decided the verdict.
    pub citation: String,
}

pub const CLAUSE_CONTINUOUS: &str = "2p >= d-1: rank w arbitrary";
pub const CLAUSE_INTEGER: &str = "2p = n <= d-2: requires rank w <= n";
pub const CLAUSE_LAMBDA: &str = "2p must lie in {1,...,d-2} or [d-1, inf)";

fn integer_shape(two_p: f64) -> Option<usize> {
    let n = two_p.round();
    ((two_p - n).abs() <= INTEGER_SHAPE_TOL && n >= 0.0).then_some(n as usize)
}

/// The existence criterion with `rank` standing for `rank w` (or `k`).
pub fn classify(two_p: f64, rank: usize, d: usize) -> ExistenceVerdict {
    let verdict = |exists, reason, citation: &str| ExistenceVerdict {
        exists,
        reason,
        citation: citation.to_string(),
    };
    let continuous_floor = d as f64 - 1.0;
    if two_p >= continuous_floor - INTEGER_SHAPE_TOL {
        return verdict(true, VerdictReason::OkContinuousShape, CLAUSE_CONTINUOUS);
    }
    match integer_shape(two_p) {
        Some(n) if n >= 1 => {
            if rank <= n {
                verdict(true, VerdictReason::OkIntegerShape, CLAUSE_INTEGER)
            } else {
                verdict(false, VerdictReason::RankExceedsShape, CLAUSE_INTEGER)
            }
        }
        _ => verdict(false, VerdictReason::ShapeNotInLambda, CLAUSE_LAMBDA),
    }
}

/// Existence of `NCW(2p, w, Σ)`; `rank w` counts eigenvalues above `tol`
/// (`tol ≤ 0` selects `w.default_tol()`).
pub fn exists_ncw(params: &NcwParams, tol: f64) -> Result<ExistenceVerdict> {
    if !params.sigma.is_positive_definite() {
        return Err(Error::NotPositiveDefinite);
    }
    let tol = if tol > 0.0 {
        tol
    } else {
        params.w.default_tol()
    };
    Ok(classify(params.two_p, params.w.rank(tol), params.dim()))
}

pub fn exists_m(spec: &MeasureSpec) -> ExistenceVerdict {
    classify(spec.two_p, spec.k, spec.d)
}

fn check_pd(s: &SymMatrix) -> Result<()> {
    if !s.is_finite() {
        return Err(Error::NonFinite);
    }
    if !s.is_positive_definite() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(())
}

/// `ln E[e^{-tr(sX)}] = −p ln det(I+2Σs) − tr(2s(I+2Σs)⁻¹w)`.
pub fn ln_laplace_ncw(s: &SymMatrix, params: &NcwParams) -> Result<f64> {
    check_pd(s)?;
    if s.dim() != params.dim() {
        return Err(Error::Dimension {
            expected: params.dim(),
            got: s.dim(),
        });
    }
    let v = ln_laplace_ncw_formula(s.as_matrix(), params);
    if v.is_nan() {
        return Err(Error::Domain("I + 2Σs is singular".into()));
    }
    Ok(v)
}

/// The closed form at any symmetric `s` where `det(I+2Σs) > 0`; NaN elsewhere.
pub(crate) fn ln_laplace_ncw_formula(s: &nalgebra::DMatrix<f64>, params: &NcwParams) -> f64 {
    let d = s.nrows();
    let a = nalgebra::DMatrix::<f64>::identity(d, d) + 2.0 * params.sigma.as_matrix() * s;
    let lu = a.lu();
    let det = lu.determinant();
    if !(det > 0.0 && det.is_finite()) {
        return f64::NAN;
    }
    let Some(a_inv_w) = lu.solve(params.w.as_matrix()) else {
        return f64::NAN;
    };
    let exponent = 2.0 * (s * a_inv_w).trace();
    -params.p() * det.ln() - exponent
}

pub fn laplace_ncw(s: &SymMatrix, params: &NcwParams) -> Result<f64> {
    ln_laplace_ncw(s, params).map(f64::exp)
}

/// `ln[(det s)^{-p} e^{tr(s⁻¹ I(k,d))}]`.
pub fn ln_laplace_m(s: &SymMatrix, spec: &MeasureSpec) -> Result<f64> {
    check_pd(s)?;
    if s.dim() != spec.d {
        return Err(Error::Dimension {
            expected: spec.d,
            got: s.dim(),
        });
    }
    let inv = s.inverse()?;
    let tail: f64 = (spec.d - spec.k..spec.d).map(|i| inv.get(i, i)).sum();
    Ok(-spec.p() * s.det().ln() + tail)
}

pub fn laplace_m(s: &SymMatrix, spec: &MeasureSpec) -> Result<f64> {
    ln_laplace_m(s, spec).map(f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zonal::random_pd;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn w_of_rank(d: usize, r: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        let vs: Vec<DVector<f64>> = (0..r)
            .map(|_| DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        SymMatrix::outer_sum(&vs, d)
    }

    #[test]
    fn existence_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sigma = SymMatrix::identity(3);
        let p = NcwParams::new(1.0, w_of_rank(3, 2, &mut rng), sigma.clone()).unwrap();
        let v = exists_ncw(&p, 1e-10).unwrap();
        assert!(!v.exists);
        assert_eq!(v.reason, VerdictReason::RankExceedsShape);

        let p = NcwParams::new(1.0, w_of_rank(3, 1, &mut rng), sigma.clone()).unwrap();
        let v = exists_ncw(&p, 1e-10).unwrap();
        assert!(v.exists);
        assert_eq!(v.reason, VerdictReason::OkIntegerShape);

        for r in 0..=3 {
            let p = NcwParams::new(2.5, w_of_rank(3, r, &mut rng), sigma.clone()).unwrap();
            assert_eq!(
                exists_ncw(&p, 1e-10).unwrap().reason,
                VerdictReason::OkContinuousShape
            );
        }

        let p = NcwParams::new(1.5, SymMatrix::zeros(4), SymMatrix::identity(4)).unwrap();
        let v = exists_ncw(&p, 1e-10).unwrap();
        assert!(!v.exists);
        assert_eq!(v.reason, VerdictReason::ShapeNotInLambda);
    }

    #[test]
    fn existence_of_m_examples() {
        for d in 1..=6 {
            assert!(
                exists_m(
                    &MeasureSpec::new(d as f64 - 1.0 + if d == 1 { 0.5 } else { 0.0 }, d, d)
                        .unwrap()
                )
                .exists
            );
            if d >= 3 {
                assert!(!exists_m(&MeasureSpec::new(d as f64 - 2.0, d, d).unwrap()).exists);
            }
            for n in 1..=d {
                for k in 0..=n {
                    assert!(
                        exists_m(&MeasureSpec::new(n as f64, k, d).unwrap()).exists,
                        "({n},{k},{d})"
                    );
                }
            }
        }
    }

    #[test]
    fn existence_table() {
        // Independent restatement of the criterion: the shape set is
        // {1,...,d-2} ∪ [d-1, ∞), and integer shapes n below d-1 need k <= n.
        for d in 1..=6usize {
            for h in 1..=(2 * d + 2) {
                let two_p = h as f64 / 2.0;
                for k in 0..=d {
                    let v = exists_m(&MeasureSpec::new(two_p, k, d).unwrap());
                    let integral = h % 2 == 0;
                    let expected = two_p >= d as f64 - 1.0 || (integral && k as f64 <= two_p);
                    assert_eq!(v.exists, expected, "2p={two_p} k={k} d={d}");
                    assert_eq!(
                        v.exists,
                        matches!(
                            v.reason,
                            VerdictReason::OkIntegerShape | VerdictReason::OkContinuousShape
                        )
                    );
                }
            }
        }
        // d = 2: exists iff 2p >= 1; d = 1: every 2p > 0
        assert!(!exists_m(&MeasureSpec::new(0.7, 0, 2).unwrap()).exists);
        assert!(exists_m(&MeasureSpec::new(1.0, 2, 2).unwrap()).exists);
        assert!(exists_m(&MeasureSpec::new(0.3, 1, 1).unwrap()).exists);
        // within tolerance of an integer counts as that integer
        assert!(exists_m(&MeasureSpec::new(2.0 + 1e-11, 2, 5).unwrap()).exists);
        assert!(!exists_m(&MeasureSpec::new(2.0 + 1e-6, 2, 5).unwrap()).exists);
    }

    #[test]
    fn sigma_must_be_pd() {
        let bad = SymMatrix::diag(&[1.0, 0.0]);
        assert!(NcwParams::new(1.0, SymMatrix::zeros(2), bad.clone()).is_err());
        let p = NcwParams {
            two_p: 1.0,
            w: SymMatrix::zeros(2),
            sigma: bad,
        };
        assert!(exists_ncw(&p, 1e-10).is_err());
        assert!(
            NcwParams::new(1.0, SymMatrix::diag(&[1.0, -0.1]), SymMatrix::identity(2)).is_err()
        );
    }

    #[test]
    fn laplace_ncw_examples() {
        let p =
            NcwParams::new(3.0, SymMatrix::zeros(3), SymMatrix::identity(3).scale(0.5)).unwrap();
        let v = laplace_ncw(&SymMatrix::identity(3), &p).unwrap();
        assert!((v - 2f64.powf(-3.0 * 1.5)).abs() < 1e-15);

        let tiny = SymMatrix::identity(3).scale(1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = NcwParams::new(
            1.7,
            w_of_rank(3, 2, &mut rng),
            random_pd(3, 0.5, 2.0, &mut rng),
        )
        .unwrap();
        assert!((laplace_ncw(&tiny, &p).unwrap() - 1.0).abs() < 1e-10);

        for &(two_p, sigma, w, s) in &[
            (1.0, 0.7, 0.3, 1.2),
            (3.5, 2.0, 0.0, 0.1),
            (0.4, 0.1, 5.0, 3.0),
        ] {
            let p =
                NcwParams::new(two_p, SymMatrix::diag(&[w]), SymMatrix::diag(&[sigma])).unwrap();
            let got = laplace_ncw(&SymMatrix::diag(&[s]), &p).unwrap();
            let a = 1.0 + 2.0 * sigma * s;
            let expected = a.powf(-two_p / 2.0) * (-2.0 * s * w / a).exp();
            assert!((got / expected - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn laplace_ncw_is_at_most_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let d = rng.random_range(1..=5);
            let r = rng.random_range(0..=d);
            let p = NcwParams::new(
                rng.random_range(0.5..6.0),
                w_of_rank(d, r, &mut rng),
                random_pd(d, 0.2, 3.0, &mut rng),
            )
            .unwrap();
            let v = laplace_ncw(&random_pd(d, 0.01, 4.0, &mut rng), &p).unwrap();
            assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn laplace_m_examples() {
        for d in 1..=5 {
            let v = laplace_m(
                &SymMatrix::identity(d),
                &MeasureSpec::new(2.3, 0, d).unwrap(),
            )
            .unwrap();
            assert!((v - 1.0).abs() < 1e-15);
            if d >= 2 {
                let spec = MeasureSpec::new(d as f64 - 1.0, d, d).unwrap();
                let v = laplace_m(&SymMatrix::identity(d), &spec).unwrap();
                assert!((v / (d as f64).exp() - 1.0).abs() < 1e-14);
            }
        }
        let v = laplace_m(
            &SymMatrix::identity(2).scale(2.0),
            &MeasureSpec::new(1.0, 2, 2).unwrap(),
        )
        .unwrap();
        assert!((v - 0.5 * 1f64.exp()).abs() < 1e-15);
        // I(k,d) occupies the trailing diagonal
        let s = SymMatrix::diag(&[1.0, 4.0]);
        let v = laplace_m(&s, &MeasureSpec::new(1.0, 1, 2).unwrap()).unwrap();
        assert!((v - 0.5 * 0.25f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn convolution_of_laplace_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let d = rng.random_range(1..=5);
            let k = rng.random_range(0..=d);
            let (a, b) = (rng.random_range(0.1..5.0), rng.random_range(0.1..5.0));
            let s = random_pd(d, 0.1, 3.0, &mut rng);
            let lhs = ln_laplace_m(&s, &MeasureSpec::new(a, k, d).unwrap()).unwrap()
                + ln_laplace_m(&s, &MeasureSpec::new(b, 0, d).unwrap()).unwrap();
            let rhs = ln_laplace_m(&s, &MeasureSpec::new(a + b, k, d).unwrap()).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_non_pd_argument() {
        let spec = MeasureSpec::new(1.0, 1, 2).unwrap();
        assert!(laplace_m(&SymMatrix::diag(&[1.0, 0.0]), &spec).is_err());
        assert!(laplace_m(&SymMatrix::identity(3), &spec).is_err());
        assert!(MeasureSpec::new(0.0, 0, 2).is_err());
        assert!(MeasureSpec::new(1.0, 3, 2).is_err());
    }
}
