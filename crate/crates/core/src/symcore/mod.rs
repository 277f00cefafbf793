//! Symmetric matrices, the positive semidefinite cone and its strata.
//!
//! Everything in the crate that is a point of the cone (samples, Laplace
//! arguments, non-centrality and covariance parameters) is a [`SymMatrix`].

mod haar;

pub use haar::{haar_orthogonal, haar_orthogonal_into};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real symmetric matrix. Symmetry is exact: the constructors
/// average the input with its transpose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.rows()
    }
}

impl SymMatrix {
    /// Builds from a square matrix, rejecting asymmetry above `1e-12` relative
    /// to the largest entry and symmetrising the rest.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let (asym, scale) = asymmetry(&m)?;
        if asym > 1e-12 * scale.max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self::symmetrize(m))
    }

    /// Averages `m` with its transpose without checking how far apart they were.
    pub fn symmetrize(m: DMatrix<f64>) -> Self {
        assert!(
            m.is_square() && m.nrows() >= 1,
            "symmetric matrix must be square, d >= 1"
        );
        let t = m.transpose();
        Self { m: (m + t) * 0.5 }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::Empty("matrix rows"));
        }
        for r in rows {
            if r.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: r.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn identity(d: usize) -> Self {
        Self {
            m: DMatrix::identity(d, d),
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            m: DMatrix::zeros(d, d),
        }
    }

    pub fn diag(values: &[f64]) -> Self {
        Self {
            m: DMatrix::from_diagonal(&DVector::from_column_slice(values)),
        }
    }

    /// `I(k,d)`: `d-k` zeros followed by `k` ones on the diagonal.
    pub fn canonical_noncentrality(k: usize, d: usize) -> Self {
        assert!(k <= d);
        let v: Vec<f64> = (0..d).map(|i| if i >= d - k { 1.0 } else { 0.0 }).collect();
        Self::diag(&v)
    }

    /// `Σ_i v_i v_iᵀ`.
    pub fn outer_sum(vectors: &[DVector<f64>], d: usize) -> Self {
        let mut m = DMatrix::zeros(d, d);
        for v in vectors {
            m.ger(1.0, v, v, 1.0);
        }
        Self::symmetrize(m)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| self.m.row(i).iter().copied().collect())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn det(&self) -> f64 {
        self.m.determinant()
    }

    /// `tr(self · other)`.
    pub fn trace_product(&self, other: &SymMatrix) -> f64 {
        self.m.component_mul(&other.m).sum()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { m: &self.m * c }
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        Self {
            m: &self.m + &other.m,
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> Self {
        Self {
            m: &self.m - &other.m,
        }
    }

    /// `a · self · aᵀ` for any (not necessarily square) `a`.
    pub fn congruence(&self, a: &DMatrix<f64>) -> Self {
        Self::symmetrize(a * &self.m * a.transpose())
    }

    /// Leading `k × k` principal block.
    pub fn leading_block(&self, k: usize) -> Self {
        Self {
            m: self.m.view((0, 0), (k, k)).into_owned(),
        }
    }

    /// Embeds as the top-left block of a `d × d` zero matrix.
    pub fn embed(&self, d: usize) -> Self {
        let k = self.dim();
        assert!(k <= d);
        let mut m = DMatrix::zeros(d, d);
        m.view_mut((0, 0), (k, k)).copy_from(&self.m);
        Self { m }
    }

    pub fn inverse(&self) -> Result<Self> {
        let c = self
            .m
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?;
        Ok(Self::symmetrize(c.inverse()))
    }

    /// Lower Cholesky factor, `None` unless positive definite.
    pub fn cholesky(&self) -> Option<DMatrix<f64>> {
        self.m.clone().cholesky().map(|c| c.unpack())
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.m.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    /// Eigenpairs sorted by ascending eigenvalue; eigenvectors are the columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let e = SymmetricEigen::new(self.m.clone());
        let d = self.dim();
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
        let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
        let vecs = DMatrix::from_fn(d, d, |r, c| e.eigenvectors[(r, idx[c])]);
        (vals, vecs)
    }

    /// Applies `f` to the spectrum.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Self {
        let (vals, vecs) = self.eigen();
        let fd =
            DMatrix::from_diagonal(&DVector::from_iterator(vals.len(), vals.into_iter().map(f)));
        Self::symmetrize(&vecs * fd * vecs.transpose())
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_some()
    }

    /// `d · ε · max|λ|`.
    pub fn default_tol(&self) -> f64 {
        let scale = self
            .eigenvalues()
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        self.dim() as f64 * f64::EPSILON * scale
    }

    /// Number of eigenvalues above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues().iter().filter(|&&v| v > tol).count()
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        (&self.m - &other.m).amax()
    }
}

fn asymmetry(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    if !m.is_square() {
        return Err(Error::Dimension {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::Empty("matrix"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(((m - m.transpose()).amax(), m.amax()))
}

/// Position of a matrix relative to the closed cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeTag {
    PositiveDefinite,
    /// On the boundary stratum `S_b`, `b < d`.
    BoundaryRank(usize),
    NotInCone,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeClass {
    pub tag: ConeTag,
    pub tolerance: f64,
}

impl ConeClass {
    pub fn in_closed_cone(&self) -> bool {
        !matches!(self.tag, ConeTag::NotInCone)
    }

    /// Rank of a cone point, `None` outside the cone.
    pub fn rank(&self, d: usize) -> Option<usize> {
        match self.tag {
            ConeTag::PositiveDefinite => Some(d),
            ConeTag::BoundaryRank(b) => Some(b),
            ConeTag::NotInCone => None,
        }
    }
}

pub fn cone_classify(m: &SymMatrix, tol: f64) -> Result<ConeClass> {
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    if !(tol >= 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be nonnegative, got {tol}"
        )));
    }
    let eigs = m.eigenvalues();
    let tag = if eigs.iter().any(|&v| v < -tol) {
        ConeTag::NotInCone
    } else {
        let b = eigs.iter().filter(|&&v| v > tol).count();
        if b == m.dim() {
            ConeTag::PositiveDefinite
        } else {
            ConeTag::BoundaryRank(b)
        }
    };
    Ok(ConeClass {
        tag,
        tolerance: tol,
    })
}

/// Point `(x, y, z)` of the cone of revolution `x ≥ √(y²+z²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConePoint2 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ConePoint2 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn radius(&self) -> f64 {
        self.y.hypot(self.z)
    }

    /// `x² − y² − z²`, the determinant of the matching 2×2 matrix.
    pub fn quadratic(&self) -> f64 {
        self.x * self.x - self.y * self.y - self.z * self.z
    }

    pub fn in_cone(&self, tol: f64) -> bool {
        self.x >= self.radius() - tol
    }

    pub fn in_interior(&self) -> bool {
        self.x > self.radius()
    }
}

/// `(x,y,z) ↦ [[x+y, z], [z, x−y]]`.
pub fn phi2(p: ConePoint2) -> SymMatrix {
    SymMatrix::from_rows(&[vec![p.x + p.y, p.z], vec![p.z, p.x - p.y]])
        .expect("2x2 symmetric by construction")
}

/// Inverse of [`phi2`].
pub fn phi2_inverse(m: &SymMatrix) -> Result<ConePoint2> {
    if m.dim() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: m.dim(),
        });
    }
    let (a, b, c) = (m.get(0, 0), m.get(1, 1), m.get(0, 1));
    Ok(ConePoint2::new((a + b) / 2.0, (a - b) / 2.0, c))
}

/// Isometric coordinates of the space of symmetric matrices under
/// `⟨a,b⟩ = tr(ab)`: the diagonal entries, then `√2·x_ij` for `i < j` in
/// row-major order.
pub fn lebesgue_coords(m: &SymMatrix) -> Vec<f64> {
    let d = m.dim();
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    out.extend((0..d).map(|i| m.get(i, i)));
    for i in 0..d {
        for j in i + 1..d {
            out.push(std::f64::consts::SQRT_2 * m.get(i, j));
        }
    }
    out
}

/// Column labels matching [`lebesgue_coords`].
pub fn lebesgue_coord_names(d: usize) -> Vec<String> {
    let mut out: Vec<String> = (0..d).map(|i| format!("x{}{}", i + 1, i + 1)).collect();
    for i in 0..d {
        for j in i + 1..d {
            out.push(format!("sqrt2_x{}{}", i + 1, j + 1));
        }
    }
    out
}

/// Gram matrix `G[j][k] = ⟨c_j, c_k⟩`.
pub fn gram(cols: &[Vec<f64>]) -> Result<SymMatrix> {
    let first = cols.first().ok_or(Error::Empty("gram vectors"))?;
    let r = first.len();
    if r == 0 {
        return Err(Error::Empty("gram vector entries"));
    }
    if let Some(bad) = cols.iter().find(|c| c.len() != r) {
        return Err(Error::Dimension {
            expected: r,
            got: bad.len(),
        });
    }
    let n = cols.len();
    let m = DMatrix::from_fn(n, n, |j, k| {
        cols[j].iter().zip(&cols[k]).map(|(a, b)| a * b).sum()
    });
    Ok(SymMatrix::symmetrize(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn classify_examples() {
        let c = cone_classify(&SymMatrix::identity(3), 1e-10).unwrap();
        assert_eq!(c.tag, ConeTag::PositiveDefinite);
        let c = cone_classify(&SymMatrix::diag(&[1.0, 1.0, 0.0]), 1e-10).unwrap();
        assert_eq!(c.tag, ConeTag::BoundaryRank(2));
        let c = cone_classify(&SymMatrix::diag(&[1.0, -1.0]), 1e-10).unwrap();
        assert_eq!(c.tag, ConeTag::NotInCone);
    }

    #[test]
    fn classify_rejects_nan_and_negative_tol() {
        let m = SymMatrix::symmetrize(DMatrix::from_element(2, 2, f64::NAN));
        assert_eq!(cone_classify(&m, 0.0), Err(Error::NonFinite));
        assert!(cone_classify(&SymMatrix::identity(2), -1.0).is_err());
    }

    #[test]
    fn asymmetric_input_rejected() {
        let r = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert!(matches!(r, Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn phi2_examples() {
        assert_eq!(phi2(ConePoint2::new(1.0, 0.0, 0.0)), SymMatrix::identity(2));
        let b = phi2(ConePoint2::new(1.0, 1.0, 0.0));
        assert_eq!(b, SymMatrix::diag(&[2.0, 0.0]));
        assert_eq!(
            cone_classify(&b, 1e-12).unwrap().tag,
            ConeTag::BoundaryRank(1)
        );
        let t = phi2(ConePoint2::new(2.0, 1.0, 1.0))
            .trace_product(&phi2(ConePoint2::new(1.0, 0.0, 0.0)));
        assert_eq!(t, 4.0);
    }

    #[test]
    fn lebesgue_examples() {
        assert_eq!(
            lebesgue_coords(&SymMatrix::identity(2)),
            vec![1.0, 1.0, 0.0]
        );
        let norm = |v: Vec<f64>| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let m = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((norm(lebesgue_coords(&m)) - 2f64.sqrt()).abs() < 1e-15);
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 3.0]]).unwrap();
        assert!((norm(lebesgue_coords(&m)) - 18f64.sqrt()).abs() < 1e-14);
        assert_eq!(lebesgue_coord_names(2), vec!["x11", "x22", "sqrt2_x12"]);
    }

    #[test]
    fn gram_examples() {
        let g = gram(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(g, SymMatrix::identity(2));
        let g = gram(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(
            g,
            SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap()
        );
        assert_eq!(g.rank(1e-12), 1);
        assert_eq!(gram(&[]), Err(Error::Empty("gram vectors")));
        assert!(gram(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    fn sym_strategy(d: usize) -> impl Strategy<Value = SymMatrix> {
        proptest::collection::vec(-3.0f64..3.0, d * d)
            .prop_map(move |v| SymMatrix::symmetrize(DMatrix::from_vec(d, d, v)))
    }

    proptest! {
        #[test]
        fn lebesgue_is_isometry(a in sym_strategy(4), b in sym_strategy(4)) {
            let ca = lebesgue_coords(&a);
            let cb = lebesgue_coords(&b);
            let dot: f64 = ca.iter().zip(&cb).map(|(x, y)| x * y).sum();
            prop_assert!((dot - a.trace_product(&b)).abs() < 1e-12 * (1.0 + dot.abs()));
        }

        #[test]
        fn phi2_determinant_and_membership(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0) {
            let p = ConePoint2::new(x, y, z);
            let m = phi2(p);
            prop_assert!((m.det() - p.quadratic()).abs() < 1e-12 * (1.0 + p.quadratic().abs() + x * x));
            let back = phi2_inverse(&m).unwrap();
            prop_assert!((back.x - x).abs() < 1e-14 && (back.y - y).abs() < 1e-14 && (back.z - z).abs() < 1e-14);
            // away from the boundary, cone membership of the point and the matrix agree
            if (x - p.radius()).abs() > 1e-9 {
                let in_c = cone_classify(&m, 1e-12).unwrap().in_closed_cone();
                prop_assert_eq!(in_c, p.in_cone(0.0));
            }
        }

        #[test]
        fn phi2_trace_pairing(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0,
                              x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0) {
            let t = phi2(ConePoint2::new(a, b, c)).trace_product(&phi2(ConePoint2::new(x, y, z)));
            prop_assert!((t - (2.0 * a * x + 2.0 * b * y + 2.0 * c * z)).abs() < 1e-12);
        }

        #[test]
        fn gram_is_psd(v in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 2), 1..6)) {
            let g = gram(&v).unwrap();
            let eigs = g.eigenvalues();
            let scale = eigs.iter().fold(1.0f64, |a, e| a.max(e.abs()));
            prop_assert!(eigs[0] >= -1e-12 * scale);
            prop_assert!(g.rank(1e-9 * scale) <= 2);
        }

        #[test]
        fn classification_is_rotation_invariant(eigs in proptest::collection::vec(prop_oneof![Just(0.0), -2.0f64..-0.1, 0.1f64..2.0], 3), seed in any::<u64>()) {
            use rand::SeedableRng;
            let m = SymMatrix::diag(&eigs);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let u = haar_orthogonal(3, &mut rng).unwrap();
            let a = cone_classify(&m, 1e-9).unwrap();
            let b = cone_classify(&m.congruence(&u), 1e-9).unwrap();
            prop_assert_eq!(a.tag, b.tag);
        }
    }
}
