use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Haar-distributed element of `O(d)`.
///
/// QR of a matrix of independent standard normals with the signs fixed so
/// that `R` has a positive diagonal. Gram-Schmidt produces exactly that
/// factorisation, so it is used directly (twice, for numerical orthogonality).
pub fn haar_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if d < 1 {
        return Err(Error::Domain("Haar sampling needs d >= 1".into()));
    }
    let mut u = DMatrix::zeros(d, d);
    haar_orthogonal_into(&mut u, rng);
    Ok(u)
}

/// In-place variant of [`haar_orthogonal`] for hot Monte-Carlo loops.
pub fn haar_orthogonal_into<R: Rng + ?Sized>(u: &mut DMatrix<f64>, rng: &mut R) {
    let d = u.nrows();
    debug_assert!(u.is_square() && d >= 1);
    for v in u.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    for j in 0..d {
        for _pass in 0..2 {
            for k in 0..j {
                let mut dot = 0.0;
                for i in 0..d {
                    dot += u[(i, j)] * u[(i, k)];
                }
                for i in 0..d {
                    u[(i, j)] -= dot * u[(i, k)];
                }
            }
        }
        let norm = u.column(j).norm();
        for i in 0..d {
            u[(i, j)] /= norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn d1_is_plus_minus_one_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 20_000;
        let mut plus = 0;
        for _ in 0..n {
            let u = haar_orthogonal(1, &mut rng).unwrap();
            assert_eq!(u[(0, 0)].abs(), 1.0);
            if u[(0, 0)] > 0.0 {
                plus += 1;
            }
        }
        let p = plus as f64 / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((p - 0.5).abs() < 4.0 * se, "p = {p}");
    }

    #[test]
    fn orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for d in 1..=8 {
            for _ in 0..50 {
                let u = haar_orthogonal(d, &mut rng).unwrap();
                let e = (&u * u.transpose() - DMatrix::<f64>::identity(d, d)).amax();
                assert!(e < 1e-12, "d={d} err={e}");
            }
        }
        assert!(haar_orthogonal(0, &mut rng).is_err());
    }

    #[test]
    fn u11_squared_mean_d2() {
        // Oracle: average of cos²θ over a dense grid of rotation angles.
        let grid = 100_000;
        let oracle: f64 = (0..grid)
            .map(|i| {
                (std::f64::consts::TAU * (i as f64 + 0.5) / grid as f64)
                    .cos()
                    .powi(2)
            })
            .sum::<f64>()
            / grid as f64;

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| haar_orthogonal(2, &mut rng).unwrap()[(0, 0)].powi(2))
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - oracle).abs() < 3.0 * se,
            "mean {mean} oracle {oracle} se {se}"
        );
    }

    #[test]
    fn left_invariance_first_column() {
        // For fixed orthogonal v, (v u) e1 must be uniform on the sphere as well:
        // compare E[(vu)_11^4] with the sphere moment 3/(d(d+2)).
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = 3;
        let v = haar_orthogonal(d, &mut rng).unwrap();
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| (&v * haar_orthogonal(d, &mut rng).unwrap())[(0, 0)].powi(4))
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let expected = 3.0 / (d as f64 * (d as f64 + 2.0));
        assert!((mean - expected).abs() < 4.0 * (var / n as f64).sqrt());
    }
}
