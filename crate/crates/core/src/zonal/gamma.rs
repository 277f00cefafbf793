use num::{BigInt, BigRational, One};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use super::Partition;
use crate::error::{Error, Result};

/// Arguments of `Γ_d(z₁,…,z_d) = ∏ Γ(z_j − (j−1)/2)`, optionally shifted by
/// `p` as in `Γ_d(z + p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaArgs {
    pub z: Vec<f64>,
    pub shift_p: Option<f64>,
}

impl GammaArgs {
    pub fn new(z: Vec<f64>) -> Self {
        Self { z, shift_p: None }
    }

    /// `Γ_d(κ + p)`.
    pub fn partition_shifted(kappa: &Partition, p: f64) -> Self {
        Self {
            z: kappa.padded().into_iter().map(|m| m as f64).collect(),
            shift_p: Some(p),
        }
    }

    /// The scalar gamma arguments `z_j + p − (j−1)/2`, each checked to be positive.
    pub fn scalar_arguments(&self) -> Result<Vec<f64>> {
        let p = self.shift_p.unwrap_or(0.0);
        self.z
            .iter()
            .enumerate()
            .map(|(j, &z)| {
                let a = z + p - j as f64 / 2.0;
                if a > 0.0 {
                    Ok(a)
                } else {
                    Err(Error::Domain(format!(
                        "Γ_d pole: argument {} gives Γ({a})",
                        j + 1
                    )))
                }
            })
            .collect()
    }
}

pub fn multivariate_gamma(args: &GammaArgs) -> Result<f64> {
    Ok(args.scalar_arguments()?.into_iter().map(gamma).product())
}

pub fn ln_multivariate_gamma(args: &GammaArgs) -> Result<f64> {
    Ok(args.scalar_arguments()?.into_iter().map(ln_gamma).sum())
}

/// `(p)_κ = Γ_d(κ+p)/Γ_d(p)`, computed as a product of rising factorials.
///
/// Rejects `p ≤ (d−1)/2` unless `allow_outside_domain` is set, in which case
/// the product formula is continued as is.
pub fn pochhammer_kappa(
    p: f64,
    kappa: &Partition,
    d: usize,
    allow_outside_domain: bool,
) -> Result<f64> {
    check_kappa(kappa, d)?;
    if !allow_outside_domain && p <= (d as f64 - 1.0) / 2.0 {
        return Err(Error::Domain(format!(
            "(p)_κ needs p > (d-1)/2 = {}, got {p}",
            (d as f64 - 1.0) / 2.0
        )));
    }
    let mut out = 1.0;
    for (j, &m) in kappa.parts().iter().enumerate() {
        let base = p - j as f64 / 2.0;
        for i in 0..m {
            out *= base + i as f64;
        }
    }
    Ok(out)
}

/// `(p)_κ` in exact arithmetic for `p = num/2`.
pub fn pochhammer_half_integer_exact(two_p: i64, kappa: &Partition) -> BigRational {
    let two = BigInt::from(2);
    let mut out = BigRational::one();
    for (j, &m) in kappa.parts().iter().enumerate() {
        for i in 0..m {
            // p − j/2 + i = (two_p − j + 2i)/2
            out *= BigRational::new(BigInt::from(two_p - j as i64 + 2 * i as i64), two.clone());
        }
    }
    out
}

pub(crate) fn check_kappa(kappa: &Partition, d: usize) -> Result<()> {
    if kappa.length() > d {
        return Err(Error::PartitionOutOfRange {
            parts: kappa.parts().to_vec(),
            d,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gamma_examples() {
        assert!((multivariate_gamma(&GammaArgs::new(vec![1.0])).unwrap() - 1.0).abs() < 1e-15);
        let v = multivariate_gamma(&GammaArgs::new(vec![1.5, 1.5])).unwrap();
        assert!((v - PI.sqrt() / 2.0).abs() < 1e-14);
        let k = Partition::new(&[0, 0, 0], 3).unwrap();
        assert!(matches!(
            multivariate_gamma(&GammaArgs::partition_shifted(&k, 1.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn log_matches_direct() {
        let a = GammaArgs {
            z: vec![3.0, 2.0, 1.0],
            shift_p: Some(2.25),
        };
        let direct = multivariate_gamma(&a).unwrap();
        assert!((ln_multivariate_gamma(&a).unwrap() - direct.ln()).abs() < 1e-13);
    }

    #[test]
    fn recurrence_per_coordinate() {
        // Γ_d with one coordinate shifted by one picks up the factor z_j − (j−1)/2.
        let z = vec![2.3, 1.9, 1.7];
        let base = multivariate_gamma(&GammaArgs::new(z.clone())).unwrap();
        for j in 0..3 {
            let mut zs = z.clone();
            zs[j] += 1.0;
            let shifted = multivariate_gamma(&GammaArgs::new(zs)).unwrap();
            let factor = z[j] - j as f64 / 2.0;
            assert!((shifted / base - factor).abs() < 1e-12);
        }
    }

    #[test]
    fn pochhammer_examples() {
        let e = Partition::empty(2);
        assert_eq!(pochhammer_kappa(3.7, &e, 2, false).unwrap(), 1.0);
        let k1 = Partition::new(&[1], 2).unwrap();
        assert_eq!(pochhammer_kappa(1.0, &k1, 2, false).unwrap(), 1.0);
        let k11 = Partition::new(&[1, 1], 2).unwrap();
        assert_eq!(pochhammer_kappa(1.0, &k11, 2, false).unwrap(), 0.5);
        assert!(pochhammer_kappa(0.5, &k11, 2, false).is_err());
        assert_eq!(pochhammer_kappa(0.5, &k11, 2, true).unwrap(), 0.0);
    }

    #[test]
    fn pochhammer_is_gamma_ratio() {
        for parts in [vec![1usize], vec![1, 1], vec![3, 1], vec![4, 2, 2]] {
            let k = Partition::new(&parts, 3).unwrap();
            let p = 1.75;
            let ratio = (ln_multivariate_gamma(&GammaArgs::partition_shifted(&k, p)).unwrap()
                - ln_multivariate_gamma(&GammaArgs {
                    z: vec![0.0; 3],
                    shift_p: Some(p),
                })
                .unwrap())
            .exp();
            let prod = pochhammer_kappa(p, &k, 3, false).unwrap();
            assert!((ratio / prod - 1.0).abs() < 1e-12, "{parts:?}");
        }
    }
}
