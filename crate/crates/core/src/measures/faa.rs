//! Closed forms for `∂ⁿ/∂xⁿ (x²−y²−z²)ⁿ` and `∂ⁿ/∂xⁿ (x²−y²−z²)ⁿ⁻¹`,
//! checked against exact polynomial expansion and against extrapolated
//! finite differences.

use std::collections::BTreeMap;

use num::{BigInt, BigRational, One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn fact(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// `n!² Σ_k q^k/(k!)² (2x)^{n−2k}/(n−2k)!`.
pub fn faa_closed(n: usize, x: f64, q: f64) -> f64 {
    let s: f64 = (0..=n / 2)
        .map(|k| {
            q.powi(k as i32) / fact(k).powi(2) * (2.0 * x).powi((n - 2 * k) as i32)
                / fact(n - 2 * k)
        })
        .sum();
    fact(n).powi(2) * s
}

/// `n!(n−1)! Σ_{k≥1} q^{k−1}/((k−1)! k!) (2x)^{n−2k}/(n−2k)!`.
pub fn faa1_closed(n: usize, x: f64, q: f64) -> f64 {
    let s: f64 = (1..=n / 2)
        .map(|k| {
            q.powi(k as i32 - 1) / (fact(k - 1) * fact(k)) * (2.0 * x).powi((n - 2 * k) as i32)
                / fact(n - 2 * k)
        })
        .sum();
    fact(n) * fact(n - 1) * s
}

/// Polynomial in `x` and `r2 = y²+z²`, keyed by exponents.
type Poly = BTreeMap<(u32, u32), BigRational>;

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn big_fact(n: usize) -> BigRational {
    (1..=n as i64).fold(BigRational::one(), |acc, v| acc * rat(v))
}

fn binom(n: usize, k: usize) -> BigRational {
    big_fact(n) / (big_fact(k) * big_fact(n - k))
}

fn add_term(p: &mut Poly, key: (u32, u32), c: BigRational) {
    let e = p.entry(key).or_insert_with(BigRational::zero);
    *e += c;
    if e.is_zero() {
        p.remove(&key);
    }
}

/// `(x² − r2)^e`.
fn quadratic_power(e: usize) -> Poly {
    let mut p = Poly::new();
    for j in 0..=e {
        let sign = if j % 2 == 0 { rat(1) } else { rat(-1) };
        add_term(&mut p, (2 * (e - j) as u32, j as u32), sign * binom(e, j));
    }
    p
}

fn diff_x(p: &Poly, n: usize) -> Poly {
    let mut out = Poly::new();
    for (&(a, b), c) in p {
        if (a as usize) < n {
            continue;
        }
        let falling = (0..n).fold(BigRational::one(), |acc, i| acc * rat(a as i64 - i as i64));
        add_term(&mut out, (a - n as u32, b), c * falling);
    }
    out
}

fn scale_shift(p: &Poly, c: &BigRational, xpow: u32) -> Poly {
    p.iter()
        .map(|(&(a, b), v)| ((a + xpow, b), v * c))
        .collect()
}

fn add_into(acc: &mut Poly, p: &Poly) {
    for (&k, v) in p {
        add_term(acc, k, v.clone());
    }
}

fn faa_closed_poly(n: usize) -> Poly {
    let mut acc = Poly::new();
    for k in 0..=n / 2 {
        let c = big_fact(n) * big_fact(n) / (big_fact(k) * big_fact(k))
            * rat(2).pow((n - 2 * k) as i32)
            / big_fact(n - 2 * k);
        add_into(
            &mut acc,
            &scale_shift(&quadratic_power(k), &c, (n - 2 * k) as u32),
        );
    }
    acc
}

fn faa1_closed_poly(n: usize) -> Poly {
    let mut acc = Poly::new();
    for k in 1..=n / 2 {
        let c = big_fact(n) * big_fact(n - 1) / (big_fact(k - 1) * big_fact(k))
            * rat(2).pow((n - 2 * k) as i32)
            / big_fact(n - 2 * k);
        add_into(
            &mut acc,
            &scale_shift(&quadratic_power(k - 1), &c, (n - 2 * k) as u32),
        );
    }
    acc
}

/// Both closed forms agree with differentiating the expanded powers, as
/// exact rational polynomials in `(x, y²+z²)`.
pub fn faa_symbolic_exact(n: usize) -> bool {
    if n == 0 {
        return false;
    }
    diff_x(&quadratic_power(n), n) == faa_closed_poly(n)
        && diff_x(&quadratic_power(n - 1), n) == faa1_closed_poly(n)
}

/// `∂ⁿ/∂xⁿ (x² − r2)^e` by central differences, Richardson-extrapolated in
/// `h²` through enough levels to be exact for this polynomial.
fn fd_derivative(n: usize, e: usize, x: f64, r2: f64) -> f64 {
    let f = |t: f64| (t * t - r2).powi(e as i32);
    let levels = (2 * e).saturating_sub(n) / 2 + 1;
    let h0 = 0.5 * x.abs().max(r2.sqrt()).max(1.0);
    let weights: Vec<f64> = (0..=n)
        .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } * binom_f(n, j))
        .collect();
    let mut table: Vec<f64> = (0..levels)
        .map(|i| {
            let h = h0 / 2f64.powi(i as i32);
            let s: f64 = weights
                .iter()
                .enumerate()
                .map(|(j, w)| w * f(x + (n as f64 / 2.0 - j as f64) * h))
                .sum();
            s / h.powi(n as i32)
        })
        .collect();
    for m in 1..levels {
        let factor = 4f64.powi(m as i32);
        for i in (m..levels).rev() {
            table[i] = table[i] + (table[i] - table[i - 1]) / (factor - 1.0);
        }
    }
    table[levels - 1]
}

fn binom_f(n: usize, k: usize) -> f64 {
    fact(n) / (fact(k) * fact(n - k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaaReport {
    pub n: usize,
    pub point: [f64; 3],
    pub faa_closed: f64,
    pub faa_finite_difference: f64,
    pub faa1_closed: f64,
    pub faa1_finite_difference: f64,
    /// Largest relative error (absolute where the closed form is zero).
    pub max_rel_err: f64,
    pub symbolic_exact: bool,
}

/// Evaluates both closed forms at `point` and compares them with finite
/// differences and with exact expansion.
pub fn faa_di_bruno_check(n: usize, point: [f64; 3]) -> Result<FaaReport> {
    if !(1..=10).contains(&n) {
        return Err(Error::Domain(format!("n must be in 1..=10, got {n}")));
    }
    if point.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let [x, y, z] = point;
    let r2 = y * y + z * z;
    let q = x * x - r2;
    let a = faa_closed(n, x, q);
    let a_fd = fd_derivative(n, n, x, r2);
    let b = faa1_closed(n, x, q);
    let b_fd = fd_derivative(n, n - 1, x, r2);
    let rel = |c: f64, f: f64| {
        if c == 0.0 {
            f.abs()
        } else {
            ((f - c) / c).abs()
        }
    };
    Ok(FaaReport {
        n,
        point,
        faa_closed: a,
        faa_finite_difference: a_fd,
        faa1_closed: b,
        faa1_finite_difference: b_fd,
        max_rel_err: rel(a, a_fd).max(rel(b, b_fd)),
        symbolic_exact: faa_symbolic_exact(n),
    })
}
