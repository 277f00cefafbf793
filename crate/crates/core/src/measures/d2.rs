//! Explicit two-dimensional densities in cone coordinates `(x, y, z)` and
//! the one-dimensional `m(1,1,1)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numeric::quad::{integrate_to_infinity, QuadOptions, QuadResult};
use crate::symcore::ConePoint2;

/// Density of the singular part of `m(1,2,2)` in `(y, z)`, carried by the
/// boundary sheet `x = √(y²+z²)`: `g(2ρ)` with `g(u) = 2cosh(2√u)/(πu)`.
pub fn m122_singular_density(y: f64, z: f64) -> Result<f64> {
    let rho = y.hypot(z);
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Domain(format!(
            "singular density needs (y,z) != 0, got ({y},{z})"
        )));
    }
    Ok((2.0 * (2.0 * rho).sqrt()).cosh() / (PI * rho))
}

/// Density `f(x,y,z)` of the absolutely continuous part of `m(1,2,2)` for
/// `dx dy dz`, inside the open cone.
pub fn m122_ac_density(p: ConePoint2) -> Result<f64> {
    if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
        return Err(Error::NonFinite);
    }
    if !p.in_interior() {
        return Err(Error::Domain(format!(
            "({}, {}, {}) is not inside the cone",
            p.x, p.y, p.z
        )));
    }
    Ok(ac_series(p.x, p.quadratic()))
}

/// `(2/√π) Σ_k q^k/(k!(k+1)!) Σ_m (2x)^m/(m! Γ(m+2k+5/2))`.
fn ac_series(x: f64, q: f64) -> f64 {
    const REL: f64 = 1e-13;
    let two_x = 2.0 * x;
    let ln_q = q.ln();
    let mut total = 0.0;
    for k in 0usize.. {
        let kf = k as f64;
        let ln_lead = if k == 0 { 0.0 } else { kf * ln_q }
            - ln_gamma(kf + 1.0)
            - ln_gamma(kf + 2.0)
            - ln_gamma(2.0 * kf + 2.5);
        let mut inner = 0.0;
        let mut r = 1.0;
        for m in 0usize.. {
            inner += r;
            let ratio = two_x / ((m + 1) as f64 * (m as f64 + 2.0 * kf + 2.5));
            if ratio < 0.5 && r < 1e-17 * inner {
                break;
            }
            r *= ratio;
        }
        let term = ln_lead.exp() * inner;
        total += term;
        if q == 0.0 || ((kf + 1.0) * (kf + 2.0) > q && term <= REL * total) {
            break;
        }
    }
    2.0 / PI.sqrt() * total
}

/// `m(1,1,1)(dλ)/dλ = cosh(2√λ)/√(πλ)`.
pub fn m111_density(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!(
            "m(1,1,1) density needs λ > 0, got {lambda}"
        )));
    }
    Ok((2.0 * lambda.sqrt()).cosh() / (PI * lambda).sqrt())
}

/// `s^{-1/2} e^{1/s}`.
pub fn m111_laplace(s: f64) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("needs s > 0, got {s}")));
    }
    Ok(s.powf(-0.5) * (1.0 / s).exp())
}

/// `∫ e^{-2ax-2by-2cz} m(1,2,2)(dx dy dz) = (a²−b²−c²)^{-1/2} e^{2a/(a²−b²−c²)}`.
pub fn m122_laplace(a: f64, b: f64, c: f64) -> Result<f64> {
    let q = a * a - b * b - c * c;
    if !(a > 0.0 && q > 0.0 && q.is_finite()) {
        return Err(Error::Domain(format!(
            "needs a > √(b²+c²), got ({a},{b},{c})"
        )));
    }
    Ok(q.powf(-0.5) * (2.0 * a / q).exp())
}

/// `∫_0^{2π} e^{-2r(a + ρcosθ)} dθ` by the trapezoid rule, which converges
/// geometrically for periodic integrands.
fn damped_angle_integral(a: f64, rho: f64, r: f64) -> f64 {
    if rho == 0.0 {
        return 2.0 * PI * (-2.0 * a * r).exp();
    }
    let eval = |n: usize| -> f64 {
        let h = 2.0 * PI / n as f64;
        (0..n)
            .map(|i| (-2.0 * r * (a + rho * (i as f64 * h).cos())).exp())
            .sum::<f64>()
            * h
    };
    let mut n = 16;
    let mut prev = eval(n);
    loop {
        n *= 2;
        let next = eval(n);
        if (next - prev).abs() <= 1e-15 * next.abs() || n >= 1 << 16 {
            return next;
        }
        prev = next;
    }
}

/// `∫_C e^{-2ax-2by-2cz} h dx dy dz` over the cone `x > r = √(y²+z²)` for
/// an `h` invariant under rotations of `(y, z)`, with `ρ = √(b²+c²) < a`.
/// The integrand is passed as `k(x, r) = r·h`, so the result is
/// `∫_0^∞ dr ∫_0^{2π} dθ e^{-2r(a+ρcosθ)} ∫_0^∞ du e^{-2au} k(r+u, r)`.
pub fn cone_radial_laplace(
    a: f64,
    rho: f64,
    rel_tol: f64,
    k: impl Fn(f64, f64) -> f64,
) -> QuadResult {
    let inner_opts = QuadOptions::rel(rel_tol * 0.1);
    let mut inner_evals = 0;
    let mut converged = true;
    let mut outer = integrate_to_infinity(
        |r| {
            let angle = damped_angle_integral(a, rho, r);
            if angle == 0.0 {
                return 0.0;
            }
            let inner = integrate_to_infinity(
                |u| {
                    let damp = (-2.0 * a * u).exp();
                    if damp == 0.0 {
                        0.0
                    } else {
                        damp * k(r + u, r)
                    }
                },
                0.0,
                inner_opts,
            );
            inner_evals += inner.evals;
            converged &= inner.converged;
            angle * inner.value
        },
        0.0,
        QuadOptions::rel(rel_tol),
    );
    outer.evals += inner_evals;
    outer.converged &= converged;
    outer
}

/// Boundary-sheet counterpart of [`cone_radial_laplace`]: `∫ e^{-2ar-2by-2cz}
/// h dy dz` at `x = r`, with the integrand passed as `k(r) = r·h`.
pub fn cone_boundary_laplace(a: f64, rho: f64, rel_tol: f64, k: impl Fn(f64) -> f64) -> QuadResult {
    integrate_to_infinity(
        |r| {
            let angle = damped_angle_integral(a, rho, r);
            if angle == 0.0 {
                0.0
            } else {
                angle * k(r)
            }
        },
        0.0,
        QuadOptions::rel(rel_tol),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct M111Quadrature {
    pub value: f64,
    pub closed_form: f64,
    pub rel_err: f64,
    pub converged: bool,
}

/// `∫_0^∞ e^{-sλ} m(1,1,1)(dλ)` by quadrature in `λ = u²`, which removes the
/// endpoint singularity; the integrand is `(e^{-su²+2u} + e^{-su²-2u})/√π`.
pub fn m111_laplace_quadrature(s: f64, rel_tol: f64) -> Result<M111Quadrature> {
    let closed_form = m111_laplace(s)?;
    let q = integrate_to_infinity(
        |u| ((-s * u * u + 2.0 * u).exp() + (-s * u * u - 2.0 * u).exp()) / PI.sqrt(),
        0.0,
        QuadOptions::rel(rel_tol),
    );
    Ok(M111Quadrature {
        value: q.value,
        closed_form,
        rel_err: (q.value / closed_form - 1.0).abs(),
        converged: q.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct M122Quadrature {
    pub singular: f64,
    pub absolutely_continuous: f64,
    pub total: f64,
    pub closed_form: f64,
    pub rel_err: f64,
    pub converged: bool,
}

/// Laplace transform of `m(1,2,2)` at `(a,b,c)` by quadrature of its
/// singular and absolutely continuous parts, against the closed form.
pub fn m122_laplace_quadrature(a: f64, b: f64, c: f64, rel_tol: f64) -> Result<M122Quadrature> {
    let closed_form = m122_laplace(a, b, c)?;
    let rho = b.hypot(c);
    // r·g(2r) = cosh(2√(2r))/π
    let sing = cone_boundary_laplace(a, rho, rel_tol, |r| (2.0 * (2.0 * r).sqrt()).cosh() / PI);
    let ac = cone_radial_laplace(a, rho, rel_tol, |x, r| r * ac_series(x, (x - r) * (x + r)));
    let total = sing.value + ac.value;
    Ok(M122Quadrature {
        singular: sing.value,
        absolutely_continuous: ac.value,
        total,
        closed_form,
        rel_err: (total / closed_form - 1.0).abs(),
        converged: sing.converged && ac.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{density_fd, TruncationPolicy};
    use crate::numeric::quad::integrate;
    use crate::symcore::phi2;
    use std::f64::consts::SQRT_2;

    fn ln_pow(base: f64, e: usize) -> f64 {
        if e == 0 {
            0.0
        } else {
            e as f64 * base.ln()
        }
    }

    /// The same double series regrouped by total degree `n = m + 2k + 2`.
    fn ac_by_degree(x: f64, q: f64) -> f64 {
        let mut total = 0.0;
        let mut quiet = 0;
        for n in 2usize.. {
            let mut block = 0.0;
            for k2 in 1..=n / 2 {
                let m = n - 2 * k2;
                let ln_rest = ln_pow(2.0 * x, m)
                    - ln_gamma(m as f64 + 1.0)
                    - ln_gamma(k2 as f64)
                    - ln_gamma(k2 as f64 + 1.0);
                block += (ln_pow(q, k2 - 1) + ln_rest).exp();
            }
            block *= (-ln_gamma(n as f64 + 0.5)).exp();
            total += block;
            if n as f64 > 4.0 * x + 10.0 && block < 1e-17 * total {
                quiet += 1;
                if quiet == 3 {
                    break;
                }
            } else {
                quiet = 0;
            }
        }
        2.0 / PI.sqrt() * total
    }

    #[test]
    fn singular_density_examples() {
        let v = m122_singular_density(0.5, 0.0).unwrap();
        assert!((v - 2.0 / PI * 2f64.cosh()).abs() < 1e-14);
        let a = m122_singular_density(0.3, 0.4).unwrap();
        let b = m122_singular_density(0.5, 0.0).unwrap();
        let c = m122_singular_density(0.0, -0.5).unwrap();
        assert!((a - b).abs() < 1e-14 && (b - c).abs() < 1e-14);
        assert!(m122_singular_density(0.0, 0.0).is_err());
    }

    #[test]
    fn singular_eigenvalue_pushforward() {
        // ∫_{2ρ<t} g(2ρ) dy dz = ∫_0^t cosh(2√λ) dλ
        let anti =
            |l: f64| l.sqrt() * (2.0 * l.sqrt()).sinh() - (2.0 * l.sqrt()).cosh() / 2.0 + 0.5;
        for &t in &[0.5, 2.0, 7.0] {
            let q = integrate(
                |rho| 2.0 * PI * rho * m122_singular_density(rho, 0.0).unwrap(),
                0.0,
                t / 2.0,
                QuadOptions::rel(1e-12),
            );
            assert!((q.value / anti(t) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn ac_density_two_summation_orders() {
        for &(x, y, z) in &[
            (1.0, 0.0, 0.0),
            (2.0, 0.5, -1.0),
            (0.3, 0.1, 0.2),
            (6.0, 3.0, 4.0),
            (1.0, 0.999_999, 0.0),
        ] {
            let p = ConePoint2::new(x, y, z);
            let a = m122_ac_density(p).unwrap();
            let b = ac_by_degree(x, p.quadratic());
            assert!((a / b - 1.0).abs() < 1e-12, "({x},{y},{z}): {a} vs {b}");
        }
    }

    #[test]
    fn ac_density_boundary_limit() {
        let x: f64 = 1.3;
        let lim: f64 = (0..80)
            .map(|m| {
                (m as f64 * (2.0 * x).ln() - ln_gamma(m as f64 + 1.0) - ln_gamma(m as f64 + 2.5))
                    .exp()
            })
            .sum::<f64>()
            * 2.0
            / PI.sqrt();
        let near = m122_ac_density(ConePoint2::new(x, x - 1e-10, 0.0)).unwrap();
        assert!((near / lim - 1.0).abs() < 1e-8);
        assert!(m122_ac_density(ConePoint2::new(1.0, 1.0, 0.0)).is_err());
        assert!(m122_ac_density(ConePoint2::new(1.0, 0.8, 0.8)).is_err());
    }

    #[test]
    fn ac_density_matches_matrix_series() {
        // dt (isometric) = 2√2 dx dy dz on phi2, so f = 2√2 f_2.
        let tp = TruncationPolicy::default();
        for &(x, y, z) in &[
            (1.0, 0.0, 0.0),
            (2.0, 0.5, -1.0),
            (0.3, 0.1, 0.2),
            (4.0, 1.0, 2.0),
        ] {
            let p = ConePoint2::new(x, y, z);
            let f = m122_ac_density(p).unwrap();
            let f2 = density_fd(&phi2(p), &tp).unwrap().value;
            assert!(
                (f / (2.0 * SQRT_2 * f2) - 1.0).abs() < 1e-9,
                "({x},{y},{z})"
            );
        }
        let f0 = ac_by_degree(0.0, 0.0);
        assert!((f0 / (8.0 / (3.0 * PI)) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn m111_examples() {
        assert!((m111_density(1.0).unwrap() - 2f64.cosh() / PI.sqrt()).abs() < 1e-15);
        let small = 1e-12;
        assert!((m111_density(small).unwrap() * (PI * small).sqrt() - 1.0).abs() < 1e-5);
        assert!(m111_density(0.0).is_err() && m111_density(-1.0).is_err());
        // λ = u² removes the endpoint singularity
        for &s in &[1.0f64, 2.5] {
            // 2u·e^{-su²}·cosh(2u)/(√π u), with the exponentials combined
            let u = 0.7;
            let direct = 2.0 * u * (-s * u * u).exp() * m111_density(u * u).unwrap();
            assert!(
                (direct
                    - ((-s * u * u + 2.0 * u).exp() + (-s * u * u - 2.0 * u).exp()) / PI.sqrt())
                .abs()
                    < 1e-14
            );
            let q = m111_laplace_quadrature(s, 1e-12).unwrap();
            assert!(q.converged && q.rel_err < 1e-8, "{q:?}");
        }
        assert!((m111_laplace(1.0).unwrap() - 1f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn laplace_quadrature_round_trip() {
        let r = m122_laplace_quadrature(3.0, 1.0, 0.0, 1e-8).unwrap();
        assert!(r.converged);
        assert!(r.rel_err < 1e-6, "{r:?}");
        let r = m122_laplace_quadrature(2.0, 0.3, -0.4, 1e-8).unwrap();
        assert!(r.rel_err < 1e-6, "{r:?}");
        assert!(m122_laplace_quadrature(1.0, 1.0, 0.5, 1e-8).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let v = m122_laplace(3.0, 1.0, 0.0).unwrap();
        assert!((v - 8f64.powf(-0.5) * 0.75f64.exp()).abs() < 1e-15);
    }
}
