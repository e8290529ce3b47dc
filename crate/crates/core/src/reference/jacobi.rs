use super::Vec3;
use crate::error::{Error, Result};
use std::ops::{Add, Mul, Neg, Sub};

/// A scalar field value together with its gradient at one point.
///
/// Arithmetic applies the sum and product rules, so polynomial expressions in
/// barycentric coordinates carry exact derivatives alongside their values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValGrad {
    pub v: f64,
    pub g: Vec3,
}

impl ValGrad {
    pub fn new(v: f64, g: Vec3) -> Self {
        Self { v, g }
    }

    pub fn constant(v: f64) -> Self {
        Self { v, g: Vec3::zeros() }
    }

    pub fn scale(self, s: f64) -> Self {
        Self { v: self.v * s, g: self.g * s }
    }

    pub fn powi(self, n: usize) -> Self {
        let mut acc = Self::constant(1.0);
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }
}

impl Add for ValGrad {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { v: self.v + o.v, g: self.g + o.g }
    }
}

impl Sub for ValGrad {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { v: self.v - o.v, g: self.g - o.g }
    }
}

impl Neg for ValGrad {
    type Output = Self;
    fn neg(self) -> Self {
        Self { v: -self.v, g: -self.g }
    }
}

impl Mul for ValGrad {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self { v: self.v * o.v, g: self.g * o.v + o.g * self.v }
    }
}

/// Scaled Jacobi polynomial `s^n P_n^{(a,b)}(2x/s − 1)`.
///
/// The result is a polynomial in `(x, s)`; the recurrence never divides by `s`,
/// so the collapsed-coordinate singularity at `s = 0` is harmless.
pub fn scaled_jacobi(n: usize, a: f64, b: f64, x: ValGrad, s: ValGrad) -> ValGrad {
    let y = x.scale(2.0) - s; // s^1 * (2x/s - 1)
    let mut q0 = ValGrad::constant(1.0);
    if n == 0 {
        return q0;
    }
    let mut q1 = (y.scale(a + b + 2.0) + s.scale(a - b)).scale(0.5);
    let s2 = s * s;
    for k in 2..=n {
        let k = k as f64;
        let c = 2.0 * k + a + b;
        let denom = 2.0 * k * (k + a + b) * (c - 2.0);
        let lin = (y.scale(c * (c - 2.0)) + s.scale(a * a - b * b)).scale(c - 1.0);
        let q2 = (lin * q1 - (s2 * q0).scale(2.0 * (k + a - 1.0) * (k + b - 1.0) * c)).scale(1.0 / denom);
        q0 = q1;
        q1 = q2;
    }
    q1
}

/// Jacobi polynomial P_n^{(α,β)}(x) by the three-term recurrence.
pub fn jacobi(n: i32, alpha: f64, beta: f64, x: f64) -> Result<f64> {
    if n < 0 {
        return Err(Error::InvalidArgument(format!("Jacobi degree must be >= 0, got {n}")));
    }
    let xh = ValGrad::constant(0.5 * (x + 1.0));
    Ok(scaled_jacobi(n as usize, alpha, beta, xh, ValGrad::constant(1.0)).v)
}

/// d/dx P_n^{(α,β)}(x) = (n+α+β+1)/2 · P_{n−1}^{(α+1,β+1)}(x).
pub fn jacobi_deriv(n: i32, alpha: f64, beta: f64, x: f64) -> Result<f64> {
    if n < 0 {
        return Err(Error::InvalidArgument(format!("Jacobi degree must be >= 0, got {n}")));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    Ok(0.5 * (nf + alpha + beta + 1.0) * jacobi(n - 1, alpha + 1.0, beta + 1.0, x)?)
}

/// Legendre polynomial ℓ_i = P_i^{(0,0)}, with the convention ℓ_{−1} ≡ 1.
pub fn legendre(i: i32, x: f64) -> Result<f64> {
    match i {
        -1 => Ok(1.0),
        i if i < -1 => Err(Error::InvalidArgument(format!("Legendre index must be >= -1, got {i}"))),
        i => jacobi(i, 0.0, 0.0, x),
    }
}

/// ℓ_i(γ) with gradient, for i ≥ 0.
pub(crate) fn legendre_vg(i: usize, gamma: ValGrad) -> ValGrad {
    let x = (gamma + ValGrad::constant(1.0)).scale(0.5);
    scaled_jacobi(i, 0.0, 0.0, x, ValGrad::constant(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::gauss_jacobi;
    use approx::assert_abs_diff_eq;

    fn binom(n: f64, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, j| acc * (n - j as f64) / (j as f64 + 1.0))
    }

    #[test]
    fn small_cases() {
        assert_eq!(jacobi(0, 3.0, 2.0, 0.3).unwrap(), 1.0);
        assert_abs_diff_eq!(jacobi(2, 0.0, 0.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(jacobi(1, 2.0, 2.0, 0.0).unwrap(), 0.0, epsilon = 1e-15);
        assert!(jacobi(-1, 0.0, 0.0, 0.0).is_err());
        // P_2 Legendre closed form
        let x = 0.37;
        assert_abs_diff_eq!(jacobi(2, 0.0, 0.0, x).unwrap(), 1.5 * x * x - 0.5, epsilon = 1e-15);
    }

    #[test]
    fn endpoint_identity() {
        for n in 0..8 {
            for &(a, b) in &[(0.0, 0.0), (1.0, 2.0), (5.0, 2.0), (2.0, 8.0)] {
                let v = jacobi(n, a, b, 1.0).unwrap();
                assert_abs_diff_eq!(v, binom(n as f64 + a, n as usize), epsilon = 1e-10 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn legendre_convention() {
        assert_eq!(legendre(-1, 0.3).unwrap(), 1.0);
        assert_eq!(legendre(0, 0.3).unwrap(), 1.0);
        assert_abs_diff_eq!(legendre(1, 0.5).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(legendre(2, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(legendre(-2, 0.0).is_err());
    }

    #[test]
    fn weighted_orthogonality() {
        let params = [0.0, 1.0, 2.0, 3.0, 5.0, 8.0];
        for &a in &params {
            for &b in &params {
                let (x, w) = gauss_jacobi(10, a, b);
                for m in 0..=6 {
                    for n in 0..m {
                        let s: f64 = x
                            .iter()
                            .zip(&w)
                            .map(|(&xi, &wi)| wi * jacobi(m, a, b, xi).unwrap() * jacobi(n, a, b, xi).unwrap())
                            .sum();
                        assert!(s.abs() < 1e-12 * 2f64.powf(a + b + 1.0), "a={a} b={b} m={m} n={n} s={s}");
                    }
                }
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let h = 1e-6;
        for n in 0..7 {
            for &(a, b) in &[(0.0, 0.0), (1.0, 2.0), (3.0, 2.0), (0.0, 2.0)] {
                for k in 0..=18 {
                    let x = -0.9 + 0.1 * k as f64;
                    let fd = (jacobi(n, a, b, x + h).unwrap() - jacobi(n, a, b, x - h).unwrap()) / (2.0 * h);
                    assert_abs_diff_eq!(jacobi_deriv(n, a, b, x).unwrap(), fd, epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn scaled_form_matches_unscaled() {
        let (a, b) = (5.0, 2.0);
        let s = 0.6;
        let x = 0.21;
        for n in 0..6 {
            let q = scaled_jacobi(n, a, b, ValGrad::constant(x), ValGrad::constant(s)).v;
            let p = jacobi(n as i32, a, b, 2.0 * x / s - 1.0).unwrap() * s.powi(n as i32);
            assert_abs_diff_eq!(q, p, epsilon = 1e-13);
        }
    }
}
