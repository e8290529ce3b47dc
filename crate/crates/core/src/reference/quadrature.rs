use super::{jacobi, jacobi_deriv, RefPoint};
use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

/// Quadrature rule on the reference tetrahedron.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<RefPoint>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(RefPoint) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

/// Gauss–Jacobi nodes and weights for the weight (1−x)^α (1+x)^β on [−1, 1].
///
/// Golub–Welsch for the initial nodes, then one Newton polish and the closed
/// form for the weights.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let (a, b) = (alpha, beta);
    let mut jm = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let c = 2.0 * kf + a + b;
        jm[(k, k)] = if k == 0 { (b - a) / (a + b + 2.0) } else { (b * b - a * a) / (c * (c + 2.0)) };
        if k + 1 < n {
            let m = kf + 1.0;
            let c = 2.0 * m + a + b;
            let off = (4.0 * m * (m + a) * (m + b) * (m + a + b) / (c * c * (c + 1.0) * (c - 1.0))).sqrt();
            jm[(k, k + 1)] = off;
            jm[(k + 1, k)] = off;
        }
    }
    let eig = SymmetricEigen::new(jm);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let ni = n as i32;
    let nf = n as f64;
    let log_c = (a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(nf + a + 1.0) + ln_gamma(nf + b + 1.0)
        - ln_gamma(nf + a + b + 1.0)
        - ln_gamma(nf + 1.0);
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..2 {
            let p = jacobi(ni, a, b, *x).unwrap();
            let dp = jacobi_deriv(ni, a, b, *x).unwrap();
            *x -= p / dp;
        }
        let dp = jacobi_deriv(ni, a, b, *x).unwrap();
        weights.push(log_c.exp() / ((1.0 - *x * *x) * dp * dp));
    }
    (nodes, weights)
}

/// Collapsed-coordinate rule exact for total degree ≤ `degree` on K³.
///
/// ξ = u, η = (1−u)v, ζ = (1−u)(1−v)w with Jacobian (1−u)²(1−v); the u and v
/// directions absorb the Jacobian into Gauss–Jacobi weights.
pub fn quad_rule(degree: usize) -> QuadratureRule {
    let q = (degree + 3) / 2;
    let (xu, wu) = gauss_jacobi(q, 2.0, 0.0);
    let (xv, wv) = gauss_jacobi(q, 1.0, 0.0);
    let (xw, ww) = gauss_jacobi(q, 0.0, 0.0);
    let mut points = Vec::with_capacity(q * q * q);
    let mut weights = Vec::with_capacity(q * q * q);
    for (i, &a) in xu.iter().enumerate() {
        let u = 0.5 * (1.0 + a);
        for (j, &b) in xv.iter().enumerate() {
            let v = 0.5 * (1.0 + b);
            for (k, &c) in xw.iter().enumerate() {
                let w = 0.5 * (1.0 + c);
                points.push(RefPoint::new(u, (1.0 - u) * v, (1.0 - u) * (1.0 - v) * w));
                weights.push(wu[i] * wv[j] * ww[k] / 64.0);
            }
        }
    }
    QuadratureRule { points, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::barycentric;
    use approx::assert_relative_eq;

    fn fact(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// ∫_{K³} λ0^a λ1^b λ2^c λ3^d = a! b! c! d! / (a+b+c+d+3)!
    fn simplex_integral(e: [usize; 4]) -> f64 {
        e.iter().map(|&k| fact(k)).product::<f64>() / fact(e.iter().sum::<usize>() + 3)
    }

    #[test]
    fn volume_and_named_integrals() {
        for d in 0..12 {
            let r = quad_rule(d);
            assert_relative_eq!(r.weights.iter().sum::<f64>(), 1.0 / 6.0, epsilon = 1e-14);
            assert!(r.points.iter().all(|p| p.is_inside(0.0) && barycentric(*p).iter().all(|&l| l > 0.0)));
        }
        let r = quad_rule(4);
        let v = r.integrate(|p| barycentric(p).iter().product());
        assert_relative_eq!(v, 1.0 / 5040.0, max_relative = 1e-13);
        let r = quad_rule(2);
        assert_relative_eq!(r.integrate(|p| p.xi * p.xi), 1.0 / 60.0, max_relative = 1e-13);
    }

    #[test]
    fn exact_for_all_monomials_up_to_degree() {
        for d in 0..=12 {
            let r = quad_rule(d);
            for a in 0..=d {
                for b in 0..=d - a {
                    for c in 0..=d - a - b {
                        let q = r.integrate(|p| p.xi.powi(a as i32) * p.eta.powi(b as i32) * p.zeta.powi(c as i32));
                        let exact = simplex_integral([0, a, b, c]);
                        assert_relative_eq!(q, exact, max_relative = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn gauss_legendre_reference_values() {
        let (x, w) = gauss_jacobi(2, 0.0, 0.0);
        assert_relative_eq!(x[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-14);
    }
}
