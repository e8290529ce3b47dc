//! Self-checks of the reference basis, reported with their measured residuals.

use crate::basis::{gram_matrix, total_count, Family, OrientedEdge, ShapeDescriptor, ShapeSet};
use crate::error::Result;
use crate::reference::{quad_rule, EdgeId, FaceId, RefPoint, Vec3};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;

/// One named check: `measured` is compared against `limit`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub limit: f64,
    /// True when `measured` must stay at or above `limit` instead of below it.
    pub lower_bound: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Check { name: name.into(), measured, limit, lower_bound: false }
    }

    pub fn above(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Check { name: name.into(), measured, limit, lower_bound: true }
    }

    pub fn passed(&self) -> bool {
        if self.lower_bound {
            self.measured >= self.limit
        } else {
            self.measured <= self.limit
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.lower_bound { ">=" } else { "<=" };
        write!(
            f,
            "{:<24} {:>11.3e} {op} {:<8.1e} {}",
            self.name,
            self.measured,
            self.limit,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

fn random_face_point(rng: &mut impl Rng, face: FaceId) -> RefPoint {
    let (mut s, mut t): (f64, f64) = (rng.random(), rng.random());
    if s + t > 1.0 {
        s = 1.0 - s;
        t = 1.0 - t;
    }
    face.point(s, t)
}

fn random_edge_point(rng: &mut impl Rng, e: EdgeId) -> RefPoint {
    let t: f64 = rng.random();
    let mut l = [0.0; 4];
    l[e.j1] = 1.0 - t;
    l[e.j2] = t;
    RefPoint::from_barycentric(l)
}

fn random_interior_point(rng: &mut impl Rng) -> RefPoint {
    loop {
        let p = RefPoint::new(rng.random(), rng.random(), rng.random());
        if p.xi + p.eta + p.zeta < 0.97 && p.xi > 0.01 && p.eta > 0.01 && p.zeta > 0.01 {
            return p;
        }
    }
}

fn identity_deviation(g: &DMatrix<f64>) -> f64 {
    let n = g.nrows();
    if n == 0 {
        return 0.0;
    }
    (g - DMatrix::<f64>::identity(n, n)).abs().max()
}

fn min_eigenvalue(g: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(g).eigenvalues.min()
}

/// Shape counts per family and in total against the closed-form counts.
pub fn count_check(set: &ShapeSet) -> Check {
    let p = set.p;
    let counts = set.family_counts();
    let mut mismatch: usize = Family::ALL.iter().zip(counts).map(|(f, c)| f.count(p).abs_diff(c)).sum();
    mismatch += set.len().abs_diff(total_count(p));
    Check::below("table counts", mismatch as f64, 0.0)
}

fn normal_trace(set: &ShapeSet, rng: &mut impl Rng) -> (f64, f64) {
    let (mut own, mut interior) = (0.0f64, 0.0f64);
    for (i, shape) in set.shapes.iter().enumerate() {
        let keep = shape.trace_face().map(|f| f.j1);
        for face in FaceId::all() {
            if Some(face.j1) == keep {
                continue;
            }
            let n = face.outward_normal();
            for _ in 0..25 {
                let r = n.dot(&set.eval(i, random_face_point(rng, face)).0).abs();
                if shape.family().is_interior() {
                    interior = interior.max(r);
                } else {
                    own = own.max(r);
                }
            }
        }
    }
    (own, interior)
}

fn tangential_locality(set: &ShapeSet, rng: &mut impl Rng) -> f64 {
    let mut worst = 0.0f64;
    for (i, shape) in set.shapes.iter().enumerate() {
        match *shape {
            ShapeDescriptor::EdgeInterior { edge, .. } => {
                for e in EdgeId::all().into_iter().filter(|e| *e != edge) {
                    for _ in 0..10 {
                        let v = set.eval(i, random_edge_point(rng, e)).0;
                        worst = worst.max(e.tangent().dot(&v).abs());
                    }
                }
            }
            ShapeDescriptor::FaceInterior { face, .. } => {
                for g in FaceId::all().into_iter().filter(|g| *g != face) {
                    let n = g.outward_normal();
                    for _ in 0..25 {
                        let v = set.eval(i, random_face_point(rng, g)).0;
                        worst = worst.max(n.cross(&v).norm());
                    }
                }
                for e in EdgeId::all() {
                    for _ in 0..10 {
                        let v = set.eval(i, random_edge_point(rng, e)).0;
                        worst = worst.max(e.tangent().dot(&v).abs());
                    }
                }
            }
            _ => {}
        }
    }
    worst
}

fn orthonormality(set: &ShapeSet) -> (f64, f64) {
    let unit = (0..set.len()).map(|i| (gram_matrix(set, |j, _| j == i).1[(0, 0)] - 1.0).abs()).fold(0.0, f64::max);
    let mut blocks = 0.0f64;
    let mut take = |g: DMatrix<f64>| blocks = blocks.max(identity_deviation(&g));
    for face in FaceId::all() {
        take(gram_matrix(set, |_, s| matches!(s, ShapeDescriptor::FaceBubble { face: f, .. } if *f == face)).1);
        for variant in [1, 2] {
            take(
                gram_matrix(set, |_, s| {
                    matches!(s, ShapeDescriptor::FaceInterior { face: f, variant: v, .. } if *f == face && *v == variant)
                })
                .1,
            );
        }
    }
    for edge in EdgeId::all() {
        take(gram_matrix(set, |_, s| matches!(s, ShapeDescriptor::EdgeInterior { edge: e, .. } if *e == edge)).1);
    }
    take(gram_matrix(set, |_, s| s.family() == Family::InteriorBubble).1);
    (unit, blocks)
}

fn independence(set: &ShapeSet) -> (f64, f64) {
    let full = min_eigenvalue(gram_matrix(set, |_, _| true).1);
    let mut edge_face = f64::INFINITY;
    for face in FaceId::all() {
        for edge in OrientedEdge::of_face(face) {
            let (_, g) = gram_matrix(
                set,
                |_, s| matches!(s, ShapeDescriptor::EdgeFace { face: f, edge: e, .. } if *f == face && *e == edge),
            );
            edge_face = edge_face.min(min_eigenvalue(g));
        }
    }
    (full, edge_face)
}

/// Relative error of recovering random vector polynomials of degree p from their projection.
fn completeness(set: &ShapeSet, rng: &mut impl Rng) -> f64 {
    let p = set.p as i32;
    let rule = quad_rule(2 * set.p);
    let Some(chol) = gram_matrix(set, |_, _| true).1.cholesky() else {
        return f64::INFINITY;
    };
    let monomials: Vec<[i32; 3]> =
        (0..=p).flat_map(|a| (0..=p - a).flat_map(move |b| (0..=p - a - b).map(move |c| [a, b, c]))).collect();
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let coef: Vec<Vec3> = monomials
            .iter()
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let f = |x: RefPoint| -> Vec3 {
            monomials.iter().zip(&coef).map(|(m, c)| c * (x.xi.powi(m[0]) * x.eta.powi(m[1]) * x.zeta.powi(m[2]))).sum()
        };
        let mut rhs = DVector::zeros(set.len());
        for (pt, w) in rule.points.iter().zip(&rule.weights) {
            let fv = f(*pt);
            for a in 0..set.len() {
                rhs[a] += w * set.eval(a, *pt).0.dot(&fv);
            }
        }
        let c = chol.solve(&rhs);
        for _ in 0..5 {
            let x = random_interior_point(rng);
            let v: Vec3 = (0..set.len()).map(|a| set.eval(a, x).0 * c[a]).sum();
            let fx = f(x);
            worst = worst.max((v - fx).norm() / fx.norm().max(1.0));
        }
    }
    worst
}

fn divergence_fd(set: &ShapeSet, rng: &mut impl Rng) -> f64 {
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let x = random_interior_point(rng);
        for a in 0..set.len() {
            let mut fd = 0.0;
            for k in 0..3 {
                let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
                xp[k] += h;
                xm[k] -= h;
                fd +=
                    (set.eval(a, RefPoint::from_vec(&xp)).0[k] - set.eval(a, RefPoint::from_vec(&xm)).0[k]) / (2.0 * h);
            }
            worst = worst.max((set.eval(a, x).1 - fd).abs());
        }
    }
    worst
}

/// All basis checks for degree `p`; random sample points come from `seed`.
pub fn basis_checks(p: usize, seed: u64) -> Result<Vec<Check>> {
    let set = ShapeSet::new(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (own, interior) = normal_trace(&set, &mut rng);
    let tangential = tangential_locality(&set, &mut rng);
    let (unit, blocks) = orthonormality(&set);
    let (full, edge_face) = independence(&set);
    let complete = completeness(&set, &mut rng);
    let div = divergence_fd(&set, &mut rng);
    Ok(vec![
        count_check(&set),
        Check::below("face normal trace", own, 1e-12),
        Check::below("interior normal trace", interior, 1e-12),
        Check::below("tangential locality", tangential, 1e-12),
        Check::below("unit norms", unit, 1e-12),
        Check::below("family gram blocks", blocks, 1e-10),
        Check::above("full gram min eig", full, 1e-10),
        Check::above("edge-face gram min eig", edge_face, 1e-10),
        Check::below("completeness", complete, 1e-9),
        Check::below("div vs finite diff", div, 1e-5),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass_for_low_degrees() {
        for p in 1..=3 {
            for c in basis_checks(p, 7).unwrap() {
                assert!(c.passed(), "p={p}: {c}");
            }
        }
    }

    #[test]
    fn reports_are_seed_deterministic() {
        assert_eq!(basis_checks(2, 11).unwrap(), basis_checks(2, 11).unwrap());
    }

    #[test]
    fn degree_zero_is_rejected() {
        assert!(basis_checks(0, 0).is_err());
    }

    #[test]
    fn bounds_compare_in_the_right_direction() {
        assert!(Check::below("a", 1.0, 2.0).passed());
        assert!(!Check::below("a", 3.0, 2.0).passed());
        assert!(Check::above("a", 3.0, 2.0).passed());
        assert!(Check::below("a", 0.0, 0.0).to_string().ends_with("PASS"));
    }
}
