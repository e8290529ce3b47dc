//! Reference tetrahedron K³ with vertices v0(0,0,0), v1(1,0,0), v2(0,1,0), v3(0,0,1).
//!
//! Barycentric coordinates, edge/face bookkeeping, orthogonal polynomials and
//! collapsed-coordinate quadrature.

mod jacobi;
mod quadrature;

pub(crate) use jacobi::legendre_vg;
pub use jacobi::{jacobi, jacobi_deriv, legendre, scaled_jacobi, ValGrad};
pub use quadrature::{gauss_jacobi, quad_rule, QuadratureRule};

use crate::error::{Error, Result};
use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

/// Volume of the reference tetrahedron.
pub const REF_VOLUME: f64 = 1.0 / 6.0;

/// Reference vertex coordinates.
pub const VERTICES: [[f64; 3]; 4] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// A point (ξ, η, ζ) in reference coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefPoint {
    pub xi: f64,
    pub eta: f64,
    pub zeta: f64,
}

impl RefPoint {
    pub const fn new(xi: f64, eta: f64, zeta: f64) -> Self {
        Self { xi, eta, zeta }
    }

    pub fn centroid() -> Self {
        Self::new(0.25, 0.25, 0.25)
    }

    pub fn vertex(i: usize) -> Self {
        let v = VERTICES[i];
        Self::new(v[0], v[1], v[2])
    }

    /// Point with the given barycentric coordinates (λ0 is implied).
    pub fn from_barycentric(l: [f64; 4]) -> Self {
        Self::new(l[1], l[2], l[3])
    }

    pub fn to_vec(self) -> Vec3 {
        Vec3::new(self.xi, self.eta, self.zeta)
    }

    pub fn from_vec(v: &Vec3) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    /// Whether the point lies in the closed simplex up to `tol`.
    pub fn is_inside(&self, tol: f64) -> bool {
        barycentric(*self).iter().all(|&l| l >= -tol)
    }
}

/// (λ0, λ1, λ2, λ3) = (1−ξ−η−ζ, ξ, η, ζ).
pub fn barycentric(p: RefPoint) -> [f64; 4] {
    [1.0 - p.xi - p.eta - p.zeta, p.xi, p.eta, p.zeta]
}

/// Constant gradients of the barycentric coordinates.
pub fn barycentric_gradients() -> [Vec3; 4] {
    [Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0)]
}

/// Barycentric coordinates carrying their (constant) gradients.
pub(crate) fn barycentric_vg(p: RefPoint) -> [ValGrad; 4] {
    let l = barycentric(p);
    let g = barycentric_gradients();
    [ValGrad::new(l[0], g[0]), ValGrad::new(l[1], g[1]), ValGrad::new(l[2], g[2]), ValGrad::new(l[3], g[3])]
}

/// Edge `[j1, j2]` with `j1 < j2`, numbered `j = j1 + j2 + sign(j1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeId {
    pub j1: usize,
    pub j2: usize,
}

impl EdgeId {
    /// Index in 1..=6.
    pub fn index(&self) -> usize {
        self.j1 + self.j2 + usize::from(self.j1 > 0)
    }

    /// Directed tangent v_{j2} − v_{j1}.
    pub fn tangent(&self) -> Vec3 {
        let a = VERTICES[self.j1];
        let b = VERTICES[self.j2];
        Vec3::new(b[0] - a[0], b[1] - a[1], b[2] - a[2])
    }

    /// All six edges ordered by their index j.
    pub fn all() -> [EdgeId; 6] {
        let mut out = [EdgeId { j1: 0, j2: 1 }; 6];
        for j1 in 0..4 {
            for j2 in j1 + 1..4 {
                let e = EdgeId { j1, j2 };
                out[e.index() - 1] = e;
            }
        }
        out
    }
}

/// Builds the edge `[j1, j2]`.
pub fn edge_index(j1: usize, j2: usize) -> Result<EdgeId> {
    if j1 >= j2 || j2 > 3 {
        return Err(Error::InvalidArgument(format!("edge requires 0 <= j1 < j2 <= 3, got ({j1}, {j2})")));
    }
    Ok(EdgeId { j1, j2 })
}

/// γ = λ_{j2} − λ_{j1}.
pub fn edge_gamma(e: EdgeId, p: RefPoint) -> f64 {
    let l = barycentric(p);
    l[e.j2] - l[e.j1]
}

/// Face opposite vertex `j1`, with remaining vertices sorted `j2 < j3 < j4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FaceId {
    pub j1: usize,
    pub verts: [usize; 3],
}

impl FaceId {
    pub fn opposite(j1: usize) -> Self {
        assert!(j1 < 4, "face index out of range");
        let mut verts = [0; 3];
        let mut k = 0;
        for v in 0..4 {
            if v != j1 {
                verts[k] = v;
                k += 1;
            }
        }
        Self { j1, verts }
    }

    pub fn all() -> [FaceId; 4] {
        [0, 1, 2, 3].map(FaceId::opposite)
    }

    /// Unit outward normal of the face on K³.
    pub fn outward_normal(&self) -> Vec3 {
        -barycentric_gradients()[self.j1].normalize()
    }

    /// Map (s, t) with s, t ≥ 0, s + t ≤ 1 onto the face.
    pub fn point(&self, s: f64, t: f64) -> RefPoint {
        let mut l = [0.0; 4];
        l[self.verts[0]] = 1.0 - s - t;
        l[self.verts[1]] = s;
        l[self.verts[2]] = t;
        RefPoint::from_barycentric(l)
    }
}
