//! Hierarchical BDM_p shape functions on the reference tetrahedron.
//!
//! Five families, in the frozen order used for every coefficient vector:
//!
//! 1. edge-based face functions (per face, per edge, index `i = 0..p`),
//! 2. face bubbles (per face, `m + n <= p − 3`),
//! 3. edge-based interior functions (per edge, `i = 0..p−1`),
//! 4. face-based interior functions (per face, `m + n <= p − 3`, two tangents),
//! 5. interior bubbles (`l + m + n <= p − 4`, three axes).
//!
//! The first two families carry normal trace on exactly one face; the last
//! three have zero normal trace on the whole boundary.
//!
//! Within a face `[a, b, c]` (`a < b < c`) the edges are walked cyclically as
//! `(a→b, apex c)`, `(b→c, apex a)`, `(c→a, apex b)`, so that each face vertex
//! leads exactly one edge and the lowest-order functions
//! `λ_{k1} ∇λ_{k2} × ∇λ_{k3}` are independent.

use crate::error::{Error, Result};
use crate::reference::{
    barycentric_gradients, barycentric_vg, quad_rule, scaled_jacobi, EdgeId, FaceId, RefPoint, ValGrad, Vec3, VERTICES,
};
use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    EdgeFace,
    FaceBubble,
    EdgeInterior,
    FaceInterior,
    InteriorBubble,
}

impl Family {
    pub const ALL: [Family; 5] =
        [Family::EdgeFace, Family::FaceBubble, Family::EdgeInterior, Family::FaceInterior, Family::InteriorBubble];

    pub fn is_interior(self) -> bool {
        matches!(self, Family::EdgeInterior | Family::FaceInterior | Family::InteriorBubble)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::EdgeFace => "edge-face",
            Family::FaceBubble => "face-bubble",
            Family::EdgeInterior => "edge-interior",
            Family::FaceInterior => "face-interior",
            Family::InteriorBubble => "interior-bubble",
        }
    }

    /// Number of shapes of this family at degree `p`.
    pub fn count(self, p: usize) -> usize {
        let p = p as i64;
        let c = match self {
            Family::EdgeFace => 12 * p,
            Family::FaceBubble => 2 * (p - 2) * (p - 1),
            Family::EdgeInterior => 6 * (p - 1),
            Family::FaceInterior => 4 * (p - 2) * (p - 1),
            Family::InteriorBubble => (p - 3) * (p - 2) * (p - 1) / 2,
        };
        if (self == Family::FaceBubble || self == Family::FaceInterior) && p < 2 {
            return 0;
        }
        if self == Family::InteriorBubble && p < 3 {
            return 0;
        }
        c.max(0) as usize
    }
}

/// dim (P_p)³ = (p+1)(p+2)(p+3)/2.
pub fn total_count(p: usize) -> usize {
    (p + 1) * (p + 2) * (p + 3) / 2
}

/// Number of interior shapes n_i = (p−1)(p+1)(p+2)/2.
pub fn interior_count(p: usize) -> usize {
    (p - 1) * (p + 1) * (p + 2) / 2
}

/// Degrees of freedom attached to one face: 3p edge-face plus the face bubbles.
pub fn face_dof_count(p: usize) -> usize {
    3 * p + Family::FaceBubble.count(p) / 4
}

/// dim P_k on a tetrahedron.
pub fn scalar_dim(k: usize) -> usize {
    (k + 1) * (k + 2) * (k + 3) / 6
}

/// Edge of a face walked in the cyclic direction, with the remaining face vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OrientedEdge {
    pub k1: usize,
    pub k2: usize,
    pub k3: usize,
}

impl OrientedEdge {
    pub fn of_face(face: FaceId) -> [OrientedEdge; 3] {
        let [a, b, c] = face.verts;
        [
            OrientedEdge { k1: a, k2: b, k3: c },
            OrientedEdge { k1: b, k2: c, k3: a },
            OrientedEdge { k1: c, k2: a, k3: b },
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeDescriptor {
    EdgeFace {
        face: FaceId,
        edge: OrientedEdge,
        i: usize,
    },
    FaceBubble {
        face: FaceId,
        m: usize,
        n: usize,
    },
    EdgeInterior {
        edge: EdgeId,
        i: usize,
    },
    /// `variant` 1 uses the tangent τ^{[j2,j3]}, variant 2 uses τ^{[j2,j4]}.
    FaceInterior {
        face: FaceId,
        variant: u8,
        m: usize,
        n: usize,
    },
    /// `axis` in 1..=3 selects the unit vector ê_axis.
    InteriorBubble {
        axis: usize,
        l: usize,
        m: usize,
        n: usize,
    },
}

fn unit_tangent(a: usize, b: usize) -> Vec3 {
    let (va, vb) = (VERTICES[a], VERTICES[b]);
    Vec3::new(vb[0] - va[0], vb[1] - va[1], vb[2] - va[2]).normalize()
}

/// Face polynomial L_{m,n} on the face vertices (j2, j3, j4).
fn face_poly(l: &[ValGrad; 4], verts: [usize; 3], m: usize, n: usize) -> ValGrad {
    let one = ValGrad::constant(1.0);
    let [j2, j3, j4] = verts;
    let s1 = one - l[j2];
    let s2 = one - l[j2] - l[j3];
    scaled_jacobi(m, 2.0 * n as f64 + 3.0, 2.0, l[j3], s1) * scaled_jacobi(n, 0.0, 2.0, l[j4], s2)
}

impl ShapeDescriptor {
    pub fn family(&self) -> Family {
        match self {
            ShapeDescriptor::EdgeFace { .. } => Family::EdgeFace,
            ShapeDescriptor::FaceBubble { .. } => Family::FaceBubble,
            ShapeDescriptor::EdgeInterior { .. } => Family::EdgeInterior,
            ShapeDescriptor::FaceInterior { .. } => Family::FaceInterior,
            ShapeDescriptor::InteriorBubble { .. } => Family::InteriorBubble,
        }
    }

    /// Face carrying the normal trace, for the face families.
    pub fn trace_face(&self) -> Option<FaceId> {
        match *self {
            ShapeDescriptor::EdgeFace { face, .. } | ShapeDescriptor::FaceBubble { face, .. } => Some(face),
            _ => None,
        }
    }

    /// Polynomial degree of the shape.
    pub fn degree(&self) -> usize {
        match *self {
            ShapeDescriptor::EdgeFace { i, .. } => i + 1,
            ShapeDescriptor::FaceBubble { m, n, .. } | ShapeDescriptor::FaceInterior { m, n, .. } => m + n + 3,
            ShapeDescriptor::EdgeInterior { i, .. } => i + 2,
            ShapeDescriptor::InteriorBubble { l, m, n, .. } => l + m + n + 4,
        }
    }

    /// Whether the descriptor belongs to the degree-`p` set.
    pub fn is_valid_for(&self, p: usize) -> bool {
        let pi = p as i64;
        match *self {
            ShapeDescriptor::EdgeFace { face, edge, i } => i < p && OrientedEdge::of_face(face).contains(&edge),
            ShapeDescriptor::FaceBubble { m, n, .. } => (m + n) as i64 <= pi - 3,
            ShapeDescriptor::EdgeInterior { edge, i } => edge.j1 < edge.j2 && edge.j2 < 4 && (i as i64) <= pi - 2,
            ShapeDescriptor::FaceInterior { variant, m, n, .. } => {
                (variant == 1 || variant == 2) && (m + n) as i64 <= pi - 3
            }
            ShapeDescriptor::InteriorBubble { axis, l, m, n } => {
                (1..=3).contains(&axis) && (l + m + n) as i64 <= pi - 4
            }
        }
    }

    /// Value and divergence of the unnormalized formula.
    pub fn eval_raw(&self, pt: RefPoint) -> (Vec3, f64) {
        let l = barycentric_vg(pt);
        let g = barycentric_gradients();
        // scalar times constant vector: value s·d, divergence ∇s·d
        let term = |s: ValGrad, d: Vec3| (d * s.v, s.g.dot(&d));
        match *self {
            ShapeDescriptor::EdgeFace { edge, i, .. } => {
                let OrientedEdge { k1, k2, k3 } = edge;
                let d0 = g[k2].cross(&g[k3]);
                let d1 = g[k3].cross(&g[k1]);
                let s0 = l[k1];
                let s1 = l[k1] * l[k2];
                match i {
                    0 => term(s0, d0),
                    1 => term(s1, d1),
                    _ => {
                        let gamma = l[k2] - l[k1];
                        let a = crate::reference::legendre_vg(i - 1, gamma) * s1;
                        let b = crate::reference::legendre_vg(i - 2, gamma) * s0;
                        let (va, da) = term(a, d1);
                        let (vb, db) = term(b, d0);
                        (va + vb, da + db)
                    }
                }
            }
            ShapeDescriptor::FaceBubble { face, m, n } => {
                let [j2, j3, j4] = face.verts;
                let d = g[j3].cross(&g[j4]).normalize();
                let s = l[j2] * l[j3] * l[j4] * face_poly(&l, face.verts, m, n);
                term(s, d)
            }
            ShapeDescriptor::EdgeInterior { edge, i } => {
                let (k1, k2) = (edge.j1, edge.j2);
                let one = ValGrad::constant(1.0);
                let s = l[k1] * l[k2] * scaled_jacobi(i, 1.0, 2.0, l[k2], one - l[k1]);
                term(s, unit_tangent(k1, k2))
            }
            ShapeDescriptor::FaceInterior { face, variant, m, n } => {
                let [j2, j3, j4] = face.verts;
                let d = if variant == 1 { unit_tangent(j2, j3) } else { unit_tangent(j2, j4) };
                let s = l[j2] * l[j3] * l[j4] * face_poly(&l, face.verts, m, n);
                term(s, d)
            }
            ShapeDescriptor::InteriorBubble { axis, l: ll, m, n } => {
                let one = ValGrad::constant(1.0);
                let mf = m as f64;
                let nf = n as f64;
                let poly = scaled_jacobi(ll, 2.0 * mf + 2.0 * nf + 8.0, 2.0, l[1], one)
                    * scaled_jacobi(m, 2.0 * nf + 5.0, 2.0, l[2], one - l[1])
                    * scaled_jacobi(n, 2.0, 2.0, l[3], one - l[1] - l[2]);
                let s = l[0] * l[1] * l[2] * l[3] * poly;
                let mut d = Vec3::zeros();
                d[axis - 1] = 1.0;
                term(s, d)
            }
        }
    }
}

/// Where a local shape's degree of freedom lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// `k`-th degree of freedom of local face `face` (opposite vertex index).
    Face { face: usize, k: usize },
    /// `k`-th private interior degree of freedom.
    Interior { k: usize },
}

/// The ordered degree-`p` basis with per-shape normalization scalars.
#[derive(Debug, Clone)]
pub struct ShapeSet {
    pub p: usize,
    pub shapes: Vec<ShapeDescriptor>,
    pub scales: Vec<f64>,
}

/// Enumerates the degree-`p` shapes in the frozen order, unnormalized.
pub fn enumerate_shapes(p: usize) -> Result<ShapeSet> {
    if p < 1 {
        return Err(Error::InvalidArgument(format!("polynomial degree must be >= 1, got {p}")));
    }
    let mut shapes = Vec::with_capacity(total_count(p));
    let faces = FaceId::all();
    for face in faces {
        for edge in OrientedEdge::of_face(face) {
            for i in 0..p {
                shapes.push(ShapeDescriptor::EdgeFace { face, edge, i });
            }
        }
    }
    let pairs: Vec<(usize, usize)> =
        if p >= 3 { (0..=p - 3).flat_map(|m| (0..=p - 3 - m).map(move |n| (m, n))).collect() } else { Vec::new() };
    for face in faces {
        for &(m, n) in &pairs {
            shapes.push(ShapeDescriptor::FaceBubble { face, m, n });
        }
    }
    for edge in EdgeId::all() {
        for i in 0..p - 1 {
            shapes.push(ShapeDescriptor::EdgeInterior { edge, i });
        }
    }
    for face in faces {
        for &(m, n) in &pairs {
            for variant in [1, 2] {
                shapes.push(ShapeDescriptor::FaceInterior { face, variant, m, n });
            }
        }
    }
    if p >= 4 {
        for l in 0..=p - 4 {
            for m in 0..=p - 4 - l {
                for n in 0..=p - 4 - l - m {
                    for axis in 1..=3 {
                        shapes.push(ShapeDescriptor::InteriorBubble { axis, l, m, n });
                    }
                }
            }
        }
    }
    let scales = vec![1.0; shapes.len()];
    Ok(ShapeSet { p, shapes, scales })
}

/// Scales every shape to unit L² norm on K³.
pub fn normalize(set: &ShapeSet) -> Result<ShapeSet> {
    let rule = quad_rule(2 * set.p);
    let mut scales = Vec::with_capacity(set.len());
    for (index, shape) in set.shapes.iter().enumerate() {
        let norm2 = rule.integrate(|pt| shape.eval_raw(pt).0.norm_squared());
        let norm = norm2.sqrt();
        if norm.is_nan() || norm <= 1e-12 {
            return Err(Error::DegenerateShape { index, norm });
        }
        scales.push(1.0 / norm);
    }
    Ok(ShapeSet { p: set.p, shapes: set.shapes.clone(), scales })
}

impl ShapeSet {
    /// Enumerated and normalized set of degree `p`.
    pub fn new(p: usize) -> Result<Self> {
        normalize(&enumerate_shapes(p)?)
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn family_counts(&self) -> [usize; 5] {
        let mut c = [0; 5];
        for s in &self.shapes {
            c[s.family() as usize] += 1;
        }
        c
    }

    /// Local indices of the shapes of one family.
    pub fn indices_of(&self, family: Family) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.shapes[i].family() == family).collect()
    }

    /// Local indices of all interior shapes, in order.
    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.shapes[i].family().is_interior()).collect()
    }

    pub fn index_of(&self, desc: &ShapeDescriptor) -> Result<usize> {
        self.shapes
            .iter()
            .position(|s| s == desc)
            .ok_or_else(|| Error::InvalidArgument(format!("{desc:?} is not in the degree-{} set", self.p)))
    }

    /// Normalized value and divergence of shape `idx`.
    pub fn eval(&self, idx: usize, pt: RefPoint) -> (Vec3, f64) {
        let (v, d) = self.shapes[idx].eval_raw(pt);
        (v * self.scales[idx], d * self.scales[idx])
    }

    /// Normalized value of an arbitrary valid descriptor.
    pub fn eval_shape(&self, desc: &ShapeDescriptor, pt: RefPoint) -> Result<Vec3> {
        Ok(self.eval(self.checked_index(desc)?, pt).0)
    }

    /// Normalized divergence of an arbitrary valid descriptor.
    pub fn eval_shape_div(&self, desc: &ShapeDescriptor, pt: RefPoint) -> Result<f64> {
        Ok(self.eval(self.checked_index(desc)?, pt).1)
    }

    fn checked_index(&self, desc: &ShapeDescriptor) -> Result<usize> {
        if !desc.is_valid_for(self.p) {
            return Err(Error::InvalidArgument(format!("{desc:?} is invalid for p = {}", self.p)));
        }
        self.index_of(desc)
    }

    /// Values and divergences of every shape at one point.
    pub fn eval_all(&self, pt: RefPoint, values: &mut [Vec3], divs: &mut [f64]) {
        for i in 0..self.len() {
            let (v, d) = self.eval(i, pt);
            values[i] = v;
            divs[i] = d;
        }
    }

    /// Placement of each local shape's degree of freedom.
    pub fn supports(&self) -> Vec<Support> {
        let fb_per_face = Family::FaceBubble.count(self.p) / 4;
        let mut interior = 0;
        let mut per_face_edge = [0usize; 4];
        let mut per_face_bubble = [0usize; 4];
        self.shapes
            .iter()
            .map(|s| match s {
                ShapeDescriptor::EdgeFace { face, .. } => {
                    let k = per_face_edge[face.j1];
                    per_face_edge[face.j1] += 1;
                    Support::Face { face: face.j1, k }
                }
                ShapeDescriptor::FaceBubble { face, .. } => {
                    let k = 3 * self.p + per_face_bubble[face.j1];
                    per_face_bubble[face.j1] += 1;
                    debug_assert!(per_face_bubble[face.j1] <= fb_per_face);
                    Support::Face { face: face.j1, k }
                }
                _ => {
                    interior += 1;
                    Support::Interior { k: interior - 1 }
                }
            })
            .collect()
    }
}

/// Gram matrix ⟨Φ_a, Φ_b⟩_{K³} over the shapes selected by `filter`.
///
/// Returns the selected local indices alongside the matrix.
pub fn gram_matrix(set: &ShapeSet, filter: impl Fn(usize, &ShapeDescriptor) -> bool) -> (Vec<usize>, DMatrix<f64>) {
    let idx: Vec<usize> = (0..set.len()).filter(|&i| filter(i, &set.shapes[i])).collect();
    let rule = quad_rule(2 * set.p);
    let k = idx.len();
    let mut g = DMatrix::zeros(k, k);
    for (pt, w) in rule.points.iter().zip(&rule.weights) {
        let vals: Vec<Vec3> = idx.iter().map(|&i| set.eval(i, *pt).0).collect();
        for a in 0..k {
            for b in a..k {
                g[(a, b)] += w * vals[a].dot(&vals[b]);
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    (idx, g)
}
