//! Periodic uniform tetrahedral meshes of the unit cube.
//!
//! Each of the n³ cubes is cut into the six Kuhn tetrahedra sharing its main
//! diagonal. A tetrahedron's vertices are stored in chain order: corner,
//! corner + e_σ0, corner + e_σ0 + e_σ1, opposite corner. Chain order is
//! translation invariant, so the two tetrahedra sharing a face (including across
//! the periodic boundary) see that face's vertices in the same order. With the
//! signed Piola transform the face shape functions are then identical on both
//! sides and every orientation sign is +1.

use crate::basis::{face_dof_count, interior_count, ShapeSet, Support};
use crate::error::{Error, Result};
use crate::reference::{RefPoint, Vec3};
use nalgebra::Matrix3;
use std::collections::HashMap;
use std::fmt;

/// Axis orders of the six Kuhn tetrahedra; index is the congruence class.
pub const KUHN_PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// x = B x̂ + b.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub b: Matrix3<f64>,
    pub offset: Vec3,
    pub det: f64,
    pub inv: Matrix3<f64>,
}

impl AffineMap {
    pub fn new(b: Matrix3<f64>, offset: Vec3) -> Self {
        let det = b.determinant();
        let inv = b.try_inverse().expect("degenerate element map");
        Self { b, offset, det, inv }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vec3::zeros())
    }

    pub fn map(&self, x: RefPoint) -> Vec3 {
        self.b * x.to_vec() + self.offset
    }

    pub fn inverse_map(&self, x: &Vec3) -> RefPoint {
        RefPoint::from_vec(&(self.inv * (x - self.offset)))
    }

    /// |T| = |det B| / 6.
    pub fn volume(&self) -> f64 {
        self.det.abs() / 6.0
    }

    /// Same map shifted by `shift`.
    pub fn translated(&self, shift: Vec3) -> Self {
        Self { offset: self.offset + shift, ..*self }
    }
}

/// Contravariant Piola transform with signed determinant.
pub fn piola(map: &AffineMap, value: &Vec3, div: f64) -> (Vec3, f64) {
    (map.b * value / map.det, div / map.det)
}

#[derive(Debug, Clone)]
pub struct Tet {
    /// Cube lattice index (i, j, k).
    pub cube: [usize; 3],
    /// Congruence class, an index into [`KUHN_PERMS`].
    pub class: usize,
    /// Periodic global vertex ids in chain order.
    pub verts: [usize; 4],
    /// Global face id of the local face opposite local vertex j.
    pub faces: [usize; 4],
}

#[derive(Debug, Clone)]
pub struct Face {
    /// Global vertex ids in chain order.
    pub verts: [usize; 3],
    /// (tet, local face) incidences; exactly two on the torus.
    pub incidences: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub level: usize,
    pub n: usize,
    pub h: f64,
    pub tets: Vec<Tet>,
    pub faces: Vec<Face>,
    /// Element maps of the six classes for the cube at the origin.
    pub class_maps: [AffineMap; 6],
}

/// Integer lattice coordinates of the chain vertices of class `c` in cube `corner`.
fn chain_vertices(corner: [i64; 3], c: usize) -> [[i64; 3]; 4] {
    let mut v = [corner; 4];
    for k in 0..3 {
        v[k + 1] = v[k];
        v[k + 1][KUHN_PERMS[c][k]] += 1;
    }
    v
}

fn class_map(h: f64, c: usize) -> AffineMap {
    let v = chain_vertices([0, 0, 0], c);
    let mut b = Matrix3::zeros();
    for col in 0..3 {
        for row in 0..3 {
            b[(row, col)] = h * v[col + 1][row] as f64;
        }
    }
    AffineMap::new(b, Vec3::zeros())
}

/// Builds the level-`level` periodic mesh with n = 2^(level−1) cubes per side.
pub fn build_uniform(level: usize) -> Result<Mesh> {
    if level < 1 {
        return Err(Error::InvalidArgument("mesh level must be >= 1".into()));
    }
    let n = 1usize << (level - 1);
    let ni = n as i64;
    let h = 1.0 / n as f64;
    let vid = |v: [i64; 3]| {
        let w = v.map(|x| x.rem_euclid(ni) as usize);
        w[0] + n * w[1] + n * n * w[2]
    };
    let mut tets = Vec::with_capacity(6 * n * n * n);
    let mut faces: Vec<Face> = Vec::with_capacity(12 * n * n * n);
    let mut lookup: HashMap<[[i64; 3]; 3], usize> = HashMap::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for c in 0..6 {
                    let cv = chain_vertices([i as i64, j as i64, k as i64], c);
                    let t = tets.len();
                    let mut tf = [0; 4];
                    for (lf, slot) in tf.iter_mut().enumerate() {
                        let mut fv = [[0i64; 3]; 3];
                        let mut q = 0;
                        for (lv, v) in cv.iter().enumerate() {
                            if lv != lf {
                                fv[q] = *v;
                                q += 1;
                            }
                        }
                        // translate so the first chain vertex lies in the base cell
                        let shift = fv[0].map(|x| x.div_euclid(ni) * ni);
                        let key = fv.map(|v| [v[0] - shift[0], v[1] - shift[1], v[2] - shift[2]]);
                        let id = *lookup.entry(key).or_insert_with(|| {
                            faces.push(Face { verts: fv.map(vid), incidences: Vec::with_capacity(2) });
                            faces.len() - 1
                        });
                        faces[id].incidences.push((t, lf));
                        *slot = id;
                    }
                    tets.push(Tet { cube: [i, j, k], class: c, verts: cv.map(vid), faces: tf });
                }
            }
        }
    }
    if let Some(bad) = faces.iter().position(|f| f.incidences.len() != 2) {
        return Err(Error::Mesh(format!("face {bad} has {} incidences", faces[bad].incidences.len())));
    }
    let class_maps = std::array::from_fn(|c| class_map(h, c));
    Ok(Mesh { level, n, h, tets, faces, class_maps })
}

impl Mesh {
    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn cube_origin(&self, cube: [usize; 3]) -> Vec3 {
        Vec3::new(cube[0] as f64, cube[1] as f64, cube[2] as f64) * self.h
    }

    /// Element map of tet `t` (unwrapped coordinates in its own cube).
    pub fn map(&self, t: usize) -> AffineMap {
        let tet = &self.tets[t];
        self.class_maps[tet.class].translated(self.cube_origin(tet.cube))
    }

    pub fn tet_index(&self, cube: [usize; 3], class: usize) -> usize {
        ((cube[2] * self.n + cube[1]) * self.n + cube[0]) * 6 + class
    }

    /// Containing tet and reference coordinates of a point on the torus.
    pub fn locate(&self, x: &Vec3) -> (usize, RefPoint) {
        let mut cube = [0usize; 3];
        let mut frac = [0.0; 3];
        for k in 0..3 {
            let g = (x[k] - x[k].floor()) * self.n as f64;
            let c = (g.floor() as usize).min(self.n - 1);
            cube[k] = c;
            frac[k] = g - c as f64;
        }
        let (class, r) = locate_in_cube(frac);
        (self.tet_index(cube, class), r)
    }

    pub fn stats(&self) -> MeshStats {
        MeshStats {
            level: self.level,
            n: self.n,
            tets: self.num_tets(),
            faces: self.num_faces(),
            vertices: self.num_vertices(),
        }
    }
}

/// Kuhn class and reference coordinates of a point with fractional cube
/// coordinates `f ∈ [0,1]³`. Ties go to the lower axis.
pub fn locate_in_cube(f: [f64; 3]) -> (usize, RefPoint) {
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| f[b].partial_cmp(&f[a]).unwrap().then(a.cmp(&b)));
    let class = KUHN_PERMS.iter().position(|p| *p == order).unwrap();
    let (a, b, c) = (f[order[0]], f[order[1]], f[order[2]]);
    (class, RefPoint::new(a - b, b - c, c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeshStats {
    pub level: usize,
    pub n: usize,
    pub tets: usize,
    pub faces: usize,
    pub vertices: usize,
}

impl fmt::Display for MeshStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "level={} n={} vertices={} tets={} faces={}",
            self.level, self.n, self.vertices, self.tets, self.faces
        )
    }
}

/// Global numbering of the degree-`p` H(div) space.
///
/// Face degrees of freedom come first (`face * face_dofs + k`), then the private
/// interior ones (`n_face_dofs + tet * n_interior + k`). The global basis
/// function of a face dof restricted to a tet is `factor` times the Piola image
/// of the normalized local shape; `factor` undoes the per-shape normalization
/// so both incident tets carry the same function.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub p: usize,
    pub n_dofs: usize,
    pub n_face_dofs: usize,
    pub face_dofs: usize,
    pub interior_dofs: usize,
    pub local_len: usize,
    dofs: Vec<usize>,
    factors: Vec<f64>,
}

pub fn build_dofmap(mesh: &Mesh, set: &ShapeSet) -> Result<DofMap> {
    let p = set.p;
    let face_dofs = face_dof_count(p);
    let interior_dofs = interior_count(p);
    let n_face_dofs = mesh.num_faces() * face_dofs;
    let n_dofs = n_face_dofs + mesh.num_tets() * interior_dofs;
    let supports = set.supports();
    let local_len = set.len();
    let mut dofs = Vec::with_capacity(mesh.num_tets() * local_len);
    let mut factors = Vec::with_capacity(mesh.num_tets() * local_len);
    for (t, tet) in mesh.tets.iter().enumerate() {
        for (a, s) in supports.iter().enumerate() {
            match *s {
                Support::Face { face, k } => {
                    let g = tet.faces[face];
                    let f = &mesh.faces[g];
                    let own: [usize; 3] = {
                        let mut v = [0; 3];
                        let mut q = 0;
                        for (lv, &id) in tet.verts.iter().enumerate() {
                            if lv != face {
                                v[q] = id;
                                q += 1;
                            }
                        }
                        v
                    };
                    if own != f.verts {
                        return Err(Error::Mesh(format!("tet {t} sees face {g} in a different vertex order")));
                    }
                    dofs.push(g * face_dofs + k);
                    factors.push(1.0 / set.scales[a]);
                }
                Support::Interior { k } => {
                    dofs.push(n_face_dofs + t * interior_dofs + k);
                    factors.push(1.0);
                }
            }
        }
    }
    Ok(DofMap { p, n_dofs, n_face_dofs, face_dofs, interior_dofs, local_len, dofs, factors })
}

impl DofMap {
    /// Global dof ids of the local shapes of tet `t`.
    pub fn dofs(&self, t: usize) -> &[usize] {
        &self.dofs[t * self.local_len..(t + 1) * self.local_len]
    }

    pub fn factors(&self, t: usize) -> &[f64] {
        &self.factors[t * self.local_len..(t + 1) * self.local_len]
    }

    pub fn is_face_dof(&self, g: usize) -> bool {
        g < self.n_face_dofs
    }

    /// Range of the private interior dofs of tet `t`.
    pub fn interior_range(&self, t: usize) -> std::ops::Range<usize> {
        let s = self.n_face_dofs + t * self.interior_dofs;
        s..s + self.interior_dofs
    }

    /// Local coefficients (w.r.t. normalized local shapes) of tet `t`.
    pub fn gather(&self, t: usize, global: &[f64], out: &mut [f64]) {
        for ((o, &g), &f) in out.iter_mut().zip(self.dofs(t)).zip(self.factors(t)) {
            *o = global[g] * f;
        }
    }
}
