//! Direct mass-matrix solver for the uniform periodic mesh.
//!
//! Interior dofs couple only within their element and are eliminated per
//! element. The remaining face-dof Schur complement commutes with lattice
//! translations, so it is block-circulant over the n³ cubes: a discrete
//! Fourier transform over the cube index turns it into n³ independent
//! Hermitian systems of size 12·(face dofs per face), factored once.

use crate::basis::Support;
use crate::error::{Error, Result};
use crate::linalg::SparseSymmetric;
use crate::mesh::{DofMap, Mesh};
use nalgebra::{Cholesky, Complex, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

type C64 = Complex<f64>;

pub struct PeriodicMassSolver {
    n: usize,
    slots: usize,
    /// cube·slots + slot of every global face dof.
    face_pos: Vec<usize>,
    n_face_dofs: usize,
    /// Local positions of face and interior shapes.
    local_face: Vec<usize>,
    local_int: Vec<usize>,
    /// Per class: M_II⁻¹ and M_FI in global-dof scaling.
    mii_inv: Vec<DMatrix<f64>>,
    mfi: Vec<DMatrix<f64>>,
    factors: Vec<Cholesky<C64, Dyn>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PeriodicMassSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PeriodicMassSolver").field("n", &self.n).field("slots", &self.slots).finish()
    }
}

fn cube_linear(n: usize, c: [usize; 3]) -> usize {
    (c[2] * n + c[1]) * n + c[0]
}

impl PeriodicMassSolver {
    pub fn new(mesh: &Mesh, dofs: &DofMap, supports: &[Support], mass: &SparseSymmetric) -> Result<Self> {
        let n = mesh.n;
        let nf = dofs.face_dofs;
        let local_face: Vec<usize> =
            (0..supports.len()).filter(|&a| matches!(supports[a], Support::Face { .. })).collect();
        let local_int: Vec<usize> =
            (0..supports.len()).filter(|&a| matches!(supports[a], Support::Interior { .. })).collect();

        // each face is attributed to the cube and (class, local face) of its
        // lexicographically first incidence; this is translation invariant
        let mut types: HashMap<(usize, usize), usize> = HashMap::new();
        let mut face_owner = Vec::with_capacity(mesh.num_faces());
        for f in &mesh.faces {
            let &(t, lf) = f
                .incidences
                .iter()
                .min_by_key(|&&(t, lf)| (mesh.tets[t].class, lf))
                .ok_or_else(|| Error::Mesh("face without incidences".into()))?;
            let key = (mesh.tets[t].class, lf);
            let next = types.len();
            let ty = *types.entry(key).or_insert(next);
            face_owner.push((cube_linear(n, mesh.tets[t].cube), ty));
        }
        if types.len() != 12 {
            return Err(Error::Mesh(format!("expected 12 face types per cube, found {}", types.len())));
        }
        let slots = 12 * nf;
        let mut face_pos = vec![0; dofs.n_face_dofs];
        for (f, &(cube, ty)) in face_owner.iter().enumerate() {
            for k in 0..nf {
                face_pos[f * nf + k] = cube * slots + ty * nf + k;
            }
        }

        // element blocks from a representative tet of each class
        let mut mii_inv = Vec::with_capacity(6);
        let mut mfi = Vec::with_capacity(6);
        for class in 0..6 {
            let t = mesh.tet_index([0, 0, 0], class);
            let d = dofs.dofs(t);
            let ii =
                DMatrix::from_fn(local_int.len(), local_int.len(), |a, b| mass.get(d[local_int[a]], d[local_int[b]]));
            let inv = if local_int.is_empty() {
                ii
            } else {
                ii.cholesky().ok_or(Error::SingularLocalSystem { element: t })?.inverse()
            };
            mii_inv.push(inv);
            mfi.push(DMatrix::from_fn(local_face.len(), local_int.len(), |a, b| {
                mass.get(d[local_face[a]], d[local_int[b]])
            }));
        }
        let correction: Vec<DMatrix<f64>> = (0..6).map(|k| &mfi[k] * &mii_inv[k] * mfi[k].transpose()).collect();

        // Ŝ(θ) = Σ_e S[(0,s),(e,s')] e^{2πiθ·e/n}; collect the cube-0 rows first
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); slots];
        for g in 0..dofs.n_face_dofs {
            if face_pos[g] < slots {
                let s = face_pos[g];
                for k in mass.row_ptr[g]..mass.row_ptr[g + 1] {
                    let c = mass.cols[k];
                    if c < dofs.n_face_dofs {
                        rows[s].push((face_pos[c], mass.vals[k]));
                    }
                }
            }
        }
        for (t, tet) in mesh.tets.iter().enumerate() {
            let d = dofs.dofs(t);
            let c = &correction[tet.class];
            for (a, &la) in local_face.iter().enumerate() {
                let s = face_pos[d[la]];
                if s < slots {
                    for (b, &lb) in local_face.iter().enumerate() {
                        rows[s].push((face_pos[d[lb]], -c[(a, b)]));
                    }
                }
            }
        }
        let n3 = n * n * n;
        let factors = (0..n3)
            .into_par_iter()
            .map(|theta| {
                let th = [theta % n, (theta / n) % n, theta / (n * n)];
                let mut m = DMatrix::<C64>::zeros(slots, slots);
                for (s, row) in rows.iter().enumerate() {
                    for &(pos, v) in row {
                        let (cube, s2) = (pos / slots, pos % slots);
                        let e = [cube % n, (cube / n) % n, cube / (n * n)];
                        let phase = 2.0 * PI * (th[0] * e[0] + th[1] * e[1] + th[2] * e[2]) as f64 / n as f64;
                        m[(s, s2)] += C64::from_polar(v, phase);
                    }
                }
                m.cholesky().ok_or(Error::SingularLocalSystem { element: theta })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            slots,
            face_pos,
            n_face_dofs: dofs.n_face_dofs,
            local_face,
            local_int,
            mii_inv,
            mfi,
            factors,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    /// In-place 3-D transform of each slot's n³ cube values.
    fn transform(&self, data: &mut [C64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let n3 = n * n * n;
        data.par_chunks_mut(n3).for_each(|block| {
            let mut line = vec![C64::new(0.0, 0.0); n];
            for stride in [1, n, n * n] {
                for start in 0..n3 {
                    // the first index of each line has zero coordinate along the axis
                    if (start / stride) % n != 0 {
                        continue;
                    }
                    for (i, l) in line.iter_mut().enumerate() {
                        *l = block[start + i * stride];
                    }
                    fft.process(&mut line);
                    for (i, l) in line.iter().enumerate() {
                        block[start + i * stride] = *l;
                    }
                }
            }
        });
    }

    /// x = M⁻¹ b.
    pub fn solve(&self, mesh: &Mesh, dofs: &DofMap, b: &[f64], x: &mut [f64]) {
        let n3 = self.n * self.n * self.n;
        let nt = mesh.num_tets();
        // eliminate interior dofs
        let mut bf = b[..self.n_face_dofs].to_vec();
        let yi: Vec<DVector<f64>> = (0..nt)
            .into_par_iter()
            .map(|t| {
                let d = dofs.dofs(t);
                let bi = DVector::from_iterator(self.local_int.len(), self.local_int.iter().map(|&a| b[d[a]]));
                &self.mii_inv[mesh.tets[t].class] * bi
            })
            .collect();
        if !self.local_int.is_empty() {
            for (t, y) in yi.iter().enumerate() {
                let d = dofs.dofs(t);
                let r = &self.mfi[mesh.tets[t].class] * y;
                for (a, &la) in self.local_face.iter().enumerate() {
                    bf[d[la]] -= r[a];
                }
            }
        }
        // slot-major layout: data[slot·n³ + cube]
        let mut data = vec![C64::new(0.0, 0.0); self.slots * n3];
        for (g, &pos) in self.face_pos.iter().enumerate() {
            let (cube, s) = (pos / self.slots, pos % self.slots);
            data[s * n3 + cube] = C64::new(bf[g], 0.0);
        }
        self.transform(&mut data, &self.fwd);
        let solved: Vec<DVector<C64>> = (0..n3)
            .into_par_iter()
            .map(|theta| {
                let rhs = DVector::from_iterator(self.slots, (0..self.slots).map(|s| data[s * n3 + theta]));
                self.factors[theta].solve(&rhs)
            })
            .collect();
        for (theta, v) in solved.iter().enumerate() {
            for s in 0..self.slots {
                data[s * n3 + theta] = v[s];
            }
        }
        self.transform(&mut data, &self.inv);
        let scale = 1.0 / n3 as f64;
        for (g, &pos) in self.face_pos.iter().enumerate() {
            let (cube, s) = (pos / self.slots, pos % self.slots);
            x[g] = data[s * n3 + cube].re * scale;
        }
        // back-substitute interior dofs: x_I = M_II⁻¹ (b_I − M_IF x_F)
        if !self.local_int.is_empty() {
            let xf = x[..self.n_face_dofs].to_vec();
            let xi: Vec<DVector<f64>> = (0..nt)
                .into_par_iter()
                .map(|t| {
                    let d = dofs.dofs(t);
                    let k = mesh.tets[t].class;
                    let xft = DVector::from_iterator(self.local_face.len(), self.local_face.iter().map(|&a| xf[d[a]]));
                    let bi = DVector::from_iterator(self.local_int.len(), self.local_int.iter().map(|&a| b[d[a]]));
                    &self.mii_inv[k] * (bi - self.mfi[k].transpose() * xft)
                })
                .collect();
            for (t, v) in xi.iter().enumerate() {
                let d = dofs.dofs(t);
                for (a, &la) in self.local_int.iter().enumerate() {
                    x[d[la]] = v[a];
                }
            }
        }
    }
}
