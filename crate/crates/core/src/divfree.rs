//! Divergence correction of discrete H(div) fields.
//!
//! Two-step method: an element-local solve over the interior modes removes
//! every non-constant divergence moment, then a global solve over the
//! lowest-order face functions removes the element-wise constants. The
//! comparison method solves one global constrained problem over the whole
//! degree-p space.

use crate::assembly::{div_l2_norm, element_div_moments, l2_error, FemField, Space, SOLVE_TOL};
use crate::basis::{ShapeDescriptor, ShapeSet, Support};
use crate::error::{Error, Result};
use crate::linalg::{cg, dot, norm, BlockJacobi, SparseSymmetric};
use crate::reference::Vec3;
use crate::sig8;
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;
use web_time::Instant;

/// Default stopping threshold of the full-basis correction.
pub const GLOBAL_FULL_TOL: f64 = 5e-6;
/// Stopping threshold on ‖div‖ for the constant-mode step.
pub const GLOBAL_STEP_TOL: f64 = 1e-9;
const MAX_OUTER: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    None,
    Local,
    LocalGlobal,
    GlobalFull,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::None, Mode::Local, Mode::LocalGlobal, Mode::GlobalFull];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::None => "none",
            Mode::Local => "local",
            Mode::LocalGlobal => "local+global",
            Mode::GlobalFull => "global-full",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "unknown correction mode '{s}' (expected none, local, local+global or global-full)"
            ))
        })
    }
}

/// Outcome of one correction.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionReport {
    pub mode: Mode,
    pub pre_div: f64,
    pub post_div: f64,
    pub pre_l2: Option<f64>,
    pub post_l2: Option<f64>,
    /// Outer iterations of the global solve (0 for purely local modes).
    pub iterations: usize,
    /// ‖div‖ after each outer iteration, starting with the input.
    pub history: Vec<f64>,
    pub walltime_s: f64,
}

impl CorrectionReport {
    pub const CSV_HEADER: &'static str = "mode,pre_div,post_div,pre_L2,post_L2,iterations,walltime_s";

    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(sig8).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.mode,
            sig8(self.pre_div),
            sig8(self.post_div),
            opt(self.pre_l2),
            opt(self.post_l2),
            self.iterations,
            sig8(self.walltime_s)
        )
    }
}

/// Rank of the interior-mode divergence matrix and the largest mean divergence.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Report {
    pub p: usize,
    pub interior_shapes: usize,
    pub dim_p: usize,
    pub rank: usize,
    pub mean_div_max: f64,
    pub singular_values: Vec<f64>,
}

impl Lemma1Report {
    /// div maps the interior modes onto the mean-free part of P_{p−1}.
    pub fn holds(&self) -> bool {
        self.rank + 1 == self.dim_p && self.mean_div_max < 1e-12
    }
}

pub fn lemma1_check(p: usize) -> Result<Lemma1Report> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("no interior modes at degree {p}; need p >= 2")));
    }
    let set = ShapeSet::new(p)?;
    let scalar = crate::assembly::ScalarBasis::new(p - 1);
    let interior = set.interior_indices();
    let rule = crate::reference::quad_rule(2 * p);
    let mut d = DMatrix::<f64>::zeros(scalar.len(), interior.len());
    let mut means = vec![0.0; interior.len()];
    for (pt, w) in rule.points.iter().zip(&rule.weights) {
        let wk = scalar.eval(*pt);
        for (i, &a) in interior.iter().enumerate() {
            let div = set.eval(a, *pt).1;
            means[i] += w * div;
            for k in 0..wk.len() {
                d[(k, i)] += w * wk[k] * div;
            }
        }
    }
    let sv = d.singular_values();
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-10 * smax).count();
    let mut singular_values: Vec<f64> = sv.iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    Ok(Lemma1Report {
        p,
        interior_shapes: interior.len(),
        dim_p: scalar.len(),
        rank,
        mean_div_max: means.iter().fold(0.0, |m, v| m.max(v.abs())),
        singular_values,
    })
}

/// Per-class operators of the element-local correction.
///
/// For interior coefficients α the local problem is
/// min ½ αᵀM α subject to D α = −g, where D holds the non-constant divergence
/// moments of the interior modes and g those of the input. Its solution is
/// α = −M⁻¹Dᵀ(DM⁻¹Dᵀ)⁻¹ g, stored here as one matrix per congruence class.
#[derive(Debug, Clone)]
pub struct LocalCorrector {
    /// Local indices of the interior shapes, ordered by interior slot.
    interior: Vec<usize>,
    /// Rows 1.. of the reference divergence moments (all local shapes).
    d_high: DMatrix<f64>,
    ops: Vec<DMatrix<f64>>,
}

impl LocalCorrector {
    pub fn new(space: &Space) -> Result<Self> {
        if space.p() < 2 {
            return Err(Error::InvalidArgument("local correction needs p >= 2".into()));
        }
        let sup = space.set.supports();
        let mut interior = vec![usize::MAX; space.dofs.interior_dofs];
        for (a, s) in sup.iter().enumerate() {
            if let Support::Interior { k } = *s {
                interior[k] = a;
            }
        }
        let k = space.scalar.len();
        let d_high = space.div_ref.rows(1, k - 1).into_owned();
        let d_int = d_high.select_columns(&interior);
        let mut ops = Vec::with_capacity(6);
        for (class, m) in space.class_mass.iter().enumerate() {
            let m_int = m.select_rows(&interior).select_columns(&interior);
            let element = space.mesh.tet_index([0, 0, 0], class);
            let chol = m_int.cholesky().ok_or(Error::SingularLocalSystem { element })?;
            let minv_dt = chol.solve(&d_int.transpose());
            let schur = &d_int * &minv_dt;
            let schur_chol = schur.cholesky().ok_or(Error::SingularLocalSystem { element })?;
            // α = −M⁻¹Dᵀ S⁻¹ g, so the operator is (S⁻¹ D M⁻¹)ᵀ
            let op = schur_chol.solve(&minv_dt.transpose()).transpose();
            ops.push(op);
        }
        Ok(Self { interior, d_high, ops })
    }

    /// Interior correction of tet `t` given its local coefficients.
    pub fn correction(&self, class: usize, local: &[f64]) -> Vec<f64> {
        let c = nalgebra::DVector::from_column_slice(local);
        let g = &self.d_high * c;
        (&self.ops[class] * g).iter().map(|v| -v).collect()
    }
}

/// Element-local correction; returns the corrected field and the constant
/// value of the divergence left on each element.
pub fn local_correct(space: &Space, field: &FemField) -> Result<(FemField, Vec<f64>)> {
    let lc = LocalCorrector::new(space)?;
    Ok(local_correct_with(space, &lc, field))
}

pub fn local_correct_with(space: &Space, lc: &LocalCorrector, field: &FemField) -> (FemField, Vec<f64>) {
    let mut out = field.clone();
    let ni = space.dofs.interior_dofs;
    let nf = space.dofs.n_face_dofs;
    out.coeffs[nf..].par_chunks_mut(ni).enumerate().for_each(|(t, chunk)| {
        let local = space.local_coeffs(field, t);
        let alpha = lc.correction(space.mesh.tets[t].class, &local);
        for (k, c) in chunk.iter_mut().enumerate() {
            *c += alpha[k];
        }
    });
    debug_assert_eq!(lc.interior.len(), ni);
    let constants = (0..space.mesh.num_tets())
        .into_par_iter()
        .map(|t| element_div_moments(space, &out, t)[0] / space.mesh.map(t).volume().sqrt())
        .collect();
    (out, constants)
}

/// Constraint operator of a global correction: divergence moments of a
/// subspace of the global dofs against a per-element scalar space.
struct Constraint<'a> {
    space: &'a Space,
    /// Global dofs of the unknown subspace (sorted).
    dofs: Vec<usize>,
    /// Position of each global dof in `dofs`, or usize::MAX.
    pos: Vec<usize>,
    /// Number of moments per element.
    k: usize,
    /// Mass matrix and preconditioner of a proper subspace; None for the
    /// whole space, which uses the space's own solver.
    sub: Option<(SparseSymmetric, BlockJacobi)>,
}

impl<'a> Constraint<'a> {
    fn new(space: &'a Space, dofs: Vec<usize>, k: usize, block: usize) -> Self {
        let mut pos = vec![usize::MAX; space.n_dofs()];
        for (i, &g) in dofs.iter().enumerate() {
            pos[g] = i;
        }
        let sub = (dofs.len() != space.n_dofs()).then(|| {
            let m = space.mass.submatrix(&dofs);
            let pc = BlockJacobi::new(&m, &vec![block; dofs.len() / block]);
            (m, pc)
        });
        Self { space, dofs, pos, k, sub }
    }

    fn n_moments(&self) -> usize {
        self.space.mesh.num_tets() * self.k
    }

    /// Moments (first `k` per element) of the field with subspace coefficients x.
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let sp = self.space;
        let mut out = vec![0.0; self.n_moments()];
        out.par_chunks_mut(self.k).enumerate().for_each(|(t, m)| {
            let map = sp.mesh.map(t);
            let s = map.det.signum() / map.det.abs().sqrt();
            for (a, (&g, &f)) in sp.dofs.dofs(t).iter().zip(sp.dofs.factors(t)).enumerate() {
                let i = self.pos[g];
                if i == usize::MAX {
                    continue;
                }
                let c = x[i] * f * s;
                for (r, mr) in m.iter_mut().enumerate() {
                    *mr += sp.div_ref[(r, a)] * c;
                }
            }
        });
        out
    }

    fn apply_t(&self, v: &[f64]) -> Vec<f64> {
        let sp = self.space;
        let mut out = vec![0.0; self.dofs.len()];
        for t in 0..sp.mesh.num_tets() {
            let map = sp.mesh.map(t);
            let s = map.det.signum() / map.det.abs().sqrt();
            let vt = &v[t * self.k..(t + 1) * self.k];
            for (a, (&g, &f)) in sp.dofs.dofs(t).iter().zip(sp.dofs.factors(t)).enumerate() {
                let i = self.pos[g];
                if i == usize::MAX {
                    continue;
                }
                let d: f64 = (0..self.k).map(|r| sp.div_ref[(r, a)] * vt[r]).sum();
                out[i] += d * f * s;
            }
        }
        out
    }

    fn solve_mass(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; rhs.len()];
        match &self.sub {
            Some((m, pc)) => {
                cg(|v, o| m.matvec(v, o), |r, z| pc.apply(r, z), rhs, &mut x, SOLVE_TOL, 10 * rhs.len())?;
            }
            None => {
                self.space.solve_mass(rhs, &mut x)?;
            }
        }
        Ok(x)
    }

    /// Minimal-norm Φ in the subspace with moments(Φ) = −g.
    ///
    /// Conjugate residuals on the Schur complement S = B M⁻¹ Bᵀ (an Uzawa
    /// iteration with Krylov acceleration); the residual of S v = g is the
    /// moment vector of the corrected divergence, so its norm decreases
    /// monotonically. Returns Φ and the history of ‖g + BΦ‖.
    fn solve(&self, g: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, Vec<f64>, usize)> {
        let mut phi = vec![0.0; self.dofs.len()];
        let mut r = g.to_vec();
        let mut history = vec![norm(&r)];
        if history[0] < tol {
            return Ok((phi, history, 0));
        }
        // z = M⁻¹Bᵀr, sr = S r
        let mut zr = self.solve_mass(&self.apply_t(&r))?;
        let mut sr = self.apply(&zr);
        let mut p = r.clone();
        let mut zp = zr.clone();
        let mut sp = sr.clone();
        let mut rsr = dot(&r, &sr);
        let mut it = 0;
        while it < max_iter {
            let spsp = dot(&sp, &sp);
            if spsp == 0.0 || rsr <= 0.0 {
                break;
            }
            let alpha = rsr / spsp;
            // v += α p  ⇒  Φ = −M⁻¹Bᵀv changes by −α zp
            crate::linalg::axpy(-alpha, &zp, &mut phi);
            crate::linalg::axpy(-alpha, &sp, &mut r);
            it += 1;
            let mut cur = self.apply(&phi);
            cur.par_iter_mut().zip(g.par_iter()).for_each(|(c, gi)| *c += gi);
            let res = norm(&cur);
            history.push(res);
            if res < tol {
                return Ok((phi, history, it));
            }
            zr = self.solve_mass(&self.apply_t(&r))?;
            sr = self.apply(&zr);
            let rsr_new = dot(&r, &sr);
            let beta = rsr_new / rsr;
            rsr = rsr_new;
            p.par_iter_mut().zip(r.par_iter()).for_each(|(pi, ri)| *pi = ri + beta * *pi);
            zp.par_iter_mut().zip(zr.par_iter()).for_each(|(pi, ri)| *pi = ri + beta * *pi);
            sp.par_iter_mut().zip(sr.par_iter()).for_each(|(pi, ri)| *pi = ri + beta * *pi);
        }
        let last = *history.last().unwrap_or(&f64::NAN);
        Err(Error::UzawaStalled { iterations: it, div_norm: last })
    }
}

/// Element moments of the field's divergence, first `k` per element.
fn moments(space: &Space, field: &FemField, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; space.mesh.num_tets() * k];
    out.par_chunks_mut(k).enumerate().for_each(|(t, m)| {
        m.copy_from_slice(&element_div_moments(space, field, t)[..k]);
    });
    out
}

/// Removes the constant part of the element-wise divergence with a
/// correction in the span of the lowest-order face functions.
///
/// Those functions are members of the degree-p basis, so the correction is
/// added directly to their coefficients.
pub fn global_correct(space: &Space, field: &FemField) -> Result<(FemField, usize, Vec<f64>)> {
    global_correct_tol(space, field, GLOBAL_STEP_TOL)
}

pub fn global_correct_tol(space: &Space, field: &FemField, tol: f64) -> Result<(FemField, usize, Vec<f64>)> {
    let mut dofs: Vec<usize> = Vec::new();
    for (t, _) in space.mesh.tets.iter().enumerate() {
        for (a, s) in space.set.shapes.iter().enumerate() {
            if matches!(s, ShapeDescriptor::EdgeFace { i: 0, .. }) {
                dofs.push(space.dofs.dofs(t)[a]);
            }
        }
    }
    dofs.sort_unstable();
    dofs.dedup();
    let con = Constraint::new(space, dofs, 1, 3);
    let mut g = moments(space, field, 1);
    // the torus forces Σ_T √|T| g_T = 0; drop the rounding part
    let w: Vec<f64> = (0..space.mesh.num_tets()).map(|t| space.mesh.map(t).volume().sqrt()).collect();
    let proj = dot(&g, &w) / dot(&w, &w);
    crate::linalg::axpy(-proj, &w, &mut g);
    let (phi, history, it) = con.solve(&g, tol, MAX_OUTER)?;
    let mut out = field.clone();
    for (i, &gd) in con.dofs.iter().enumerate() {
        out.coeffs[gd] += phi[i];
    }
    Ok((out, it, history))
}

/// Global constrained correction over the full degree-p space against all
/// element moments of P_{p−1}.
pub fn global_full_correct(space: &Space, field: &FemField, tol: f64) -> Result<(FemField, usize, Vec<f64>)> {
    let k = space.scalar.len();
    let con = Constraint::new(space, (0..space.n_dofs()).collect(), k, 1);
    let g = moments(space, field, k);
    let (phi, history, it) = con.solve(&g, tol, MAX_OUTER)?;
    let mut out = field.clone();
    crate::linalg::axpy(1.0, &phi, &mut out.coeffs);
    Ok((out, it, history))
}

/// Applies a correction mode and reports norms before and after.
pub fn correct(
    space: &Space,
    field: &FemField,
    mode: Mode,
    exact: Option<&(dyn Fn(&Vec3) -> Vec3 + Sync)>,
    l2_degree: usize,
) -> Result<(FemField, CorrectionReport)> {
    correct_tol(space, field, mode, exact, l2_degree, GLOBAL_FULL_TOL)
}

/// As [`correct`], with the divergence tolerance of the global-full mode.
pub fn correct_tol(
    space: &Space,
    field: &FemField,
    mode: Mode,
    exact: Option<&(dyn Fn(&Vec3) -> Vec3 + Sync)>,
    l2_degree: usize,
    full_tol: f64,
) -> Result<(FemField, CorrectionReport)> {
    let start = Instant::now();
    let pre_div = div_l2_norm(space, field);
    let (out, iterations, history) = match mode {
        Mode::None => (field.clone(), 0, vec![pre_div]),
        Mode::Local => {
            let (f, _) = local_correct(space, field)?;
            let d = div_l2_norm(space, &f);
            (f, 0, vec![pre_div, d])
        }
        Mode::LocalGlobal => {
            let (f, _) = if space.p() >= 2 { local_correct(space, field)? } else { (field.clone(), Vec::new()) };
            let (f, it, mut h) = global_correct(space, &f)?;
            h.insert(0, pre_div);
            (f, it, h)
        }
        Mode::GlobalFull => global_full_correct(space, field, full_tol)?,
    };
    let walltime_s = start.elapsed().as_secs_f64();
    let post_div = div_l2_norm(space, &out);
    let (pre_l2, post_l2) = match exact {
        Some(g) => (Some(l2_error(space, field, g, l2_degree)), Some(l2_error(space, &out, g, l2_degree))),
        None => (None, None),
    };
    Ok((out, CorrectionReport { mode, pre_div, post_div, pre_l2, post_l2, iterations, history, walltime_s }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_round_trips_through_strings() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("both".parse::<Mode>().is_err());
    }

    #[test]
    fn lemma1_ranks() {
        for (p, rank, ni) in [(2, 3, 6), (3, 9, 20), (4, 19, 45), (5, 34, 84)] {
            let r = lemma1_check(p).unwrap();
            assert_eq!(r.rank, rank, "p={p}");
            assert_eq!(r.interior_shapes, ni);
            assert!(r.holds(), "{r:?}");
        }
        assert!(lemma1_check(1).is_err());
    }

    #[test]
    fn local_correction_needs_interior_modes() {
        let space = Space::new(1, 1).unwrap();
        assert!(local_correct(&space, &FemField::zeros(&space)).is_err());
    }

    #[test]
    fn zero_field_needs_no_iterations() {
        let space = Space::new(1, 2).unwrap();
        let f = FemField::zeros(&space);
        let (out, it, _) = global_full_correct(&space, &f, 1e-3).unwrap();
        assert_eq!(it, 0);
        assert_eq!(out, f);
    }

    #[test]
    fn report_csv_has_header_arity() {
        let r = CorrectionReport {
            mode: Mode::Local,
            pre_div: 1.0,
            post_div: 0.5,
            pre_l2: None,
            post_l2: Some(0.25),
            iterations: 0,
            history: vec![],
            walltime_s: 0.1,
        };
        let row = r.to_csv_row();
        assert_eq!(row.split(',').count(), CorrectionReport::CSV_HEADER.split(',').count());
        assert!(row.starts_with("local,"));
    }
}
