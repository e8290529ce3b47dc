//! Global H(div) space: mass matrix, L² projection, norms and divergence moments.

use crate::basis::{scalar_dim, ShapeSet};
use crate::error::Result;
use crate::linalg::{cg, BlockJacobi, SolveStats, SparseSymmetric};
use crate::mesh::{build_dofmap, build_uniform, piola, AffineMap, DofMap, Mesh};
use crate::periodic::PeriodicMassSolver;
use crate::reference::{quad_rule, QuadratureRule, RefPoint, Vec3};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Relative residual for every SPD solve.
pub const SOLVE_TOL: f64 = 1e-12;

/// Orthonormal basis of P_k on K³, built by Gram–Schmidt on monomials.
///
/// The first member is the constant √6.
#[derive(Debug, Clone)]
pub struct ScalarBasis {
    pub degree: usize,
    exponents: Vec<[i32; 3]>,
    /// Row r holds the monomial coefficients of basis function r.
    coeffs: DMatrix<f64>,
}

impl ScalarBasis {
    pub fn new(degree: usize) -> Self {
        let mut exponents = Vec::new();
        for total in 0..=degree as i32 {
            for a in (0..=total).rev() {
                for b in (0..=total - a).rev() {
                    exponents.push([a, b, total - a - b]);
                }
            }
        }
        let m = exponents.len();
        let rule = quad_rule(2 * degree);
        // monomial values at the quadrature points
        let vals = DMatrix::from_fn(rule.len(), m, |q, j| {
            let p = rule.points[q];
            let e = exponents[j];
            p.xi.powi(e[0]) * p.eta.powi(e[1]) * p.zeta.powi(e[2])
        });
        let w = DVector::from_vec(rule.weights.clone());
        let inner = |u: &DVector<f64>, v: &DVector<f64>| u.component_mul(v).dot(&w);
        let mut coeffs = DMatrix::zeros(m, m);
        let mut fvals: Vec<DVector<f64>> = Vec::with_capacity(m);
        for j in 0..m {
            let mut c = DVector::zeros(m);
            c[j] = 1.0;
            let mut f = vals.column(j).into_owned();
            for _ in 0..2 {
                for (k, fk) in fvals.iter().enumerate() {
                    let r = inner(&f, fk);
                    f -= fk * r;
                    c -= coeffs.row(k).transpose() * r;
                }
            }
            let nrm = inner(&f, &f).sqrt();
            f /= nrm;
            c /= nrm;
            coeffs.set_row(j, &c.transpose());
            fvals.push(f);
        }
        Self { degree, exponents, coeffs }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn eval(&self, p: RefPoint) -> DVector<f64> {
        let mono = DVector::from_iterator(
            self.len(),
            self.exponents.iter().map(|e| p.xi.powi(e[0]) * p.eta.powi(e[1]) * p.zeta.powi(e[2])),
        );
        &self.coeffs * mono
    }
}

/// Normalized shape values and divergences at the points of a rule.
#[derive(Debug, Clone)]
pub struct ShapeTable {
    pub rule: QuadratureRule,
    pub values: Vec<Vec3>,
    pub divs: Vec<f64>,
    pub nloc: usize,
}

impl ShapeTable {
    pub fn new(set: &ShapeSet, degree: usize) -> Self {
        Self::at_points(set, quad_rule(degree))
    }

    pub fn at_points(set: &ShapeSet, rule: QuadratureRule) -> Self {
        let nloc = set.len();
        let mut values = vec![Vec3::zeros(); rule.len() * nloc];
        let mut divs = vec![0.0; rule.len() * nloc];
        for (q, p) in rule.points.iter().enumerate() {
            set.eval_all(*p, &mut values[q * nloc..(q + 1) * nloc], &mut divs[q * nloc..(q + 1) * nloc]);
        }
        Self { rule, values, divs, nloc }
    }

    pub fn values_at(&self, q: usize) -> &[Vec3] {
        &self.values[q * self.nloc..(q + 1) * self.nloc]
    }

    pub fn divs_at(&self, q: usize) -> &[f64] {
        &self.divs[q * self.nloc..(q + 1) * self.nloc]
    }
}

/// Coefficients over the global degree-p basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FemField {
    pub p: usize,
    pub coeffs: Vec<f64>,
}

impl FemField {
    pub fn zeros(space: &Space) -> Self {
        Self { p: space.p(), coeffs: vec![0.0; space.n_dofs()] }
    }
}

/// Mesh, basis, dof map and the matrices shared by all fields on them.
#[derive(Debug)]
pub struct Space {
    pub mesh: Mesh,
    pub set: ShapeSet,
    pub dofs: DofMap,
    /// Orthonormal basis of P_{p−1} on K³ (divergence test space).
    pub scalar: ScalarBasis,
    /// Local mass matrices of the six congruence classes.
    pub class_mass: Vec<DMatrix<f64>>,
    /// ∫_{K³} ŵ_k div Φ̂_a, of size dim P_{p−1} × n_loc.
    pub div_ref: DMatrix<f64>,
    pub mass: SparseSymmetric,
    pub precond: MassPreconditioner,
}

/// Preconditioner for mass solves.
#[derive(Debug)]
pub enum MassPreconditioner {
    /// Block-Jacobi over each face's dofs and each tet's interior dofs.
    BlockJacobi(BlockJacobi),
    /// Exact inverse exploiting translation invariance.
    Periodic(Box<PeriodicMassSolver>),
}

impl Space {
    pub fn new(level: usize, p: usize) -> Result<Self> {
        let mesh = build_uniform(level)?;
        let set = ShapeSet::new(p)?;
        Self::from_parts(mesh, set)
    }

    pub fn from_parts(mesh: Mesh, set: ShapeSet) -> Result<Self> {
        let dofs = build_dofmap(&mesh, &set)?;
        let p = set.p;
        let scalar = ScalarBasis::new(p - 1);
        let table = ShapeTable::new(&set, 2 * p);
        let class_mass: Vec<DMatrix<f64>> = mesh.class_maps.iter().map(|m| local_mass(&table, m)).collect();
        let mut div_ref = DMatrix::zeros(scalar.len(), set.len());
        for (q, (pt, w)) in table.rule.points.iter().zip(&table.rule.weights).enumerate() {
            let wk = scalar.eval(*pt);
            for (a, d) in table.divs_at(q).iter().enumerate() {
                for k in 0..wk.len() {
                    div_ref[(k, a)] += w * wk[k] * d;
                }
            }
        }
        let order: Vec<usize> = (0..mesh.num_tets()).collect();
        let mass = assemble_mass(&mesh, &dofs, &class_mass, &order);
        let precond =
            MassPreconditioner::Periodic(Box::new(PeriodicMassSolver::new(&mesh, &dofs, &set.supports(), &mass)?));
        Ok(Self { mesh, set, dofs, scalar, class_mass, div_ref, mass, precond })
    }

    /// Switches mass solves to block-Jacobi preconditioned CG.
    pub fn use_block_jacobi(&mut self) {
        self.precond = MassPreconditioner::BlockJacobi(self.block_jacobi());
    }

    pub fn block_jacobi(&self) -> BlockJacobi {
        let mut sizes = vec![self.dofs.face_dofs; self.mesh.num_faces()];
        sizes.extend(std::iter::repeat_n(self.dofs.interior_dofs, self.mesh.num_tets()).filter(|&k| k > 0));
        BlockJacobi::new(&self.mass, &sizes)
    }

    pub fn apply_precond(&self, r: &[f64], z: &mut [f64]) {
        match &self.precond {
            MassPreconditioner::BlockJacobi(b) => b.apply(r, z),
            MassPreconditioner::Periodic(p) => p.solve(&self.mesh, &self.dofs, r, z),
        }
    }

    pub fn p(&self) -> usize {
        self.set.p
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_dofs
    }

    pub fn local_mass(&self, t: usize) -> &DMatrix<f64> {
        &self.class_mass[self.mesh.tets[t].class]
    }

    /// Local (normalized-shape) coefficients of tet `t`.
    pub fn local_coeffs(&self, field: &FemField, t: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dofs.local_len];
        self.dofs.gather(t, &field.coeffs, &mut out);
        out
    }

    /// Solves M c = rhs.
    pub fn solve_mass(&self, rhs: &[f64], x: &mut [f64]) -> Result<SolveStats> {
        cg(|v, out| self.mass.matvec(v, out), |r, z| self.apply_precond(r, z), rhs, x, SOLVE_TOL, 10 * self.n_dofs())
    }

    /// Adds per-tet local vectors into a global vector in tet order.
    pub fn scatter(&self, local: &[Vec<f64>]) -> Vec<f64> {
        let mut g = vec![0.0; self.n_dofs()];
        for (t, v) in local.iter().enumerate() {
            for ((&d, &f), x) in self.dofs.dofs(t).iter().zip(self.dofs.factors(t)).zip(v) {
                g[d] += f * x;
            }
        }
        g
    }
}

/// Local mass matrix ∫_T Φ_a·Φ_b of Piola-mapped normalized shapes.
pub fn local_mass(table: &ShapeTable, map: &AffineMap) -> DMatrix<f64> {
    let n = table.nloc;
    let btb = map.b.transpose() * map.b;
    let mut m = DMatrix::zeros(n, n);
    for (q, w) in table.rule.weights.iter().enumerate() {
        let vals = table.values_at(q);
        let mapped: Vec<Vec3> = vals.iter().map(|v| btb * v).collect();
        for a in 0..n {
            for b in a..n {
                m[(a, b)] += w * vals[a].dot(&mapped[b]);
            }
        }
    }
    let s = 1.0 / map.det.abs();
    for a in 0..n {
        for b in a..n {
            m[(a, b)] *= s;
            m[(b, a)] = m[(a, b)];
        }
    }
    m
}

/// Assembles the global mass matrix, visiting tets in `order`.
pub fn assemble_mass(mesh: &Mesh, dofs: &DofMap, class_mass: &[DMatrix<f64>], order: &[usize]) -> SparseSymmetric {
    let mut incid: Vec<Vec<(usize, usize)>> = vec![Vec::new(); dofs.n_dofs];
    for &t in order {
        for (a, &g) in dofs.dofs(t).iter().enumerate() {
            incid[g].push((t, a));
        }
    }
    let rows = incid
        .par_iter()
        .map(|inc| {
            let mut row = Vec::with_capacity(inc.len() * dofs.local_len);
            for &(t, a) in inc {
                let m = &class_mass[mesh.tets[t].class];
                let fa = dofs.factors(t)[a];
                for (b, (&g, &fb)) in dofs.dofs(t).iter().zip(dofs.factors(t)).enumerate() {
                    row.push((g, m[(a, b)] * fa * fb));
                }
            }
            row
        })
        .collect();
    SparseSymmetric::from_rows(rows)
}

/// Global mass matrix of the space.
pub fn mass_matrix(mesh: &Mesh, dofs: &DofMap, set: &ShapeSet) -> SparseSymmetric {
    let table = ShapeTable::new(set, 2 * set.p);
    let class_mass: Vec<DMatrix<f64>> = mesh.class_maps.iter().map(|m| local_mass(&table, m)).collect();
    let order: Vec<usize> = (0..mesh.num_tets()).collect();
    assemble_mass(mesh, dofs, &class_mass, &order)
}

/// Right-hand side ∫ f·Φ_a for every global basis function.
pub fn load_vector(space: &Space, f: &(dyn Fn(&Vec3) -> Vec3 + Sync), degree: usize) -> Vec<f64> {
    let table = ShapeTable::new(&space.set, degree);
    let local: Vec<Vec<f64>> = (0..space.mesh.num_tets())
        .into_par_iter()
        .map(|t| {
            let map = space.mesh.map(t);
            let mut v = vec![0.0; table.nloc];
            for (q, (pt, w)) in table.rule.points.iter().zip(&table.rule.weights).enumerate() {
                let fx = f(&map.map(*pt));
                // ∫ f·(BΦ̂/det) |det| = sign(det) ∫ (Bᵀ f)·Φ̂
                let btf = map.b.transpose() * fx * (w * map.det.signum());
                for (a, phi) in table.values_at(q).iter().enumerate() {
                    v[a] += btf.dot(phi);
                }
            }
            v
        })
        .collect();
    space.scatter(&local)
}

/// L² projection of `f` onto the space.
pub fn l2_project(space: &Space, f: &(dyn Fn(&Vec3) -> Vec3 + Sync), degree: usize) -> Result<FemField> {
    let rhs = load_vector(space, f, degree);
    let mut x = vec![0.0; space.n_dofs()];
    space.solve_mass(&rhs, &mut x)?;
    Ok(FemField { p: space.p(), coeffs: x })
}

/// Value and divergence of a field at reference point `r` of tet `t`.
pub fn eval_in_tet(space: &Space, field: &FemField, t: usize, r: RefPoint) -> (Vec3, f64) {
    let map = space.mesh.map(t);
    let c = space.local_coeffs(field, t);
    let mut v = Vec3::zeros();
    let mut d = 0.0;
    for (a, ca) in c.iter().enumerate() {
        let (phi, div) = space.set.eval(a, r);
        v += phi * *ca;
        d += div * ca;
    }
    piola(&map, &v, d)
}

/// Value and divergence of a field at a point of the torus.
pub fn eval_field(space: &Space, field: &FemField, x: &Vec3) -> (Vec3, f64) {
    let (t, r) = space.mesh.locate(x);
    eval_in_tet(space, field, t, r)
}

/// ‖field − g‖_{L²(Ω)} by per-element quadrature of the given degree.
pub fn l2_error(space: &Space, field: &FemField, g: &(dyn Fn(&Vec3) -> Vec3 + Sync), degree: usize) -> f64 {
    let table = ShapeTable::new(&space.set, degree);
    let parts: Vec<f64> = (0..space.mesh.num_tets())
        .into_par_iter()
        .map(|t| {
            let map = space.mesh.map(t);
            let c = space.local_coeffs(field, t);
            let mut s = 0.0;
            for (q, (pt, w)) in table.rule.points.iter().zip(&table.rule.weights).enumerate() {
                let mut v = Vec3::zeros();
                for (phi, ca) in table.values_at(q).iter().zip(&c) {
                    v += phi * *ca;
                }
                let bh = map.b * v / map.det;
                s += w * (bh - g(&map.map(*pt))).norm_squared();
            }
            s * map.det.abs()
        })
        .collect();
    parts.iter().sum::<f64>().sqrt()
}

/// ‖field‖_{L²(Ω)}.
pub fn l2_norm(space: &Space, field: &FemField) -> f64 {
    l2_error(space, field, &|_| Vec3::zeros(), 2 * space.p())
}

/// Moments ⟨w_k, div B⟩_T over an orthonormal basis of P_{p−1}(T) whose first
/// member is the constant 1/√|T|.
pub fn element_div_moments(space: &Space, field: &FemField, t: usize) -> Vec<f64> {
    let map = space.mesh.map(t);
    let c = DVector::from_vec(space.local_coeffs(field, t));
    // ŵ_k/√|det| is orthonormal on T; dx = |det| dx̂, div = div̂/det
    let s = map.det.signum() / map.det.abs().sqrt();
    (&space.div_ref * c * s).iter().copied().collect()
}

/// ‖div field‖_{L²(Ω)} from the element moments (div is piecewise P_{p−1}).
pub fn div_l2_norm(space: &Space, field: &FemField) -> f64 {
    let parts: Vec<f64> = (0..space.mesh.num_tets())
        .into_par_iter()
        .map(|t| element_div_moments(space, field, t).iter().map(|m| m * m).sum::<f64>())
        .collect();
    parts.iter().sum::<f64>().sqrt()
}

/// ‖div field‖_{L²(Ω)} by direct quadrature.
pub fn div_l2_norm_quadrature(space: &Space, field: &FemField, degree: usize) -> f64 {
    let table = ShapeTable::new(&space.set, degree);
    let mut s = 0.0;
    for t in 0..space.mesh.num_tets() {
        let map = space.mesh.map(t);
        let c = space.local_coeffs(field, t);
        for (q, w) in table.rule.weights.iter().enumerate() {
            let d: f64 = table.divs_at(q).iter().zip(&c).map(|(d, c)| d * c).sum();
            s += w * (d / map.det).powi(2) * map.det.abs();
        }
    }
    s.sqrt()
}

/// dim P_{p−1}.
pub fn moment_count(p: usize) -> usize {
    scalar_dim(p - 1)
}
