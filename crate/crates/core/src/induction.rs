//! Semi-Lagrangian time stepping for the induction equation with a constant
//! velocity on the periodic unit cube.
//!
//! With U constant and div U = 0, B_t = −div(BUᵀ − UBᵀ) reduces to pure
//! advection along straight characteristics, so one step is the L² projection
//! of the field translated by U·dt.

use crate::assembly::{div_l2_norm, eval_field, l2_error, l2_project, FemField, Space};
use crate::divfree::{correct_tol, CorrectionReport, Mode, GLOBAL_FULL_TOL};
use crate::error::{Error, Result};
use crate::mesh::locate_in_cube;
use crate::polytope::tet_intersection;
use crate::reference::{quad_rule, RefPoint, Vec3};
use crate::sig8;
use nalgebra::{DMatrix, Matrix3};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use web_time::Instant;

pub const VELOCITY: [f64; 3] = [1.0, 1.0, 0.0];

pub fn velocity() -> Vec3 {
    Vec3::from(VELOCITY)
}

/// Exact solution on the torus.
pub fn exact_b(t: f64, x: &Vec3) -> Vec3 {
    let s = |a: f64| (2.0 * PI * a).sin();
    let w = s(x[0] + x[1] - x[2] - 2.0 * t);
    Vec3::new(w + s(x[1] - t), s(x[0] - t), w)
}

/// Quadrature degree for projecting the initial condition.
pub fn projection_degree(p: usize) -> usize {
    2 * p + 4
}

/// Quadrature degree for error norms.
pub fn norm_degree(p: usize) -> usize {
    2 * p + 6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cadence {
    Final,
    EveryStep,
}

impl FromStr for Cadence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "final" => Ok(Cadence::Final),
            "every-step" => Ok(Cadence::EveryStep),
            _ => Err(Error::InvalidArgument(format!("unknown cadence '{s}' (expected final or every-step)"))),
        }
    }
}

impl fmt::Display for Cadence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cadence::Final => "final",
            Cadence::EveryStep => "every-step",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InductionProblem {
    pub u: Vec3,
    pub t_end: f64,
    pub dt: f64,
    pub steps: usize,
    pub p: usize,
    pub level: usize,
    pub mode: Mode,
    pub cadence: Cadence,
    pub integration: Integration,
    /// Divergence tolerance of the global-full correction.
    pub full_tol: f64,
}

impl InductionProblem {
    /// 100 steps of 0.005 up to t = 1/2.
    pub fn new(level: usize, p: usize, mode: Mode) -> Self {
        Self {
            u: velocity(),
            t_end: 0.5,
            dt: 0.005,
            steps: 100,
            p,
            level,
            mode,
            cadence: Cadence::Final,
            integration: Integration::default_for(p),
            full_tol: GLOBAL_FULL_TOL,
        }
    }

    pub fn with_steps(mut self, dt: f64, steps: usize) -> Self {
        self.dt = dt;
        self.steps = steps;
        self.t_end = dt * steps as f64;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidArgument("degree p must be at least 1".into()));
        }
        if self.level == 0 {
            return Err(Error::InvalidArgument("mesh level must be at least 1".into()));
        }
        if !(self.dt.is_finite() && self.dt >= 0.0) {
            return Err(Error::InvalidArgument(format!("time step {} is not a non-negative number", self.dt)));
        }
        if (self.dt * self.steps as f64 - self.t_end).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "steps·dt = {} differs from t_end = {}",
                self.dt * self.steps as f64,
                self.t_end
            )));
        }
        if !(self.full_tol.is_finite() && self.full_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance {} must be positive", self.full_tol)));
        }
        if matches!(self.mode, Mode::Local) && self.p < 2 {
            return Err(Error::InvalidArgument("local correction needs p >= 2".into()));
        }
        Ok(())
    }
}

/// Foot-point contributions of one element class: the foot lies in the
/// element of class `class` of the cube at offset `delta`.
#[derive(Debug, Clone)]
struct TransportBlock {
    delta: [i64; 3],
    class: usize,
    /// `mat[(a, b)]` = ∫ Φ_a(x) · Φ'_b(x − U dt) over the group's points.
    mat: DMatrix<f64>,
}

/// How the projection integrals ∫ B_h(x − U dt)·Φ_a(x) dx are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integration {
    /// Element quadrature of the given degree, foot points evaluated one by one.
    Quadrature(usize),
    /// Exact: each element is split along the translated mesh and every piece
    /// integrated with a rule exact for the polynomial integrand.
    Exact,
}

impl Integration {
    pub fn default_for(_p: usize) -> Self {
        Integration::Exact
    }
}

impl fmt::Display for Integration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Integration::Quadrature(d) => write!(f, "quadrature-{d}"),
            Integration::Exact => f.write_str("exact"),
        }
    }
}

impl FromStr for Integration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "exact" {
            return Ok(Integration::Exact);
        }
        s.strip_prefix("quadrature-").and_then(|d| d.parse().ok()).map(Integration::Quadrature).ok_or_else(|| {
            Error::InvalidArgument(format!("unknown integration '{s}' (expected exact or quadrature-<degree>)"))
        })
    }
}

/// Precomputed semi-Lagrangian transport for a fixed shift U·dt.
///
/// On the uniform mesh every element of a class sees the same foot pattern,
/// so the right-hand side is a sum of small dense products per element.
#[derive(Debug, Clone)]
pub struct Transport {
    shift: Vec3,
    blocks: Vec<Vec<TransportBlock>>,
}

struct Accumulator<'a> {
    space: &'a Space,
    vals: Vec<Vec3>,
    divs: Vec<f64>,
    here: Vec<Vec3>,
    out: Vec<TransportBlock>,
}

impl<'a> Accumulator<'a> {
    fn new(space: &'a Space) -> Self {
        let n = space.set.len();
        Self { space, vals: vec![Vec3::zeros(); n], divs: vec![0.0; n], here: vec![Vec3::zeros(); n], out: Vec::new() }
    }

    /// Adds w Φ_a(x)·Φ'_b(y) for a point of a class-`k` element (reference
    /// point `r`) whose foot lies at reference point `rf` of the class-`kf`
    /// element of the cube at offset `delta`.
    fn add(&mut self, k: usize, r: RefPoint, delta: [i64; 3], kf: usize, rf: RefPoint, w: f64) {
        let maps = &self.space.mesh.class_maps;
        let (map, foot) = (&maps[k], &maps[kf]);
        self.space.set.eval_all(r, &mut self.vals, &mut self.divs);
        for (h, v) in self.here.iter_mut().zip(&self.vals) {
            *h = map.b * v * (w / map.det);
        }
        self.space.set.eval_all(rf, &mut self.vals, &mut self.divs);
        let nloc = self.vals.len();
        let blk = match self.out.iter().position(|b| b.delta == delta && b.class == kf) {
            Some(i) => &mut self.out[i],
            None => {
                self.out.push(TransportBlock { delta, class: kf, mat: DMatrix::zeros(nloc, nloc) });
                self.out.last_mut().unwrap()
            }
        };
        for (b, v) in self.vals.iter().enumerate() {
            let tb = foot.b * v / foot.det;
            for (a, ha) in self.here.iter().enumerate() {
                blk.mat[(a, b)] += ha.dot(&tb);
            }
        }
    }
}

fn class_vertices(space: &Space, k: usize, origin: Vec3) -> [Vec3; 4] {
    let map = &space.mesh.class_maps[k];
    std::array::from_fn(|i| map.map(RefPoint::vertex(i)) + origin)
}

impl Transport {
    pub fn new(space: &Space, shift: Vec3, integration: Integration) -> Self {
        match integration {
            Integration::Quadrature(d) => Self::quadrature(space, shift, d),
            Integration::Exact => Self::exact(space, shift),
        }
    }

    pub fn quadrature(space: &Space, shift: Vec3, degree: usize) -> Self {
        let rule = quad_rule(degree);
        let h = space.mesh.h;
        let blocks = (0..6)
            .into_par_iter()
            .map(|k| {
                let map = &space.mesh.class_maps[k];
                let mut acc = Accumulator::new(space);
                for (pt, w) in rule.points.iter().zip(&rule.weights) {
                    let y = (map.map(*pt) - shift) / h;
                    let delta = [y[0].floor() as i64, y[1].floor() as i64, y[2].floor() as i64];
                    let frac = [y[0] - delta[0] as f64, y[1] - delta[1] as f64, y[2] - delta[2] as f64];
                    let (kf, rf) = locate_in_cube(frac);
                    acc.add(k, *pt, delta, kf, rf, w * map.det.abs());
                }
                acc.out
            })
            .collect();
        Self { shift, blocks }
    }

    pub fn exact(space: &Space, shift: Vec3) -> Self {
        let h = space.mesh.h;
        let rule = quad_rule(2 * space.p());
        let s = shift / h;
        let whole = s.map(f64::floor);
        let frac = (s - whole) * h;
        let blocks = (0..6)
            .into_par_iter()
            .map(|k| {
                let map = &space.mesh.class_maps[k];
                let target = class_vertices(space, k, Vec3::zeros());
                let mut acc = Accumulator::new(space);
                for dz in -1..=0i64 {
                    for dy in -1..=0i64 {
                        for dx in -1..=0i64 {
                            let cube = Vec3::new(dx as f64, dy as f64, dz as f64) * h;
                            let delta = [dx - whole[0] as i64, dy - whole[1] as i64, dz - whole[2] as i64];
                            for kf in 0..6 {
                                let foot = &space.mesh.class_maps[kf];
                                let src = class_vertices(space, kf, cube + frac);
                                for piece in tet_intersection(&target, &src, h) {
                                    let jac = Matrix3::from_columns(&[
                                        piece[1] - piece[0],
                                        piece[2] - piece[0],
                                        piece[3] - piece[0],
                                    ]);
                                    let vol = jac.determinant().abs();
                                    for (pt, w) in rule.points.iter().zip(&rule.weights) {
                                        let x = piece[0] + jac * pt.to_vec();
                                        let r = map.inverse_map(&x);
                                        let rf = foot.inverse_map(&(x - frac - cube));
                                        acc.add(k, r, delta, kf, rf, w * vol);
                                    }
                                }
                            }
                        }
                    }
                }
                acc.out
            })
            .collect();
        Self { shift, blocks }
    }

    pub fn shift(&self) -> Vec3 {
        self.shift
    }

    /// Number of (offset, class) foot groups per element class.
    pub fn group_counts(&self) -> [usize; 6] {
        std::array::from_fn(|k| self.blocks[k].len())
    }

    /// ∫ B_h(x − U dt)·Φ_a(x) dx for every global basis function.
    pub fn rhs(&self, space: &Space, field: &FemField) -> Vec<f64> {
        let n = space.mesh.n as i64;
        let local: Vec<Vec<f64>> = (0..space.mesh.num_tets())
            .into_par_iter()
            .map(|t| {
                let tet = &space.mesh.tets[t];
                let mut v = nalgebra::DVector::zeros(space.dofs.local_len);
                for blk in &self.blocks[tet.class] {
                    let cube: [usize; 3] =
                        std::array::from_fn(|i| (tet.cube[i] as i64 + blk.delta[i]).rem_euclid(n) as usize);
                    let src = space.mesh.tet_index(cube, blk.class);
                    let c = nalgebra::DVector::from_vec(space.local_coeffs(field, src));
                    v += &blk.mat * c;
                }
                v.iter().copied().collect()
            })
            .collect();
        space.scatter(&local)
    }
}

/// One step using a precomputed transport.
pub fn step_with(space: &Space, transport: &Transport, field: &FemField) -> Result<FemField> {
    let rhs = transport.rhs(space, field);
    let mut x = field.coeffs.clone();
    space.solve_mass(&rhs, &mut x)?;
    Ok(FemField { p: field.p, coeffs: x })
}

/// One semi-Lagrangian step of size `dt` with velocity `u`.
pub fn step_semi_lagrangian(
    space: &Space,
    field: &FemField,
    u: Vec3,
    dt: f64,
    integration: Integration,
) -> Result<FemField> {
    let transport = Transport::new(space, u * dt, integration);
    step_with(space, &transport, field)
}

/// Same step with foot points located one by one by element quadrature of
/// the given degree; slow, used to cross-check the precomputed transport.
pub fn step_semi_lagrangian_direct(
    space: &Space,
    field: &FemField,
    u: Vec3,
    dt: f64,
    degree: usize,
) -> Result<FemField> {
    let shift = u * dt;
    let g = |x: &Vec3| eval_field(space, field, &(x - shift)).0;
    let rhs = crate::assembly::load_vector(space, &g, degree);
    let mut x = field.coeffs.clone();
    space.solve_mass(&rhs, &mut x)?;
    Ok(FemField { p: field.p, coeffs: x })
}

/// Field at the final time of a run, before correction.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub field: FemField,
    pub t_end: f64,
    pub walltime_s: f64,
}

/// Projects the initial condition and takes `steps` steps, applying the
/// correction after every step when the cadence asks for it.
pub fn evolve(space: &Space, problem: &InductionProblem) -> Result<Evolution> {
    problem.validate()?;
    let start = Instant::now();
    let init = |x: &Vec3| exact_b(0.0, x);
    let mut field = l2_project(space, &init, projection_degree(space.p()))?;
    let transport = Transport::new(space, problem.u * problem.dt, problem.integration);
    for _ in 0..problem.steps {
        field = step_with(space, &transport, &field)?;
        if problem.cadence == Cadence::EveryStep && problem.mode != Mode::None {
            field = correct_tol(space, &field, problem.mode, None, 0, problem.full_tol)?.0;
        }
    }
    Ok(Evolution { field, t_end: problem.t_end, walltime_s: start.elapsed().as_secs_f64() })
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub level: usize,
    pub l2_error: f64,
    pub order: Option<f64>,
    pub div_norm: f64,
    pub div_order: Option<f64>,
    pub dim_v: usize,
    pub mode: Mode,
    pub walltime_s: f64,
}

impl ExperimentRow {
    pub const CSV_HEADER: &'static str = "level,L2_error,order,div_norm,div_order,dimV,mode,walltime_s";

    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(sig8).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.level,
            sig8(self.l2_error),
            opt(self.order),
            sig8(self.div_norm),
            opt(self.div_order),
            self.dim_v,
            self.mode,
            sig8(self.walltime_s)
        )
    }
}

/// log2 of successive error ratios (uniform refinement halves h).
pub fn fill_orders(rows: &mut [ExperimentRow]) {
    for i in 1..rows.len() {
        let (prev, cur) = (&rows[i - 1], &rows[i]);
        let ratio = |a: f64, b: f64| (a > 0.0 && b > 0.0).then(|| (a / b).log2());
        let (o, d) = (ratio(prev.l2_error, cur.l2_error), ratio(prev.div_norm, cur.div_norm));
        rows[i].order = o;
        rows[i].div_order = d;
    }
}

/// Evolves once and applies each requested correction to the final field.
pub fn run_level(problem: &InductionProblem, modes: &[Mode]) -> Result<Vec<(ExperimentRow, CorrectionReport)>> {
    problem.validate()?;
    let space = Space::new(problem.level, problem.p)?;
    let evo = evolve(&space, problem)?;
    let t = evo.t_end;
    let exact = move |x: &Vec3| exact_b(t, x);
    let mut out = Vec::with_capacity(modes.len());
    for &mode in modes {
        let (field, report) =
            correct_tol(&space, &evo.field, mode, Some(&exact), norm_degree(space.p()), problem.full_tol)?;
        let row = ExperimentRow {
            level: problem.level,
            l2_error: report.post_l2.unwrap_or_else(|| l2_error(&space, &field, &exact, norm_degree(space.p()))),
            order: None,
            div_norm: div_l2_norm(&space, &field),
            div_order: None,
            dim_v: space.n_dofs(),
            mode,
            walltime_s: evo.walltime_s + report.walltime_s,
        };
        out.push((row, report));
    }
    Ok(out)
}

/// Single-mode experiment at one level.
pub fn run_experiment(problem: &InductionProblem) -> Result<(ExperimentRow, CorrectionReport)> {
    let mut v = run_level(problem, &[problem.mode])?;
    Ok(v.remove(0))
}
