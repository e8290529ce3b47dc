use hdivct::assembly::{
    assemble_mass, div_l2_norm, div_l2_norm_quadrature, element_div_moments, eval_field, l2_error, l2_project,
    FemField, Space,
};
use hdivct::basis::Support;
use hdivct::linalg::dot;
use hdivct::mesh::{build_uniform, piola};
use hdivct::reference::{quad_rule, FaceId, Vec3};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(space: &Space, rng: &mut impl Rng) -> FemField {
    FemField { p: space.p(), coeffs: (0..space.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect() }
}

#[test]
fn normal_traces_agree_across_every_face() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for (level, p) in [(1, 1), (1, 3), (2, 2), (2, 3), (3, 4)] {
        let space = Space::new(level, p).unwrap();
        let sup = space.set.supports();
        for face in &space.mesh.faces {
            let [(t1, f1), (t2, f2)] = [face.incidences[0], face.incidences[1]];
            let (m1, m2) = (space.mesh.map(t1), space.mesh.map(t2));
            let lf1 = FaceId::opposite(f1);
            let lf2 = FaceId::opposite(f2);
            let a = m1.map(lf1.point(0.0, 0.0));
            let n = (m1.map(lf1.point(1.0, 0.0)) - a).cross(&(m1.map(lf1.point(0.0, 1.0)) - a));
            for _ in 0..16 {
                let (mut s, mut t): (f64, f64) = (rng.random(), rng.random());
                if s + t > 1.0 {
                    s = 1.0 - s;
                    t = 1.0 - t;
                }
                let (r1, r2) = (lf1.point(s, t), lf2.point(s, t));
                // the two images differ by a lattice translation at most
                let shift = m1.map(r1) - m2.map(r2);
                assert!(shift.iter().all(|c| (c - c.round()).abs() < 1e-12));
                for k in 0..space.dofs.face_dofs {
                    let trace = |tet: usize, lf: usize, r, map| {
                        let a = sup.iter().position(|s| *s == Support::Face { face: lf, k }).unwrap();
                        let (v, d) = space.set.eval(a, r);
                        let (pv, _) = piola(map, &v, d);
                        n.dot(&pv) * space.dofs.factors(tet)[a]
                    };
                    let v1 = trace(t1, f1, r1, &m1);
                    let v2 = trace(t2, f2, r2, &m2);
                    assert!((v1 - v2).abs() < 1e-10 * (1.0 + v1.abs()), "level {level} p {p}: {v1} vs {v2}");
                }
            }
        }
    }
}

#[test]
fn mass_matrix_is_spd_and_symmetric() {
    let space = Space::new(1, 1).unwrap();
    assert_eq!(space.n_dofs(), 36);
    assert!(space.mass.max_asymmetry() < 1e-15);
    let dense = DMatrix::from_fn(36, 36, |i, j| space.mass.get(i, j));
    let lmin = SymmetricEigen::new(dense).eigenvalues.min();
    assert!(lmin > 0.0, "smallest eigenvalue {lmin}");
}

#[test]
fn mass_matrix_independent_of_element_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let space = Space::new(2, 2).unwrap();
    let mut order: Vec<usize> = (0..space.mesh.num_tets()).collect();
    order.shuffle(&mut rng);
    let shuffled = assemble_mass(&space.mesh, &space.dofs, &space.class_mass, &order);
    assert_eq!(shuffled.cols, space.mass.cols);
    let diff = shuffled.vals.iter().zip(&space.mass.vals).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-13);
}

#[test]
fn mass_diagonal_respects_translation_symmetry() {
    let space = Space::new(2, 2).unwrap();
    let d = space.mass.diagonal();
    // interior dofs of tets in different cubes but the same class
    let t0 = space.mesh.tet_index([0, 0, 0], 3);
    let t1 = space.mesh.tet_index([1, 0, 1], 3);
    for (a, b) in space.dofs.interior_range(t0).zip(space.dofs.interior_range(t1)) {
        assert!((d[a] - d[b]).abs() < 1e-14 * d[a]);
    }
    // same local face dof of faces related by translation
    let f0 = space.mesh.tets[t0].faces[2];
    let f1 = space.mesh.tets[t1].faces[2];
    for k in 0..space.dofs.face_dofs {
        let (a, b) = (f0 * space.dofs.face_dofs + k, f1 * space.dofs.face_dofs + k);
        assert!((d[a] - d[b]).abs() < 1e-14 * d[a]);
    }
}

#[test]
fn quadratic_form_is_the_squared_l2_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let space = Space::new(2, 3).unwrap();
    for _ in 0..3 {
        let f = random_field(&space, &mut rng);
        let mut mx = vec![0.0; space.n_dofs()];
        space.mass.matvec(&f.coeffs, &mut mx);
        let q = dot(&f.coeffs, &mx);
        let n = l2_error(&space, &f, &|_| Vec3::zeros(), 6);
        assert!((q - n * n).abs() < 1e-11 * q.max(1.0), "{q} vs {}", n * n);
    }
}

#[test]
fn projection_reproduces_members_of_the_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let space = Space::new(2, 3).unwrap();
    let f = random_field(&space, &mut rng);
    let g = |x: &Vec3| eval_field(&space, &f, x).0;
    // quadrature points are interior, so locate never hits a cut plane
    let proj = l2_project(&space, &g, 6).unwrap();
    let diff: Vec<f64> = proj.coeffs.iter().zip(&f.coeffs).map(|(a, b)| a - b).collect();
    let rel = hdivct::linalg::norm(&diff) / hdivct::linalg::norm(&f.coeffs);
    // coefficients inherit the mass-matrix conditioning from the CG residual
    assert!(rel < 1e-8, "relative coefficient error {rel:e}");
    let rel_l2 = l2_error(&space, &proj, &g, 6) / hdivct::assembly::l2_norm(&space, &f);
    assert!(rel_l2 < 1e-9, "relative L2 error {rel_l2:e}");
}

#[test]
fn divergence_norm_two_routes_and_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let space = Space::new(2, 3).unwrap();
    let f = random_field(&space, &mut rng);
    let a = div_l2_norm(&space, &f);
    let b = div_l2_norm_quadrature(&space, &f, 6);
    assert!((a - b).abs() < 1e-11 * a);
    // divergence theorem on the torus
    let total: f64 = (0..space.mesh.num_tets())
        .map(|t| element_div_moments(&space, &f, t)[0] * space.mesh.map(t).volume().sqrt())
        .sum();
    assert!(total.abs() < 1e-10, "∫ div = {total:e}");
    assert_eq!(element_div_moments(&space, &f, 0).len(), 10);
}

#[test]
fn single_lowest_order_dof_divergence() {
    let space = Space::new(2, 1).unwrap();
    let mut f = FemField::zeros(&space);
    let c = 0.7;
    f.coeffs[5] = c;
    // div of a lowest-order function is constant on each element, so the
    // norm is sqrt(Σ_T (c·div_T)² |T|)
    let rule = quad_rule(0);
    let mut expected = 0.0;
    for t in 0..space.mesh.num_tets() {
        if let Some(a) = space.dofs.dofs(t).iter().position(|&g| g == 5) {
            let map = space.mesh.map(t);
            let d = space.set.eval(a, rule.points[0]).1 / map.det * space.dofs.factors(t)[a] * c;
            expected += d * d * map.volume();
        }
    }
    assert!((div_l2_norm(&space, &f) - expected.sqrt()).abs() < 1e-12);
}

#[test]
fn mesh_volume_at_level_three() {
    let m = build_uniform(3).unwrap();
    assert_eq!(m.num_tets(), 384);
    let v: f64 = (0..m.num_tets()).map(|t| m.map(t).volume()).sum();
    assert!((v - 1.0).abs() < 1e-13);
}

proptest! {
    #[test]
    fn locate_round_trip(x in 0.0f64..1.0, y in 0.0f64..1.0, z in 0.0f64..1.0, level in 1usize..5) {
        let m = build_uniform(level).unwrap();
        let p = Vec3::new(x, y, z);
        let (t, r) = m.locate(&p);
        prop_assert!(r.is_inside(1e-12));
        prop_assert!((m.map(t).map(r) - p).norm() < 1e-12);
    }
}
