use hdivct::assembly::{l2_error, l2_norm, l2_project, FemField, Space};
use hdivct::divfree::Mode;
use hdivct::induction::{
    evolve, exact_b, projection_degree, step_semi_lagrangian, step_semi_lagrangian_direct, step_with, velocity,
    InductionProblem, Integration, Transport,
};
use hdivct::linalg::norm;
use hdivct::reference::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_diff(a: &FemField, b: &FemField) -> f64 {
    a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn random_field(space: &Space, seed: u64) -> FemField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FemField { p: space.p(), coeffs: (0..space.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect() }
}

fn initial(space: &Space) -> FemField {
    l2_project(space, &|x: &Vec3| exact_b(0.0, x), projection_degree(space.p())).unwrap()
}

#[test]
fn zero_step_is_identity() {
    let space = Space::new(1, 2).unwrap();
    let f = random_field(&space, 40);
    for integration in [Integration::Exact, Integration::Quadrature(8)] {
        let g = step_semi_lagrangian(&space, &f, velocity(), 0.0, integration).unwrap();
        let rel = max_diff(&f, &g) / norm(&f.coeffs);
        assert!(rel < 1e-9, "{integration}: {rel:e}");
    }
}

#[test]
fn precomputed_quadrature_transport_matches_direct_evaluation() {
    let space = Space::new(1, 2).unwrap();
    let f = random_field(&space, 41);
    let dt = 0.13;
    let a = step_semi_lagrangian(&space, &f, velocity(), dt, Integration::Quadrature(6)).unwrap();
    let b = step_semi_lagrangian_direct(&space, &f, velocity(), dt, 6).unwrap();
    let rel = max_diff(&a, &b) / norm(&a.coeffs);
    assert!(rel < 1e-9, "{rel:e}");
}

#[test]
fn exact_transport_is_the_limit_of_fine_quadrature() {
    let space = Space::new(1, 2).unwrap();
    let f = random_field(&space, 42);
    let shift = Vec3::new(0.07, 0.19, -0.05);
    // compare right-hand sides: the mass solve would amplify the differences.
    // The integrand jumps across element faces, so quadrature converges slowly.
    let rhs = |t: Transport| t.rhs(&space, &f);
    let exact = rhs(Transport::exact(&space, shift));
    let gap = |d: usize| {
        let q = rhs(Transport::quadrature(&space, shift, d));
        exact.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / norm(&exact)
    };
    let (coarse, fine) = (gap(20), gap(50));
    assert!(fine < coarse, "finer quadrature should approach the exact transport: {coarse:e} vs {fine:e}");
    assert!(fine < 0.1, "{fine:e}");
}

#[test]
fn whole_cell_shift_permutes_coefficients() {
    // a shift by one cell maps each tet onto its neighbour of the same class
    let space = Space::new(2, 2).unwrap();
    let f = random_field(&space, 43);
    let h = space.mesh.h;
    for shift in [Vec3::new(h, 0.0, 0.0), Vec3::new(-h, h, 0.0), Vec3::new(0.0, 0.0, 3.0 * h)] {
        let g = step_with(&space, &Transport::exact(&space, shift), &f).unwrap();
        let n = space.mesh.n as i64;
        let cells = (shift / h).map(|v| v.round() as i64);
        for t in 0..space.mesh.num_tets() {
            let tet = &space.mesh.tets[t];
            let src: [usize; 3] = std::array::from_fn(|i| (tet.cube[i] as i64 - cells[i]).rem_euclid(n) as usize);
            let s = space.mesh.tet_index(src, tet.class);
            let (a, b) = (space.local_coeffs(&g, t), space.local_coeffs(&f, s));
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9, "shift {shift:?} tet {t}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn foot_points_wrap_across_periodic_faces() {
    // stepping forward then backward by the same shift returns near the start
    let space = Space::new(2, 3).unwrap();
    let f = initial(&space);
    let shift = velocity() * 0.005;
    let there = step_with(&space, &Transport::exact(&space, shift), &f).unwrap();
    let back = step_with(&space, &Transport::exact(&space, -shift), &there).unwrap();
    let exact = |x: &Vec3| exact_b(0.0005, x);
    assert!(l2_error(&space, &there, &exact, 12).is_finite());
    let round_trip = l2_error(&space, &back, &|x: &Vec3| exact_b(0.0, x), 12);
    let start = l2_error(&space, &f, &|x: &Vec3| exact_b(0.0, x), 12);
    assert!(round_trip < 2.0 * start, "{round_trip} vs {start}");
}

#[test]
fn one_step_stays_within_twice_the_projection_error() {
    let space = Space::new(2, 3).unwrap();
    let f = initial(&space);
    let dt = 0.005;
    let g = step_semi_lagrangian(&space, &f, velocity(), dt, Integration::Exact).unwrap();
    let e0 = l2_error(&space, &f, &|x: &Vec3| exact_b(0.0, x), 12);
    let e1 = l2_error(&space, &g, &|x: &Vec3| exact_b(dt, x), 12);
    assert!(e1 < 2.0 * e0, "step error {e1} vs projection error {e0}");
}

#[test]
fn global_mean_is_preserved() {
    let space = Space::new(2, 3).unwrap();
    let f = initial(&space);
    let mean = |field: &FemField| -> Vec3 {
        let c = Vec3::new(1.0, 0.0, 0.0);
        let ones = [c, Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0)];
        Vec3::from_iterator(ones.iter().map(|e| {
            let rhs = hdivct::assembly::load_vector(&space, &|_: &Vec3| *e, 2);
            rhs.iter().zip(&field.coeffs).map(|(a, b)| a * b).sum::<f64>()
        }))
    };
    let before = mean(&f);
    let problem = InductionProblem::new(2, 3, Mode::None).with_steps(0.005, 10);
    let after = mean(&evolve(&space, &problem).unwrap().field);
    assert!((before - after).norm() < 1e-6, "{before:?} -> {after:?}");
}

#[test]
fn norm_does_not_grow_under_exact_transport() {
    let space = Space::new(2, 2).unwrap();
    let f = random_field(&space, 44);
    let transport = Transport::exact(&space, velocity() * 0.005);
    let mut g = f.clone();
    for _ in 0..5 {
        g = step_with(&space, &transport, &g).unwrap();
    }
    assert!(l2_norm(&space, &g) <= l2_norm(&space, &f) * (1.0 + 1e-10));
}

#[test]
fn periodic_solver_agrees_with_block_jacobi() {
    let fast = Space::new(2, 3).unwrap();
    let mut slow = Space::new(2, 3).unwrap();
    slow.use_block_jacobi();
    let rhs = random_field(&fast, 45).coeffs;
    let (mut a, mut b) = (vec![0.0; rhs.len()], vec![0.0; rhs.len()]);
    let sa = fast.solve_mass(&rhs, &mut a).unwrap();
    slow.solve_mass(&rhs, &mut b).unwrap();
    assert!(sa.iterations <= 3, "{} iterations", sa.iterations);
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff / norm(&a) < 1e-8, "{diff:e}");
}
