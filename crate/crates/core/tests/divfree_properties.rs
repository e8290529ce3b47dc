use hdivct::assembly::{div_l2_norm, element_div_moments, FemField, Space};
use hdivct::divfree::{
    correct, global_correct, global_full_correct, local_correct, local_correct_with, LocalCorrector, Mode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(space: &Space, rng: &mut impl Rng) -> FemField {
    FemField { p: space.p(), coeffs: (0..space.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect() }
}

#[test]
fn local_correction_kills_high_moments_and_keeps_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for level in [1, 2] {
        let space = Space::new(level, 3).unwrap();
        let lc = LocalCorrector::new(&space).unwrap();
        for _ in 0..20 {
            let f = random_field(&space, &mut rng);
            let (g, constants) = local_correct_with(&space, &lc, &f);
            for (t, &constant) in constants.iter().enumerate() {
                let before = element_div_moments(&space, &f, t);
                let after = element_div_moments(&space, &g, t);
                assert!((before[0] - after[0]).abs() < 1e-12, "mean moved on tet {t}");
                for m in &after[1..] {
                    assert!(m.abs() < 1e-10, "level {level} tet {t}: moment {m:e}");
                }
                let c = after[0] / space.mesh.map(t).volume().sqrt();
                assert!((c - constant).abs() < 1e-12 * c.abs().max(1.0));
            }
            let nf = space.dofs.n_face_dofs;
            assert_eq!(&f.coeffs[..nf], &g.coeffs[..nf], "face dofs must be bit-identical");
            assert!(div_l2_norm(&space, &g) <= div_l2_norm(&space, &f) + 1e-12);
        }
    }
}

#[test]
fn local_correction_is_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let space = Space::new(2, 3).unwrap();
    let f = random_field(&space, &mut rng);
    let (once, _) = local_correct(&space, &f).unwrap();
    let (twice, _) = local_correct(&space, &once).unwrap();
    let diff = once.coeffs.iter().zip(&twice.coeffs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-11, "{diff:e}");
}

#[test]
fn divergence_free_input_is_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let space = Space::new(2, 3).unwrap();
    let f = random_field(&space, &mut rng);
    let (free, _) = correct(&space, &f, Mode::LocalGlobal, None, 6).unwrap();
    let (f, r) = correct(&space, &free.clone(), Mode::Local, None, 6).unwrap();
    let diff = f.coeffs.iter().zip(&free.coeffs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-12, "local step moved a divergence-free field by {diff:e}");
    assert!(r.post_div <= r.pre_div + 1e-12);
}

#[test]
fn two_step_correction_removes_divergence() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for (level, p) in [(1, 2), (2, 3)] {
        let space = Space::new(level, p).unwrap();
        let f = random_field(&space, &mut rng);
        let (g, report) = correct(&space, &f, Mode::LocalGlobal, None, 2 * p).unwrap();
        assert!(report.post_div < 1e-5, "level {level} p {p}: {:e}", report.post_div);
        assert!(report.post_div <= report.pre_div);
        // ∫_Ω div = 0 on the torus, before and after
        for h in [&f, &g] {
            let total: f64 = (0..space.mesh.num_tets())
                .map(|t| element_div_moments(&space, h, t)[0] * space.mesh.map(t).volume().sqrt())
                .sum();
            assert!(total.abs() < 1e-10);
        }
    }
}

#[test]
fn global_step_alone_removes_piecewise_constant_divergence() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let space = Space::new(2, 1).unwrap();
    let f = random_field(&space, &mut rng);
    let (g, it, history) = global_correct(&space, &f).unwrap();
    assert!(it > 0);
    assert!(div_l2_norm(&space, &g) < 1e-8);
    assert_eq!(history.len(), it + 1);
}

#[test]
fn full_correction_decreases_divergence_monotonically() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let space = Space::new(2, 2).unwrap();
    let f = random_field(&space, &mut rng);
    let (g, it, history) = global_full_correct(&space, &f, 5e-6).unwrap();
    assert!(it > 0);
    for w in history.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} then {}", w[0], w[1]);
    }
    let d = div_l2_norm(&space, &g);
    assert!(d < 5e-6, "{d:e}");
    // loose tolerance leaves a small-divergence field alone
    let (h, it, _) = global_full_correct(&space, &g, 1e-3).unwrap();
    assert_eq!(it, 0);
    assert_eq!(h, g);
}

#[test]
fn mode_none_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let space = Space::new(1, 3).unwrap();
    let f = random_field(&space, &mut rng);
    let (g, r) = correct(&space, &f, Mode::None, None, 6).unwrap();
    assert_eq!(g, f);
    assert_eq!(r.pre_div, r.post_div);
}
