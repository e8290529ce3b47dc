use hdivct_web::{correction_norms, lemma1_text, shape_labels, shape_slice};

#[test]
fn labels_follow_the_basis_order() {
    let l = shape_labels(3).unwrap();
    assert_eq!(l.len(), 60);
    assert!(l[0].starts_with("edge-face"));
    assert!(l.last().unwrap().starts_with("face-interior"));
    assert!(shape_labels(0).is_err());
}

#[test]
fn slice_is_nan_outside_the_element() {
    let n = 9;
    let v = shape_slice(2, 0, 0.25, n).unwrap();
    assert_eq!(v.len(), 4 * n * n);
    // (ξ, η) = (0, 0) is inside, (1, 1) is outside
    assert!(v[..4].iter().all(|x| x.is_finite()));
    assert!(v[4 * (n * n - 1)..].iter().all(|x| x.is_nan()));
    assert!(shape_slice(2, 999, 0.0, n).is_err());
    assert!(shape_slice(2, 0, 0.0, 1).is_err());
}

#[test]
fn lemma1_lines() {
    let t = lemma1_text(4).unwrap();
    assert_eq!(t.lines().count(), 3);
    assert!(t.lines().all(|l| l.ends_with("PASS")));
    assert!(lemma1_text(1).is_err());
}

#[test]
fn correction_removes_divergence() {
    let v = correction_norms(1, 3, 9).unwrap();
    assert_eq!(v.len(), 8);
    let (none, local, two_step, full) = (v[0], v[1], v[2], v[3]);
    assert!(local < none);
    assert!(two_step < 1e-8);
    assert!(full < 5e-6);
    assert_eq!(v[4], 0.0);
    assert!(correction_norms(3, 3, 0).is_err());
}
