//! Intersection of two tetrahedra as a union of tetrahedra.
//!
//! The intersection is the convex polytope cut out by the eight face planes.
//! Its vertices are found by intersecting plane triples, and it is split into
//! tetrahedra by fanning every facet from the vertex centroid.

use crate::reference::Vec3;
use nalgebra::Matrix3;

/// Half-space n·x ≤ c.
#[derive(Debug, Clone, Copy)]
struct Plane {
    n: Vec3,
    c: f64,
}

fn tet_planes(v: &[Vec3; 4]) -> [Plane; 4] {
    std::array::from_fn(|i| {
        let f: Vec<Vec3> = (0..4).filter(|&j| j != i).map(|j| v[j]).collect();
        let mut n = (f[1] - f[0]).cross(&(f[2] - f[0]));
        n /= n.norm();
        if n.dot(&(v[i] - f[0])) > 0.0 {
            n = -n;
        }
        Plane { n, c: n.dot(&f[0]) }
    })
}

fn tet_volume(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).dot(&(c - a).cross(&(d - a))).abs() / 6.0
}

/// Tetrahedra whose union is `a ∩ b`; empty when the overlap has no volume.
///
/// `scale` is a length of the order of the tetrahedra, used for tolerances.
pub fn tet_intersection(a: &[Vec3; 4], b: &[Vec3; 4], scale: f64) -> Vec<[Vec3; 4]> {
    let eps = 1e-11 * scale;
    let planes: Vec<Plane> = tet_planes(a).into_iter().chain(tet_planes(b)).collect();
    let mut verts: Vec<Vec3> = Vec::new();
    for i in 0..planes.len() {
        for j in i + 1..planes.len() {
            for k in j + 1..planes.len() {
                let m =
                    Matrix3::from_rows(&[planes[i].n.transpose(), planes[j].n.transpose(), planes[k].n.transpose()]);
                if m.determinant().abs() < 1e-12 {
                    continue;
                }
                let Some(x) = m.lu().solve(&Vec3::new(planes[i].c, planes[j].c, planes[k].c)) else {
                    continue;
                };
                if planes.iter().all(|p| p.n.dot(&x) <= p.c + eps) && !verts.iter().any(|v| (v - x).norm() < 10.0 * eps)
                {
                    verts.push(x);
                }
            }
        }
    }
    if verts.len() < 4 {
        return Vec::new();
    }
    let center = verts.iter().sum::<Vec3>() / verts.len() as f64;
    let mut out = Vec::new();
    let mut seen: Vec<Vec<usize>> = Vec::new();
    for p in &planes {
        let on: Vec<usize> = (0..verts.len()).filter(|&i| (p.n.dot(&verts[i]) - p.c).abs() < 10.0 * eps).collect();
        if on.len() < 3 || seen.contains(&on) {
            continue;
        }
        seen.push(on.clone());
        // order the facet vertices by angle around their centroid
        let fc = on.iter().map(|&i| verts[i]).sum::<Vec3>() / on.len() as f64;
        let e1 = (verts[on[0]] - fc).normalize();
        let e2 = p.n.cross(&e1);
        let mut ring: Vec<(f64, usize)> = on
            .iter()
            .map(|&i| {
                let d = verts[i] - fc;
                (d.dot(&e2).atan2(d.dot(&e1)), i)
            })
            .collect();
        ring.sort_by(|x, y| x.0.total_cmp(&y.0));
        for w in 1..ring.len() - 1 {
            let t = [center, verts[ring[0].1], verts[ring[w].1], verts[ring[w + 1].1]];
            if tet_volume(&t[0], &t[1], &t[2], &t[3]) > 1e-16 * scale.powi(3) {
                out.push(t);
            }
        }
    }
    out
}

/// Total volume of a list of tetrahedra.
pub fn total_volume(tets: &[[Vec3; 4]]) -> f64 {
    tets.iter().map(|t| tet_volume(&t[0], &t[1], &t[2], &t[3])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> [Vec3; 4] {
        [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()]
    }

    #[test]
    fn self_intersection_is_the_tet() {
        let t = unit();
        assert!((total_volume(&tet_intersection(&t, &t, 1.0)) - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn disjoint_and_touching_tets_have_no_overlap() {
        let t = unit();
        let far = t.map(|v| v + Vec3::new(3.0, 0.0, 0.0));
        assert!(tet_intersection(&t, &far, 1.0).is_empty());
        let touching = t.map(|v| v + Vec3::new(1.0, 0.0, 0.0));
        assert!(total_volume(&tet_intersection(&t, &touching, 1.0)) < 1e-12);
    }

    #[test]
    fn half_shifted_copy() {
        // t ∩ (t + s·e_x) is the tet scaled by (1−s)
        let t = unit();
        let s = 0.3;
        let moved = t.map(|v| v + Vec3::new(s, 0.0, 0.0));
        let v = total_volume(&tet_intersection(&t, &moved, 1.0));
        assert!((v - (1.0f64 - s).powi(3) / 6.0).abs() < 1e-14);
    }

    proptest! {
        // a shifted cube split into Kuhn tets partitions each tet of the cube
        #[test]
        fn shifted_kuhn_cells_partition_a_tet(sx in 0.0f64..1.0, sy in 0.0f64..1.0, sz in 0.0f64..1.0, c in 0usize..6) {
            let chain = |corner: Vec3, k: usize| {
                let p = crate::mesh::KUHN_PERMS[k];
                let mut v = [corner; 4];
                for i in 0..3 {
                    v[i + 1] = v[i];
                    v[i + 1][p[i]] += 1.0;
                }
                v
            };
            let target = chain(Vec3::zeros(), c);
            let shift = Vec3::new(sx, sy, sz);
            let mut vol = 0.0;
            for dx in -1..=0 {
                for dy in -1..=0 {
                    for dz in -1..=0 {
                        for k in 0..6 {
                            let src = chain(Vec3::new(dx as f64, dy as f64, dz as f64) + shift, k);
                            vol += total_volume(&tet_intersection(&target, &src, 1.0));
                        }
                    }
                }
            }
            prop_assert!((vol - 1.0 / 6.0).abs() < 1e-12, "{}", vol);
        }
    }
}
