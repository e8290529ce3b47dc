//! WebAssembly bindings for a single-page demo: shape-function slices, the
//! interior-mode rank check, and the correction of a random field.

use hdivct::assembly::{FemField, Space};
use hdivct::basis::{ShapeDescriptor, ShapeSet};
use hdivct::divfree::{correct, lemma1_check, Mode};
use hdivct::reference::RefPoint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

/// Largest degree offered by the page.
pub const MAX_P: usize = 6;

fn check_degree(p: usize) -> Result<(), String> {
    if (1..=MAX_P).contains(&p) {
        Ok(())
    } else {
        Err(format!("degree must be in 1..={MAX_P}"))
    }
}

fn label(s: &ShapeDescriptor) -> String {
    match *s {
        ShapeDescriptor::EdgeFace { face, edge, i } => {
            format!("edge-face f{} {}→{} i={i}", face.j1, edge.k1, edge.k2)
        }
        ShapeDescriptor::FaceBubble { face, m, n } => format!("face-bubble f{} m={m} n={n}", face.j1),
        ShapeDescriptor::EdgeInterior { edge, i } => format!("edge-interior [{},{}] i={i}", edge.j1, edge.j2),
        ShapeDescriptor::FaceInterior { face, variant, m, n } => {
            format!("face-interior f{} τ{variant} m={m} n={n}", face.j1)
        }
        ShapeDescriptor::InteriorBubble { axis, l, m, n } => format!("interior-bubble e{axis} l={l} m={m} n={n}"),
    }
}

/// Labels of the degree-`p` shapes in coefficient order.
pub fn shape_labels(p: usize) -> Result<Vec<String>, String> {
    check_degree(p)?;
    let set = ShapeSet::new(p).map_err(|e| e.to_string())?;
    Ok(set.shapes.iter().map(label).collect())
}

/// Shape `index` on the plane ζ = `zeta` of the reference tetrahedron,
/// sampled on an n×n grid over (ξ, η) ∈ [0,1]². Four numbers per point
/// (φ_x, φ_y, φ_z, div φ), row-major in η; NaN outside the element.
pub fn shape_slice(p: usize, index: usize, zeta: f64, n: usize) -> Result<Vec<f64>, String> {
    check_degree(p)?;
    if !(2..=256).contains(&n) {
        return Err("grid size must be in 2..=256".into());
    }
    let set = ShapeSet::new(p).map_err(|e| e.to_string())?;
    if index >= set.len() {
        return Err(format!("shape index {index} out of range (degree {p} has {})", set.len()));
    }
    let mut out = Vec::with_capacity(4 * n * n);
    for j in 0..n {
        for i in 0..n {
            let pt = RefPoint::new(i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64, zeta);
            if pt.is_inside(1e-12) {
                let (v, d) = set.eval(index, pt);
                out.extend_from_slice(&[v[0], v[1], v[2], d]);
            } else {
                out.extend_from_slice(&[f64::NAN; 4]);
            }
        }
    }
    Ok(out)
}

/// One line per degree: interior count, dim P_{p−1}, rank and verdict.
pub fn lemma1_text(p_max: usize) -> Result<String, String> {
    if !(2..=MAX_P).contains(&p_max) {
        return Err(format!("degree must be in 2..={MAX_P}"));
    }
    let mut s = String::new();
    for p in 2..=p_max {
        let r = lemma1_check(p).map_err(|e| e.to_string())?;
        s.push_str(&format!(
            "p={p}  n_i={:<3} dim P_(p-1)={:<3} rank={:<3} max mean div={:.1e}  {}\n",
            r.interior_shapes,
            r.dim_p,
            r.rank,
            r.mean_div_max,
            if r.holds() { "PASS" } else { "FAIL" }
        ));
    }
    Ok(s)
}

/// Divergence norms of a random field on the level-`level` torus mesh before
/// and after each correction mode, in `Mode::ALL` order, followed by the
/// outer iteration counts of the same modes.
pub fn correction_norms(level: usize, p: usize, seed: u64) -> Result<Vec<f64>, String> {
    check_degree(p)?;
    if !(1..=2).contains(&level) {
        return Err("level must be 1 or 2".into());
    }
    if p < 2 {
        return Err("the local correction needs degree 2 or higher".into());
    }
    let space = Space::new(level, p).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = FemField { p, coeffs: (0..space.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let mut norms = Vec::new();
    let mut iterations = Vec::new();
    for mode in Mode::ALL {
        let (_, r) = correct(&space, &field, mode, None, 0).map_err(|e| e.to_string())?;
        norms.push(r.post_div);
        iterations.push(r.iterations as f64);
    }
    norms.extend(iterations);
    Ok(norms)
}

#[wasm_bindgen(js_name = shapeLabels)]
pub fn js_shape_labels(p: usize) -> Result<Vec<String>, JsValue> {
    shape_labels(p).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = shapeSlice)]
pub fn js_shape_slice(p: usize, index: usize, zeta: f64, n: usize) -> Result<Vec<f64>, JsValue> {
    shape_slice(p, index, zeta, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = lemma1Text)]
pub fn js_lemma1_text(p_max: usize) -> Result<String, JsValue> {
    lemma1_text(p_max).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = correctionNorms)]
pub fn js_correction_norms(level: usize, p: usize, seed: u32) -> Result<Vec<f64>, JsValue> {
    correction_norms(level, p, u64::from(seed)).map_err(|e| JsValue::from_str(&e))
}
