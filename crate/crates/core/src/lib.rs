//! Hierarchical H(div)-conforming BDM_p elements on tetrahedra, a two-step
//! divergence-free correction built on their interior modes, and a
//! semi-Lagrangian solver for the magnetic induction equation on the
//! periodic unit cube.

pub mod assembly;
pub mod basis;
pub mod checks;
pub mod divfree;
pub mod error;
pub mod induction;
pub mod linalg;
pub mod mesh;
pub mod periodic;
pub mod polytope;
pub mod reference;

pub use error::{Error, Result};

/// `x` with 8 significant digits: fixed notation for moderate magnitudes,
/// scientific otherwise.
pub fn sig8(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-3..7).contains(&e) {
        format!("{:.*}", (7 - e) as usize, x)
    } else {
        format!("{x:.7e}")
    }
}

#[cfg(test)]
mod tests {
    use super::sig8;

    #[test]
    fn eight_significant_digits() {
        assert_eq!(sig8(0.86157), "0.86157000");
        assert_eq!(sig8(2.5219), "2.5219000");
        assert_eq!(sig8(1920.0), "1920.0000");
        assert_eq!(sig8(1.2e-7), "1.2000000e-7");
        assert_eq!(sig8(-0.0123456789), "-0.012345679");
        assert_eq!(sig8(0.0), "0");
    }
}
