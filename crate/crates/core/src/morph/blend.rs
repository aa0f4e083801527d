use crate::error::{Error, Result};
use crate::morph::landmarks::{blend_weights, check_alpha};
use crate::morph::warp::round_half_up;
use crate::raster::ViewMaps;

/// Per-pixel convex combination `alpha * m1 + (1 - alpha) * m2` of color
/// (per channel, rounded half up) and depth. A pixel is valid only where
/// both inputs are.
pub fn blend_maps(m1: &ViewMaps, m2: &ViewMaps, alpha: f64) -> Result<ViewMaps> {
    check_alpha(alpha)?;
    if m1.dims() != m2.dims() {
        return Err(Error::DimensionMismatch {
            expected: m1.dims(),
            actual: m2.dims(),
        });
    }
    let (w1, w2) = blend_weights(alpha);
    let (w, h) = m1.dims();
    let mut out = ViewMaps::empty(w, h);
    for i in 0..w * h {
        if !(m1.valid.data()[i] && m2.valid.data()[i]) {
            continue;
        }
        let (c1, c2) = (m1.color.data()[i], m2.color.data()[i]);
        out.color.data_mut()[i] =
            std::array::from_fn(|k| round_half_up(w1 * c1[k] as f64 + w2 * c2[k] as f64));
        out.depth.data_mut()[i] = w1 * m1.depth.data()[i] + w2 * m2.depth.data()[i];
        out.valid.data_mut()[i] = true;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(color: [u8; 3], depth: f64, valid: bool) -> ViewMaps {
        let mut m = ViewMaps::empty(1, 1);
        if valid {
            m.color.set(0, 0, color);
            m.depth.set(0, 0, depth);
            m.valid.set(0, 0, true);
        }
        m
    }

    #[test]
    fn midpoint_depth() {
        let out = blend_maps(&single([0; 3], 0.2, true), &single([0; 3], 0.4, true), 0.5).unwrap();
        assert!((out.depth.get(0, 0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn half_up_rounding() {
        let out = blend_maps(&single([1, 0, 255], 0.0, true), &single([2, 1, 0], 0.0, true), 0.5).unwrap();
        assert_eq!(*out.color.get(0, 0), [2, 1, 128]);
    }

    #[test]
    fn mask_is_intersection() {
        let out = blend_maps(&single([9; 3], 1.0, true), &single([0; 3], 0.0, false), 0.5).unwrap();
        assert!(!out.valid.get(0, 0));
    }

    #[test]
    fn dims_must_match() {
        assert!(blend_maps(&ViewMaps::empty(2, 2), &ViewMaps::empty(3, 2), 0.5).is_err());
    }

    proptest! {
        #[test]
        fn fixed_point(c in prop::array::uniform3(any::<u8>()), d in -2.0f64..2.0, alpha in 0.0f64..=1.0) {
            let m = single(c, d, true);
            let out = blend_maps(&m, &m, alpha).unwrap();
            prop_assert_eq!(out.color, m.color);
            prop_assert!((out.depth.get(0, 0) - d).abs() <= 4.0 * f64::EPSILON * d.abs());
        }

        #[test]
        fn swap_symmetry(
            c1 in prop::array::uniform3(any::<u8>()), c2 in prop::array::uniform3(any::<u8>()),
            d1 in -2.0f64..2.0, d2 in -2.0f64..2.0, alpha in 0.0f64..=1.0,
        ) {
            let (a, b) = (single(c1, d1, true), single(c2, d2, true));
            let x = blend_maps(&a, &b, alpha).unwrap();
            let y = blend_maps(&b, &a, 1.0 - alpha).unwrap();
            prop_assert_eq!(x.depth.get(0, 0).to_bits(), y.depth.get(0, 0).to_bits());
            for k in 0..3 {
                prop_assert!((x.color.get(0, 0)[k] as i32 - y.color.get(0, 0)[k] as i32).abs() <= 1);
            }
        }
    }
}
