use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2x3 affine map in pixel units: `[x', y'] = A [x, y] + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub m: [[f64; 3]; 2],
}

impl AffineMap {
    pub const IDENTITY: AffineMap = AffineMap {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
    };

    #[inline]
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let m = &self.m;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2],
        ]
    }

    pub fn determinant(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inverse(&self) -> Result<AffineMap> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::DegenerateTriangle);
        }
        let [[a, b, tx], [c, d, ty]] = self.m;
        let (ia, ib, ic, id) = (d / det, -b / det, -c / det, a / det);
        Ok(AffineMap {
            m: [
                [ia, ib, -(ia * tx + ib * ty)],
                [ic, id, -(ic * tx + id * ty)],
            ],
        })
    }
}

fn twice_area(t: &[[f64; 2]; 3]) -> f64 {
    (t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[1][1] - t[0][1]) * (t[2][0] - t[0][0])
}

fn is_degenerate(t: &[[f64; 2]; 3]) -> bool {
    let scale = (0..3)
        .map(|i| {
            let (a, b) = (t[i], t[(i + 1) % 3]);
            (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
        })
        .fold(0.0, f64::max);
    !(twice_area(t).abs() > 1e-12 * scale) || !scale.is_finite()
}

/// The unique affine map sending each `src[i]` to `dst[i]`.
pub fn affine_from_triangles(src: &[[f64; 2]; 3], dst: &[[f64; 2]; 3]) -> Result<AffineMap> {
    if is_degenerate(src) || is_degenerate(dst) {
        return Err(Error::DegenerateTriangle);
    }
    // Work relative to src[0] to keep the system well conditioned for
    // large pixel coordinates.
    let o = src[0];
    let a = Matrix3::new(
        src[0][0] - o[0], src[0][1] - o[1], 1.0,
        src[1][0] - o[0], src[1][1] - o[1], 1.0,
        src[2][0] - o[0], src[2][1] - o[1], 1.0,
    );
    let lu = a.lu();
    let rx = lu
        .solve(&Vector3::new(dst[0][0], dst[1][0], dst[2][0]))
        .ok_or(Error::DegenerateTriangle)?;
    let ry = lu
        .solve(&Vector3::new(dst[0][1], dst[1][1], dst[2][1]))
        .ok_or(Error::DegenerateTriangle)?;
    Ok(AffineMap {
        m: [
            [rx[0], rx[1], rx[2] - rx[0] * o[0] - rx[1] * o[1]],
            [ry[0], ry[1], ry[2] - ry[0] * o[0] - ry[1] * o[1]],
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TRI: [[f64; 2]; 3] = [[10.0, 20.0], [200.0, 35.0], [90.0, 300.0]];

    #[test]
    fn identity() {
        let a = affine_from_triangles(&TRI, &TRI).unwrap();
        for r in 0..2 {
            for c in 0..3 {
                assert!((a.m[r][c] - AffineMap::IDENTITY.m[r][c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn translation() {
        let dst = TRI.map(|p| [p[0] + 5.0, p[1] + 7.0]);
        let a = affine_from_triangles(&TRI, &dst).unwrap();
        assert!((a.m[0][2] - 5.0).abs() < 1e-9);
        assert!((a.m[1][2] - 7.0).abs() < 1e-9);
        assert!((a.m[0][0] - 1.0).abs() < 1e-12 && a.m[0][1].abs() < 1e-12);
    }

    #[test]
    fn degenerate_triangle() {
        let flat = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]];
        assert!(matches!(
            affine_from_triangles(&flat, &TRI),
            Err(Error::DegenerateTriangle)
        ));
        assert!(matches!(
            affine_from_triangles(&TRI, &flat),
            Err(Error::DegenerateTriangle)
        ));
    }

    #[test]
    fn random_pairs_map_vertices_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut tri = || -> [[f64; 2]; 3] {
            std::array::from_fn(|_| [rng.random_range(0.0..512.0), rng.random_range(0.0..512.0)])
        };
        for _ in 0..200 {
            let (s, d) = (tri(), tri());
            let Ok(a) = affine_from_triangles(&s, &d) else {
                continue;
            };
            for k in 0..3 {
                let p = a.apply(s[k]);
                assert!((p[0] - d[k][0]).abs() < 1e-9 && (p[1] - d[k][1]).abs() < 1e-9);
            }
            let inv = a.inverse().unwrap();
            let q = inv.apply(d[1]);
            assert!((q[0] - s[1][0]).abs() < 1e-8 && (q[1] - s[1][1]).abs() < 1e-8);
        }
    }
}
