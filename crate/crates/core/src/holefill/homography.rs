//! Planar homographies: normalized DLT, RANSAC, and perspective warping of
//! view maps.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::holefill::matching::FeatureMatchSet;
use crate::morph::warp::sample_bilinear;
use crate::par;
use crate::raster::ViewMaps;

/// 3x3 projective transform acting on pixel coordinates, scaled so that
/// `h33 = 1` whenever `h33 != 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Homography {
    pub fn identity() -> Self {
        Self { m: Matrix3::identity() }
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateHomography("non-finite entry".into()));
        }
        let m = if m[(2, 2)] != 0.0 { m / m[(2, 2)] } else { m / m.norm() };
        let det = m.determinant();
        if det.abs() <= 1e-12 {
            return Err(Error::DegenerateHomography(format!("determinant {det:e}")));
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// Map a point; `None` when it lands on the line at infinity.
    pub fn apply(&self, p: [f64; 2]) -> Option<[f64; 2]> {
        let v = self.m * Vector3::new(p[0], p[1], 1.0);
        (v.z.abs() > 1e-12).then(|| [v.x / v.z, v.y / v.z])
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .m
            .try_inverse()
            .ok_or_else(|| Error::DegenerateHomography("singular".into()))?;
        Self::from_matrix(inv)
    }

    /// Frobenius distance between the normalized matrices.
    pub fn distance(&self, other: &Homography) -> f64 {
        (self.m - other.m).norm()
    }

    /// Row-major entries.
    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        std::array::from_fn(|r| std::array::from_fn(|c| self.m[(r, c)]))
    }
}

impl Serialize for Homography {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Homography {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        Homography::from_matrix(Matrix3::from_fn(|r, c| rows[r][c])).map_err(serde::de::Error::custom)
    }
}

/// Similarity moving the centroid to the origin and the mean distance to
/// sqrt(2).
fn normalizer(pts: &[[f64; 2]]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0] / n, b + p[1] / n));
    let mean_dist = pts.iter().map(|p| ((p[0] - mx).powi(2) + (p[1] - my).powi(2)).sqrt()).sum::<f64>() / n;
    let s = if mean_dist > 0.0 { std::f64::consts::SQRT_2 / mean_dist } else { 1.0 };
    Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0)
}

fn transform(t: &Matrix3<f64>, p: [f64; 2]) -> [f64; 2] {
    [t[(0, 0)] * p[0] + t[(0, 2)], t[(1, 1)] * p[1] + t[(1, 2)]]
}

/// Direct linear transform on Hartley-normalized points; least squares for
/// more than four correspondences.
pub fn homography_dlt(src: &[[f64; 2]], dst: &[[f64; 2]]) -> Result<Homography> {
    if src.len() != dst.len() {
        return Err(Error::DimensionMismatch {
            expected: (src.len(), 2),
            actual: (dst.len(), 2),
        });
    }
    if src.len() < 4 {
        return Err(Error::TooFewMatches(src.len()));
    }
    let (ts, td) = (normalizer(src), normalizer(dst));
    // At least 9 rows so the SVD returns the full right singular basis.
    let rows = (2 * src.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (k, (&p, &q)) in src.iter().zip(dst).enumerate() {
        let [x, y] = transform(&ts, p);
        let [u, v] = transform(&td, q);
        let r = 2 * k;
        a.row_mut(r).copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::DegenerateHomography("SVD failed".into()))?;
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("nine singular values");
    let h = v_t.row(k);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td
        .try_inverse()
        .ok_or_else(|| Error::DegenerateHomography("degenerate normalization".into()))?;
    Homography::from_matrix(td_inv * hn * ts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacParams {
    /// Inlier bound on the forward and backward transfer error, in pixels.
    pub threshold: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            threshold: 3.0,
            iterations: 2000,
            seed: 0x686f_6d6f,
        }
    }
}

/// Forward and backward transfer distances of one correspondence.
fn transfer_errors(h: &Homography, h_inv: &Homography, p: [f64; 2], q: [f64; 2]) -> Option<(f64, f64)> {
    let hp = h.apply(p)?;
    let hq = h_inv.apply(q)?;
    Some((
        ((hp[0] - q[0]).powi(2) + (hp[1] - q[1]).powi(2)).sqrt(),
        ((hq[0] - p[0]).powi(2) + (hq[1] - p[1]).powi(2)).sqrt(),
    ))
}

/// Inlier mask and total error over inliers. A correspondence is an inlier
/// when both its forward and backward transfer errors are below `threshold`.
fn consensus(h: &Homography, src: &[[f64; 2]], dst: &[[f64; 2]], threshold: f64) -> (Vec<bool>, usize, f64) {
    let Ok(h_inv) = h.inverse() else {
        return (vec![false; src.len()], 0, 0.0);
    };
    let mut mask = Vec::with_capacity(src.len());
    let (mut count, mut err) = (0, 0.0);
    for (&p, &q) in src.iter().zip(dst) {
        let inlier = match transfer_errors(h, &h_inv, p, q) {
            Some((f, b)) if f < threshold && b < threshold => {
                count += 1;
                err += f + b;
                true
            }
            _ => false,
        };
        mask.push(inlier);
    }
    (mask, count, err)
}

fn collinear(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let scale = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).max((c[0] - a[0]).powi(2) + (c[1] - a[1]).powi(2));
    cross.abs() <= 1e-6 * scale
}

fn degenerate_sample(pts: &[[f64; 2]; 4]) -> bool {
    (0..4).any(|skip| {
        let t: Vec<[f64; 2]> = (0..4).filter(|&i| i != skip).map(|i| pts[i]).collect();
        collinear(t[0], t[1], t[2])
    })
}

/// Robust homography mapping `src` pixels onto `dst` pixels.
///
/// Minimal 4-point samples are drawn from a generator seeded with
/// `params.seed`; collinear samples are redrawn. The model with the most
/// inliers (ties broken by lower summed error) is refit on its inliers until
/// the inlier count stops growing.
pub fn homography_ransac(matches: &FeatureMatchSet, params: &RansacParams) -> Result<(Homography, Vec<bool>)> {
    let (src, dst) = (matches.src_points(), matches.dst_points());
    let n = src.len();
    if n < 4 {
        return Err(Error::TooFewMatches(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(Homography, Vec<bool>, usize, f64)> = None;
    let max_draws = params.iterations.max(1) * 10;
    let (mut iterations, mut draws) = (0, 0);
    while iterations < params.iterations.max(1) && draws < max_draws {
        draws += 1;
        let idx = sample(&mut rng, n, 4);
        let s: [[f64; 2]; 4] = std::array::from_fn(|k| src[idx.index(k)]);
        let d: [[f64; 2]; 4] = std::array::from_fn(|k| dst[idx.index(k)]);
        if degenerate_sample(&s) || degenerate_sample(&d) {
            continue;
        }
        iterations += 1;
        let Ok(h) = homography_dlt(&s, &d) else {
            continue;
        };
        let (mask, count, err) = consensus(&h, &src, &dst, params.threshold);
        let better = match &best {
            None => count >= 4,
            Some((_, _, c, e)) => count > *c || (count == *c && err < *e),
        };
        if better {
            best = Some((h, mask, count, err));
        }
    }
    let (mut h, mut mask, mut count, _) =
        best.ok_or_else(|| Error::DegenerateHomography("no non-degenerate consensus".into()))?;

    for _ in 0..10 {
        let (is, id): (Vec<[f64; 2]>, Vec<[f64; 2]>) =
            (0..n).filter(|&i| mask[i]).map(|i| (src[i], dst[i])).unzip();
        let Ok(refit) = homography_dlt(&is, &id) else {
            break;
        };
        let (m2, c2, _) = consensus(&refit, &src, &dst, params.threshold);
        if c2 < count {
            break;
        }
        let grew = c2 > count;
        (h, mask, count) = (refit, m2, c2);
        if !grew {
            break;
        }
    }
    Ok((h, mask))
}

/// Resample `maps` into a `width` x `height` frame where output pixel `p`
/// reads the input at `h^-1 p` (bilinear, validity as in the affine warp).
pub fn warp_perspective(maps: &ViewMaps, h: &Homography, width: usize, height: usize) -> Result<ViewMaps> {
    let inv = h.inverse()?;
    let mut samples = vec![None; width * height];
    par::for_each_row(&mut samples, width, |y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            if let Some([sx, sy]) = inv.apply([x as f64, y as f64]) {
                let s = sample_bilinear(maps, sx, sy);
                if s.valid {
                    *out = Some((s.color, s.depth));
                }
            }
        }
    });
    let mut out = ViewMaps::empty(width, height);
    for (i, s) in samples.into_iter().enumerate() {
        if let Some((c, d)) = s {
            out.color.data_mut()[i] = c;
            out.depth.data_mut()[i] = d;
            out.valid.data_mut()[i] = true;
        }
    }
    Ok(out)
}
