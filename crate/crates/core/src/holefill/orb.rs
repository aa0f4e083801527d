//! Oriented FAST keypoints with rotated BRIEF descriptors.

use crate::cloud::Rgb;
use crate::error::{Error, Result};
use crate::holefill::brief_pattern::BRIEF_PATTERN;
use crate::par;
use crate::raster::{to_gray, Raster};

/// Side of the square patch a descriptor is computed over.
pub const PATCH_SIZE: usize = 31;
const HALF_PATCH: i64 = 15;
/// Keypoints closer than this to the border are discarded so the centroid
/// disc and the rotated test pairs stay inside the image.
const BORDER: usize = HALF_PATCH as usize + 1;

/// Bresenham circle of radius 3 used by the segment test, clockwise from
/// the top.
const CIRCLE: [(i64, i64); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];
const ARC: usize = 9;

pub type Descriptor = [u64; 4];

#[derive(Clone, Debug, PartialEq)]
pub struct OrbParams {
    pub max_features: usize,
    /// Intensity difference (0..255 gray scale) for the segment test.
    pub fast_threshold: f32,
    pub harris_k: f32,
}

impl Default for OrbParams {
    fn default() -> Self {
        Self {
            max_features: 500,
            fast_threshold: 20.0,
            harris_k: 0.04,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Keypoint {
    pub x: usize,
    pub y: usize,
    /// Orientation in radians, image axes (y down).
    pub angle: f32,
    /// Harris corner response used for ranking.
    pub response: f32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Feature {
    pub keypoint: Keypoint,
    pub descriptor: Descriptor,
}

pub fn hamming(a: &Descriptor, b: &Descriptor) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// ORB features of a color raster with default parameters.
pub fn orb_features(image: &Raster<Rgb>) -> Result<Vec<Feature>> {
    orb_features_with(image, &OrbParams::default())
}

pub fn orb_features_with(image: &Raster<Rgb>, params: &OrbParams) -> Result<Vec<Feature>> {
    orb_features_gray(&to_gray(image), params)
}

/// Detect, rank, orient and describe keypoints of a gray raster (0..255).
pub fn orb_features_gray(gray: &Raster<f32>, params: &OrbParams) -> Result<Vec<Feature>> {
    let (w, h) = gray.dims();
    if w < PATCH_SIZE || h < PATCH_SIZE {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            patch: PATCH_SIZE,
        });
    }
    let mut keypoints = detect_fast(gray, params.fast_threshold);
    for kp in &mut keypoints {
        kp.response = harris_response(gray, kp.x, kp.y, params.harris_k);
    }
    keypoints.sort_by(|a, b| {
        b.response
            .total_cmp(&a.response)
            .then(a.y.cmp(&b.y))
            .then(a.x.cmp(&b.x))
    });
    keypoints.truncate(params.max_features);

    let smooth = gaussian_blur(gray);
    Ok(par::map_slice(&keypoints, |kp| {
        let mut kp = *kp;
        kp.angle = centroid_angle(gray, kp.x, kp.y);
        Feature {
            keypoint: kp,
            descriptor: describe(&smooth, &kp),
        }
    }))
}

/// Segment-test corners (9 contiguous circle pixels all brighter or all
/// darker than the center by the threshold), non-maximum suppressed in 3x3.
fn detect_fast(gray: &Raster<f32>, threshold: f32) -> Vec<Keypoint> {
    let (w, h) = gray.dims();
    let mut score = Raster::filled(w, h, 0.0f32);
    let rows: Vec<Vec<(usize, f32)>> = par::map_range(h - 2 * BORDER, |i| {
        let y = i + BORDER;
        (BORDER..w - BORDER)
            .filter_map(|x| fast_score(gray, x, y, threshold).map(|s| (x, s)))
            .collect()
    });
    for (y, row) in (BORDER..h - BORDER).zip(&rows) {
        for &(x, s) in row {
            score.set(x, y, s);
        }
    }
    let mut out = Vec::new();
    for (y, row) in (BORDER..h - BORDER).zip(&rows) {
        for &(x, s) in row {
            // Strict against earlier neighbours, non-strict against later
            // ones, so plateaus keep exactly their first pixel.
            let is_max = (-1i64..=1).all(|dy| {
                (-1i64..=1).all(|dx| {
                    let n = *score.get((x as i64 + dx) as usize, (y as i64 + dy) as usize);
                    match (dy, dx) {
                        (0, 0) => true,
                        _ if (dy, dx) < (0, 0) => s > n,
                        _ => s >= n,
                    }
                })
            });
            if is_max {
                out.push(Keypoint {
                    x,
                    y,
                    angle: 0.0,
                    response: 0.0,
                });
            }
        }
    }
    out
}

/// Sum of the excess contrast over the threshold along the circle when
/// `(x, y)` passes the segment test.
fn fast_score(gray: &Raster<f32>, x: usize, y: usize, t: f32) -> Option<f32> {
    let p = *gray.get(x, y);
    let ring: [f32; 16] =
        std::array::from_fn(|k| *gray.get((x as i64 + CIRCLE[k].0) as usize, (y as i64 + CIRCLE[k].1) as usize));
    let class = |v: f32| -> i8 {
        if v > p + t {
            1
        } else if v < p - t {
            -1
        } else {
            0
        }
    };
    let classes = ring.map(class);
    for sign in [1i8, -1] {
        let mut run = 0;
        for k in 0..16 + ARC - 1 {
            if classes[k % 16] == sign {
                run += 1;
                if run >= ARC {
                    let s = ring
                        .iter()
                        .filter(|&&v| class(v) == sign)
                        .map(|v| (v - p).abs() - t)
                        .sum();
                    return Some(s);
                }
            } else {
                run = 0;
            }
        }
    }
    None
}

/// Harris response over a 7x7 window of Sobel gradients.
fn harris_response(gray: &Raster<f32>, x: usize, y: usize, k: f32) -> f32 {
    let g = |x: i64, y: i64| *gray.get(x as usize, y as usize);
    let (mut a, mut b, mut c) = (0.0f32, 0.0f32, 0.0f32);
    for v in y as i64 - 3..=y as i64 + 3 {
        for u in x as i64 - 3..=x as i64 + 3 {
            let ix = (g(u + 1, v - 1) + 2.0 * g(u + 1, v) + g(u + 1, v + 1))
                - (g(u - 1, v - 1) + 2.0 * g(u - 1, v) + g(u - 1, v + 1));
            let iy = (g(u - 1, v + 1) + 2.0 * g(u, v + 1) + g(u + 1, v + 1))
                - (g(u - 1, v - 1) + 2.0 * g(u, v - 1) + g(u + 1, v - 1));
            a += ix * ix;
            b += iy * iy;
            c += ix * iy;
        }
    }
    a * b - c * c - k * (a + b) * (a + b)
}

/// Direction from the keypoint to the intensity centroid of the disc of
/// radius 15 around it.
fn centroid_angle(gray: &Raster<f32>, x: usize, y: usize) -> f32 {
    let (mut m10, mut m01) = (0.0f64, 0.0f64);
    for dy in -HALF_PATCH..=HALF_PATCH {
        for dx in -HALF_PATCH..=HALF_PATCH {
            if dx * dx + dy * dy > HALF_PATCH * HALF_PATCH {
                continue;
            }
            let v = *gray.get((x as i64 + dx) as usize, (y as i64 + dy) as usize) as f64;
            m10 += dx as f64 * v;
            m01 += dy as f64 * v;
        }
    }
    m01.atan2(m10) as f32
}

fn describe(smooth: &Raster<f32>, kp: &Keypoint) -> Descriptor {
    let (s, c) = kp.angle.sin_cos();
    let at = |px: i8, py: i8| {
        let (px, py) = (px as f32, py as f32);
        let rx = (c * px - s * py).round() as i64;
        let ry = (s * px + c * py).round() as i64;
        *smooth.get((kp.x as i64 + rx) as usize, (kp.y as i64 + ry) as usize)
    };
    let mut d = [0u64; 4];
    for (i, &[x1, y1, x2, y2]) in BRIEF_PATTERN.iter().enumerate() {
        if at(x1, y1) < at(x2, y2) {
            d[i / 64] |= 1 << (i % 64);
        }
    }
    d
}

/// 7-tap Gaussian (sigma 2) with clamped borders.
fn gaussian_blur(gray: &Raster<f32>) -> Raster<f32> {
    let kernel: [f32; 7] = {
        let raw: [f32; 7] = std::array::from_fn(|i| {
            let d = i as f32 - 3.0;
            (-d * d / 8.0).exp()
        });
        let sum: f32 = raw.iter().sum();
        raw.map(|v| v / sum)
    };
    let (w, h) = gray.dims();
    let pass = |src: &Raster<f32>, horizontal: bool| {
        Raster::from_fn(w, h, |x, y| {
            kernel
                .iter()
                .enumerate()
                .map(|(i, k)| {
                    let o = i as i64 - 3;
                    let (sx, sy) = if horizontal {
                        ((x as i64 + o).clamp(0, w as i64 - 1) as usize, y)
                    } else {
                        (x, (y as i64 + o).clamp(0, h as i64 - 1) as usize)
                    };
                    k * src.get(sx, sy)
                })
                .sum()
        })
    };
    pass(&pass(gray, true), false)
}
