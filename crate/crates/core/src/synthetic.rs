//! Synthetic face-like fixtures: textured half-ellipsoids sampled on the
//! canonical pixel grid, with landmark sets placed on the surface.
//!
//! These stand in for scanned faces in tests, benches and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::{ColoredPointCloud, Point3, Rgb};
use crate::morph::landmarks::{LandmarkSet, FACIAL_LANDMARKS};
use crate::projection::CanonicalView;

/// Half-ellipsoid `z = depth * sqrt(1 - (x/a)^2 - (y/b)^2)` facing the camera.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipsoid {
    pub semi_x: f64,
    pub semi_y: f64,
    pub depth: f64,
    /// Seed of the blocky color texture.
    pub texture_seed: u64,
}

impl Ellipsoid {
    pub const fn new(semi_x: f64, semi_y: f64, depth: f64, texture_seed: u64) -> Self {
        Self {
            semi_x,
            semi_y,
            depth,
            texture_seed,
        }
    }

    /// Surface height at `(x, y)`, `None` outside the footprint.
    pub fn height(&self, x: f64, y: f64) -> Option<f64> {
        let q = 1.0 - (x / self.semi_x).powi(2) - (y / self.semi_y).powi(2);
        (q >= 0.0).then(|| self.depth * q.sqrt())
    }

    /// Deterministic texture: 0.05-unit color blocks with per-block random
    /// color, so feature detectors find plenty of corners.
    pub fn color(&self, x: f64, y: f64) -> Rgb {
        let (bx, by) = ((x / 0.05).floor() as i64, (y / 0.05).floor() as i64);
        let key = (bx.wrapping_mul(73_856_093) ^ by.wrapping_mul(19_349_663)) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(key ^ self.texture_seed.wrapping_mul(0x9E37_79B9));
        [rng.random(), rng.random(), rng.random()]
    }

    /// One vertex at every pixel center of `view` that the footprint covers.
    pub fn grid_cloud(&self, view: &CanonicalView) -> ColoredPointCloud {
        self.sampled_cloud(view, 1)
    }

    /// Like [`grid_cloud`](Self::grid_cloud) with `density * density`
    /// jitter-free samples per pixel.
    pub fn sampled_cloud(&self, view: &CanonicalView, density: usize) -> ColoredPointCloud {
        let mut vertices: Vec<Point3> = Vec::new();
        let mut colors: Vec<Rgb> = Vec::new();
        let step = 1.0 / density as f64;
        let offset = if density == 1 { 0.0 } else { -0.5 + step / 2.0 };
        for py in 0..view.height {
            for px in 0..view.width {
                for sy in 0..density {
                    for sx in 0..density {
                        let fx = px as f64 + offset + sx as f64 * step;
                        let fy = py as f64 + offset + sy as f64 * step;
                        let (x, y) = view.to_world(fx, fy);
                        if let Some(z) = self.height(x, y) {
                            vertices.push([x, y, z]);
                            colors.push(self.color(x, y));
                        }
                    }
                }
            }
        }
        ColoredPointCloud::new(vertices, colors).expect("finite synthetic samples")
    }

    /// 68 landmarks on rings inside the footprint, rounded to integer pixels.
    pub fn landmarks(&self, view: &CanonicalView) -> LandmarkSet {
        let facial: Vec<[f64; 2]> = landmark_layout()
            .into_iter()
            .map(|(u, v)| {
                let (px, py) = view.to_pixel(&[u * self.semi_x, v * self.semi_y, 0.0]);
                [px.round(), py.round()]
            })
            .collect();
        LandmarkSet::with_boundary(facial, view.width, view.height)
            .expect("layout lies inside the raster")
    }
}

/// Unit-footprint landmark layout: 17 jaw points, 10 brow points, 9 nose
/// points, 12 eye points and 20 mouth points, mimicking the iBUG-68 regions.
fn landmark_layout() -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(FACIAL_LANDMARKS);
    for i in 0..17 {
        let t = std::f64::consts::PI * (1.1 + 0.8 * i as f64 / 16.0);
        pts.push((0.8 * t.cos(), 0.8 * t.sin() * 0.95 + 0.05));
    }
    for i in 0..10 {
        let side = if i < 5 { -1.0 } else { 1.0 };
        let k = (i % 5) as f64;
        pts.push((side * (0.15 + 0.1 * k), 0.45 + 0.03 * (2.0 - (k - 2.0).abs())));
    }
    for i in 0..4 {
        pts.push((0.0, 0.3 - 0.08 * i as f64));
    }
    for i in 0..5 {
        pts.push((-0.1 + 0.05 * i as f64, -0.05 - 0.02 * (2.0 - (i as f64 - 2.0).abs())));
    }
    for side in [-1.0, 1.0] {
        for i in 0..6 {
            let t = std::f64::consts::TAU * i as f64 / 6.0;
            pts.push((side * 0.3 + 0.09 * t.cos(), 0.3 + 0.04 * t.sin()));
        }
    }
    for i in 0..12 {
        let t = std::f64::consts::TAU * i as f64 / 12.0;
        pts.push((0.25 * t.cos(), -0.35 + 0.1 * t.sin()));
    }
    for i in 0..8 {
        let t = std::f64::consts::TAU * i as f64 / 8.0;
        pts.push((0.15 * t.cos(), -0.35 + 0.04 * t.sin()));
    }
    debug_assert_eq!(pts.len(), FACIAL_LANDMARKS);
    pts
}
