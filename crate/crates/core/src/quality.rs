//! Per-cloud quality scores: local covariance eigen-features and CIE-LAB
//! color channels, each summarized as a histogram entropy.

use std::fmt::Write as _;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::cloud::{ColoredPointCloud, Point3, Rgb};
use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::par;

pub const DEFAULT_NEIGHBORS: usize = 30;
pub const DEFAULT_BINS: usize = 256;

/// Fixed histogram ranges, so scores are comparable across clouds.
pub const RATIO_RANGE: (f64, f64) = (0.0, 1.0);
pub const L_RANGE: (f64, f64) = (0.0, 100.0);
pub const AB_RANGE: (f64, f64) = (-128.0, 128.0);

/// Shape descriptors from the eigenvalues `l1 >= l2 >= l3 >= 0` of a
/// neighbourhood covariance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EigenFeatures {
    pub linearity: f64,
    pub planarity: f64,
    pub sphericity: f64,
    pub anisotropy: f64,
    pub curvature: f64,
}

impl EigenFeatures {
    pub fn from_eigenvalues(l1: f64, l2: f64, l3: f64) -> Self {
        if l1 <= 0.0 {
            return Self::default();
        }
        let sum = l1 + l2 + l3;
        Self {
            linearity: (l1 - l2) / l1,
            planarity: (l2 - l3) / l1,
            sphericity: l3 / l1,
            anisotropy: (l1 - l3) / l1,
            curvature: l3 / sum,
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.linearity, self.planarity, self.sphericity, self.anisotropy, self.curvature]
    }
}

pub const EIGEN_FEATURE_NAMES: [&str; 5] = ["linearity", "planarity", "sphericity", "anisotropy", "curvature"];

/// Sorted, non-negative eigenvalues of the covariance of `pts`.
pub(crate) fn covariance_eigenvalues(pts: &[Point3]) -> [f64; 3] {
    let n = pts.len() as f64;
    let mut mean = [0.0; 3];
    for p in pts {
        for a in 0..3 {
            mean[a] += p[a] / n;
        }
    }
    let mut cov = Matrix3::<f64>::zeros();
    for p in pts {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for r in 0..3 {
            for c in 0..3 {
                cov[(r, c)] += d[r] * d[c] / n;
            }
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().map(|v: &f64| v.max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    [ev[0], ev[1], ev[2]]
}

/// Eigen-features of every point's `k`-nearest-neighbour set (the point
/// itself included).
pub fn local_eigen_features(cloud: &ColoredPointCloud, k: usize) -> Result<Vec<EigenFeatures>> {
    let n = cloud.len();
    if k < 3 || k >= n {
        return Err(Error::TooFewPoints { needed: k.max(3) + 1, actual: n });
    }
    let pts = cloud.vertices();
    let tree = KdTree::new(pts);
    Ok(par::map_slice(pts, |p| {
        let hood: Vec<Point3> = tree.nearest(p, k).into_iter().map(|(i, _)| pts[i]).collect();
        let [l1, l2, l3] = covariance_eigenvalues(&hood);
        EigenFeatures::from_eigenvalues(l1, l2, l3)
    }))
}

/// sRGB (D65) to CIE-LAB.
pub fn lab_convert(colors: &[Rgb]) -> Vec<[f64; 3]> {
    colors.iter().map(rgb_to_lab).collect()
}

pub fn rgb_to_lab(c: &Rgb) -> [f64; 3] {
    let lin = |v: u8| {
        let v = v as f64 / 255.0;
        if v <= 0.04045 {
            v / 12.92
        } else {
            ((v + 0.055) / 1.055).powf(2.4)
        }
    };
    let (r, g, b) = (lin(c[0]), lin(c[1]), lin(c[2]));
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    let f = |t: f64| {
        let d: f64 = 6.0 / 29.0;
        if t > d * d * d {
            t.cbrt()
        } else {
            t / (3.0 * d * d) + 4.0 / 29.0
        }
    };
    let (fx, fy, fz) = (f(x / 0.95047), f(y), f(z / 1.08883));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Shannon entropy (bits) of a `bins`-bin histogram over `range`. Values
/// outside the range land in the end bins.
pub fn entropy_score(values: &[f64], bins: usize, range: (f64, f64)) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("entropy values"));
    }
    let (lo, hi) = range;
    if bins == 0 || !(hi > lo) {
        return Err(Error::InvalidParameter(format!("histogram of {bins} bins over [{lo}, {hi}]")));
    }
    let mut counts = vec![0usize; bins];
    for &v in values {
        let t = ((v - lo) / (hi - lo) * bins as f64).floor();
        let b = if t.is_nan() { 0 } else { t.clamp(0.0, (bins - 1) as f64) as usize };
        counts[b] += 1;
    }
    let n = values.len() as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityConfig {
    pub neighbors: usize,
    pub bins: usize,
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self {
            neighbors: DEFAULT_NEIGHBORS,
            bins: DEFAULT_BINS,
        }
    }
}

/// The eight per-cloud entropy scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityScores {
    pub l_color: f64,
    pub a_color: f64,
    pub b_color: f64,
    pub linearity: f64,
    pub planarity: f64,
    pub sphericity: f64,
    pub anisotropy: f64,
    pub curvature: f64,
}

impl QualityScores {
    pub const NAMES: [&'static str; 8] = [
        "l_color",
        "a_color",
        "b_color",
        "linearity",
        "planarity",
        "sphericity",
        "anisotropy",
        "curvature",
    ];

    pub fn as_array(&self) -> [f64; 8] {
        [
            self.l_color,
            self.a_color,
            self.b_color,
            self.linearity,
            self.planarity,
            self.sphericity,
            self.anisotropy,
            self.curvature,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub config: QualityConfig,
    pub points: usize,
    pub scores: QualityScores,
    /// Per-point values, kept for distribution plots.
    pub eigen: Vec<EigenFeatures>,
    pub lab: Vec<[f64; 3]>,
}

impl QualityReport {
    /// One row per point: `index,linearity,...,curvature,L,A,B`.
    pub fn per_point_csv(&self) -> String {
        let mut s = String::from("index,linearity,planarity,sphericity,anisotropy,curvature,l,a,b\n");
        for (i, (e, lab)) in self.eigen.iter().zip(&self.lab).enumerate() {
            let _ = write!(s, "{i}");
            for v in e.as_array().iter().chain(lab) {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

pub fn quality_report(cloud: &ColoredPointCloud, config: &QualityConfig) -> Result<QualityReport> {
    cloud.ensure_nonempty()?;
    let eigen = local_eigen_features(cloud, config.neighbors)?;
    let lab = lab_convert(cloud.colors());
    let channel = |k: usize| -> Vec<f64> { lab.iter().map(|v| v[k]).collect() };
    let feature = |k: usize| -> Vec<f64> { eigen.iter().map(|e| e.as_array()[k]).collect() };
    let bins = config.bins;
    let scores = QualityScores {
        l_color: entropy_score(&channel(0), bins, L_RANGE)?,
        a_color: entropy_score(&channel(1), bins, AB_RANGE)?,
        b_color: entropy_score(&channel(2), bins, AB_RANGE)?,
        linearity: entropy_score(&feature(0), bins, RATIO_RANGE)?,
        planarity: entropy_score(&feature(1), bins, RATIO_RANGE)?,
        sphericity: entropy_score(&feature(2), bins, RATIO_RANGE)?,
        anisotropy: entropy_score(&feature(3), bins, RATIO_RANGE)?,
        curvature: entropy_score(&feature(4), bins, RATIO_RANGE)?,
    };
    Ok(QualityReport {
        config: *config,
        points: cloud.len(),
        scores,
        eigen,
        lab,
    })
}
