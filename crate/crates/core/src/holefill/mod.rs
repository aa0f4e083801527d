//! Filling occlusion holes of a morphed cloud.
//!
//! The cloud is rendered from the canonical view and from a handful of
//! translated copies. Every rendering is inpainted inside the face outline,
//! registered back onto the canonical rendering with ORB matches and a RANSAC
//! homography, warped (color and depth alike), and the registered renderings
//! are averaged per pixel before back-projection.

mod brief_pattern;
pub mod homography;
pub mod inpaint;
pub mod matching;
pub mod orb;

pub use homography::{homography_dlt, homography_ransac, warp_perspective, Homography, RansacParams};
pub use inpaint::{inpaint, inpaint_depth};
pub use matching::{match_bruteforce, DescriptorMatch, FeatureMatch, FeatureMatchSet};
pub use orb::{orb_features, orb_features_with, Descriptor, Feature, Keypoint, OrbParams};

use serde::{Deserialize, Serialize};

use crate::cloud::{translate, ColoredPointCloud, Point3};
use crate::error::{Error, Result};
use crate::morph::warp::round_half_up;
use crate::par;
use crate::projection::{back_project, project, CanonicalView};
use crate::raster::{Raster, ViewMaps};
use crate::sphere::min_enclosing_sphere;

/// Number of translated views rendered by default.
pub const DEFAULT_VIEW_COUNT: usize = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoleFillConfig {
    /// Translations of the rendered views. `None` derives the default set
    /// from the cloud's enclosing radius (see [`default_offsets`]).
    pub offsets: Option<Vec<Point3>>,
    pub inpaint_radius: f64,
    /// Lowe ratio for descriptor matching.
    pub match_ratio: f64,
    pub fast_threshold: f32,
    pub max_features: usize,
    pub ransac: RansacParams,
    /// Average only the registered translated views, leaving the canonical
    /// rendering out.
    pub exclude_canonical: bool,
    /// Keep every per-view raster in the result for inspection.
    pub keep_views: bool,
}

impl Default for HoleFillConfig {
    fn default() -> Self {
        let orb = OrbParams::default();
        Self {
            offsets: None,
            inpaint_radius: 5.0,
            match_ratio: 0.75,
            fast_threshold: orb.fast_threshold,
            max_features: orb.max_features,
            ransac: RansacParams::default(),
            exclude_canonical: false,
            keep_views: false,
        }
    }
}

impl HoleFillConfig {
    fn orb(&self) -> OrbParams {
        OrbParams {
            max_features: self.max_features,
            fast_threshold: self.fast_threshold,
            ..OrbParams::default()
        }
    }
}

/// `+-d` and `+-d/2` along x, `+-d` along y and `+d` along z with
/// `d = 0.15 * radius`.
pub fn default_offsets(radius: f64) -> Vec<Point3> {
    let d = 0.15 * radius;
    vec![
        [d, 0.0, 0.0],
        [-d, 0.0, 0.0],
        [d / 2.0, 0.0, 0.0],
        [-d / 2.0, 0.0, 0.0],
        [0.0, d, 0.0],
        [0.0, -d, 0.0],
        [0.0, 0.0, d],
    ]
}

/// What happened to one translated view.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViewReport {
    pub offset: Point3,
    pub holes: usize,
    pub matches: usize,
    pub inliers: usize,
    pub homography: Option<Homography>,
    /// Why the view was left out of the average, if it was.
    pub dropped: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ViewRasters {
    pub rendered: ViewMaps,
    pub inpainted: ViewMaps,
    pub registered: Option<ViewMaps>,
}

#[derive(Clone, Debug)]
pub struct HoleFillResult {
    pub cloud: ColoredPointCloud,
    /// Averaged maps that were back-projected.
    pub maps: ViewMaps,
    /// Canonical rendering before and after inpainting.
    pub canonical: ViewRasters,
    /// Holes of the canonical rendering: invalid pixels inside the outline.
    pub hole_mask: Raster<bool>,
    pub reports: Vec<ViewReport>,
    /// Per translated view, filled only with `keep_views`.
    pub views: Vec<ViewRasters>,
}

/// Fill the occlusion holes of `cloud` as seen from `view`.
pub fn fill_holes(cloud: &ColoredPointCloud, view: &CanonicalView, config: &HoleFillConfig) -> Result<HoleFillResult> {
    cloud.ensure_nonempty()?;
    let offsets = match &config.offsets {
        Some(o) => o.clone(),
        None => default_offsets(min_enclosing_sphere(cloud)?.radius),
    };
    let (w, h) = view.dims();

    let rendered = project(cloud, view)?;
    let canonical_holes = hole_mask(&rendered.valid);
    let canonical = inpaint_maps(&rendered, &canonical_holes, config.inpaint_radius)?;
    let orb = config.orb();
    let canonical_features = orb::orb_features_with(&canonical.color, &orb)?;

    let outcomes: Vec<Result<(ViewReport, ViewRasters)>> = par::map_slice(&offsets, |&offset| {
        let shifted = translate(cloud, offset);
        let rendered = project(&shifted, view)?;
        let holes = hole_mask(&rendered.valid);
        let mut inpainted = inpaint_maps(&rendered, &holes, config.inpaint_radius)?;
        // Bring depth back into the canonical frame.
        for (d, &v) in inpainted.depth.data_mut().iter_mut().zip(inpainted.valid.data()) {
            if v {
                *d -= offset[2];
            }
        }
        let mut report = ViewReport {
            offset,
            holes: holes.data().iter().filter(|&&m| m).count(),
            matches: 0,
            inliers: 0,
            homography: None,
            dropped: None,
        };
        let registered = match register(&inpainted, &canonical_features, &orb, config, &mut report) {
            Ok(hm) => Some(warp_perspective(&inpainted, &hm, w, h)?),
            Err(e) => {
                log::warn!("dropping view translated by {offset:?}: {e}");
                report.dropped = Some(e.to_string());
                None
            }
        };
        Ok((
            report,
            ViewRasters {
                rendered,
                inpainted,
                registered,
            },
        ))
    });
    let mut reports = Vec::with_capacity(offsets.len());
    let mut views = Vec::with_capacity(offsets.len());
    for o in outcomes {
        let (r, v) = o?;
        reports.push(r);
        views.push(v);
    }

    let mut contributors: Vec<&ViewMaps> = views.iter().filter_map(|v| v.registered.as_ref()).collect();
    if !config.exclude_canonical || contributors.is_empty() {
        contributors.insert(0, &canonical);
    }
    let maps = average_maps(&contributors, w, h);
    let cloud = back_project(&maps, view)?;
    if !config.keep_views {
        views.clear();
    }
    Ok(HoleFillResult {
        cloud,
        maps,
        canonical: ViewRasters {
            rendered,
            inpainted: canonical.clone(),
            registered: None,
        },
        hole_mask: canonical_holes,
        reports,
        views,
    })
}

fn register(
    maps: &ViewMaps,
    target: &[Feature],
    orb: &OrbParams,
    config: &HoleFillConfig,
    report: &mut ViewReport,
) -> Result<Homography> {
    let features = orb::orb_features_with(&maps.color, orb)?;
    let matches = FeatureMatchSet::from_features(&features, target, config.match_ratio);
    report.matches = matches.len();
    if matches.len() < 4 {
        return Err(Error::TooFewMatches(matches.len()));
    }
    let (hm, inliers) = homography_ransac(&matches, &config.ransac)?;
    report.inliers = inliers.iter().filter(|&&b| b).count();
    if report.inliers < 4 {
        return Err(Error::TooFewMatches(report.inliers));
    }
    report.homography = Some(hm);
    Ok(hm)
}

/// Inpaint color and depth inside `holes`, sampling only valid pixels. The
/// filled pixels become valid.
fn inpaint_maps(maps: &ViewMaps, holes: &Raster<bool>, radius: f64) -> Result<ViewMaps> {
    if !holes.data().contains(&true) {
        return Ok(maps.clone());
    }
    let color = inpaint::inpaint_color_region(&maps.color, &maps.valid, holes, radius)?;
    let depth = inpaint::inpaint_depth_region(&maps.depth, &maps.valid, holes, radius)?;
    let valid = Raster::from_fn(maps.width(), maps.height(), |x, y| *maps.valid.get(x, y) || *holes.get(x, y));
    ViewMaps::new(color, depth, valid)
}

/// Invalid pixels inside the convex hull of the valid ones.
pub fn hole_mask(valid: &Raster<bool>) -> Raster<bool> {
    let (w, h) = valid.dims();
    // Extreme valid pixels of each row are enough to span the hull.
    let mut pts: Vec<[i64; 2]> = Vec::new();
    for y in 0..h {
        let row = &valid.data()[y * w..(y + 1) * w];
        if let (Some(l), Some(r)) = (row.iter().position(|&v| v), row.iter().rposition(|&v| v)) {
            pts.push([l as i64, y as i64]);
            if r != l {
                pts.push([r as i64, y as i64]);
            }
        }
    }
    let hull = convex_hull(pts);
    let mut mask = Raster::filled(w, h, false);
    if hull.len() < 3 {
        return mask;
    }
    for y in 0..h {
        let Some((x0, x1)) = hull_span(&hull, y as f64) else {
            continue;
        };
        let lo = (x0 - 1e-9).ceil().max(0.0) as usize;
        let hi = (x1 + 1e-9).floor().min(w as f64 - 1.0);
        if hi < 0.0 {
            continue;
        }
        for x in lo..=hi as usize {
            if !*valid.get(x, y) {
                mask.set(x, y, true);
            }
        }
    }
    mask
}

/// Andrew's monotone chain; counter-clockwise, collinear points dropped.
fn convex_hull(mut pts: Vec<[i64; 2]>) -> Vec<[i64; 2]> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [i64; 2], a: [i64; 2], b: [i64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[i64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[i64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Horizontal extent of the hull polygon at height `y`.
fn hull_span(hull: &[[i64; 2]], y: f64) -> Option<(f64, f64)> {
    let mut span: Option<(f64, f64)> = None;
    for i in 0..hull.len() {
        let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
        let (ay, by) = (a[1] as f64, b[1] as f64);
        if y < ay.min(by) || y > ay.max(by) {
            continue;
        }
        let xs: Vec<f64> = if ay == by {
            vec![a[0] as f64, b[0] as f64]
        } else {
            vec![a[0] as f64 + (y - ay) / (by - ay) * (b[0] - a[0]) as f64]
        };
        for x in xs {
            span = Some(span.map_or((x, x), |(l, r)| (l.min(x), r.max(x))));
        }
    }
    span
}

/// Per-pixel mean over the maps valid at that pixel. Sums run in the given
/// order in double precision and are divided once.
fn average_maps(maps: &[&ViewMaps], w: usize, h: usize) -> ViewMaps {
    let mut out = ViewMaps::empty(w, h);
    for i in 0..w * h {
        let (mut n, mut rgb, mut depth) = (0usize, [0.0f64; 3], 0.0);
        for m in maps {
            if m.valid.data()[i] {
                n += 1;
                let c = m.color.data()[i];
                for k in 0..3 {
                    rgb[k] += c[k] as f64;
                }
                depth += m.depth.data()[i];
            }
        }
        if n > 0 {
            let n = n as f64;
            out.color.data_mut()[i] = rgb.map(|v| round_half_up(v / n));
            out.depth.data_mut()[i] = depth / n;
            out.valid.data_mut()[i] = true;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_mask_marks_interior_gaps_only() {
        let valid = Raster::from_fn(20, 20, |x, y| {
            let inside = (4..16).contains(&x) && (4..16).contains(&y);
            inside && !((8..11).contains(&x) && (8..11).contains(&y))
        });
        let mask = hole_mask(&valid);
        assert_eq!(mask.data().iter().filter(|&&m| m).count(), 9);
        assert!(*mask.get(9, 9));
        assert!(!*mask.get(2, 2));
    }

    #[test]
    fn hull_of_disc_excludes_background() {
        let valid = Raster::from_fn(40, 40, |x, y| {
            let (dx, dy) = (x as f64 - 20.0, y as f64 - 20.0);
            dx * dx + dy * dy <= 100.0 && !(x == 20 && y == 20)
        });
        let mask = hole_mask(&valid);
        assert!(*mask.get(20, 20));
        assert!(mask.data().iter().filter(|&&m| m).count() < 10);
    }

    #[test]
    fn average_is_convex() {
        let mut a = ViewMaps::empty(2, 1);
        let mut b = ViewMaps::empty(2, 1);
        a.color.set(0, 0, [10, 20, 30]);
        a.depth.set(0, 0, 1.0);
        a.valid.set(0, 0, true);
        b.color.set(0, 0, [20, 20, 31]);
        b.depth.set(0, 0, 2.0);
        b.valid.set(0, 0, true);
        b.color.set(1, 0, [5, 5, 5]);
        b.depth.set(1, 0, 7.0);
        b.valid.set(1, 0, true);
        let out = average_maps(&[&a, &b], 2, 1);
        assert_eq!(*out.color.get(0, 0), [15, 20, 31]);
        assert_eq!(*out.depth.get(0, 0), 1.5);
        assert_eq!(*out.color.get(1, 0), [5, 5, 5]);
        assert_eq!(*out.depth.get(1, 0), 7.0);
    }

    #[test]
    fn default_offsets_have_seven_entries() {
        let o = default_offsets(2.0);
        assert_eq!(o.len(), DEFAULT_VIEW_COUNT);
        assert!(o.contains(&[0.3, 0.0, 0.0]) && o.contains(&[-0.15, 0.0, 0.0]) && o.contains(&[0.0, 0.0, 0.3]));
    }
}
