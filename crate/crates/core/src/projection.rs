//! Orthographic canonical-view rendering and back-projection.
//!
//! The camera sits on the +z side looking toward -z. A world point
//! `(x, y, z)` lands on pixel `(round(cx + s x), round(cy - s y))` and the
//! depth map stores its `z`. Of all points on one pixel the one with the
//! largest `z` (nearest to the camera) wins; equal depths go to the lowest
//! vertex index.

use serde::{Deserialize, Serialize};

use crate::cloud::{ColoredPointCloud, Point3, Rgb};
use crate::error::{Error, Result};
use crate::par;
use crate::raster::{Raster, ViewMaps, INVALID_DEPTH};

/// Fixed orthographic camera shared by every cloud that is morphed together.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CanonicalView {
    pub width: usize,
    pub height: usize,
    /// Pixels per world unit.
    pub scale: f64,
    pub cx: f64,
    pub cy: f64,
    /// Points with `z` outside `[depth_near, depth_far]` are clipped.
    pub depth_near: f64,
    pub depth_far: f64,
}

impl Default for CanonicalView {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            scale: 220.0,
            cx: 256.0,
            cy: 256.0,
            depth_near: -2.0,
            depth_far: 2.0,
        }
    }
}

impl CanonicalView {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidView("raster must be non-empty".into()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidView(format!("scale {} must be > 0", self.scale)));
        }
        if !(self.depth_near < self.depth_far) {
            return Err(Error::InvalidView(format!(
                "depth_near {} must be below depth_far {}",
                self.depth_near, self.depth_far
            )));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::InvalidView("principal point must be finite".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Continuous pixel coordinates of a world point.
    pub fn to_pixel(&self, p: &Point3) -> (f64, f64) {
        (self.cx + self.scale * p[0], self.cy - self.scale * p[1])
    }

    /// World `(x, y)` of a (possibly fractional) pixel position.
    pub fn to_world(&self, px: f64, py: f64) -> (f64, f64) {
        ((px - self.cx) / self.scale, (self.cy - py) / self.scale)
    }

    fn pixel_of(&self, p: &Point3) -> Option<usize> {
        if p[2] < self.depth_near || p[2] > self.depth_far {
            return None;
        }
        let (fx, fy) = self.to_pixel(p);
        let (px, py) = (fx.round(), fy.round());
        if px < 0.0 || py < 0.0 || px >= self.width as f64 || py >= self.height as f64 {
            return None;
        }
        Some(py as usize * self.width + px as usize)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionStats {
    /// Points that landed inside the raster and clip range.
    pub in_frustum: usize,
    /// Points outside the raster or clip range.
    pub dropped: usize,
    /// Pixels that received at least one point.
    pub valid_pixels: usize,
}

impl ProjectionStats {
    pub fn is_empty(&self) -> bool {
        self.valid_pixels == 0
    }
}

/// Render `cloud` into color, depth and validity rasters.
pub fn project(cloud: &ColoredPointCloud, view: &CanonicalView) -> Result<ViewMaps> {
    project_with_stats(cloud, view).map(|(maps, _)| maps)
}

pub fn project_with_stats(
    cloud: &ColoredPointCloud,
    view: &CanonicalView,
) -> Result<(ViewMaps, ProjectionStats)> {
    view.validate()?;
    let (w, h) = view.dims();
    let pixels: Vec<Option<usize>> = par::map_slice(cloud.vertices(), |p| view.pixel_of(p));

    // Bucket point indices by row so rows can be z-buffered independently.
    let mut row_start = vec![0usize; h + 1];
    for pix in pixels.iter().flatten() {
        row_start[pix / w + 1] += 1;
    }
    for y in 0..h {
        row_start[y + 1] += row_start[y];
    }
    let in_frustum = row_start[h];
    let mut cursor = row_start.clone();
    let mut order = vec![0u32; in_frustum];
    for (i, pix) in pixels.iter().enumerate() {
        if let Some(pix) = pix {
            let row = pix / w;
            order[cursor[row]] = i as u32;
            cursor[row] += 1;
        }
    }

    // Winner per pixel: (vertex index or u32::MAX).
    let mut winner = vec![u32::MAX; w * h];
    let verts = cloud.vertices();
    par::for_each_row(&mut winner, w, |y, row| {
        for &i in &order[row_start[y]..row_start[y + 1]] {
            let x = pixels[i as usize].unwrap() % w;
            let cur = row[x];
            // Indices within a row bucket are increasing, so a strict
            // comparison keeps the lowest index on ties.
            if cur == u32::MAX || verts[i as usize][2] > verts[cur as usize][2] {
                row[x] = i;
            }
        }
    });

    let colors = cloud.colors();
    let color = Raster::from_vec(
        w,
        h,
        winner
            .iter()
            .map(|&i| if i == u32::MAX { [0, 0, 0] } else { colors[i as usize] })
            .collect(),
    )?;
    let depth = Raster::from_vec(
        w,
        h,
        winner
            .iter()
            .map(|&i| {
                if i == u32::MAX {
                    INVALID_DEPTH
                } else {
                    verts[i as usize][2]
                }
            })
            .collect(),
    )?;
    let valid = Raster::from_vec(w, h, winner.iter().map(|&i| i != u32::MAX).collect())?;
    let maps = ViewMaps {
        color,
        depth,
        valid,
    };
    let stats = ProjectionStats {
        in_frustum,
        dropped: cloud.len() - in_frustum,
        valid_pixels: maps.valid_count(),
    };
    Ok((maps, stats))
}

/// One vertex per valid pixel, in row-major pixel order.
pub fn back_project(maps: &ViewMaps, view: &CanonicalView) -> Result<ColoredPointCloud> {
    view.validate()?;
    maps.check_dims(view.dims())?;
    let w = view.width;
    let mut vertices: Vec<Point3> = Vec::new();
    let mut colors: Vec<Rgb> = Vec::new();
    for (i, &ok) in maps.valid.data().iter().enumerate() {
        if !ok {
            continue;
        }
        let (px, py) = ((i % w) as f64, (i / w) as f64);
        let (x, y) = view.to_world(px, py);
        vertices.push([x, y, maps.depth.data()[i]]);
        colors.push(maps.color.data()[i]);
    }
    ColoredPointCloud::new(vertices, colors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn view64() -> CanonicalView {
        CanonicalView {
            width: 64,
            height: 64,
            scale: 20.0,
            cx: 32.0,
            cy: 32.0,
            depth_near: -2.0,
            depth_far: 2.0,
        }
    }

    #[test]
    fn origin_lands_on_principal_point() {
        let c = ColoredPointCloud::new(vec![[0.0; 3]], vec![[9, 8, 7]]).unwrap();
        let (m, stats) = project_with_stats(&c, &view64()).unwrap();
        assert_eq!(m.valid_count(), 1);
        assert!(*m.valid.get(32, 32));
        assert_eq!(*m.depth.get(32, 32), 0.0);
        assert_eq!(stats.in_frustum, 1);
        let back = back_project(&m, &view64()).unwrap();
        assert_eq!(back.vertices(), &[[0.0, 0.0, 0.0]]);
        assert_eq!(back.colors(), &[[9, 8, 7]]);
    }

    #[test]
    fn nearer_point_wins() {
        let c = ColoredPointCloud::new(
            vec![[0.0, 0.0, 0.2], [0.0, 0.0, 0.5]],
            vec![[1, 1, 1], [2, 2, 2]],
        )
        .unwrap();
        let m = project(&c, &view64()).unwrap();
        assert_eq!(*m.depth.get(32, 32), 0.5);
        assert_eq!(*m.color.get(32, 32), [2, 2, 2]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let c = ColoredPointCloud::new(
            vec![[0.0, 0.0, 0.3], [0.01, 0.0, 0.3]],
            vec![[1, 1, 1], [2, 2, 2]],
        )
        .unwrap();
        let m = project(&c, &view64()).unwrap();
        assert_eq!(*m.color.get(32, 32), [1, 1, 1]);
    }

    #[test]
    fn out_of_frustum_is_dropped() {
        let c = ColoredPointCloud::new(
            vec![[10.0, 0.0, 0.0], [0.0, 0.0, 5.0]],
            vec![[1, 1, 1], [2, 2, 2]],
        )
        .unwrap();
        let (m, s) = project_with_stats(&c, &view64()).unwrap();
        assert!(m.is_empty());
        assert!(s.is_empty());
        assert_eq!(s.dropped, 2);
        assert!(back_project(&m, &view64()).unwrap().is_empty());
    }

    #[test]
    fn dimension_mismatch() {
        let m = ViewMaps::empty(10, 10);
        assert!(matches!(
            back_project(&m, &view64()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn invalid_view_is_rejected() {
        let mut v = view64();
        v.depth_near = 3.0;
        assert!(v.validate().is_err());
        v = view64();
        v.scale = 0.0;
        assert!(v.validate().is_err());
    }

    proptest! {
        #[test]
        fn order_independent(
            pts in prop::collection::vec((prop::array::uniform3(-1.5f64..1.5), any::<u8>()), 1..200),
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let (v, c): (Vec<Point3>, Vec<Rgb>) = pts.iter().map(|(p, g)| (*p, [*g; 3])).unzip();
            let a = project(&ColoredPointCloud::new(v.clone(), c.clone()).unwrap(), &view64()).unwrap();
            // Shuffle only among points with distinct (pixel, depth) so the
            // index tie-break cannot legitimately change the winner.
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let mut seen = std::collections::HashSet::new();
            let unique = v.iter().all(|p| {
                let (x, y) = view64().to_pixel(p);
                seen.insert((x.round() as i64, y.round() as i64, p[2].to_bits()))
            });
            prop_assume!(unique);
            let v2: Vec<Point3> = idx.iter().map(|&i| v[i]).collect();
            let c2: Vec<Rgb> = idx.iter().map(|&i| c[i]).collect();
            let b = project(&ColoredPointCloud::new(v2, c2).unwrap(), &view64()).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn mask_matches_depth_sentinel(
            pts in prop::collection::vec(prop::array::uniform3(-2.0f64..2.0), 1..100),
        ) {
            let n = pts.len();
            let m = project(&ColoredPointCloud::new(pts, vec![[0; 3]; n]).unwrap(), &view64()).unwrap();
            for (v, d) in m.valid.data().iter().zip(m.depth.data()) {
                prop_assert_eq!(*v, *d != INVALID_DEPTH);
            }
        }
    }
}
