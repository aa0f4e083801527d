//! Landmark-driven morphing in the canonical view.
//!
//! Both subjects are rendered into the shared orthographic view, their
//! landmarks are blended into `K_M`, `K_M` is triangulated once, and that one
//! triangulation drives the affine warps of both subjects' color *and* depth
//! rasters. The warped rasters are blended with the same factor and the
//! result is back-projected into a point cloud.

pub mod affine;
pub mod blend;
pub mod delaunay;
pub mod landmarks;
pub mod warp;

pub use affine::{affine_from_triangles, AffineMap};
pub use blend::blend_maps;
pub use delaunay::{delaunay, TriangleMesh2D};
pub use landmarks::{blend_landmarks, load_landmarks, parse_landmarks, LandmarkSet};
pub use warp::warp_maps;

use crate::cloud::ColoredPointCloud;
use crate::error::{Error, Result};
use crate::projection::{back_project, project, CanonicalView};
use crate::raster::ViewMaps;

/// Every intermediate raster of one morph, kept for debugging dumps.
#[derive(Clone, Debug)]
pub struct MorphMaps {
    pub source1: ViewMaps,
    pub source2: ViewMaps,
    pub landmarks: LandmarkSet,
    pub mesh: TriangleMesh2D,
    pub warped1: ViewMaps,
    pub warped2: ViewMaps,
    pub blended: ViewMaps,
}

/// Morph two already-rendered subjects.
pub fn morph_maps(
    maps1: ViewMaps,
    maps2: ViewMaps,
    lm1: &LandmarkSet,
    lm2: &LandmarkSet,
    alpha: f64,
) -> Result<MorphMaps> {
    let km = blend_landmarks(lm1, lm2, alpha)?;
    let mesh = delaunay(&km.points)?;
    let (warped1, warped2) = (
        warp_maps(&maps1, &mesh, &lm1.points, &km.points)?,
        warp_maps(&maps2, &mesh, &lm2.points, &km.points)?,
    );
    let blended = blend_maps(&warped1, &warped2, alpha)?;
    Ok(MorphMaps {
        source1: maps1,
        source2: maps2,
        landmarks: km,
        mesh,
        warped1,
        warped2,
        blended,
    })
}

/// Full 2D-to-3D morph of two normalized clouds.
///
/// The output has one vertex per pixel that is valid in both warped views,
/// so its size follows the raster rather than either input cloud.
pub fn morph_pair(
    pc1: &ColoredPointCloud,
    pc2: &ColoredPointCloud,
    lm1: &LandmarkSet,
    lm2: &LandmarkSet,
    view: &CanonicalView,
    alpha: f64,
) -> Result<ColoredPointCloud> {
    let maps = morph_pair_maps(pc1, pc2, lm1, lm2, view, alpha)?;
    back_project(&maps.blended, view)
}

pub fn morph_pair_maps(
    pc1: &ColoredPointCloud,
    pc2: &ColoredPointCloud,
    lm1: &LandmarkSet,
    lm2: &LandmarkSet,
    view: &CanonicalView,
    alpha: f64,
) -> Result<MorphMaps> {
    pc1.ensure_nonempty()?;
    pc2.ensure_nonempty()?;
    let maps = morph_maps(project(pc1, view)?, project(pc2, view)?, lm1, lm2, alpha)?;
    if maps.blended.is_empty() {
        return Err(Error::EmptyMorph);
    }
    Ok(maps)
}
