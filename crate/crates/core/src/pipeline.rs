//! The full morph flow: normalize both clouds, morph in the canonical view,
//! fill holes, clip. Errors carry the stage they came from.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cleanup::{clip_sphere_region, DEFAULT_KEEP_FRACTION};
use crate::cloud::{center_and_scale, ColoredPointCloud};
use crate::error::Error;
use crate::holefill::{fill_holes, HoleFillConfig, HoleFillResult, ViewReport};
use crate::maps_io::save_view_maps;
use crate::morph::{morph_pair_maps, LandmarkSet, MorphMaps};
use crate::projection::{back_project, CanonicalView};
use crate::sphere::{min_enclosing_sphere, BoundingSphere};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Input,
    Normalize,
    Morph,
    HoleFill,
    Cleanup,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Input => "input",
            Stage::Normalize => "normalize",
            Stage::Morph => "morph",
            Stage::HoleFill => "holefill",
            Stage::Cleanup => "cleanup",
            Stage::Output => "output",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage}: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

pub trait StageContext<T> {
    fn stage(self, stage: Stage) -> Result<T, StageError>;
}

impl<T> StageContext<T> for crate::error::Result<T> {
    fn stage(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorphConfig {
    /// Weight of the first subject.
    pub alpha: f64,
    /// Common enclosing radius both clouds are scaled to.
    pub target_radius: f64,
    pub view: CanonicalView,
    pub hole_fill: bool,
    pub holefill: HoleFillConfig,
    pub keep_fraction: f64,
}

impl Default for MorphConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            target_radius: 1.0,
            view: CanonicalView::default(),
            hole_fill: true,
            holefill: HoleFillConfig::default(),
            keep_fraction: DEFAULT_KEEP_FRACTION,
        }
    }
}

/// Point counts and spheres along the way, for the run manifest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MorphSummary {
    pub input_points: [usize; 2],
    pub input_spheres: [BoundingSphere; 2],
    pub morph_points: usize,
    pub holefill_points: Option<usize>,
    pub views: Vec<ViewReport>,
    pub cleanup_sphere: BoundingSphere,
    pub output_points: usize,
}

pub struct MorphOutput {
    pub cloud: ColoredPointCloud,
    pub maps: MorphMaps,
    pub holefill: Option<HoleFillResult>,
    pub summary: MorphSummary,
}

/// Normalize a raw cloud to the common radius around the origin.
pub fn normalize(cloud: &ColoredPointCloud, target_radius: f64) -> crate::error::Result<(ColoredPointCloud, BoundingSphere)> {
    let sphere = min_enclosing_sphere(cloud)?;
    Ok((center_and_scale(cloud, &sphere, target_radius)?, sphere))
}

/// Morph two raw clouds whose landmarks are given in canonical-view pixels
/// of the normalized clouds.
pub fn run_morph(
    pc1: &ColoredPointCloud,
    pc2: &ColoredPointCloud,
    lm1: &LandmarkSet,
    lm2: &LandmarkSet,
    config: &MorphConfig,
) -> Result<MorphOutput, StageError> {
    config.view.validate().stage(Stage::Input)?;
    if !(0.0..=1.0).contains(&config.alpha) {
        return Err(Error::InvalidParameter(format!("alpha {} outside [0, 1]", config.alpha))).stage(Stage::Input);
    }
    let (n1, s1) = normalize(pc1, config.target_radius).stage(Stage::Normalize)?;
    let (n2, s2) = normalize(pc2, config.target_radius).stage(Stage::Normalize)?;
    log::info!("normalized {} and {} points", n1.len(), n2.len());

    let maps = morph_pair_maps(&n1, &n2, lm1, lm2, &config.view, config.alpha).stage(Stage::Morph)?;
    let morphed = back_project(&maps.blended, &config.view).stage(Stage::Morph)?;
    log::info!("morph has {} points", morphed.len());

    let holefill = if config.hole_fill {
        let r = fill_holes(&morphed, &config.view, &config.holefill).stage(Stage::HoleFill)?;
        log::info!("hole filling left {} points", r.cloud.len());
        Some(r)
    } else {
        None
    };
    let filled = holefill.as_ref().map_or(&morphed, |r| &r.cloud);
    let sphere = min_enclosing_sphere(filled).stage(Stage::Cleanup)?;
    let cloud = clip_sphere_region(filled, &sphere, config.keep_fraction).stage(Stage::Cleanup)?;

    let summary = MorphSummary {
        input_points: [pc1.len(), pc2.len()],
        input_spheres: [s1, s2],
        morph_points: morphed.len(),
        holefill_points: holefill.as_ref().map(|r| r.cloud.len()),
        views: holefill.as_ref().map(|r| r.reports.clone()).unwrap_or_default(),
        cleanup_sphere: sphere,
        output_points: cloud.len(),
    };
    Ok(MorphOutput {
        cloud,
        maps,
        holefill,
        summary,
    })
}

/// Write every intermediate raster of a run as PNG maps under `dir`.
pub fn dump_debug(out: &MorphOutput, view: &CanonicalView, dir: &Path) -> crate::error::Result<()> {
    let (near, far) = (view.depth_near, view.depth_far);
    let m = &out.maps;
    for (stem, maps) in [
        ("source1", &m.source1),
        ("source2", &m.source2),
        ("warped1", &m.warped1),
        ("warped2", &m.warped2),
        ("blended", &m.blended),
    ] {
        save_view_maps(maps, dir, stem, near, far)?;
    }
    if let Some(hf) = &out.holefill {
        save_holefill_debug(hf, view, dir)?;
    }
    Ok(())
}

pub fn save_holefill_debug(hf: &HoleFillResult, view: &CanonicalView, dir: &Path) -> crate::error::Result<()> {
    let (near, far) = (view.depth_near, view.depth_far);
    save_view_maps(&hf.canonical.rendered, dir, "holefill_rendered", near, far)?;
    save_view_maps(&hf.canonical.inpainted, dir, "holefill_inpainted", near, far)?;
    save_view_maps(&hf.maps, dir, "holefill_average", near, far)?;
    for (i, v) in hf.views.iter().enumerate() {
        save_view_maps(&v.rendered, dir, &format!("view{i}_rendered"), near, far)?;
        save_view_maps(&v.inpainted, dir, &format!("view{i}_inpainted"), near, far)?;
        if let Some(r) = &v.registered {
            save_view_maps(r, dir, &format!("view{i}_registered"), near, far)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::Ellipsoid;

    fn small_view() -> CanonicalView {
        CanonicalView {
            width: 128,
            height: 128,
            scale: 55.0,
            cx: 64.0,
            cy: 64.0,
            ..CanonicalView::default()
        }
    }

    #[test]
    fn runs_end_to_end_and_is_deterministic() {
        let view = small_view();
        let a = Ellipsoid::new(1.0, 0.9, 0.8, 1);
        let b = Ellipsoid::new(0.9, 1.0, 0.7, 2);
        let (pa, pb) = (a.sampled_cloud(&view, 2), b.sampled_cloud(&view, 2));
        let config = MorphConfig {
            view,
            ..MorphConfig::default()
        };
        let run = || run_morph(&pa, &pb, &a.landmarks(&view), &b.landmarks(&view), &config).unwrap();
        let (r1, r2) = (run(), run());
        assert_eq!(r1.cloud, r2.cloud);
        assert!(r1.summary.output_points > 1000);
        assert!(r1.summary.output_points <= r1.summary.holefill_points.unwrap());
    }

    #[test]
    fn errors_name_their_stage() {
        let view = small_view();
        let a = Ellipsoid::new(1.0, 1.0, 1.0, 1);
        let lm = a.landmarks(&view);
        let same = ColoredPointCloud::new(vec![[1.0; 3]; 4], vec![[0; 3]; 4]).unwrap();
        let config = MorphConfig {
            view,
            ..MorphConfig::default()
        };
        let err = run_morph(&same, &same, &lm, &lm, &config).err().unwrap();
        assert_eq!(err.stage, Stage::Normalize);
        assert!(err.to_string().starts_with("normalize: "));
        let bad = MorphConfig {
            alpha: 1.5,
            ..config
        };
        assert_eq!(run_morph(&same, &same, &lm, &lm, &bad).err().unwrap().stage, Stage::Input);
    }
}
