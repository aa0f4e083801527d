//! Generation and evaluation of 3D face-morph point clouds.

pub mod biometrics;
pub mod cleanup;
pub mod cloud;
pub mod error;
pub mod holefill;
pub mod kdtree;
pub mod mad;
pub mod maps_io;
pub mod morph;
pub mod par;
pub mod pipeline;
pub mod ply;
pub mod projection;
pub mod quality;
pub mod raster;
pub mod sphere;
pub mod synthetic;

#[cfg(test)]
#[path = "../tests/common/oracles.rs"]
pub(crate) mod testutil;

pub use cloud::{center_and_scale, translate, ColoredPointCloud, Point3, Rgb};
pub use error::{Error, Result};
pub use morph::{morph_pair, LandmarkSet};
pub use projection::{back_project, project, CanonicalView};
pub use raster::{Raster, ViewMaps};
pub use sphere::{min_enclosing_sphere, BoundingSphere};
