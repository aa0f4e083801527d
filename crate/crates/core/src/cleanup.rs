//! Final clipping of a morphed cloud against its bounding sphere.

use crate::cloud::{dist2, ColoredPointCloud};
use crate::error::{Error, Result};
use crate::sphere::BoundingSphere;

pub const DEFAULT_KEEP_FRACTION: f64 = 0.95;

/// Keep the points within `keep_fraction * radius` of the sphere center,
/// in their original order.
pub fn clip_sphere_region(
    cloud: &ColoredPointCloud,
    sphere: &BoundingSphere,
    keep_fraction: f64,
) -> Result<ColoredPointCloud> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "keep fraction {keep_fraction} outside (0, 1]"
        )));
    }
    if !(sphere.radius.is_finite() && sphere.radius >= 0.0) || sphere.center.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("invalid bounding sphere".into()));
    }
    let r = keep_fraction * sphere.radius;
    let out = cloud.filter(|p, _| dist2(p, &sphere.center) <= r * r);
    if out.is_empty() {
        return Err(Error::EmptyClip);
    }
    Ok(out)
}
