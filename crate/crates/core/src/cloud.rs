//! Colored point cloud model and rigid/similarity transforms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::BoundingSphere;

pub type Point3 = [f64; 3];
pub type Rgb = [u8; 3];

/// Ordered 3D vertices with one RGB color each.
///
/// Vertices and colors always have the same length and every coordinate is
/// finite. An empty cloud can exist as an intermediate result (for example a
/// back-projection of an all-invalid raster); stages that need points reject
/// it with [`Error::EmptyCloud`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ColoredPointCloud {
    vertices: Vec<Point3>,
    colors: Vec<Rgb>,
}

impl ColoredPointCloud {
    pub fn new(vertices: Vec<Point3>, colors: Vec<Rgb>) -> Result<Self> {
        if vertices.len() != colors.len() {
            return Err(Error::InvalidCloud(format!(
                "{} vertices but {} colors",
                vertices.len(),
                colors.len()
            )));
        }
        if let Some(i) = vertices
            .iter()
            .position(|v| v.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::InvalidCloud(format!(
                "vertex {i} has a non-finite coordinate"
            )));
        }
        Ok(Self { vertices, colors })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn colors(&self) -> &[Rgb] {
        &self.colors
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn into_parts(self) -> (Vec<Point3>, Vec<Rgb>) {
        (self.vertices, self.colors)
    }

    pub(crate) fn ensure_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyCloud)
        } else {
            Ok(())
        }
    }

    /// Keep the points for which `keep` returns true, preserving order.
    pub fn filter(&self, mut keep: impl FnMut(&Point3, &Rgb) -> bool) -> Self {
        let mut vertices = Vec::new();
        let mut colors = Vec::new();
        for (v, c) in self.vertices.iter().zip(&self.colors) {
            if keep(v, c) {
                vertices.push(*v);
                colors.push(*c);
            }
        }
        Self { vertices, colors }
    }

    fn map_vertices(&self, f: impl Fn(&Point3) -> Point3) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            colors: self.colors.clone(),
        }
    }
}

/// Move the sphere center to the origin and rescale isotropically so the
/// sphere radius becomes `target_radius`.
pub fn center_and_scale(
    cloud: &ColoredPointCloud,
    sphere: &BoundingSphere,
    target_radius: f64,
) -> Result<ColoredPointCloud> {
    cloud.ensure_nonempty()?;
    if !(target_radius.is_finite() && target_radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target radius must be positive, got {target_radius}"
        )));
    }
    if sphere.radius <= 0.0 {
        return Err(Error::ZeroRadius);
    }
    let s = target_radius / sphere.radius;
    let c = sphere.center;
    Ok(cloud.map_vertices(|v| [(v[0] - c[0]) * s, (v[1] - c[1]) * s, (v[2] - c[2]) * s]))
}

/// Add `offset` to every vertex.
pub fn translate(cloud: &ColoredPointCloud, offset: Point3) -> ColoredPointCloud {
    cloud.map_vertices(|v| [v[0] + offset[0], v[1] + offset[1], v[2] + offset[2]])
}

pub(crate) fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}
