//! Piecewise-affine warping of view maps by inverse mapping.

use crate::cloud::Rgb;
use crate::error::{Error, Result};
use crate::morph::affine::{affine_from_triangles, AffineMap};
use crate::morph::delaunay::TriangleMesh2D;
use crate::par;
use crate::raster::{ViewMaps, INVALID_DEPTH};

/// Bilinear supports with a weight at or below this are ignored, so a
/// sample that lands on a pixel center up to round-off reads only that pixel.
const NEGLIGIBLE_WEIGHT: f64 = 1e-9;

const NO_TRIANGLE: u32 = u32::MAX;

/// Warp `maps` so that every triangle of `mesh` over `src` lands on the same
/// triangle over `dst`.
///
/// Each destination pixel inside a destination triangle samples the source
/// at the inverse-affine location: bilinear for color and depth, and valid
/// only if every bilinear support it actually reads is valid. Pixels outside
/// all triangles are invalid. A pixel on a shared edge belongs to the first
/// triangle in mesh order.
pub fn warp_maps(
    maps: &ViewMaps,
    mesh: &TriangleMesh2D,
    src: &[[f64; 2]],
    dst: &[[f64; 2]],
) -> Result<ViewMaps> {
    if src.len() != dst.len() || mesh.triangles.iter().flatten().any(|&i| i >= src.len()) {
        return Err(Error::MeshMismatch);
    }
    let (w, h) = maps.dims();
    let inverse: Vec<Option<AffineMap>> = mesh
        .triangles
        .iter()
        .map(|t| affine_from_triangles(&t.map(|i| dst[i]), &t.map(|i| src[i])).ok())
        .collect();
    let owner = rasterize_owners(mesh, dst, w, h, &inverse);

    let mut samples = vec![Sample::INVALID; w * h];
    par::for_each_row(&mut samples, w, |y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            let t = owner[y * w + x];
            if t == NO_TRIANGLE {
                continue;
            }
            let a = inverse[t as usize].expect("owner triangles are invertible");
            let s = a.apply([x as f64, y as f64]);
            *out = sample_bilinear(maps, s[0], s[1]);
        }
    });

    let mut out = ViewMaps::empty(w, h);
    for (i, s) in samples.into_iter().enumerate() {
        if s.valid {
            out.color.data_mut()[i] = s.color;
            out.depth.data_mut()[i] = s.depth;
            out.valid.data_mut()[i] = true;
        }
    }
    Ok(out)
}

/// Triangle index owning each pixel, first triangle wins.
fn rasterize_owners(
    mesh: &TriangleMesh2D,
    pts: &[[f64; 2]],
    w: usize,
    h: usize,
    usable: &[Option<AffineMap>],
) -> Vec<u32> {
    let mut owner = vec![NO_TRIANGLE; w * h];
    for (ti, t) in mesh.triangles.iter().enumerate() {
        if usable[ti].is_none() {
            continue;
        }
        let [a, b, c] = t.map(|i| pts[i]);
        let area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        let eps = 1e-9 * area.abs();
        let x0 = a[0].min(b[0]).min(c[0]).floor().max(0.0) as usize;
        let y0 = a[1].min(b[1]).min(c[1]).floor().max(0.0) as usize;
        let x1 = (a[0].max(b[0]).max(c[0]).ceil() as usize).min(w - 1);
        let y1 = (a[1].max(b[1]).max(c[1]).ceil() as usize).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let idx = y * w + x;
                if owner[idx] != NO_TRIANGLE {
                    continue;
                }
                let p = [x as f64, y as f64];
                let e = |u: [f64; 2], v: [f64; 2]| {
                    ((v[0] - u[0]) * (p[1] - u[1]) - (v[1] - u[1]) * (p[0] - u[0])) * area.signum()
                };
                if e(a, b) >= -eps && e(b, c) >= -eps && e(c, a) >= -eps {
                    owner[idx] = ti as u32;
                }
            }
        }
    }
    owner
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Sample {
    pub(crate) valid: bool,
    pub(crate) color: Rgb,
    pub(crate) depth: f64,
}

impl Sample {
    const INVALID: Sample = Sample {
        valid: false,
        color: [0, 0, 0],
        depth: INVALID_DEPTH,
    };
}

pub(crate) fn sample_bilinear(maps: &ViewMaps, sx: f64, sy: f64) -> Sample {
    if !(sx.is_finite() && sy.is_finite()) {
        return Sample::INVALID;
    }
    let (w, h) = (maps.width() as i64, maps.height() as i64);
    let (x0, y0) = (sx.floor(), sy.floor());
    let (fx, fy) = (sx - x0, sy - y0);
    let (x0, y0) = (x0 as i64, y0 as i64);
    let supports = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0 + 1, y0, fx * (1.0 - fy)),
        (x0, y0 + 1, (1.0 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    ];
    let mut total = 0.0;
    let mut rgb = [0.0f64; 3];
    let mut depth = 0.0;
    for &(x, y, wgt) in &supports {
        if wgt <= NEGLIGIBLE_WEIGHT {
            continue;
        }
        if x < 0 || y < 0 || x >= w || y >= h {
            return Sample::INVALID;
        }
        let i = (y * w + x) as usize;
        if !maps.valid.data()[i] {
            return Sample::INVALID;
        }
        let c = maps.color.data()[i];
        for k in 0..3 {
            rgb[k] += wgt * c[k] as f64;
        }
        depth += wgt * maps.depth.data()[i];
        total += wgt;
    }
    if total == 0.0 {
        return Sample::INVALID;
    }
    Sample {
        valid: true,
        color: rgb.map(|v| round_half_up(v / total)),
        depth: depth / total,
    }
}

pub(crate) fn round_half_up(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
fn owners_for_tests(mesh: &TriangleMesh2D, pts: &[[f64; 2]], w: usize, h: usize) -> crate::raster::Raster<u32> {
    let usable = vec![Some(AffineMap::IDENTITY); mesh.len()];
    crate::raster::Raster::from_vec(w, h, rasterize_owners(mesh, pts, w, h, &usable)).unwrap()
}
