//! Fast-marching inpainting.
//!
//! Hole pixels are filled in order of their distance to the hole boundary.
//! Each newly reached pixel takes a weighted average of the known pixels
//! within `radius`, each extrapolated along its own image gradient. Weights
//! favour neighbours close to the pixel, close to the same distance level, and
//! lying along the marching direction.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::cloud::Rgb;
use crate::error::{Error, Result};
use crate::morph::warp::round_half_up;
use crate::raster::Raster;

/// Distance assigned to pixels the front has not reached.
const FAR: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Known,
    Band,
    Inside,
    /// Neither a source nor a target (background outside the face).
    Ignored,
}

/// Fill every `mask` pixel of a color raster. Pixels outside the mask are
/// copied bit-exact.
pub fn inpaint(image: &Raster<Rgb>, mask: &Raster<bool>, radius: f64) -> Result<Raster<Rgb>> {
    image.check_dims(mask.dims())?;
    let known = mask.map(|m| !m);
    inpaint_color_region(image, &known, mask, radius)
}

/// Depth-raster counterpart of [`inpaint`].
pub fn inpaint_depth(depth: &Raster<f64>, mask: &Raster<bool>, radius: f64) -> Result<Raster<f64>> {
    depth.check_dims(mask.dims())?;
    let known = mask.map(|m| !m);
    inpaint_depth_region(depth, &known, mask, radius)
}

/// Fill `hole` pixels using only `known` pixels as sources; pixels in neither
/// set are left alone and never sampled.
pub(crate) fn inpaint_color_region(
    image: &Raster<Rgb>,
    known: &Raster<bool>,
    hole: &Raster<bool>,
    radius: f64,
) -> Result<Raster<Rgb>> {
    let mut planes: Vec<Vec<f64>> = (0..3)
        .map(|k| image.data().iter().map(|c| c[k] as f64).collect())
        .collect();
    let filled = march(&mut planes, known, hole, radius)?;
    let mut out = image.clone();
    for i in filled {
        out.data_mut()[i] = std::array::from_fn(|k| round_half_up(planes[k][i]));
    }
    Ok(out)
}

pub(crate) fn inpaint_depth_region(
    depth: &Raster<f64>,
    known: &Raster<bool>,
    hole: &Raster<bool>,
    radius: f64,
) -> Result<Raster<f64>> {
    let mut planes = vec![depth.data().to_vec()];
    let filled = march(&mut planes, known, hole, radius)?;
    let mut out = depth.clone();
    for i in filled {
        out.data_mut()[i] = planes[0][i];
    }
    Ok(out)
}

/// Run the front over `hole`, writing into every plane. Returns the indices
/// that were filled, in fill order.
fn march(planes: &mut [Vec<f64>], known: &Raster<bool>, hole: &Raster<bool>, radius: f64) -> Result<Vec<usize>> {
    known.check_dims(hole.dims())?;
    if !(radius.is_finite() && radius >= 1.0) {
        return Err(Error::InvalidParameter(format!("inpaint radius {radius} must be >= 1")));
    }
    let (w, h) = known.dims();
    let mut state: Vec<State> = known
        .data()
        .iter()
        .zip(hole.data())
        .map(|(&k, &m)| match (m, k) {
            (true, _) => State::Inside,
            (false, true) => State::Known,
            (false, false) => State::Ignored,
        })
        .collect();
    let holes = state.iter().filter(|&&s| s == State::Inside).count();
    if holes == 0 {
        return Ok(Vec::new());
    }
    if !state.contains(&State::Known) {
        return Err(Error::MaskCoversImage);
    }

    let mut t = vec![0.0f64; w * h];
    let mut heap = BinaryHeap::new();
    for i in 0..w * h {
        match state[i] {
            State::Inside => t[i] = FAR,
            State::Ignored => t[i] = FAR,
            State::Known => {
                if neighbors4(i, w, h).any(|j| state[j] == State::Inside) {
                    state[i] = State::Band;
                    heap.push(Reverse((0u64, i)));
                }
            }
            State::Band => unreachable!(),
        }
    }

    let mut order = Vec::with_capacity(holes);
    while let Some(Reverse((_, i))) = heap.pop() {
        if state[i] == State::Known {
            continue;
        }
        state[i] = State::Known;
        for j in neighbors4(i, w, h) {
            if state[j] != State::Inside {
                continue;
            }
            let (x, y) = ((j % w) as i64, (j / w) as i64);
            let tj = [(-1, -1), (1, -1), (-1, 1), (1, 1)]
                .iter()
                .map(|&(dx, dy)| solve(&state, &t, w, h, (x + dx, y), (x, y + dy)))
                .fold(FAR, f64::min);
            t[j] = tj;
            for plane in planes.iter_mut() {
                plane[j] = fill_value(plane, &state, &t, w, h, j, radius);
            }
            state[j] = State::Band;
            order.push(j);
            heap.push(Reverse((tj.to_bits(), j)));
        }
    }
    Ok(order)
}

fn neighbors4(i: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (i % w, i / w);
    [
        (x > 0).then(|| i - 1),
        (x + 1 < w).then(|| i + 1),
        (y > 0).then(|| i - w),
        (y + 1 < h).then(|| i + w),
    ]
    .into_iter()
    .flatten()
}

/// Is pixel `(x, y)` a usable source of distance and value information?
fn is_source(state: &[State], w: usize, h: usize, x: i64, y: i64) -> bool {
    x >= 0
        && y >= 0
        && (x as usize) < w
        && (y as usize) < h
        && matches!(state[y as usize * w + x as usize], State::Known | State::Band)
}

/// Upwind update of the eikonal equation |grad T| = 1 from one horizontal
/// and one vertical neighbour.
fn solve(state: &[State], t: &[f64], w: usize, h: usize, a: (i64, i64), b: (i64, i64)) -> f64 {
    let at = |p: (i64, i64)| is_source(state, w, h, p.0, p.1).then(|| t[p.1 as usize * w + p.0 as usize]);
    match (at(a), at(b)) {
        (Some(ta), Some(tb)) => {
            if (ta - tb).abs() >= 1.0 {
                1.0 + ta.min(tb)
            } else {
                (ta + tb + (2.0 - (ta - tb) * (ta - tb)).sqrt()) * 0.5
            }
        }
        (Some(ta), None) => 1.0 + ta,
        (None, Some(tb)) => 1.0 + tb,
        (None, None) => FAR,
    }
}

/// Central (or one-sided) difference of `f` at `(x, y)` over source pixels.
fn gradient(f: &[f64], state: &[State], w: usize, h: usize, x: i64, y: i64) -> [f64; 2] {
    let v = |x: i64, y: i64| f[y as usize * w + x as usize];
    let axis = |dx: i64, dy: i64| {
        let fwd = is_source(state, w, h, x + dx, y + dy);
        let bwd = is_source(state, w, h, x - dx, y - dy);
        match (fwd, bwd) {
            (true, true) => (v(x + dx, y + dy) - v(x - dx, y - dy)) * 0.5,
            (true, false) => v(x + dx, y + dy) - v(x, y),
            (false, true) => v(x, y) - v(x - dx, y - dy),
            (false, false) => 0.0,
        }
    };
    [axis(1, 0), axis(0, 1)]
}

fn fill_value(f: &[f64], state: &[State], t: &[f64], w: usize, h: usize, i: usize, radius: f64) -> f64 {
    let (x, y) = ((i % w) as i64, (i / w) as i64);
    // Marching direction, taken from the distance field around the pixel.
    let grad_t = {
        let tv = |x: i64, y: i64| t[y as usize * w + x as usize];
        let axis = |dx: i64, dy: i64| {
            let fwd = is_source(state, w, h, x + dx, y + dy);
            let bwd = is_source(state, w, h, x - dx, y - dy);
            match (fwd, bwd) {
                (true, true) => (tv(x + dx, y + dy) - tv(x - dx, y - dy)) * 0.5,
                (true, false) => tv(x + dx, y + dy) - t[i],
                (false, true) => t[i] - tv(x - dx, y - dy),
                (false, false) => 0.0,
            }
        };
        [axis(1, 0), axis(0, 1)]
    };
    let r = radius.floor() as i64;
    let r2 = radius * radius;
    let (mut num, mut den) = (0.0, 0.0);
    for qy in (y - r).max(0)..=(y + r).min(h as i64 - 1) {
        for qx in (x - r).max(0)..=(x + r).min(w as i64 - 1) {
            if (qx, qy) == (x, y) || !is_source(state, w, h, qx, qy) {
                continue;
            }
            let d = [(x - qx) as f64, (y - qy) as f64];
            let dd = d[0] * d[0] + d[1] * d[1];
            if dd > r2 {
                continue;
            }
            let q = qy as usize * w + qx as usize;
            let dst = 1.0 / (dd * dd.sqrt());
            let lev = 1.0 / (1.0 + (t[q] - t[i]).abs());
            let mut dir = (d[0] * grad_t[0] + d[1] * grad_t[1]) / dd.sqrt();
            if dir.abs() <= 0.01 {
                dir = 1e-6;
            }
            let weight = (dst * lev * dir).abs();
            let g = gradient(f, state, w, h, qx, qy);
            num += weight * (f[q] + g[0] * d[0] + g[1] * d[1]);
            den += weight;
        }
    }
    if den > 0.0 {
        num / den
    } else {
        // No source within the radius: copy the nearest upwind neighbour.
        neighbors4(i, w, h)
            .filter(|&j| matches!(state[j], State::Known | State::Band))
            .map(|j| f[j])
            .next()
            .unwrap_or(f[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> Raster<f64> {
        Raster::from_fn(w, h, |x, y| 0.3 * x as f64 + 0.2 * y as f64 + 10.0)
    }

    #[test]
    fn empty_mask_is_identity() {
        let img = Raster::from_fn(9, 7, |x, y| [(x * 20) as u8, (y * 30) as u8, 7]);
        let mask = Raster::filled(9, 7, false);
        assert_eq!(inpaint(&img, &mask, 5.0).unwrap(), img);
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = Raster::filled(20, 20, [40u8, 90, 200]);
        let mask = Raster::from_fn(20, 20, |x, y| (5..12).contains(&x) && (3..15).contains(&y));
        let out = inpaint(&img, &mask, 5.0).unwrap();
        assert!(out.data().iter().all(|&c| c == [40, 90, 200]));
    }

    #[test]
    fn single_pixel_hole_in_ramp() {
        let img = ramp(21, 21);
        let mask = Raster::from_fn(21, 21, |x, y| (x, y) == (10, 10));
        let out = inpaint_depth(&img, &mask, 5.0).unwrap();
        let expect = *img.get(10, 10);
        assert!((out.get(10, 10) - expect).abs() <= 0.02 * expect.abs());
    }

    #[test]
    fn larger_hole_in_ramp_is_close() {
        let img = ramp(40, 40);
        let mask = Raster::from_fn(40, 40, |x, y| (15..25).contains(&x) && (12..22).contains(&y));
        let out = inpaint_depth(&img, &mask, 5.0).unwrap();
        for y in 12..22 {
            for x in 15..25 {
                let e = *img.get(x, y);
                assert!((out.get(x, y) - e).abs() < 0.02 * e, "({x},{y}) {} vs {e}", out.get(x, y));
            }
        }
    }

    #[test]
    fn known_pixels_are_bit_exact() {
        let img = Raster::from_fn(16, 16, |x, y| ((x * y) as f64).sin());
        let mask = Raster::from_fn(16, 16, |x, y| (x + y) % 5 == 0);
        let out = inpaint_depth(&img, &mask, 3.0).unwrap();
        for i in 0..256 {
            if !mask.data()[i] {
                assert_eq!(out.data()[i].to_bits(), img.data()[i].to_bits());
            } else {
                assert!(out.data()[i].is_finite());
            }
        }
    }

    #[test]
    fn full_mask_is_an_error() {
        let img = Raster::filled(4, 4, [0u8; 3]);
        let mask = Raster::filled(4, 4, true);
        assert!(matches!(inpaint(&img, &mask, 5.0), Err(Error::MaskCoversImage)));
    }

    #[test]
    fn ignored_pixels_are_never_sampled() {
        let mut img = ramp(30, 10);
        for y in 0..10 {
            img.set(0, y, f64::INFINITY);
            img.set(1, y, f64::INFINITY);
        }
        let known = Raster::from_fn(30, 10, |x, _| x >= 2 && !(10..14).contains(&x));
        let hole = Raster::from_fn(30, 10, |x, _| (10..14).contains(&x));
        let out = inpaint_depth_region(&img, &known, &hole, 5.0).unwrap();
        assert!(out.data().iter().skip(2).step_by(30).all(|v| v.is_finite()));
        for y in 0..10 {
            assert!(out.get(0, y).is_infinite());
            for x in 10..14 {
                assert!((out.get(x, y) - img.get(x, y)).abs() < 0.05);
            }
        }
    }
}
