//! Incremental Bowyer-Watson Delaunay triangulation with exact predicates.
//!
//! The hull is closed with "ghost" triangles that share a vertex at
//! infinity, so no super-triangle coordinates ever enter a predicate.
//! Points are inserted in index order and the in-circle test is strict:
//! a point exactly on a circumcircle never breaks the existing triangle, so
//! co-circular ties resolve in favour of lower indices. For the unit square
//! `0:(0,0) 1:(1,0) 2:(1,1) 3:(0,1)` this yields the diagonal 0-2.

use std::collections::HashSet;

use robust::{incircle, orient2d, Coord};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GHOST: usize = usize::MAX;

/// Triangles as index triples, counter-clockwise in `(x right, y up)`
/// orientation and sorted by their index triple.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriangleMesh2D {
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh2D {
    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }
}

fn c(p: [f64; 2]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

pub(crate) fn orient(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    orient2d(c(a), c(b), c(p))
}

/// Does inserting `p` invalidate triangle `t`?
fn in_conflict(points: &[[f64; 2]], t: &[usize; 3], p: [f64; 2]) -> bool {
    if let Some(g) = t.iter().position(|&v| v == GHOST) {
        // Ghost triangle (a, b, inf) where a->b is a hull edge seen from
        // outside: conflict when p is strictly beyond the edge, or exactly
        // on the open segment.
        let a = points[t[(g + 1) % 3]];
        let b = points[t[(g + 2) % 3]];
        let o = orient(a, b, p);
        if o > 0.0 {
            return true;
        }
        if o < 0.0 {
            return false;
        }
        let dot = (p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1]);
        let len2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
        return dot > 0.0 && dot < len2;
    }
    incircle(c(points[t[0]]), c(points[t[1]]), c(points[t[2]]), c(p)) > 0.0
}

/// Delaunay triangulation of `points`. Exact duplicates of an earlier point
/// are left out of the mesh.
pub fn delaunay(points: &[[f64; 2]]) -> Result<TriangleMesh2D> {
    if points.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(Error::InvalidParameter("non-finite triangulation vertex".into()));
    }
    if points.len() < 3 {
        return Err(Error::Collinear);
    }
    // Seed triangle: points 0, the first point distinct from it, and the
    // first point not collinear with both.
    let i0 = 0;
    let i1 = (1..points.len())
        .find(|&i| points[i] != points[i0])
        .ok_or(Error::Collinear)?;
    let i2 = (i1 + 1..points.len())
        .find(|&i| orient(points[i0], points[i1], points[i]) != 0.0)
        .ok_or(Error::Collinear)?;
    let (a, b) = if orient(points[i0], points[i1], points[i2]) > 0.0 {
        (i0, i1)
    } else {
        (i1, i0)
    };
    let mut tris: Vec<[usize; 3]> = vec![
        [a, b, i2],
        [b, a, GHOST],
        [i2, b, GHOST],
        [a, i2, GHOST],
    ];

    for (p_idx, &p) in points.iter().enumerate() {
        if p_idx == i0 || p_idx == i1 || p_idx == i2 {
            continue;
        }
        let (bad, keep): (Vec<[usize; 3]>, Vec<[usize; 3]>) =
            tris.iter().partition(|t| in_conflict(points, t, p));
        if bad.is_empty() {
            // Duplicate of an existing vertex.
            continue;
        }
        let directed: HashSet<(usize, usize)> = bad
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .collect();
        tris = keep;
        for t in &bad {
            for (u, v) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                if !directed.contains(&(v, u)) {
                    tris.push([u, v, p_idx]);
                }
            }
        }
    }

    let mut triangles: Vec<[usize; 3]> = tris
        .into_iter()
        .filter(|t| !t.contains(&GHOST))
        .map(|t| {
            // Rotate so the smallest index comes first, keeping orientation.
            let m = (0..3).min_by_key(|&k| t[k]).unwrap();
            [t[m], t[(m + 1) % 3], t[(m + 2) % 3]]
        })
        .collect();
    triangles.sort_unstable();
    Ok(TriangleMesh2D { triangles })
}
