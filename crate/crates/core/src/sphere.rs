//! Minimal enclosing sphere (Welzl's randomized algorithm with
//! move-to-front heuristic).

use nalgebra::{Matrix3, Vector3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{dist2, ColoredPointCloud, Point3};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingSphere {
    pub center: Point3,
    pub radius: f64,
}

impl BoundingSphere {
    /// Containment with the relative slack `radius * (1 + 1e-9)`.
    pub fn contains(&self, p: &Point3) -> bool {
        dist2(p, &self.center).sqrt() <= self.radius * (1.0 + 1e-9)
    }
}

const SHUFFLE_SEED: u64 = 0x6d69_6e69_6261_6c6c;

/// Smallest sphere containing every vertex of `cloud`.
pub fn min_enclosing_sphere(cloud: &ColoredPointCloud) -> Result<BoundingSphere> {
    cloud.ensure_nonempty()?;
    Ok(min_sphere_of_points(cloud.vertices()))
}

/// Smallest sphere containing `points`. Panics on an empty slice.
pub fn min_sphere_of_points(points: &[Point3]) -> BoundingSphere {
    assert!(!points.is_empty(), "minimal sphere of an empty point set");
    let mut pts: Vec<Vector3<f64>> = points.iter().map(|p| Vector3::from(*p)).collect();
    // A fixed shuffle keeps the expected linear running time while making
    // the result independent of any global RNG.
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(SHUFFLE_SEED));
    let mut boundary = Vec::with_capacity(4);
    let n = pts.len();
    let ball = move_to_front(&mut pts, n, &mut boundary);
    // The recursion tests containment with a tiny slack; grow the radius to
    // cover round-off so containment holds for the returned sphere exactly.
    let r2 = points
        .iter()
        .map(|p| (Vector3::from(*p) - ball.center).norm_squared())
        .fold(ball.radius2, f64::max);
    BoundingSphere {
        center: ball.center.into(),
        radius: r2.sqrt(),
    }
}

#[derive(Clone, Copy, Debug)]
struct Ball {
    center: Vector3<f64>,
    radius2: f64,
}

impl Ball {
    fn contains(&self, p: &Vector3<f64>) -> bool {
        (p - self.center).norm_squared() <= self.radius2 * (1.0 + 1e-12) + 1e-300
    }
}

fn move_to_front(pts: &mut Vec<Vector3<f64>>, end: usize, boundary: &mut Vec<Vector3<f64>>) -> Ball {
    let mut ball = ball_on_boundary(boundary);
    if boundary.len() == 4 {
        return ball;
    }
    let mut i = 0;
    while i < end {
        if !ball.contains(&pts[i]) {
            let p = pts[i];
            boundary.push(p);
            ball = move_to_front(pts, i, boundary);
            boundary.pop();
            pts.remove(i);
            pts.insert(0, p);
        }
        i += 1;
    }
    ball
}

/// Smallest ball having all of `boundary` (at most 4 points) on its surface.
fn ball_on_boundary(boundary: &[Vector3<f64>]) -> Ball {
    match boundary.len() {
        0 => Ball {
            center: Vector3::zeros(),
            radius2: -1.0,
        },
        1 => Ball {
            center: boundary[0],
            radius2: 0.0,
        },
        _ => circumball(boundary).unwrap_or_else(|| degenerate_ball(boundary)),
    }
}

/// Circumcenter restricted to the affine hull of the points: solve the Gram
/// system `G l = |v|^2 / 2` for `c = p0 + sum l_j v_j`.
fn circumball(points: &[Vector3<f64>]) -> Option<Ball> {
    let p0 = points[0];
    let vs: Vec<Vector3<f64>> = points[1..].iter().map(|p| p - p0).collect();
    let k = vs.len();
    let mut g = Matrix3::<f64>::identity();
    let mut b = Vector3::<f64>::zeros();
    for i in 0..k {
        for j in 0..k {
            g[(i, j)] = vs[i].dot(&vs[j]);
        }
        b[i] = 0.5 * vs[i].norm_squared();
    }
    let scale = vs.iter().map(|v| v.norm_squared()).fold(0.0, f64::max);
    let sub = g.view((0, 0), (k, k)).into_owned();
    let det = sub.determinant();
    if !(det.abs() > 1e-14 * scale.powi(k as i32)) {
        return None;
    }
    let lambda = sub.lu().solve(&b.rows(0, k).into_owned())?;
    let mut offset = Vector3::zeros();
    for (l, v) in lambda.iter().zip(&vs) {
        offset += *l * v;
    }
    Some(Ball {
        center: p0 + offset,
        radius2: offset.norm_squared(),
    })
}

/// Affinely dependent support set: the smallest ball spanned by a subset
/// that still covers all given points.
fn degenerate_ball(points: &[Vector3<f64>]) -> Ball {
    let n = points.len();
    let mut best: Option<Ball> = None;
    for skip in 0..n {
        let subset: Vec<Vector3<f64>> = points
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .map(|(_, p)| *p)
            .collect();
        let ball = ball_on_boundary(&subset);
        if points.iter().all(|p| ball.contains(p))
            && best.is_none_or(|b| ball.radius2 < b.radius2)
        {
            best = Some(ball);
        }
    }
    best.unwrap_or_else(|| {
        // Fall back to the farthest pair.
        let mut far = (0, 0, -1.0);
        for i in 0..n {
            for j in i + 1..n {
                let d = (points[i] - points[j]).norm_squared();
                if d > far.2 {
                    far = (i, j, d);
                }
            }
        }
        Ball {
            center: (points[far.0] + points[far.1]) * 0.5,
            radius2: far.2 * 0.25,
        }
    })
}
