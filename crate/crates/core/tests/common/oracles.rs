//! Brute-force reference implementations used by unit and integration tests.
//!
//! Everything here is deliberately naive and shares no code with the library.

#![allow(dead_code)]

type P3 = [f64; 3];

fn sub(a: P3, b: P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn dot(a: P3, b: P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn cross(a: P3, b: P3) -> P3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
fn norm(a: P3) -> f64 {
    dot(a, a).sqrt()
}
fn dist(a: P3, b: P3) -> f64 {
    norm(sub(a, b))
}

fn circum_triangle(a: P3, b: P3, c: P3) -> Option<(P3, f64)> {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let n = cross(ab, ac);
    let nn = dot(n, n);
    if nn < 1e-24 * dot(ab, ab).max(dot(ac, ac)).powi(2) {
        return None;
    }
    // c = a + (|ac|^2 (n x ab) + |ab|^2 (ac x n)) / (2 |n|^2)
    let t1 = cross(n, ab);
    let t2 = cross(ac, n);
    let (s1, s2) = (dot(ac, ac), dot(ab, ab));
    let off = [
        (s1 * t1[0] + s2 * t2[0]) / (2.0 * nn),
        (s1 * t1[1] + s2 * t2[1]) / (2.0 * nn),
        (s1 * t1[2] + s2 * t2[2]) / (2.0 * nn),
    ];
    Some(([a[0] + off[0], a[1] + off[1], a[2] + off[2]], norm(off)))
}

fn circum_tetra(a: P3, b: P3, c: P3, d: P3) -> Option<(P3, f64)> {
    // Rows: 2 (p - a) . x = |p|^2 - |a|^2, solved by Cramer's rule.
    let rows = [b, c, d].map(|p| {
        let v = sub(p, a);
        ([2.0 * v[0], 2.0 * v[1], 2.0 * v[2]], dot(p, p) - dot(a, a))
    });
    let m = [rows[0].0, rows[1].0, rows[2].0];
    let rhs = [rows[0].1, rows[1].1, rows[2].1];
    let det3 = |m: [P3; 3]| dot(m[0], cross(m[1], m[2]));
    let det = det3(m);
    let scale = norm(m[0]) * norm(m[1]) * norm(m[2]);
    if det.abs() < 1e-12 * scale {
        return None;
    }
    let mut x = [0.0; 3];
    for (col, xi) in x.iter_mut().enumerate() {
        let mut mc = m;
        for r in 0..3 {
            mc[r][col] = rhs[r];
        }
        *xi = det3(mc) / det;
    }
    Some((x, dist(x, a)))
}

/// Radius of the minimal enclosing sphere by enumerating every support set
/// of 1 to 4 points.
pub fn brute_force_min_sphere(points: &[P3]) -> f64 {
    let n = points.len();
    let encloses = |c: P3, r: f64| points.iter().all(|p| dist(*p, c) <= r * (1.0 + 1e-10) + 1e-12);
    let mut best = f64::INFINITY;
    let mut consider = |c: P3, r: f64| {
        if r < best && encloses(c, r) {
            best = r;
        }
    };
    for i in 0..n {
        consider(points[i], 0.0);
        for j in i + 1..n {
            let a = points[i];
            let b = points[j];
            consider(
                [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0],
                dist(a, b) / 2.0,
            );
            for k in j + 1..n {
                if let Some((c, r)) = circum_triangle(a, b, points[k]) {
                    consider(c, r);
                }
                for l in k + 1..n {
                    if let Some((c, r)) = circum_tetra(a, b, points[k], points[l]) {
                        consider(c, r);
                    }
                }
            }
        }
    }
    best
}

/// Points strictly inside the circumcircle of triangle (a, b, c) by more than
/// `margin` (relative to the circumradius), found by direct distance checks.
pub fn circumcircle_violations(points: &[[f64; 2]], tri: [usize; 3], margin: f64) -> Vec<usize> {
    let [a, b, c] = tri.map(|i| points[i]);
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    let sq = |p: [f64; 2]| p[0] * p[0] + p[1] * p[1];
    let ux = (sq(a) * (b[1] - c[1]) + sq(b) * (c[1] - a[1]) + sq(c) * (a[1] - b[1])) / d;
    let uy = (sq(a) * (c[0] - b[0]) + sq(b) * (a[0] - c[0]) + sq(c) * (b[0] - a[0])) / d;
    let r = ((a[0] - ux).powi(2) + (a[1] - uy).powi(2)).sqrt();
    (0..points.len())
        .filter(|i| !tri.contains(i))
        .filter(|&i| {
            let p = points[i];
            let dp = ((p[0] - ux).powi(2) + (p[1] - uy).powi(2)).sqrt();
            dp < r * (1.0 - margin)
        })
        .collect()
}

/// Morph verified against every subject: min over subjects of the best
/// attempt score, compared with `> threshold`, evaluated by plain loops.
pub fn mmpmr_oracle(morphs: &[(Vec<f64>, Vec<f64>)], threshold: f64) -> f64 {
    let mut hits = 0usize;
    for (s1, s2) in morphs {
        let mut best1 = f64::NEG_INFINITY;
        for &s in s1 {
            if s > best1 {
                best1 = s;
            }
        }
        let mut best2 = f64::NEG_INFINITY;
        for &s in s2 {
            if s > best2 {
                best2 = s;
            }
        }
        if best1 > threshold && best2 > threshold {
            hits += 1;
        }
    }
    hits as f64 / morphs.len() as f64
}

/// Morph verified by both subjects on every paired attempt.
pub fn fmmpmr_oracle(morphs: &[(Vec<f64>, Vec<f64>)], threshold: f64) -> f64 {
    let mut hits = 0usize;
    for (s1, s2) in morphs {
        let mut all = true;
        for a in 0..s1.len() {
            if !(s1[a] > threshold && s2[a] > threshold) {
                all = false;
            }
        }
        if all {
            hits += 1;
        }
    }
    hits as f64 / morphs.len() as f64
}

/// Smallest candidate threshold (scores and one step above the maximum)
/// whose accepted non-mated fraction does not exceed `far`.
pub fn threshold_sweep_oracle(nonmated: &[f64], far: f64) -> f64 {
    let mut candidates: Vec<f64> = nonmated.to_vec();
    let max = nonmated.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    candidates.push(max.next_up());
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for t in candidates {
        let accepted = nonmated.iter().filter(|&&s| s >= t).count();
        if accepted as f64 / nonmated.len() as f64 <= far {
            return t;
        }
    }
    unreachable!("threshold above every score always satisfies the FAR target")
}

/// Nearest-neighbour Hausdorff distance between two point sets, O(n m).
pub fn hausdorff(a: &[P3], b: &[P3]) -> f64 {
    let directed = |x: &[P3], y: &[P3]| {
        x.iter()
            .map(|p| y.iter().map(|q| dist(*p, *q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}
