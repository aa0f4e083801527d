//! Brute-force Hamming matching with ratio test and cross-check.

use crate::holefill::orb::{hamming, Descriptor, Feature};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DescriptorMatch {
    /// Index into the first descriptor set.
    pub query: usize,
    /// Index into the second descriptor set.
    pub train: usize,
    pub distance: u32,
}

/// One correspondence between pixels of two images.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureMatch {
    pub src: [f64; 2],
    pub dst: [f64; 2],
    pub distance: u32,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureMatchSet {
    pub matches: Vec<FeatureMatch>,
}

impl FeatureMatchSet {
    /// Match `src` against `dst` features and keep their pixel positions.
    pub fn from_features(src: &[Feature], dst: &[Feature], ratio: f64) -> Self {
        let da: Vec<Descriptor> = src.iter().map(|f| f.descriptor).collect();
        let db: Vec<Descriptor> = dst.iter().map(|f| f.descriptor).collect();
        let matches = match_bruteforce(&da, &db, ratio)
            .into_iter()
            .map(|m| {
                let (a, b) = (&src[m.query].keypoint, &dst[m.train].keypoint);
                FeatureMatch {
                    src: [a.x as f64, a.y as f64],
                    dst: [b.x as f64, b.y as f64],
                    distance: m.distance,
                }
            })
            .collect();
        Self { matches }
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    pub fn src_points(&self) -> Vec<[f64; 2]> {
        self.matches.iter().map(|m| m.src).collect()
    }

    pub fn dst_points(&self) -> Vec<[f64; 2]> {
        self.matches.iter().map(|m| m.dst).collect()
    }
}

/// Nearest and second-nearest distances; ties go to the lower index.
fn two_nearest(d: &Descriptor, set: &[Descriptor]) -> Option<(usize, u32, u32)> {
    let mut best: Option<(usize, u32)> = None;
    let mut second = u32::MAX;
    for (j, e) in set.iter().enumerate() {
        let dist = hamming(d, e);
        match best {
            Some((_, b)) if dist >= b => second = second.min(dist),
            _ => {
                if let Some((_, b)) = best {
                    second = b;
                }
                best = Some((j, dist));
            }
        }
    }
    best.map(|(j, b)| (j, b, second))
}

/// For each `a` descriptor its nearest `b` descriptor, kept when
/// `best < ratio * second_best` and when that `b` descriptor's own nearest
/// `a` descriptor is the query. Output is ordered by query index.
pub fn match_bruteforce(a: &[Descriptor], b: &[Descriptor], ratio: f64) -> Vec<DescriptorMatch> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let forward = par::map_slice(a, |d| two_nearest(d, b));
    let backward = par::map_slice(b, |d| two_nearest(d, a).map(|(i, _, _)| i));
    forward
        .into_iter()
        .enumerate()
        .filter_map(|(i, f)| {
            let (j, best, second) = f?;
            let passes_ratio = second == u32::MAX || (best as f64) < ratio * second as f64;
            (passes_ratio && backward[j] == Some(i)).then_some(DescriptorMatch {
                query: i,
                train: j,
                distance: best,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(n: usize, rng: &mut ChaCha8Rng) -> Vec<Descriptor> {
        (0..n).map(|_| [rng.random(), rng.random(), rng.random(), rng.random()]).collect()
    }

    #[test]
    fn self_match_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_set(200, &mut rng);
        let m = match_bruteforce(&a, &a, 0.75);
        assert_eq!(m.len(), 200);
        assert!(m.iter().all(|m| m.distance == 0 && m.query == m.train));
    }

    #[test]
    fn random_sets_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_set(500, &mut rng);
        let b = random_set(500, &mut rng);
        let kept = match_bruteforce(&a, &b, 0.75).len();
        assert!((kept as f64) < 0.05 * 500.0, "{kept}");
    }

    #[test]
    fn planted_pairs_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = random_set(300, &mut rng);
        let mut b = random_set(300, &mut rng);
        let planted: Vec<(usize, usize)> = (0..10).map(|k| (k * 29 + 3, 299 - k * 31)).collect();
        for &(i, j) in &planted {
            let d: Descriptor = [rng.random(), rng.random(), rng.random(), rng.random()];
            a[i] = d;
            b[j] = d;
        }
        let m = match_bruteforce(&a, &b, 0.75);
        for (i, j) in planted {
            assert!(m.iter().any(|m| m.query == i && m.train == j && m.distance == 0));
        }
    }

    #[test]
    fn empty_inputs() {
        assert!(match_bruteforce(&[], &[[0; 4]], 0.75).is_empty());
        assert!(match_bruteforce(&[[0; 4]], &[], 0.75).is_empty());
    }

    #[test]
    fn cross_check_removes_many_to_one() {
        let a = vec![[0u64, 0, 0, 0], [1, 0, 0, 0]];
        let b = vec![[0u64, 0, 0, 0], [u64::MAX; 4]];
        let m = match_bruteforce(&a, &b, 0.75);
        assert_eq!(m, vec![DescriptorMatch { query: 0, train: 0, distance: 0 }]);
    }
}
