//! Facial landmark sets (68-point iBUG convention plus 8 raster boundary
//! points) and their CSV ingestion.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::CanonicalView;

pub const FACIAL_LANDMARKS: usize = 68;
pub const BOUNDARY_LANDMARKS: usize = 8;
pub const TOTAL_LANDMARKS: usize = FACIAL_LANDMARKS + BOUNDARY_LANDMARKS;

/// Ordered 2D keypoints in raster pixel coordinates. Index `k` names the same
/// facial location for every subject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub points: Vec<[f64; 2]>,
}

impl LandmarkSet {
    /// Append the 4 corners and 4 edge midpoints of a `width` x `height`
    /// raster (indices 68..76) to 68 facial points.
    pub fn with_boundary(facial: Vec<[f64; 2]>, width: usize, height: usize) -> Result<Self> {
        if facial.len() != FACIAL_LANDMARKS {
            return Err(Error::WrongLandmarkCount {
                expected: FACIAL_LANDMARKS,
                actual: facial.len(),
            });
        }
        let (xm, ym) = ((width - 1) as f64, (height - 1) as f64);
        for (index, p) in facial.iter().enumerate() {
            if !(p[0] >= 0.0 && p[0] <= xm && p[1] >= 0.0 && p[1] <= ym) {
                return Err(Error::OutOfBounds {
                    index,
                    x: p[0],
                    y: p[1],
                    width,
                    height,
                });
            }
        }
        let mut points = facial;
        points.extend_from_slice(&boundary_points(width, height));
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Corners (clockwise from top-left) then top, right, bottom, left midpoints.
pub fn boundary_points(width: usize, height: usize) -> [[f64; 2]; BOUNDARY_LANDMARKS] {
    let (xm, ym) = ((width - 1) as f64, (height - 1) as f64);
    [
        [0.0, 0.0],
        [xm, 0.0],
        [xm, ym],
        [0.0, ym],
        [xm / 2.0, 0.0],
        [xm, ym / 2.0],
        [xm / 2.0, ym],
        [0.0, ym / 2.0],
    ]
}

/// Parse a 68-row `x,y` CSV. Blank lines and `#` comments are ignored; a
/// first line that is not numeric is treated as a header.
pub fn parse_landmarks(text: &str, view: &CanonicalView) -> Result<LandmarkSet> {
    let mut facial = Vec::with_capacity(FACIAL_LANDMARKS);
    let mut seen_data = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match fields.as_slice() {
            [x, y] => x.parse::<f64>().ok().zip(y.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some((x, y)) => {
                seen_data = true;
                facial.push([x, y]);
            }
            None if !seen_data => {
                seen_data = true;
            }
            None => {
                return Err(Error::LandmarkParse {
                    line: lineno + 1,
                    message: format!("expected 'x,y', found '{line}'"),
                })
            }
        }
    }
    LandmarkSet::with_boundary(facial, view.width, view.height)
}

pub fn load_landmarks(path: impl AsRef<Path>, view: &CanonicalView) -> Result<LandmarkSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_landmarks(&text, view)
}

/// Pointwise `alpha * k1 + (1 - alpha) * k2`.
pub fn blend_landmarks(k1: &LandmarkSet, k2: &LandmarkSet, alpha: f64) -> Result<LandmarkSet> {
    if k1.len() != k2.len() {
        return Err(Error::WrongLandmarkCount {
            expected: k1.len(),
            actual: k2.len(),
        });
    }
    check_alpha(alpha)?;
    let (w1, w2) = blend_weights(alpha);
    Ok(LandmarkSet {
        points: k1
            .points
            .iter()
            .zip(&k2.points)
            .map(|(a, b)| [w1 * a[0] + w2 * b[0], w1 * a[1] + w2 * b[1]])
            .collect(),
    })
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "blending factor {alpha} outside [0, 1]"
        )))
    }
}

/// Weights `(alpha, 1 - alpha)` chosen so that swapping the operands and
/// passing `1 - alpha` reproduces the same weight pair bit for bit.
///
/// For `alpha >= 0.5` the subtraction `1 - alpha` is exact. Below that the
/// rounded complement is taken first and `alpha` re-derived from it.
pub(crate) fn blend_weights(alpha: f64) -> (f64, f64) {
    if alpha >= 0.5 {
        (alpha, 1.0 - alpha)
    } else {
        let w2 = 1.0 - alpha;
        (1.0 - w2, w2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: usize) -> String {
        (0..n)
            .map(|i| format!("{},{}\n", 100 + i, 200 + i))
            .collect()
    }

    #[test]
    fn sixty_eight_rows_get_boundary() {
        let view = CanonicalView::default();
        let l = parse_landmarks(&rows(68), &view).unwrap();
        assert_eq!(l.len(), 76);
        assert_eq!(l.points[68], [0.0, 0.0]);
        assert_eq!(l.points[72], [255.5, 0.0]);
        assert_eq!(l.points[70], [511.0, 511.0]);
        assert_eq!(l.points[3], [103.0, 203.0]);
    }

    #[test]
    fn header_and_comments_are_skipped() {
        let text = format!("x,y\n# dlib output\n{}", rows(68));
        assert_eq!(parse_landmarks(&text, &CanonicalView::default()).unwrap().len(), 76);
    }

    #[test]
    fn wrong_count() {
        assert!(matches!(
            parse_landmarks(&rows(67), &CanonicalView::default()),
            Err(Error::WrongLandmarkCount {
                expected: 68,
                actual: 67
            })
        ));
    }

    #[test]
    fn out_of_bounds() {
        let text = format!("600,10\n{}", rows(67));
        assert!(matches!(
            parse_landmarks(&text, &CanonicalView::default()),
            Err(Error::OutOfBounds { index: 0, .. })
        ));
    }

    #[test]
    fn garbage_row() {
        let text = format!("{}oops\n", rows(68));
        assert!(matches!(
            parse_landmarks(&text, &CanonicalView::default()),
            Err(Error::LandmarkParse { line: 69, .. })
        ));
    }

    #[test]
    fn blend_cases() {
        let k1 = LandmarkSet {
            points: vec![[10.0, 20.0]],
        };
        let k2 = LandmarkSet {
            points: vec![[30.0, 40.0]],
        };
        assert_eq!(blend_landmarks(&k1, &k2, 0.5).unwrap().points[0], [20.0, 30.0]);
        assert_eq!(blend_landmarks(&k1, &k2, 1.0).unwrap(), k1);
        assert_eq!(blend_landmarks(&k2, &k2, 0.37).unwrap(), k2);
        let k3 = LandmarkSet { points: vec![] };
        assert!(blend_landmarks(&k1, &k3, 0.5).is_err());
        assert!(blend_landmarks(&k1, &k2, 1.5).is_err());
    }

    #[test]
    fn weights_are_swap_symmetric() {
        for alpha in [0.0, 0.1, 0.3, 0.333, 0.5, 0.7, 0.9, 1.0, 1e-17] {
            let (a1, a2) = blend_weights(alpha);
            let (b1, b2) = blend_weights(1.0 - alpha);
            assert_eq!((a1.to_bits(), a2.to_bits()), (b2.to_bits(), b1.to_bits()), "{alpha}");
        }
    }
}
