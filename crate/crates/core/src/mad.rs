//! Morphing-attack detection: feature vectors, a linear SVM and its
//! evaluation with the detection metrics.
//!
//! Features come either from external files (one CSV row per sample, as
//! produced by a point-network feature extractor) or from
//! [`builtin_features`], a 16-dimensional hand-crafted summary of the
//! quality features. The built-in set is a stand-in, not a network
//! embedding.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::biometrics::{det_metrics, parse_label, DetReport};
use crate::cloud::ColoredPointCloud;
use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::par;
use crate::quality::{entropy_score, lab_convert, local_eigen_features, AB_RANGE, DEFAULT_BINS, DEFAULT_NEIGHBORS, L_RANGE};
use crate::sphere::min_enclosing_sphere;

pub const BUILTIN_FEATURE_DIM: usize = 16;

pub const BUILTIN_FEATURE_NAMES: [&str; BUILTIN_FEATURE_DIM] = [
    "linearity_mean",
    "linearity_std",
    "planarity_mean",
    "planarity_std",
    "sphericity_mean",
    "sphericity_std",
    "anisotropy_mean",
    "anisotropy_std",
    "curvature_mean",
    "curvature_std",
    "l_entropy",
    "a_entropy",
    "b_entropy",
    "log_points",
    "enclosing_radius",
    "mean_spacing",
];

/// One labelled sample. `subject_id` names the subject(s) the sample was
/// made from; morphs list both, joined by `+`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub sample_id: String,
    pub subject_id: String,
    pub is_morph: bool,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn subjects(&self) -> impl Iterator<Item = &str> {
        self.subject_id.split('+').map(str::trim).filter(|s| !s.is_empty())
    }
}

/// Built-in 16-dimensional descriptor of a cloud: mean and standard
/// deviation of the five eigen-features, LAB entropies, log point count,
/// enclosing radius and mean nearest-neighbour spacing.
pub fn builtin_features(cloud: &ColoredPointCloud) -> Result<Vec<f64>> {
    cloud.ensure_nonempty()?;
    let eigen = local_eigen_features(cloud, DEFAULT_NEIGHBORS)?;
    let n = eigen.len() as f64;
    let mut out = Vec::with_capacity(BUILTIN_FEATURE_DIM);
    for k in 0..5 {
        let mean = eigen.iter().map(|e| e.as_array()[k]).sum::<f64>() / n;
        let var = eigen.iter().map(|e| (e.as_array()[k] - mean).powi(2)).sum::<f64>() / n;
        out.push(mean);
        out.push(var.sqrt());
    }
    let lab = lab_convert(cloud.colors());
    for (k, range) in [L_RANGE, AB_RANGE, AB_RANGE].into_iter().enumerate() {
        let channel: Vec<f64> = lab.iter().map(|v| v[k]).collect();
        out.push(entropy_score(&channel, DEFAULT_BINS, range)?);
    }
    out.push(n.ln());
    out.push(min_enclosing_sphere(cloud)?.radius);
    let pts = cloud.vertices();
    let tree = KdTree::new(pts);
    let spacing = par::map_slice(pts, |p| tree.nearest(p, 2)[1].1);
    out.push(spacing.iter().sum::<f64>() / n);
    Ok(out)
}

/// Parse `sample_id,[subject_id,]label,v1..vN` rows.
///
/// A header row is optional; the subject column is present only if the
/// header names it `subject_id`. Without it each sample is its own subject.
pub fn parse_feature_csv(text: &str) -> Result<Vec<FeatureVector>> {
    let mut out: Vec<FeatureVector> = Vec::new();
    let mut with_subject = false;
    let mut first = true;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let ctx = || format!("feature csv line {}", lineno + 1);
        if first {
            first = false;
            if f.len() >= 2 && parse_label(f[1]).is_none() {
                with_subject = f[1].eq_ignore_ascii_case("subject_id");
                continue;
            }
        }
        let head = if with_subject { 3 } else { 2 };
        if f.len() <= head {
            return Err(Error::parse(ctx(), "no feature values"));
        }
        let is_morph = parse_label(f[head - 1]).ok_or_else(|| Error::parse(ctx(), format!("unknown label '{}'", f[head - 1])))?;
        let values = f[head..]
            .iter()
            .map(|v| match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(Error::parse(ctx(), format!("bad feature value '{v}'"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(prev) = out.first() {
            if prev.values.len() != values.len() {
                return Err(Error::FeatureDimension {
                    expected: prev.values.len(),
                    actual: values.len(),
                });
            }
        }
        out.push(FeatureVector {
            sample_id: f[0].to_string(),
            subject_id: if with_subject { f[1] } else { f[0] }.to_string(),
            is_morph,
            values,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("feature csv"));
    }
    Ok(out)
}

pub fn feature_csv(features: &[FeatureVector]) -> String {
    let dim = features.first().map_or(0, |f| f.values.len());
    let mut s = String::from("sample_id,subject_id,label");
    for i in 1..=dim {
        let _ = write!(s, ",v{i}");
    }
    s.push('\n');
    for f in features {
        let _ = write!(s, "{},{},{}", f.sample_id, f.subject_id, if f.is_morph { "morph" } else { "bonafide" });
        for v in &f.values {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

/// Reject a split in which any subject contributes to both sides.
pub fn check_subject_disjoint(train: &[FeatureVector], test: &[FeatureVector]) -> Result<()> {
    let seen: BTreeSet<&str> = train.iter().flat_map(FeatureVector::subjects).collect();
    let leaked: BTreeSet<&str> = test.iter().flat_map(FeatureVector::subjects).filter(|s| seen.contains(s)).collect();
    if leaked.is_empty() {
        Ok(())
    } else {
        Err(Error::LeakedSplit(leaked.into_iter().map(String::from).collect()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            epochs: 200,
            seed: 0x73766d,
        }
    }
}

/// Linear decision function over z-scored features; higher scores are
/// more morph-like. Zero-variance training dimensions keep weight 0 and
/// unit scale and are listed in `dropped`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub dropped: Vec<usize>,
    pub params: SvmParams,
    pub train_samples: usize,
    /// Primal objective after each epoch.
    pub objective: Vec<f64>,
    /// Dual objective after each epoch; never decreases.
    pub dual_objective: Vec<f64>,
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::FeatureDimension {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(self.bias
            + x.iter()
                .zip(&self.weights)
                .zip(self.mean.iter().zip(&self.std))
                .map(|((v, w), (m, s))| w * (v - m) / s)
                .sum::<f64>())
    }
}

/// Train a linear SVM (hinge loss, L2 penalty, C weighting the loss) by
/// dual coordinate descent. The bias is learned as the weight of a
/// constant feature. Samples are visited in a seeded random order.
pub fn train_linear_svm(train: &[FeatureVector], params: &SvmParams) -> Result<LinearModel> {
    if train.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    let morphs = train.iter().filter(|f| f.is_morph).count();
    if morphs < 2 || train.len() - morphs < 2 {
        return Err(Error::SingleClass);
    }
    if !(params.c > 0.0 && params.c.is_finite()) || params.epochs == 0 {
        return Err(Error::InvalidParameter(format!("C {} with {} epochs", params.c, params.epochs)));
    }
    let dim = train[0].values.len();
    for f in train {
        if f.values.len() != dim {
            return Err(Error::FeatureDimension {
                expected: dim,
                actual: f.values.len(),
            });
        }
    }

    let n = train.len() as f64;
    let mut mean = vec![0.0; dim];
    let mut std = vec![0.0; dim];
    for d in 0..dim {
        mean[d] = train.iter().map(|f| f.values[d]).sum::<f64>() / n;
        std[d] = (train.iter().map(|f| (f.values[d] - mean[d]).powi(2)).sum::<f64>() / n).sqrt();
    }
    let dropped: Vec<usize> = (0..dim).filter(|&d| !(std[d] > 1e-12 * mean[d].abs().max(1.0))).collect();
    for &d in &dropped {
        std[d] = 1.0;
    }
    let kept: Vec<usize> = (0..dim).filter(|d| !dropped.contains(d)).collect();

    // Normalized samples with a trailing constant 1 for the bias.
    let xs: Vec<Vec<f64>> = train
        .iter()
        .map(|f| {
            let mut x: Vec<f64> = kept.iter().map(|&d| (f.values[d] - mean[d]) / std[d]).collect();
            x.push(1.0);
            x
        })
        .collect();
    let ys: Vec<f64> = train.iter().map(|f| if f.is_morph { 1.0 } else { -1.0 }).collect();
    let qii: Vec<f64> = xs.iter().map(|x| dot(x, x)).collect();

    let m = kept.len() + 1;
    let mut w = vec![0.0; m];
    let mut alpha = vec![0.0; xs.len()];
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut objective = Vec::with_capacity(params.epochs);
    let mut dual_objective = Vec::with_capacity(params.epochs);
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let g = ys[i] * dot(&w, &xs[i]) - 1.0;
            let a = (alpha[i] - g / qii[i]).clamp(0.0, params.c);
            let delta = (a - alpha[i]) * ys[i];
            if delta != 0.0 {
                for (wk, xk) in w.iter_mut().zip(&xs[i]) {
                    *wk += delta * xk;
                }
                alpha[i] = a;
            }
        }
        let hinge: f64 = xs.iter().zip(&ys).map(|(x, y)| (1.0 - y * dot(&w, x)).max(0.0)).sum();
        objective.push(0.5 * dot(&w, &w) + params.c * hinge);
        dual_objective.push(alpha.iter().sum::<f64>() - 0.5 * dot(&w, &w));
    }

    let mut weights = vec![0.0; dim];
    for (k, &d) in kept.iter().enumerate() {
        weights[d] = w[k];
    }
    Ok(LinearModel {
        weights,
        bias: w[m - 1],
        mean,
        std,
        dropped,
        params: *params,
        train_samples: train.len(),
        objective,
        dual_objective,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoredSample {
    pub sample_id: String,
    pub is_morph: bool,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MadEvaluation {
    pub scores: Vec<ScoredSample>,
    pub det: DetReport,
}

impl MadEvaluation {
    /// `sample_id,score,label` rows, readable by the labeled-score parser.
    pub fn scores_csv(&self) -> String {
        let mut s = String::from("sample_id,score,label\n");
        for r in &self.scores {
            let _ = writeln!(s, "{},{},{}", r.sample_id, r.score, if r.is_morph { "morph" } else { "bonafide" });
        }
        s
    }
}

/// Score every test sample and summarize detection performance.
pub fn evaluate(model: &LinearModel, test: &[FeatureVector]) -> Result<MadEvaluation> {
    let scores = par::map_slice(test, |f| model.score(&f.values))
        .into_iter()
        .zip(test)
        .map(|(s, f)| {
            Ok(ScoredSample {
                sample_id: f.sample_id.clone(),
                is_morph: f.is_morph,
                score: s?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let attack: Vec<f64> = scores.iter().filter(|s| s.is_morph).map(|s| s.score).collect();
    let bona_fide: Vec<f64> = scores.iter().filter(|s| !s.is_morph).map(|s| s.score).collect();
    let det = det_metrics(&attack, &bona_fide)?;
    Ok(MadEvaluation { scores, det })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::CanonicalView;
    use crate::synthetic::Ellipsoid;
    use rand::Rng;

    fn sample(i: usize, is_morph: bool, values: Vec<f64>) -> FeatureVector {
        FeatureVector {
            sample_id: format!("s{i}"),
            subject_id: format!("p{i}"),
            is_morph,
            values,
        }
    }

    fn noisy_set(seed: u64, n: usize, dim: usize, shift: f64) -> Vec<FeatureVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let m = i % 2 == 0;
                let values = (0..dim)
                    .map(|d| rng.random_range(-1.0..1.0) + if m && d == 0 { shift } else { 0.0 })
                    .collect();
                sample(i, m, values)
            })
            .collect()
    }

    #[test]
    fn separable_toy_set() {
        let train: Vec<FeatureVector> = [
            ([0.0, 0.0], false),
            ([1.0, 0.2], false),
            ([0.3, 1.0], false),
            ([3.0, 3.0], true),
            ([4.0, 2.5], true),
            ([2.8, 4.1], true),
        ]
        .into_iter()
        .enumerate()
        .map(|(i, (v, m))| sample(i, m, v.to_vec()))
        .collect();
        let model = train_linear_svm(&train, &SvmParams::default()).unwrap();
        let margin = train
            .iter()
            .map(|f| model.score(&f.values).unwrap() * if f.is_morph { 1.0 } else { -1.0 })
            .fold(f64::INFINITY, f64::min);
        assert!(margin > 0.0, "margin {margin}");
        assert_eq!(evaluate(&model, &train).unwrap().det.d_eer, 0.0);
    }

    #[test]
    fn dual_ascends_and_gap_closes() {
        let train = noisy_set(1, 120, 4, 1.0);
        let model = train_linear_svm(&train, &SvmParams::default()).unwrap();
        let dual = &model.dual_objective;
        assert!(dual.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()), "{:?}", &dual[..10]);
        let (p, d) = (model.objective[199], dual[199]);
        assert!(p - d <= 1e-6 * p, "gap {}", p - d);
    }

    #[test]
    fn flipped_labels_negate_scores() {
        let train = noisy_set(2, 80, 3, 0.8);
        let flipped: Vec<FeatureVector> = train
            .iter()
            .map(|f| FeatureVector {
                is_morph: !f.is_morph,
                ..f.clone()
            })
            .collect();
        let a = train_linear_svm(&train, &SvmParams::default()).unwrap();
        let b = train_linear_svm(&flipped, &SvmParams::default()).unwrap();
        for f in &train {
            let (sa, sb) = (a.score(&f.values).unwrap(), b.score(&f.values).unwrap());
            assert!((sa + sb).abs() <= 1e-6, "{sa} vs {sb}");
        }
    }

    #[test]
    fn duplicated_data_with_half_c_gives_same_model() {
        let train = noisy_set(3, 60, 3, 1.5);
        let doubled: Vec<FeatureVector> = train.iter().chain(&train).cloned().collect();
        let p = SvmParams::default();
        let a = train_linear_svm(&train, &p).unwrap();
        let b = train_linear_svm(&doubled, &SvmParams { c: p.c / 2.0, ..p }).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
        }
        assert!((a.bias - b.bias).abs() <= 1e-6);
    }

    #[test]
    fn scaling_a_dimension_keeps_ranks() {
        let train = noisy_set(4, 80, 3, 1.0);
        let scaled: Vec<FeatureVector> = train
            .iter()
            .map(|f| {
                let mut g = f.clone();
                g.values[1] *= 250.0;
                g
            })
            .collect();
        let a = evaluate(&train_linear_svm(&train, &SvmParams::default()).unwrap(), &train).unwrap();
        let b = evaluate(&train_linear_svm(&scaled, &SvmParams::default()).unwrap(), &scaled).unwrap();
        let rank = |e: &MadEvaluation| {
            let mut idx: Vec<usize> = (0..e.scores.len()).collect();
            idx.sort_by(|&i, &j| e.scores[i].score.total_cmp(&e.scores[j].score));
            idx
        };
        assert_eq!(rank(&a), rank(&b));
    }

    #[test]
    fn reproducible_and_drops_constant_dims() {
        let mut train = noisy_set(5, 40, 3, 1.0);
        for f in &mut train {
            f.values.push(7.0);
        }
        let a = train_linear_svm(&train, &SvmParams::default()).unwrap();
        let b = train_linear_svm(&train, &SvmParams::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dropped, vec![3]);
        assert_eq!(a.weights[3], 0.0);
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<LinearModel>(&json).unwrap(), a);
    }

    #[test]
    fn random_model_is_at_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let test: Vec<FeatureVector> = (0..200).map(|i| sample(i, i % 2 == 0, (0..8).map(|_| rng.random()).collect())).collect();
        let model = LinearModel {
            weights: (0..8).map(|_| rng.random_range(-1.0..1.0)).collect(),
            bias: 0.0,
            mean: vec![0.0; 8],
            std: vec![1.0; 8],
            dropped: vec![],
            params: SvmParams::default(),
            train_samples: 0,
            objective: vec![],
            dual_objective: vec![],
        };
        let d = evaluate(&model, &test).unwrap().det.d_eer;
        assert!((d - 0.5).abs() <= 0.1, "{d}");
    }

    #[test]
    fn training_errors() {
        let one_class: Vec<FeatureVector> = (0..5).map(|i| sample(i, true, vec![i as f64])).collect();
        assert!(matches!(train_linear_svm(&one_class, &SvmParams::default()), Err(Error::SingleClass)));
        let mut mixed = noisy_set(7, 10, 2, 1.0);
        let model = train_linear_svm(&mixed, &SvmParams::default()).unwrap();
        mixed[0].values.push(1.0);
        assert!(matches!(evaluate(&model, &mixed), Err(Error::FeatureDimension { .. })));
        assert!(matches!(train_linear_svm(&mixed, &SvmParams::default()), Err(Error::FeatureDimension { .. })));
    }

    #[test]
    fn split_guard() {
        let mk = |id: &str, subj: &str| FeatureVector {
            sample_id: id.into(),
            subject_id: subj.into(),
            is_morph: subj.contains('+'),
            values: vec![0.0],
        };
        let train = vec![mk("a", "s1"), mk("b", "s1+s2")];
        assert!(check_subject_disjoint(&train, &[mk("c", "s3"), mk("d", "s3+s4")]).is_ok());
        match check_subject_disjoint(&train, &[mk("e", "s4+s2")]) {
            Err(Error::LeakedSplit(v)) => assert_eq!(v, vec!["s2".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_round_trip() {
        let f = noisy_set(8, 6, 3, 0.0);
        assert_eq!(parse_feature_csv(&feature_csv(&f)).unwrap(), f);
        let plain = parse_feature_csv("x1,bonafide,0.5,1\nx2,morph,2,3\n").unwrap();
        assert_eq!(plain[1].subject_id, "x2");
        assert!(plain[1].is_morph);
        assert!(parse_feature_csv("x1,bonafide,0.5,1\nx2,morph,2\n").is_err());
        assert!(parse_feature_csv("x1,maybe,0.5\n").is_err());
    }

    #[test]
    fn builtin_features_properties() {
        let view = CanonicalView {
            width: 80,
            height: 80,
            scale: 38.0,
            cx: 40.0,
            cy: 40.0,
            ..CanonicalView::default()
        };
        let face = Ellipsoid::new(1.0, 1.0, 1.0, 3).grid_cloud(&view);
        let f = builtin_features(&face).unwrap();
        assert_eq!(f.len(), BUILTIN_FEATURE_DIM);
        assert_eq!(f, builtin_features(&face).unwrap());

        // Solid ball against a flat lattice.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut ball = Vec::new();
        while ball.len() < 2000 {
            let p: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            if p.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                ball.push(p);
            }
        }
        let ball = ColoredPointCloud::new(ball, face.colors()[..2000].to_vec()).unwrap();
        let s = builtin_features(&ball).unwrap();
        let moved = builtin_features(&crate::cloud::translate(&ball, [3.0, -2.0, 5.0])).unwrap();
        for k in (0..10).chain(13..16) {
            assert!((s[k] - moved[k]).abs() <= 1e-9, "{k}: {} vs {}", s[k], moved[k]);
        }
        let plane: Vec<[f64; 3]> = (0..3600).map(|i| [(i % 60) as f64 * 0.03, (i / 60) as f64 * 0.03, 0.0]).collect();
        let plane = ColoredPointCloud::new(plane, vec![[90; 3]; 3600]).unwrap();
        let p = builtin_features(&plane).unwrap();
        assert!(p[2] - s[2] > 0.5, "planarity {} vs {}", p[2], s[2]);
    }
}
