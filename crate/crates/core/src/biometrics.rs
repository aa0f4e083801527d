//! Vulnerability metrics for morphs against a face recognizer (MMPMR,
//! FMMPMR, threshold at a target FAR) and detection error rates for a morph
//! detector (APCER, BPCER, D-EER, DET curve).
//!
//! Comparison scores are similarities: higher means a better match.
//! Detection scores are morph-likeness: higher means more likely a morph.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Comparison scores of one morph probed against its two contributing
/// subjects, one list of attempts per subject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorphScores {
    pub morph_id: String,
    pub subjects: [Vec<f64>; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    morphs: Vec<MorphScores>,
}

impl ScoreMatrix {
    pub fn new(morphs: Vec<MorphScores>) -> Result<Self> {
        if morphs.is_empty() {
            return Err(Error::EmptyInput("score matrix"));
        }
        for m in &morphs {
            for (k, s) in m.subjects.iter().enumerate() {
                if s.is_empty() {
                    return Err(Error::InvalidScores(format!("morph {}: subject {} has no attempts", m.morph_id, k + 1)));
                }
                if s.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidScores(format!("morph {}: non-finite score", m.morph_id)));
                }
            }
        }
        Ok(Self { morphs })
    }

    pub fn morphs(&self) -> &[MorphScores] {
        &self.morphs
    }

    pub fn len(&self) -> usize {
        self.morphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.morphs.is_empty()
    }
}

/// Parse `morph_id,subject_idx,attempt_idx,score` rows (subject 1 or 2).
///
/// A header row is optional. If its last column is named `distance` the
/// values are dissimilarities and are negated on ingestion.
pub fn parse_score_csv(text: &str) -> Result<ScoreMatrix> {
    let mut negate = false;
    let mut table: BTreeMap<String, [BTreeMap<u64, f64>; 2]> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut first = true;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let ctx = || format!("score csv line {}", lineno + 1);
        if f.len() != 4 {
            return Err(Error::parse(ctx(), format!("expected 4 fields, found {}", f.len())));
        }
        if first {
            first = false;
            if f[3].parse::<f64>().is_err() {
                negate = f[3].eq_ignore_ascii_case("distance");
                continue;
            }
        }
        let subject: usize = f[1].parse().map_err(|_| Error::parse(ctx(), format!("bad subject index '{}'", f[1])))?;
        if !(1..=2).contains(&subject) {
            return Err(Error::parse(ctx(), format!("subject index {subject} is not 1 or 2")));
        }
        let attempt: u64 = f[2].parse().map_err(|_| Error::parse(ctx(), format!("bad attempt index '{}'", f[2])))?;
        let score: f64 = f[3].parse().map_err(|_| Error::parse(ctx(), format!("bad score '{}'", f[3])))?;
        let entry = table.entry(f[0].to_string()).or_insert_with(|| {
            order.push(f[0].to_string());
            Default::default()
        });
        if entry[subject - 1].insert(attempt, if negate { -score } else { score }).is_some() {
            return Err(Error::parse(ctx(), format!("duplicate attempt {attempt} for morph {} subject {subject}", f[0])));
        }
    }
    let morphs = order
        .into_iter()
        .map(|id| {
            let [a, b] = table.remove(&id).expect("every id was inserted");
            MorphScores {
                morph_id: id,
                subjects: [a.into_values().collect(), b.into_values().collect()],
            }
        })
        .collect();
    ScoreMatrix::new(morphs)
}

/// Parse a list of scores, one per line, optionally as `id,score`.
pub fn parse_score_list(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or(line).trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => return Err(Error::parse(format!("score list line {}", lineno + 1), "non-finite score")),
            Err(_) if out.is_empty() => continue,
            Err(_) => return Err(Error::parse(format!("score list line {}", lineno + 1), format!("bad score '{field}'"))),
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("score list"));
    }
    Ok(out)
}

/// Smallest threshold `t` such that the fraction of non-mated scores `>= t`
/// is at most `far`. Candidates are the scores themselves and the next float
/// above the largest score (which accepts nothing).
pub fn threshold_at_far(nonmated: &[f64], far: f64) -> Result<f64> {
    if nonmated.is_empty() {
        return Err(Error::EmptyInput("non-mated scores"));
    }
    if nonmated.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidScores("non-finite non-mated score".into()));
    }
    if !(far > 0.0 && far < 1.0) {
        return Err(Error::InvalidParameter(format!("FAR {far} outside (0, 1)")));
    }
    let mut sorted = nonmated.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let max = sorted[n - 1];
    // Scanning candidates upward, the accepted fraction only shrinks.
    let mut i = 0;
    while i < n {
        let t = sorted[i];
        if (n - i) as f64 / n as f64 <= far {
            return Ok(t);
        }
        while i < n && sorted[i] == t {
            i += 1;
        }
    }
    Ok(max.next_up())
}

/// How a subject's attempts are reduced before comparing with the threshold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttemptRule {
    /// Any attempt verifying is enough.
    #[default]
    Max,
    /// Every attempt must verify.
    Min,
}

/// Fraction of morphs that verify against both subjects with the default
/// any-attempt rule.
pub fn mmpmr(scores: &ScoreMatrix, threshold: f64) -> f64 {
    mmpmr_with(scores, threshold, AttemptRule::Max)
}

pub fn mmpmr_with(scores: &ScoreMatrix, threshold: f64, rule: AttemptRule) -> f64 {
    let reduce = |s: &[f64]| match rule {
        AttemptRule::Max => s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        AttemptRule::Min => s.iter().copied().fold(f64::INFINITY, f64::min),
    };
    let hits = scores
        .morphs
        .iter()
        .filter(|m| m.subjects.iter().map(|s| reduce(s)).fold(f64::INFINITY, f64::min) > threshold)
        .count();
    hits as f64 / scores.len() as f64
}

/// Fraction of morphs for which both subjects verify on every attempt
/// index. Attempts are paired by index, so both subjects need equally many.
pub fn fmmpmr(scores: &ScoreMatrix, threshold: f64) -> Result<f64> {
    let mut hits = 0usize;
    for m in &scores.morphs {
        let [a, b] = &m.subjects;
        if a.len() != b.len() {
            return Err(Error::UnpairedAttempts(format!(
                "morph {}: {} vs {} attempts",
                m.morph_id,
                a.len(),
                b.len()
            )));
        }
        if a.iter().zip(b).all(|(&x, &y)| x > threshold && y > threshold) {
            hits += 1;
        }
    }
    Ok(hits as f64 / scores.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    /// Attacks scored below the threshold, i.e. accepted as bona fide.
    pub apcer: f64,
    /// Bona fide samples scored at or above the threshold.
    pub bpcer: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetReport {
    pub d_eer: f64,
    pub bpcer_at_apcer_5: f64,
    pub bpcer_at_apcer_10: f64,
    pub attacks: usize,
    pub bona_fide: usize,
    pub curve: Vec<DetPoint>,
}

impl DetReport {
    /// `threshold,apcer,bpcer` rows for plotting.
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("threshold,apcer,bpcer\n");
        for p in &self.curve {
            let _ = writeln!(s, "{},{},{}", p.threshold, p.apcer, p.bpcer);
        }
        s
    }

    /// Lowest BPCER among operating points whose APCER is within `target`.
    pub fn bpcer_at_apcer(&self, target: f64) -> f64 {
        bpcer_at(&self.curve, target)
    }
}

fn bpcer_at(curve: &[DetPoint], target: f64) -> f64 {
    // APCER grows and BPCER shrinks with the threshold, so the answer is
    // the last point still within the APCER target.
    curve
        .iter()
        .rev()
        .find(|p| p.apcer <= target)
        .map_or(1.0, |p| p.bpcer)
}

/// Sweep every distinct score (plus one step above the maximum) as a
/// threshold and summarize the detector.
///
/// The D-EER is taken where APCER - BPCER changes sign, interpolating
/// linearly between the two bracketing operating points.
pub fn det_metrics(attack: &[f64], bona_fide: &[f64]) -> Result<DetReport> {
    if attack.is_empty() {
        return Err(Error::EmptyInput("attack scores"));
    }
    if bona_fide.is_empty() {
        return Err(Error::EmptyInput("bona fide scores"));
    }
    if attack.iter().chain(bona_fide).any(|v| !v.is_finite()) {
        return Err(Error::InvalidScores("non-finite detection score".into()));
    }
    let mut a = attack.to_vec();
    let mut b = bona_fide.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = a.iter().chain(&b).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(thresholds[thresholds.len() - 1].next_up());

    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut ia, mut ib) = (0usize, 0usize);
    let curve: Vec<DetPoint> = thresholds
        .into_iter()
        .map(|t| {
            while ia < a.len() && a[ia] < t {
                ia += 1;
            }
            while ib < b.len() && b[ib] < t {
                ib += 1;
            }
            DetPoint {
                threshold: t,
                apcer: ia as f64 / na,
                bpcer: (b.len() - ib) as f64 / nb,
            }
        })
        .collect();

    let cross = curve
        .iter()
        .position(|p| p.apcer >= p.bpcer)
        .expect("the last threshold has APCER 1 and BPCER 0");
    let d_eer = if cross == 0 || curve[cross].apcer == curve[cross].bpcer {
        let p = curve[cross];
        (p.apcer + p.bpcer) / 2.0
    } else {
        let (p, q) = (curve[cross - 1], curve[cross]);
        let (dp, dq) = (p.apcer - p.bpcer, q.apcer - q.bpcer);
        let f = -dp / (dq - dp);
        p.apcer + f * (q.apcer - p.apcer)
    };
    Ok(DetReport {
        d_eer,
        bpcer_at_apcer_5: bpcer_at(&curve, 0.05),
        bpcer_at_apcer_10: bpcer_at(&curve, 0.10),
        attacks: a.len(),
        bona_fide: b.len(),
        curve,
    })
}

/// Detection score with its class, as read from `sample_id,score,label`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledScore {
    pub sample_id: String,
    pub score: f64,
    pub is_morph: bool,
}

pub fn parse_labeled_scores(text: &str) -> Result<Vec<LabeledScore>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let ctx = || format!("labeled score line {}", lineno + 1);
        if f.len() != 3 {
            return Err(Error::parse(ctx(), format!("expected 3 fields, found {}", f.len())));
        }
        let Ok(score) = f[1].parse::<f64>() else {
            if out.is_empty() {
                continue;
            }
            return Err(Error::parse(ctx(), format!("bad score '{}'", f[1])));
        };
        out.push(LabeledScore {
            sample_id: f[0].to_string(),
            score,
            is_morph: parse_label(f[2]).ok_or_else(|| Error::parse(ctx(), format!("unknown label '{}'", f[2])))?,
        });
    }
    Ok(out)
}

/// `bonafide` or `morph` (a few spellings accepted); `true` for morph.
pub fn parse_label(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "morph" | "attack" | "1" => Some(true),
        "bonafide" | "bona_fide" | "bona fide" | "0" => Some(false),
        _ => None,
    }
}
