use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use morphcloud::biometrics::{fmmpmr, mmpmr_with, parse_score_csv, parse_score_list, threshold_at_far, AttemptRule};
use morphcloud::cleanup::clip_sphere_region;
use morphcloud::holefill::fill_holes;
use morphcloud::mad::{
    builtin_features, check_subject_disjoint, evaluate, feature_csv, parse_feature_csv, train_linear_svm, FeatureVector,
    LinearModel,
};
use morphcloud::morph::load_landmarks;
use morphcloud::pipeline::{dump_debug, run_morph, save_holefill_debug, MorphConfig, Stage, StageContext};
use morphcloud::ply::{load_ply, save_ply, PlyFormat};
use morphcloud::quality::{quality_report, QualityScores};
use morphcloud::{min_enclosing_sphere, ColoredPointCloud, Error};
use serde::Serialize;

use crate::config::{default_manifest_path, Config, Manifest};
use crate::{Command, Failure, ManifestArgs};

type Outcome = Result<(), Failure>;

pub fn run(command: Command, config: Config) -> Outcome {
    match command {
        Command::Morph(a) => morph(a, config),
        Command::Holefill(a) => holefill(a, config),
        Command::Cleanup(a) => cleanup(a, config),
        Command::Quality(a) => quality(a, config),
        Command::Features(a) => features(a),
        Command::Vuln(a) => vuln(a, config),
        Command::MadTrain(a) => mad_train(a, config),
        Command::MadEval(a) => mad_eval(a),
    }
}

/// Canonical-view overrides shared by the raster commands.
#[derive(Args, Debug, Clone, Default)]
pub struct ViewArgs {
    /// Raster width in pixels.
    #[arg(long)]
    pub width: Option<usize>,
    /// Raster height in pixels.
    #[arg(long)]
    pub height: Option<usize>,
    /// Pixels per world unit.
    #[arg(long)]
    pub scale: Option<f64>,
}

/// Hole-filling overrides.
#[derive(Args, Debug, Clone, Default)]
pub struct HolefillFlags {
    /// Average only the registered translated views.
    #[arg(long)]
    pub exclude_canonical: bool,
    /// Inpainting radius in pixels.
    #[arg(long)]
    pub inpaint_radius: Option<f64>,
    /// Seed of the RANSAC sampler.
    #[arg(long)]
    pub ransac_seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct MorphArgs {
    /// First subject's cloud (PLY).
    #[arg(long, required_unless_present = "replay")]
    pub cloud1: Option<PathBuf>,
    /// Second subject's cloud (PLY).
    #[arg(long, required_unless_present = "replay")]
    pub cloud2: Option<PathBuf>,
    /// First subject's 68 landmarks as `x,y` pixels in the canonical view of
    /// the normalized cloud.
    #[arg(long, required_unless_present = "replay")]
    pub landmarks1: Option<PathBuf>,
    #[arg(long, required_unless_present = "replay")]
    pub landmarks2: Option<PathBuf>,
    /// Output PLY.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Rerun with the inputs and configuration of an earlier manifest.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Weight of the first subject.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Common enclosing radius after normalization.
    #[arg(long)]
    pub target_radius: Option<f64>,
    /// Fraction of the enclosing radius kept by the final clip.
    #[arg(long)]
    pub keep_fraction: Option<f64>,
    /// Skip hole filling.
    #[arg(long)]
    pub no_holefill: bool,
    #[command(flatten)]
    pub view: ViewArgs,
    #[command(flatten)]
    pub holefill: HolefillFlags,
    /// Dump every intermediate raster here as PNG.
    #[arg(long)]
    pub debug_dir: Option<PathBuf>,
    /// Write ASCII instead of binary PLY.
    #[arg(long)]
    pub ascii: bool,
    #[command(flatten)]
    pub manifest: ManifestArgs,
}

#[derive(Args, Debug)]
pub struct HolefillArgs {
    /// Cloud in canonical-view coordinates (PLY).
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub view: ViewArgs,
    #[command(flatten)]
    pub holefill: HolefillFlags,
    #[arg(long)]
    pub debug_dir: Option<PathBuf>,
    #[arg(long)]
    pub ascii: bool,
    #[command(flatten)]
    pub manifest: ManifestArgs,
}

#[derive(Args, Debug)]
pub struct CleanupArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub keep_fraction: Option<f64>,
    #[arg(long)]
    pub ascii: bool,
    #[command(flatten)]
    pub manifest: ManifestArgs,
}

#[derive(Args, Debug)]
pub struct QualityArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Write the scores as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Write per-point features as CSV.
    #[arg(long)]
    pub per_point: Option<PathBuf>,
    /// Neighbourhood size for the eigen-features.
    #[arg(long)]
    pub neighbors: Option<usize>,
    /// Histogram bins for the entropies.
    #[arg(long)]
    pub bins: Option<usize>,
    #[command(flatten)]
    pub manifest: ManifestArgs,
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    /// CSV of `sample_id,subject_id,label,ply_path`; relative paths are
    /// resolved against the list's directory.
    #[arg(long)]
    pub list: PathBuf,
    /// Feature CSV to write.
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub manifest: ManifestArgs,
}

#[derive(Args, Debug)]
pub struct VulnArgs {
    /// Morph comparison scores: `morph_id,subject_idx,attempt_idx,score`.
    #[arg(long)]
    pub scores: PathBuf,
    /// Verification threshold; overrides calibration from `--nonmated`.
    #[arg(long, required_unless_present = "nonmated")]
    pub threshold: Option<f64>,
    /// Non-mated comparison scores for calibrating the threshold at `--far`.
    #[arg(long)]
    pub nonmated: Option<PathBuf>,
    #[arg(long)]
    pub far: Option<f64>,
    /// Require every attempt (`min`) instead of any attempt (`max`) for MMPMR.
    #[arg(long, value_parser = parse_rule)]
    pub rule: Option<AttemptRule>,
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[command(flatten)]
    pub manifest: ManifestArgs,
}

#[derive(Args, Debug)]
pub struct MadTrainArgs {
    /// Training features: `sample_id,[subject_id,]label,v1..vN`.
    #[arg(long)]
    pub train: PathBuf,
    /// Model JSON to write.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub manifest: ManifestArgs,
}

#[derive(Args, Debug)]
pub struct MadEvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Training features, checked for subjects shared with the test set.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// DET curve as `threshold,apcer,bpcer`.
    #[arg(long)]
    pub det_csv: Option<PathBuf>,
    /// Per-sample scores as `sample_id,score,label`.
    #[arg(long)]
    pub scores_csv: Option<PathBuf>,
    #[command(flatten)]
    pub manifest: ManifestArgs,
}

fn parse_rule(s: &str) -> Result<AttemptRule, String> {
    match s {
        "max" => Ok(AttemptRule::Max),
        "min" => Ok(AttemptRule::Min),
        _ => Err(format!("expected 'max' or 'min', got '{s}'")),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("input: {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::input(format!("output: {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::input(format!("output: {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    write_text(path, &(serde_json::to_string_pretty(value).expect("reports serialize") + "\n"))
}

fn load_cloud(path: &Path) -> Result<ColoredPointCloud, Failure> {
    Ok(load_ply(path).stage(Stage::Input)?)
}

fn save_cloud(cloud: &ColoredPointCloud, path: &Path, ascii: bool) -> Outcome {
    let format = if ascii { PlyFormat::Ascii } else { PlyFormat::BinaryLittleEndian };
    Ok(save_ply(cloud, path, format).stage(Stage::Output)?)
}

fn finish(manifest: Manifest, args: &ManifestArgs, main_output: Option<&Path>) -> Outcome {
    if let Some(path) = args.manifest.clone().or_else(|| main_output.map(default_manifest_path)) {
        manifest.save(&path)?;
        log::info!("manifest written to {}", path.display());
    }
    Ok(())
}

fn apply_view(config: &mut MorphConfig, v: &ViewArgs) {
    let view = &mut config.view;
    if let Some(w) = v.width {
        view.width = w;
        view.cx = w as f64 / 2.0;
    }
    if let Some(h) = v.height {
        view.height = h;
        view.cy = h as f64 / 2.0;
    }
    if let Some(s) = v.scale {
        view.scale = s;
    }
}

fn apply_holefill(config: &mut MorphConfig, f: &HolefillFlags) {
    let hf = &mut config.holefill;
    hf.exclude_canonical |= f.exclude_canonical;
    if let Some(r) = f.inpaint_radius {
        hf.inpaint_radius = r;
    }
    if let Some(s) = f.ransac_seed {
        hf.ransac.seed = s;
    }
}

fn morph(a: MorphArgs, config: Config) -> Outcome {
    let (mut cfg, paths) = match &a.replay {
        Some(m) => {
            let prev = Manifest::load(m)?;
            if prev.command != "morph" {
                return Err(Failure::input(format!("manifest {} records a '{}' run", m.display(), prev.command)));
            }
            let cfg: MorphConfig = serde_json::from_value(prev.config.clone())
                .map_err(|e| Failure::input(format!("manifest {}: {e}", m.display())))?;
            let paths = ["cloud1", "cloud2", "landmarks1", "landmarks2"].map(|k| prev.required_input(k).map(Path::to_path_buf));
            let [c1, c2, l1, l2] = paths;
            (cfg, [c1?, c2?, l1?, l2?])
        }
        None => {
            let take = |p: &Option<PathBuf>| p.clone().expect("clap enforces presence without --replay");
            (config.morph, [take(&a.cloud1), take(&a.cloud2), take(&a.landmarks1), take(&a.landmarks2)])
        }
    };
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.target_radius {
        cfg.target_radius = v;
    }
    if let Some(v) = a.keep_fraction {
        cfg.keep_fraction = v;
    }
    cfg.hole_fill &= !a.no_holefill;
    apply_view(&mut cfg, &a.view);
    apply_holefill(&mut cfg, &a.holefill);
    cfg.holefill.keep_views |= a.debug_dir.is_some();

    let [c1, c2, l1, l2] = &paths;
    let pc1 = load_cloud(c1)?;
    let pc2 = load_cloud(c2)?;
    let lm1 = load_landmarks(l1, &cfg.view).stage(Stage::Input)?;
    let lm2 = load_landmarks(l2, &cfg.view).stage(Stage::Input)?;
    let out = run_morph(&pc1, &pc2, &lm1, &lm2, &cfg)?;
    save_cloud(&out.cloud, &a.output, a.ascii)?;
    if let Some(dir) = &a.debug_dir {
        dump_debug(&out, &cfg.view, dir).stage(Stage::Output)?;
    }
    println!(
        "morph: {} + {} points -> {} morphed -> {} written to {}",
        out.summary.input_points[0],
        out.summary.input_points[1],
        out.summary.morph_points,
        out.summary.output_points,
        a.output.display()
    );
    let mut manifest = Manifest::new("morph", &cfg)
        .input("cloud1", c1)
        .input("cloud2", c2)
        .input("landmarks1", l1)
        .input("landmarks2", l2)
        .output("cloud", &a.output);
    if let Some(dir) = &a.debug_dir {
        manifest = manifest.output("debug_dir", dir);
    }
    manifest.summary = serde_json::to_value(&out.summary).expect("summary serializes");
    finish(manifest, &a.manifest, Some(&a.output))
}

fn holefill(a: HolefillArgs, config: Config) -> Outcome {
    let mut cfg = config.morph;
    apply_view(&mut cfg, &a.view);
    apply_holefill(&mut cfg, &a.holefill);
    cfg.holefill.keep_views |= a.debug_dir.is_some();
    cfg.view.validate().stage(Stage::Input)?;
    let cloud = load_cloud(&a.input)?;
    let r = fill_holes(&cloud, &cfg.view, &cfg.holefill).stage(Stage::HoleFill)?;
    save_cloud(&r.cloud, &a.output, a.ascii)?;
    if let Some(dir) = &a.debug_dir {
        save_holefill_debug(&r, &cfg.view, dir).stage(Stage::Output)?;
    }
    let holes = r.hole_mask.data().iter().filter(|&&m| m).count();
    println!("holefill: {} holes in the canonical view, {} points written", holes, r.cloud.len());
    println!("{:>28}  {:>6}  {:>7}  {:>7}  status", "offset", "holes", "matches", "inliers");
    for v in &r.reports {
        let o = format!("({:.3}, {:.3}, {:.3})", v.offset[0], v.offset[1], v.offset[2]);
        println!(
            "{o:>28}  {:>6}  {:>7}  {:>7}  {}",
            v.holes,
            v.matches,
            v.inliers,
            v.dropped.as_deref().unwrap_or("registered")
        );
    }
    let mut manifest = Manifest::new("holefill", &cfg).input("cloud", &a.input).output("cloud", &a.output);
    manifest.summary = serde_json::json!({ "canonical_holes": holes, "points": r.cloud.len(), "views": r.reports });
    finish(manifest, &a.manifest, Some(&a.output))
}

fn cleanup(a: CleanupArgs, config: Config) -> Outcome {
    let keep = a.keep_fraction.unwrap_or(config.morph.keep_fraction);
    let cloud = load_cloud(&a.input)?;
    let sphere = min_enclosing_sphere(&cloud).stage(Stage::Cleanup)?;
    let out = clip_sphere_region(&cloud, &sphere, keep).stage(Stage::Cleanup)?;
    save_cloud(&out, &a.output, a.ascii)?;
    println!("cleanup: kept {} of {} points", out.len(), cloud.len());
    let mut manifest = Manifest::new("cleanup", &serde_json::json!({ "keep_fraction": keep }))
        .input("cloud", &a.input)
        .output("cloud", &a.output);
    manifest.summary = serde_json::json!({ "sphere": sphere, "input_points": cloud.len(), "output_points": out.len() });
    finish(manifest, &a.manifest, Some(&a.output))
}

#[derive(Serialize)]
struct QualityJson<'a> {
    input: &'a Path,
    points: usize,
    neighbors: usize,
    bins: usize,
    scores: QualityScores,
}

fn quality(a: QualityArgs, config: Config) -> Outcome {
    let mut cfg = config.quality;
    if let Some(k) = a.neighbors {
        cfg.neighbors = k;
    }
    if let Some(b) = a.bins {
        cfg.bins = b;
    }
    let cloud = load_cloud(&a.input)?;
    let report = quality_report(&cloud, &cfg).stage(Stage::Input)?;
    println!("quality of {} ({} points)", a.input.display(), report.points);
    for (name, v) in QualityScores::NAMES.iter().zip(report.scores.as_array()) {
        println!("  {name:<12} {v:>8.4}");
    }
    let out = QualityJson {
        input: &a.input,
        points: report.points,
        neighbors: cfg.neighbors,
        bins: cfg.bins,
        scores: report.scores,
    };
    if let Some(p) = &a.json {
        write_json(p, &out)?;
    }
    if let Some(p) = &a.per_point {
        write_text(p, &report.per_point_csv())?;
    }
    let mut manifest = Manifest::new("quality", &cfg).input("cloud", &a.input);
    for (k, p) in [("json", &a.json), ("per_point", &a.per_point)] {
        if let Some(p) = p {
            manifest = manifest.output(k, p);
        }
    }
    manifest.summary = serde_json::to_value(&out).expect("scores serialize");
    finish(manifest, &a.manifest, a.json.as_deref())
}

fn features(a: FeaturesArgs) -> Outcome {
    let base = a.list.parent().unwrap_or(Path::new(".")).to_path_buf();
    let text = read_text(&a.list)?;
    let mut out: Vec<FeatureVector> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(Failure::input(format!("input: {} line {}: expected 4 fields", a.list.display(), lineno + 1)));
        }
        let Some(is_morph) = morphcloud::biometrics::parse_label(f[2]) else {
            if out.is_empty() && lineno == 0 {
                continue;
            }
            return Err(Failure::input(format!("input: {} line {}: unknown label '{}'", a.list.display(), lineno + 1, f[2])));
        };
        let path = base.join(f[3]);
        let cloud = load_cloud(&path)?;
        let values = builtin_features(&cloud).stage(Stage::Input)?;
        log::info!("features of {}", path.display());
        out.push(FeatureVector {
            sample_id: f[0].into(),
            subject_id: f[1].into(),
            is_morph,
            values,
        });
    }
    if out.is_empty() {
        return Err(Failure::input(format!("input: {} lists no clouds", a.list.display())));
    }
    write_text(&a.output, &feature_csv(&out))?;
    println!("features: {} samples written to {}", out.len(), a.output.display());
    let manifest = Manifest::new("features", &serde_json::json!({ "extractor": "builtin-16" }))
        .input("list", &a.list)
        .output("features", &a.output);
    finish(manifest, &a.manifest, Some(&a.output))
}

#[derive(Serialize)]
struct VulnJson {
    morphs: usize,
    threshold: f64,
    far: Option<f64>,
    rule: AttemptRule,
    mmpmr: f64,
    fmmpmr: Option<f64>,
}

fn vuln(a: VulnArgs, config: Config) -> Outcome {
    let far = a.far.unwrap_or(config.vuln.far);
    let rule = a.rule.unwrap_or(config.vuln.rule);
    let scores = parse_score_csv(&read_text(&a.scores)?).stage(Stage::Input)?;
    let (threshold, far) = match (a.threshold, &a.nonmated) {
        (Some(t), _) => (t, None),
        (None, Some(p)) => {
            let nonmated = parse_score_list(&read_text(p)?).stage(Stage::Input)?;
            (threshold_at_far(&nonmated, far).stage(Stage::Input)?, Some(far))
        }
        (None, None) => unreachable!("clap requires one of them"),
    };
    let m = mmpmr_with(&scores, threshold, rule);
    let f = match fmmpmr(&scores, threshold) {
        Ok(v) => Some(v),
        Err(Error::UnpairedAttempts(msg)) => {
            log::warn!("FMMPMR skipped: {msg}");
            None
        }
        Err(e) => return Err(Failure::input(format!("input: {e}"))),
    };
    println!("morphs     {}", scores.len());
    println!("threshold  {threshold}");
    println!("MMPMR      {:.4}", m);
    match f {
        Some(v) => println!("FMMPMR     {v:.4}"),
        None => println!("FMMPMR     n/a (unpaired attempts)"),
    }
    let out = VulnJson {
        morphs: scores.len(),
        threshold,
        far,
        rule,
        mmpmr: m,
        fmmpmr: f,
    };
    if let Some(p) = &a.json {
        write_json(p, &out)?;
    }
    let mut manifest = Manifest::new("vuln", &config.vuln).input("scores", &a.scores);
    if let Some(p) = &a.nonmated {
        manifest = manifest.input("nonmated", p);
    }
    if let Some(p) = &a.json {
        manifest = manifest.output("json", p);
    }
    manifest.summary = serde_json::to_value(&out).expect("report serializes");
    finish(manifest, &a.manifest, a.json.as_deref())
}

fn load_features(path: &Path) -> Result<Vec<FeatureVector>, Failure> {
    parse_feature_csv(&read_text(path)?).map_err(|e| Failure::input(format!("input: {}: {e}", path.display())))
}

fn mad_train(a: MadTrainArgs, config: Config) -> Outcome {
    let mut params = config.svm;
    if let Some(c) = a.c {
        params.c = c;
    }
    if let Some(e) = a.epochs {
        params.epochs = e;
    }
    if let Some(s) = a.seed {
        params.seed = s;
    }
    let train = load_features(&a.train)?;
    let model = train_linear_svm(&train, &params).stage(Stage::Input)?;
    write_json(&a.model, &model)?;
    let eval = evaluate(&model, &train).stage(Stage::Input)?;
    println!(
        "mad-train: {} samples, {} dims ({} dropped), training D-EER {:.4}",
        train.len(),
        model.dim(),
        model.dropped.len(),
        eval.det.d_eer
    );
    let mut manifest = Manifest::new("mad-train", &params).input("train", &a.train).output("model", &a.model);
    manifest.summary = serde_json::json!({
        "samples": train.len(),
        "dropped": model.dropped,
        "final_objective": model.objective.last(),
        "train_d_eer": eval.det.d_eer,
    });
    finish(manifest, &a.manifest, Some(&a.model))
}

#[derive(Serialize)]
struct MadEvalJson {
    samples: usize,
    attacks: usize,
    bona_fide: usize,
    d_eer: f64,
    bpcer_at_apcer_5: f64,
    bpcer_at_apcer_10: f64,
}

fn mad_eval(a: MadEvalArgs) -> Outcome {
    let model: LinearModel = serde_json::from_str(&read_text(&a.model)?)
        .map_err(|e| Failure::input(format!("input: {}: {e}", a.model.display())))?;
    let test = load_features(&a.test)?;
    if let Some(p) = &a.train {
        check_subject_disjoint(&load_features(p)?, &test).stage(Stage::Input)?;
    }
    let eval = evaluate(&model, &test).stage(Stage::Input)?;
    let d = &eval.det;
    let mut table = String::new();
    let _ = writeln!(table, "samples          {} ({} morph, {} bona fide)", test.len(), d.attacks, d.bona_fide);
    let _ = writeln!(table, "D-EER            {:.4}", d.d_eer);
    let _ = writeln!(table, "BPCER@APCER=5%   {:.4}", d.bpcer_at_apcer_5);
    let _ = write!(table, "BPCER@APCER=10%  {:.4}", d.bpcer_at_apcer_10);
    println!("{table}");
    let out = MadEvalJson {
        samples: test.len(),
        attacks: d.attacks,
        bona_fide: d.bona_fide,
        d_eer: d.d_eer,
        bpcer_at_apcer_5: d.bpcer_at_apcer_5,
        bpcer_at_apcer_10: d.bpcer_at_apcer_10,
    };
    if let Some(p) = &a.json {
        write_json(p, &out)?;
    }
    if let Some(p) = &a.det_csv {
        write_text(p, &d.curve_csv())?;
    }
    if let Some(p) = &a.scores_csv {
        write_text(p, &eval.scores_csv())?;
    }
    let mut manifest = Manifest::new("mad-eval", &model.params).input("model", &a.model).input("test", &a.test);
    if let Some(p) = &a.train {
        manifest = manifest.input("train", p);
    }
    for (k, p) in [("json", &a.json), ("det_csv", &a.det_csv), ("scores_csv", &a.scores_csv)] {
        if let Some(p) = p {
            manifest = manifest.output(k, p);
        }
    }
    manifest.summary = serde_json::to_value(&out).expect("report serializes");
    finish(manifest, &a.manifest, a.json.as_deref())
}
