//! Discard-fraction sweeps.
//!
//! For every (corpus size, capacity, seed) a teacher is trained on the
//! original labels and scores the train split. Each grid fraction then gets
//! its own enhanced label set and student, evaluated on the eval split.
//!
//! With a results directory, each point lives in
//! `<root>/<size>/<capacity>/<fraction>/<seed>/` and is skipped on rerun once
//! its `done` marker exists. Aggregates are always rebuilt from the point
//! files, so fresh and resumed sweeps give identical results.

mod curves;
mod report;

pub use curves::{emit_curves, read_curve_csv, render_svg, CURVE_HEADER};
pub use report::{
    best_operating_point, per_class_report, write_group_report, GroupReport, GroupStats, Metric,
    PriorGroup,
};

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::read_key_values;
use crate::corpus::{write_text, Corpus, LabelState, Split};
use crate::error::{Error, Result};
use crate::fmt::{parse_opt, sig9};
use crate::metrics::{evaluate, read_eval_report, write_eval_report, EvalResult};
use crate::netcore::{save_checkpoint, train, Capacity, ModelParams, TrainConfig};
use crate::relabel::{enhance, save_scores, score_split, score_trainset, ScoreMatrix};

/// The discard grid, in percent.
pub const DEFAULT_GRID: [f64; 18] = [
    0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 15.0, 20.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CorpusSize {
    /// The full train split.
    Large,
    /// A uniform subsample of the train split.
    Small,
}

impl CorpusSize {
    pub fn as_str(self) -> &'static str {
        match self {
            CorpusSize::Large => "large",
            CorpusSize::Small => "small",
        }
    }
}

impl fmt::Display for CorpusSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub grid_percent: Vec<f64>,
    pub sizes: Vec<CorpusSize>,
    /// Train-clip ratio kept for [`CorpusSize::Small`].
    pub subsample: f64,
    pub capacities: Vec<Capacity>,
    /// Teacher capacity; `None` teaches with the student's own capacity.
    pub teacher_capacity: Option<Capacity>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            grid_percent: DEFAULT_GRID.to_vec(),
            sizes: vec![CorpusSize::Large],
            subsample: 0.2,
            capacities: vec![Capacity::Linear],
            teacher_capacity: None,
            seeds: vec![1, 2, 3, 4, 5],
            train: TrainConfig::default(),
            workers: 1,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.grid_percent.contains(&0.0) {
            return Err(Error::config("sweep.grid", "must contain the 0% baseline"));
        }
        if let Some(bad) = self.grid_percent.iter().find(|p| !(0.0..=100.0).contains(*p)) {
            return Err(Error::config("sweep.grid", format!("{bad}% not in [0, 100]")));
        }
        let mut seen = HashSet::new();
        if self.grid_percent.iter().any(|p| !seen.insert(p.to_bits())) {
            return Err(Error::config("sweep.grid", "duplicate fraction"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("sweep.seeds", "must not be empty"));
        }
        if self.sizes.is_empty() || self.capacities.is_empty() {
            return Err(Error::config("sweep.sizes", "sizes and capacities must not be empty"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::config("sweep.subsample", "must be in (0, 1]"));
        }
        if self.workers == 0 {
            return Err(Error::config("sweep.workers", "must be at least 1"));
        }
        self.train.validate()
    }

    fn sorted_grid(&self) -> Vec<f64> {
        let mut g = self.grid_percent.clone();
        g.sort_by(f64::total_cmp);
        g
    }
}

/// How well the flagged cells line up with the injected missing labels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlagStats {
    pub n_ignored: usize,
    pub n_ignored_injected: usize,
    pub n_implicit: usize,
    pub n_implicit_injected: usize,
}

impl FlagStats {
    /// Fraction of ignored cells that were injected; NaN with none ignored.
    pub fn precision(&self) -> f64 {
        self.n_ignored_injected as f64 / self.n_ignored as f64
    }

    /// Fraction of train implicit negatives that were injected.
    pub fn base_rate(&self) -> f64 {
        self.n_implicit_injected as f64 / self.n_implicit as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub eval: Option<EvalResult>,
    pub flags: FlagStats,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl SeedStats {
    pub fn of(values: &[f64]) -> SeedStats {
        if values.is_empty() {
            return SeedStats {
                mean: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
            };
        }
        SeedStats {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub fraction_percent: f64,
    /// One entry per seed, in seed order.
    pub outcomes: Vec<SeedOutcome>,
    pub dprime: SeedStats,
    pub lwlrap: SeedStats,
    /// Seed-mean per-class values.
    pub per_class_dprime: Vec<Option<f64>>,
    pub per_class_lwlrap: Vec<Option<f64>>,
}

fn per_class_mean(evals: &[&EvalResult], pick: fn(&EvalResult) -> &Vec<Option<f64>>) -> Vec<Option<f64>> {
    let Some(first) = evals.first() else {
        return Vec::new();
    };
    (0..pick(first).len())
        .map(|c| {
            let vals: Vec<f64> = evals.iter().filter_map(|e| pick(e)[c]).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

impl OperatingPoint {
    pub fn from_outcomes(fraction_percent: f64, mut outcomes: Vec<SeedOutcome>) -> Self {
        outcomes.sort_by_key(|o| o.seed);
        let evals: Vec<&EvalResult> = outcomes.iter().filter_map(|o| o.eval.as_ref()).collect();
        let d: Vec<f64> = evals.iter().map(|e| e.macro_dprime).collect();
        let l: Vec<f64> = evals.iter().map(|e| e.macro_lwlrap).collect();
        OperatingPoint {
            fraction_percent,
            dprime: SeedStats::of(&d),
            lwlrap: SeedStats::of(&l),
            per_class_dprime: per_class_mean(&evals, |e| &e.per_class_dprime),
            per_class_lwlrap: per_class_mean(&evals, |e| &e.per_class_lwlrap),
            outcomes,
        }
    }

    pub fn all_failed(&self) -> bool {
        self.outcomes.iter().all(|o| o.eval.is_none())
    }

    pub fn outcome(&self, seed: u64) -> Option<&SeedOutcome> {
        self.outcomes.iter().find(|o| o.seed == seed)
    }
}

/// One curve: every grid point for a (corpus size, capacity) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub size: CorpusSize,
    pub capacity: Capacity,
    /// Sorted by fraction; the first point is the 0% baseline.
    pub points: Vec<OperatingPoint>,
}

impl Curve {
    pub fn baseline(&self) -> Option<&OperatingPoint> {
        self.points.iter().find(|p| p.fraction_percent == 0.0)
    }

    pub fn point(&self, fraction_percent: f64) -> Option<&OperatingPoint> {
        self.points.iter().find(|p| p.fraction_percent == fraction_percent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub curves: Vec<Curve>,
}

impl SweepResult {
    pub fn curve(&self, size: CorpusSize, capacity: Capacity) -> Option<&Curve> {
        self.curves
            .iter()
            .find(|c| c.size == size && c.capacity == capacity)
    }

    pub fn n_failed(&self) -> usize {
        self.curves
            .iter()
            .flat_map(|c| &c.points)
            .flat_map(|p| &p.outcomes)
            .filter(|o| o.error.is_some())
            .count()
    }
}

/// Directory name for a fraction given in percent (`0.2`, `1`, `10`).
pub fn fraction_dir(percent: f64) -> String {
    format!("{percent}")
}

pub fn point_dir(root: &Path, size: CorpusSize, capacity: Capacity, percent: f64, seed: u64) -> PathBuf {
    root.join(size.as_str())
        .join(capacity.as_str())
        .join(fraction_dir(percent))
        .join(seed.to_string())
}

const DONE: &str = "done";
const FAILED: &str = "failed";
const EVAL_CSV: &str = "eval.csv";
const EVAL_SUMMARY: &str = "summary.txt";
const CHECKPOINT: &str = "model.mpm";

/// The corpus a (size, seed) run trains on.
pub fn corpus_for(corpus: &Corpus, size: CorpusSize, subsample: f64, seed: u64) -> Result<Corpus> {
    match size {
        CorpusSize::Large => Ok(corpus.clone()),
        CorpusSize::Small => corpus.subsample_train(subsample, seed),
    }
}

fn flag_stats(corpus: &Corpus, labels_after: &crate::corpus::LabelTable) -> FlagStats {
    let injected: HashSet<(usize, usize)> = corpus
        .injection_log
        .iter()
        .flatten()
        .map(|c| (c.row, c.class))
        .collect();
    let mut s = FlagStats::default();
    for r in corpus.rows_in(Split::Train) {
        for c in 0..corpus.n_classes() {
            let hit = injected.contains(&(r, c));
            match labels_after.get(r, c) {
                LabelState::Ignored => {
                    s.n_ignored += 1;
                    s.n_ignored_injected += usize::from(hit);
                    s.n_implicit += 1;
                    s.n_implicit_injected += usize::from(hit);
                }
                LabelState::ImplicitNegative => {
                    s.n_implicit += 1;
                    s.n_implicit_injected += usize::from(hit);
                }
                _ => {}
            }
        }
    }
    s
}

fn train_config(base: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..base.clone()
    }
}

/// Trains and evaluates one student on the enhanced labels for `percent`.
fn run_point(
    corpus: &Corpus,
    teacher_scores: &ScoreMatrix,
    teacher_name: &str,
    percent: f64,
    capacity: Capacity,
    train_cfg: &TrainConfig,
) -> Result<(ModelParams, EvalResult, FlagStats)> {
    let (_, enhanced) = enhance(&corpus.labels, teacher_scores, percent / 100.0, teacher_name)?;
    let flags = flag_stats(corpus, &enhanced.labels);
    let student = train(corpus, &enhanced.labels, train_cfg, capacity)?;
    let eval_scores = score_split(&student, corpus, Split::Eval)?;
    let eval = evaluate(&eval_scores, &corpus.labels)?;
    Ok((student, eval, flags))
}

fn write_point(
    dir: &Path,
    outcome: &Result<(ModelParams, EvalResult, FlagStats)>,
    train_cfg: &TrainConfig,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    match outcome {
        Ok((model, eval, flags)) => {
            let meta = vec![
                ("seed".to_string(), train_cfg.seed.to_string()),
                ("learning_rate".to_string(), train_cfg.learning_rate.to_string()),
                ("epochs".to_string(), train_cfg.epochs.to_string()),
                ("batch_size".to_string(), train_cfg.batch_size.to_string()),
                ("init_std".to_string(), train_cfg.init_std.to_string()),
                ("hidden_width".to_string(), train_cfg.hidden_width.to_string()),
            ];
            save_checkpoint(model, &dir.join(CHECKPOINT), &meta)?;
            write_eval_report(eval, &dir.join(EVAL_CSV), &dir.join(EVAL_SUMMARY))?;
            let flags_text = format!(
                "n_ignored={}\nn_ignored_injected={}\nn_implicit={}\nn_implicit_injected={}\n",
                flags.n_ignored, flags.n_ignored_injected, flags.n_implicit, flags.n_implicit_injected
            );
            write_text(&dir.join("flags.txt"), flags_text)?;
            let _ = fs::remove_file(dir.join(FAILED));
            write_text(&dir.join(DONE), "")
        }
        Err(e) => write_text(&dir.join(FAILED), format!("{e}\n")),
    }
}

/// Reads one point directory; `None` if it has neither marker.
pub fn read_point(dir: &Path, seed: u64) -> Result<Option<SeedOutcome>> {
    if dir.join(DONE).exists() {
        let eval = read_eval_report(&dir.join(EVAL_CSV), &dir.join(EVAL_SUMMARY))?;
        let kv = read_key_values(&dir.join("flags.txt"))?;
        let get = |k: &str| -> usize {
            kv.iter()
                .find(|(key, _)| key == k)
                .and_then(|(_, v)| v.parse().ok())
                .unwrap_or(0)
        };
        Ok(Some(SeedOutcome {
            seed,
            eval: Some(eval),
            flags: FlagStats {
                n_ignored: get("n_ignored"),
                n_ignored_injected: get("n_ignored_injected"),
                n_implicit: get("n_implicit"),
                n_implicit_injected: get("n_implicit_injected"),
            },
            error: None,
        }))
    } else if dir.join(FAILED).exists() {
        let msg = crate::corpus::read_text_file(&dir.join(FAILED))?;
        Ok(Some(SeedOutcome {
            seed,
            eval: None,
            flags: FlagStats::default(),
            error: Some(msg.trim().to_string()),
        }))
    } else {
        Ok(None)
    }
}

struct Group {
    size: CorpusSize,
    capacity: Capacity,
    seed: u64,
}

/// Runs every pending point, then aggregates.
///
/// A point whose training or evaluation fails is recorded as failed and the
/// sweep carries on; see [`SweepResult::n_failed`].
pub fn run_sweep(corpus: &Corpus, config: &SweepConfig, results_dir: Option<&Path>) -> Result<SweepResult> {
    config.validate()?;
    let grid = config.sorted_grid();
    let mut groups = Vec::new();
    for &size in &config.sizes {
        for &capacity in &config.capacities {
            for &seed in &config.seeds {
                groups.push(Group { size, capacity, seed });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;

    let outcomes: Vec<Result<Vec<(usize, f64, SeedOutcome)>>> = pool.install(|| {
        groups
            .par_iter()
            .enumerate()
            .map(|(gi, g)| run_group(corpus, config, &grid, g, results_dir).map(|v| {
                v.into_iter().map(|(p, o)| (gi, p, o)).collect()
            }))
            .collect()
    });

    let mut by_curve: BTreeMap<(CorpusSize, Capacity), BTreeMap<u64, Vec<SeedOutcome>>> = BTreeMap::new();
    for (res, g) in outcomes.into_iter().zip(&groups) {
        for (_, percent, outcome) in res? {
            by_curve
                .entry((g.size, g.capacity))
                .or_default()
                .entry(percent.to_bits())
                .or_default()
                .push(outcome);
        }
    }
    let curves = by_curve
        .into_iter()
        .map(|((size, capacity), points)| {
            let mut points: Vec<OperatingPoint> = points
                .into_iter()
                .map(|(bits, outs)| OperatingPoint::from_outcomes(f64::from_bits(bits), outs))
                .collect();
            points.sort_by(|a, b| a.fraction_percent.total_cmp(&b.fraction_percent));
            Curve { size, capacity, points }
        })
        .collect();
    let result = SweepResult { curves };
    if let Some(root) = results_dir {
        write_summary(&result, &root.join("summary.csv"))?;
        emit_curves(&result, &root.join("curves"))?;
    }
    Ok(result)
}

fn run_group(
    corpus: &Corpus,
    config: &SweepConfig,
    grid: &[f64],
    g: &Group,
    results_dir: Option<&Path>,
) -> Result<Vec<(f64, SeedOutcome)>> {
    let mut done = Vec::new();
    let mut pending = Vec::new();
    for &p in grid {
        let existing = match results_dir {
            Some(root) => {
                let dir = point_dir(root, g.size, g.capacity, p, g.seed);
                if dir.join(DONE).exists() {
                    read_point(&dir, g.seed)?
                } else {
                    None
                }
            }
            None => None,
        };
        match existing {
            Some(o) => done.push((p, o)),
            None => pending.push(p),
        }
    }
    if pending.is_empty() {
        return Ok(done);
    }

    let view = corpus_for(corpus, g.size, config.subsample, g.seed)?;
    let cfg = train_config(&config.train, g.seed);
    let teacher_cap = config.teacher_capacity.unwrap_or(g.capacity);
    let teacher_name = format!("{}-{}-seed{}", g.size, teacher_cap, g.seed);
    let teacher = train(&view, &view.labels, &cfg, teacher_cap)
        .and_then(|t| score_trainset(&t, &view).map(|s| (t, s)));
    let (teacher, scores) = match teacher {
        Ok(ts) => ts,
        Err(e) => {
            // Every pending point depends on the teacher.
            for &p in &pending {
                let failed = Err(Error::Domain(format!("teacher failed: {e}")));
                if let Some(root) = results_dir {
                    write_point(&point_dir(root, g.size, g.capacity, p, g.seed), &failed, &cfg)?;
                }
                done.push((p, failed_outcome(g.seed, &failed)));
            }
            return Ok(done);
        }
    };
    if let Some(root) = results_dir {
        let tdir = root
            .join("teachers")
            .join(g.size.as_str())
            .join(teacher_cap.as_str())
            .join(g.seed.to_string());
        fs::create_dir_all(&tdir).map_err(|e| Error::io(&tdir, e))?;
        save_checkpoint(&teacher, &tdir.join(CHECKPOINT), &[("seed".into(), g.seed.to_string())])?;
        save_scores(&scores, &tdir.join("scores.csv"))?;
    }

    for p in pending {
        let res = run_point(&view, &scores, &teacher_name, p, g.capacity, &cfg);
        let outcome = match results_dir {
            Some(root) => {
                let dir = point_dir(root, g.size, g.capacity, p, g.seed);
                write_point(&dir, &res, &cfg)?;
                read_point(&dir, g.seed)?.expect("point was just written")
            }
            None => match res {
                Ok((_, eval, flags)) => SeedOutcome {
                    seed: g.seed,
                    eval: Some(eval),
                    flags,
                    error: None,
                },
                Err(e) => failed_outcome::<()>(g.seed, &Err(e)),
            },
        };
        done.push((p, outcome));
    }
    Ok(done)
}

fn failed_outcome<T>(seed: u64, res: &Result<T>) -> SeedOutcome {
    SeedOutcome {
        seed,
        eval: None,
        flags: FlagStats::default(),
        error: res.as_ref().err().map(|e| e.to_string()),
    }
}

const SUMMARY_HEADER: &str =
    "size,capacity,fraction_percent,seed,status,macro_dprime,macro_lwlrap,n_ignored,flag_precision,injected_base_rate";

pub fn write_summary(result: &SweepResult, path: &Path) -> Result<()> {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for curve in &result.curves {
        for point in &curve.points {
            for o in &point.outcomes {
                let (status, d, l) = match &o.eval {
                    Some(e) => ("ok", sig9(e.macro_dprime), sig9(e.macro_lwlrap)),
                    None => ("failed", "NA".into(), "NA".into()),
                };
                out.push_str(&format!(
                    "{},{},{},{},{status},{d},{l},{},{},{}\n",
                    curve.size,
                    curve.capacity,
                    fraction_dir(point.fraction_percent),
                    o.seed,
                    o.flags.n_ignored,
                    sig9(o.flags.precision()),
                    sig9(o.flags.base_rate()),
                ));
            }
        }
    }
    write_text(path, out)
}

/// Rebuilds a sweep result from the point directories under `root`.
pub fn load_sweep(root: &Path) -> Result<SweepResult> {
    let mut curves = Vec::new();
    for size in [CorpusSize::Large, CorpusSize::Small] {
        for capacity in [Capacity::Linear, Capacity::Hidden] {
            let cdir = root.join(size.as_str()).join(capacity.as_str());
            if !cdir.is_dir() {
                continue;
            }
            let mut points = Vec::new();
            for fdir in sorted_entries(&cdir)? {
                let Some(percent) = fdir.file_name().and_then(|n| n.to_str()).and_then(parse_opt) else {
                    continue;
                };
                let mut outcomes = Vec::new();
                for sdir in sorted_entries(&fdir)? {
                    let Some(seed) = sdir.file_name().and_then(|n| n.to_str()).and_then(|s| s.parse().ok())
                    else {
                        continue;
                    };
                    if let Some(o) = read_point(&sdir, seed)? {
                        outcomes.push(o);
                    }
                }
                if !outcomes.is_empty() {
                    points.push(OperatingPoint::from_outcomes(percent, outcomes));
                }
            }
            points.sort_by(|a, b| a.fraction_percent.total_cmp(&b.fraction_percent));
            if !points.is_empty() {
                curves.push(Curve { size, capacity, points });
            }
        }
    }
    Ok(SweepResult { curves })
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SynthConfig};

    fn corpus() -> Corpus {
        generate_synthetic(&SynthConfig {
            n_classes: 5,
            n_clips: 150,
            n_eval_clips: 60,
            feature_dim: 6,
            patches_per_clip: 2,
            seed: 3,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    fn config(grid: &[f64]) -> SweepConfig {
        SweepConfig {
            grid_percent: grid.to_vec(),
            seeds: vec![1, 2],
            train: TrainConfig {
                epochs: 3,
                hidden_width: 8,
                ..TrainConfig::default()
            },
            ..SweepConfig::default()
        }
    }

    #[test]
    fn baseline_only_equals_direct_training() {
        let c = corpus();
        let r = run_sweep(&c, &config(&[0.0]), None).unwrap();
        assert_eq!(r.curves.len(), 1);
        let curve = &r.curves[0];
        assert_eq!(curve.points.len(), 1);
        for seed in [1, 2] {
            let direct = train(&c, &c.labels, &train_config(&config(&[0.0]).train, seed), Capacity::Linear).unwrap();
            let eval = evaluate(&score_split(&direct, &c, Split::Eval).unwrap(), &c.labels).unwrap();
            assert_eq!(curve.points[0].outcome(seed).unwrap().eval.as_ref().unwrap(), &eval);
        }
    }

    #[test]
    fn grid_must_contain_baseline() {
        assert!(run_sweep(&corpus(), &config(&[1.0, 2.0]), None).is_err());
        let mut cfg = config(&[0.0]);
        cfg.seeds.clear();
        assert!(run_sweep(&corpus(), &cfg, None).is_err());
    }

    #[test]
    fn results_directory_resume_is_idempotent() {
        let c = corpus();
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(&[0.0, 5.0, 20.0]);
        cfg.workers = 2;
        let first = run_sweep(&c, &cfg, Some(dir.path())).unwrap();
        let summary = fs::read(dir.path().join("summary.csv")).unwrap();
        // Remove one point so the rerun has to redo it.
        let p = point_dir(dir.path(), CorpusSize::Large, Capacity::Linear, 5.0, 2);
        fs::remove_dir_all(&p).unwrap();
        let second = run_sweep(&c, &cfg, Some(dir.path())).unwrap();
        assert_eq!(first, second);
        assert_eq!(fs::read(dir.path().join("summary.csv")).unwrap(), summary);
        assert_eq!(load_sweep(dir.path()).unwrap(), first);
        assert!(dir.path().join("curves").join("large_linear.svg").exists());
    }

    #[test]
    fn failed_points_are_recorded() {
        let mut c = corpus();
        // A NaN patch diverges every training run.
        let first = c.clips[0].clone();
        let mut data = first.values().to_vec();
        data[0] = f32::NAN;
        c.clips[0] = crate::corpus::Clip::new(first.id(), first.split(), first.dim(), data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let r = run_sweep(&c, &config(&[0.0, 10.0]), Some(dir.path())).unwrap();
        assert_eq!(r.n_failed(), 4);
        assert!(point_dir(dir.path(), CorpusSize::Large, Capacity::Linear, 10.0, 1).join("failed").exists());
        assert!(best_operating_point(&r.curves[0], Metric::Lwlrap).is_err());
    }

    #[test]
    fn fraction_directory_names() {
        assert_eq!(fraction_dir(0.0), "0");
        assert_eq!(fraction_dir(0.2), "0.2");
        assert_eq!(fraction_dir(10.0), "10");
    }
}
