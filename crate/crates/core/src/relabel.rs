//! Flagging suspected missing labels with a teacher's scores.
//!
//! Per class, the implicit negatives are ranked by the teacher's clip-level
//! score and the top `floor(fraction × n_implicit)` of them are marked
//! [`LabelState::Ignored`]. The resulting enhanced label set yields a binary
//! loss mask that is 0 exactly on the ignored cells.

use std::collections::HashSet;
use std::path::Path;

use crate::corpus::{read_text_file, write_text, Corpus, LabelState, LabelTable, Split};
use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::netcore::{predict_clip, ModelParams, Supervision};

/// Clip-level probabilities, one row per clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    clip_ids: Vec<String>,
    n_classes: usize,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(clip_ids: Vec<String>, n_classes: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != clip_ids.len() * n_classes {
            return Err(Error::Shape(format!(
                "{} scores for {} clips × {n_classes} classes",
                values.len(),
                clip_ids.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("score {bad} is not a probability")));
        }
        Ok(ScoreMatrix {
            clip_ids,
            n_classes,
            values,
        })
    }

    pub fn clip_ids(&self) -> &[String] {
        &self.clip_ids
    }

    pub fn n_clips(&self) -> usize {
        self.clip_ids.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.values[i * self.n_classes + c]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Scores every clip of `split` with [`predict_clip`].
pub fn score_split(model: &ModelParams, corpus: &Corpus, split: Split) -> Result<ScoreMatrix> {
    if corpus.feature_dim() != model.input_dim() || corpus.n_classes() != model.n_classes() {
        return Err(Error::Shape(format!(
            "model is {}→{}, corpus is {}→{}",
            model.input_dim(),
            model.n_classes(),
            corpus.feature_dim(),
            corpus.n_classes()
        )));
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for clip in corpus.clips.iter().filter(|c| c.split() == split) {
        ids.push(clip.id().to_string());
        values.extend(predict_clip(model, clip)?);
    }
    ScoreMatrix::new(ids, corpus.n_classes(), values)
}

/// Teacher scores for the train split.
pub fn score_trainset(teacher: &ModelParams, corpus: &Corpus) -> Result<ScoreMatrix> {
    score_split(teacher, corpus, Split::Train)
}

pub fn save_scores(scores: &ScoreMatrix, path: &Path) -> Result<()> {
    let mut out = String::from("clip_id");
    for c in 0..scores.n_classes {
        out.push_str(&format!(",score_{c}"));
    }
    out.push('\n');
    for (i, id) in scores.clip_ids.iter().enumerate() {
        out.push_str(id);
        for v in scores.row(i) {
            out.push(',');
            out.push_str(&sig9(*v));
        }
        out.push('\n');
    }
    write_text(path, out)
}

pub fn load_scores(path: &Path) -> Result<ScoreMatrix> {
    let text = read_text_file(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    let c_n = cols.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("clip_id".to_string())
        .chain((0..c_n).map(|c| format!("score_{c}")))
        .collect();
    if c_n == 0 || cols != expected {
        return Err(Error::parse(path, 1, "expected header `clip_id,score_0,...`"));
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != c_n + 1 {
            return Err(Error::parse(path, i + 2, format!("expected {} fields", c_n + 1)));
        }
        ids.push(f[0].to_string());
        for v in &f[1..] {
            values.push(
                v.parse::<f64>()
                    .map_err(|_| Error::parse(path, i + 2, format!("bad score `{v}`")))?,
            );
        }
    }
    ScoreMatrix::new(ids, c_n, values)
}

/// `floor(fraction × n)`, treating products within 1e-9 of an integer as
/// that integer.
pub fn discard_count(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    let r = x.round();
    let k = if (x - r).abs() < 1e-9 { r } else { x.floor() };
    (k.max(0.0) as usize).min(n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdVector {
    pub fraction: f64,
    /// Implicit negatives scoring strictly above `thresholds[c]` are flagged.
    pub thresholds: Vec<f64>,
    /// Implicit negatives strictly above the threshold.
    pub counts: Vec<usize>,
    pub n_implicit: Vec<usize>,
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Domain(format!("discard fraction {fraction} not in [0, 1]")));
    }
    Ok(())
}

/// Label row for every score row.
fn label_rows(scores: &ScoreMatrix, labels: &LabelTable) -> Result<Vec<usize>> {
    if scores.n_classes() != labels.n_classes() {
        return Err(Error::Shape(format!(
            "scores have {} classes, labels {}",
            scores.n_classes(),
            labels.n_classes()
        )));
    }
    scores
        .clip_ids()
        .iter()
        .map(|id| {
            labels
                .row_of(id)
                .ok_or_else(|| Error::Shape(format!("no labels for scored clip `{id}`")))
        })
        .collect()
}

/// Per-class thresholds over the scores of implicit-negative cells.
///
/// With `k = floor(fraction × n_implicit)`, the threshold is the (k+1)-th
/// largest implicit-negative score: `+∞` when `k = 0` and `−∞` when every
/// implicit negative is discarded. Scores tied with the threshold are kept.
pub fn compute_thresholds(
    scores: &ScoreMatrix,
    labels: &LabelTable,
    fraction: f64,
) -> Result<ThresholdVector> {
    check_fraction(fraction)?;
    let rows = label_rows(scores, labels)?;
    let c_n = scores.n_classes();
    let mut out = ThresholdVector {
        fraction,
        thresholds: Vec::with_capacity(c_n),
        counts: Vec::with_capacity(c_n),
        n_implicit: Vec::with_capacity(c_n),
    };
    let mut implicit = Vec::new();
    for c in 0..c_n {
        implicit.clear();
        implicit.extend(
            rows.iter()
                .enumerate()
                .filter(|(_, &r)| labels.get(r, c) == LabelState::ImplicitNegative)
                .map(|(i, _)| scores.get(i, c)),
        );
        implicit.sort_by(|a, b| b.total_cmp(a));
        let n = implicit.len();
        let k = discard_count(fraction, n);
        let t = if k == 0 {
            f64::INFINITY
        } else if k == n {
            f64::NEG_INFINITY
        } else {
            implicit[k]
        };
        out.counts.push(implicit.iter().filter(|&&s| s > t).count());
        out.thresholds.push(t);
        out.n_implicit.push(n);
    }
    Ok(out)
}

/// Labels with suspected missing positives marked [`LabelState::Ignored`].
#[derive(Debug, Clone, PartialEq)]
pub struct EnhancedLabelSet {
    pub labels: LabelTable,
    pub fraction: f64,
    pub teacher: String,
}

/// Marks implicit negatives of the scored clips whose score exceeds their
/// class threshold. Every other cell is copied unchanged.
pub fn flag_missing(
    labels: &LabelTable,
    scores: &ScoreMatrix,
    thresholds: &ThresholdVector,
) -> Result<EnhancedLabelSet> {
    let rows = label_rows(scores, labels)?;
    if thresholds.thresholds.len() != labels.n_classes() {
        return Err(Error::Shape("threshold vector length differs from class count".into()));
    }
    let mut out = labels.clone();
    for (i, &r) in rows.iter().enumerate() {
        for (c, &t) in thresholds.thresholds.iter().enumerate() {
            if labels.get(r, c) == LabelState::ImplicitNegative && scores.get(i, c) > t {
                out.set(r, c, LabelState::Ignored);
            }
        }
    }
    Ok(EnhancedLabelSet {
        labels: out,
        fraction: thresholds.fraction,
        teacher: String::new(),
    })
}

/// Thresholds and flags in one call, tagging the teacher.
pub fn enhance(
    labels: &LabelTable,
    scores: &ScoreMatrix,
    fraction: f64,
    teacher: &str,
) -> Result<(ThresholdVector, EnhancedLabelSet)> {
    let t = compute_thresholds(scores, labels, fraction)?;
    let mut e = flag_missing(labels, scores, &t)?;
    e.teacher = teacher.to_string();
    Ok((t, e))
}

/// Binary loss mask, 0 exactly on ignored cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskMatrix {
    pub clip_ids: Vec<String>,
    pub n_classes: usize,
    pub values: Vec<u8>,
}

impl MaskMatrix {
    pub fn zeros(&self) -> usize {
        self.values.iter().filter(|&&m| m == 0).count()
    }
}

pub fn build_mask(enhanced: &EnhancedLabelSet) -> MaskMatrix {
    let t = &enhanced.labels;
    MaskMatrix {
        clip_ids: t.clip_ids().to_vec(),
        n_classes: t.n_classes(),
        values: t
            .states()
            .iter()
            .map(|s| u8::from(*s != LabelState::Ignored))
            .collect(),
    }
}

const THRESHOLDS_HEADER: &str = "class_id,fraction,n_implicit,n_ignored,threshold";

/// Thresholds are written in shortest round-trip form, so reloading is exact.
pub fn save_thresholds(t: &ThresholdVector, path: &Path) -> Result<()> {
    let mut out = format!("{THRESHOLDS_HEADER}\n");
    for c in 0..t.thresholds.len() {
        out.push_str(&format!(
            "{c},{:e},{},{},{:e}\n",
            t.fraction, t.n_implicit[c], t.counts[c], t.thresholds[c]
        ));
    }
    write_text(path, out)
}

pub fn load_thresholds(path: &Path) -> Result<ThresholdVector> {
    let text = read_text_file(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(THRESHOLDS_HEADER) {
        return Err(Error::parse(path, 1, format!("expected header `{THRESHOLDS_HEADER}`")));
    }
    let mut t = ThresholdVector {
        fraction: f64::NAN,
        thresholds: Vec::new(),
        counts: Vec::new(),
        n_implicit: Vec::new(),
    };
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let f: Vec<&str> = line.split(',').collect();
        let [class, fraction, n_implicit, n_ignored, threshold] = f[..] else {
            return Err(Error::parse(path, n, format!("expected 5 fields, got {}", f.len())));
        };
        let bad = |what: &str, v: &str| Error::parse(path, n, format!("bad {what} `{v}`"));
        if class.parse::<usize>().ok() != Some(i) {
            return Err(bad("class id", class));
        }
        let fraction: f64 = fraction.parse().map_err(|_| bad("fraction", fraction))?;
        if i == 0 {
            t.fraction = fraction;
        } else if fraction.to_bits() != t.fraction.to_bits() {
            return Err(bad("fraction", &fraction.to_string()));
        }
        t.n_implicit.push(n_implicit.parse().map_err(|_| bad("count", n_implicit))?);
        t.counts.push(n_ignored.parse().map_err(|_| bad("count", n_ignored))?);
        t.thresholds.push(threshold.parse().map_err(|_| bad("threshold", threshold))?);
    }
    if t.thresholds.is_empty() {
        return Err(Error::parse(path, 1, "no classes"));
    }
    Ok(t)
}

/// Writes the `top_k` highest-scoring ignored cells of every class, by class
/// then descending score (ties by clip id). `was_injected` is `NA` without
/// an injection log.
pub fn export_audit(
    enhanced: &EnhancedLabelSet,
    scores: &ScoreMatrix,
    top_k: usize,
    injected: Option<&HashSet<(String, usize)>>,
    path: &Path,
) -> Result<()> {
    if top_k == 0 {
        return Err(Error::Domain("audit top_k must be at least 1".into()));
    }
    let rows = label_rows(scores, &enhanced.labels)?;
    let mut out = String::from("class_id,clip_id,score,was_injected\n");
    for c in 0..scores.n_classes() {
        let mut cells: Vec<(f64, &str)> = rows
            .iter()
            .enumerate()
            .filter(|(_, &r)| enhanced.labels.get(r, c) == LabelState::Ignored)
            .map(|(i, _)| (scores.get(i, c), scores.clip_ids()[i].as_str()))
            .collect();
        cells.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
        for (score, id) in cells.into_iter().take(top_k) {
            let flag = match injected {
                None => "NA",
                Some(set) if set.contains(&(id.to_string(), c)) => "1",
                Some(_) => "0",
            };
            out.push_str(&format!("{c},{id},{},{flag}\n", sig9(score)));
        }
    }
    write_text(path, out)
}

/// The teacher-score transform `f` in `L(f(p_teacher), p_student)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetTransform {
    /// Raw teacher scores as soft targets: plain distillation.
    Identity,
    /// Original hard labels, with the top `fraction` of implicit negatives
    /// per class masked out.
    Skeptical(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistilledTargets {
    pub supervision: Supervision,
    pub mask: MaskMatrix,
}

/// Soft targets and mask for the scored clips.
pub fn distill_targets(
    scores: &ScoreMatrix,
    labels: &LabelTable,
    transform: TargetTransform,
) -> Result<DistilledTargets> {
    let rows = label_rows(scores, labels)?;
    let c_n = scores.n_classes();
    let ids = scores.clip_ids().to_vec();
    match transform {
        TargetTransform::Identity => {
            let mask = MaskMatrix {
                clip_ids: ids.clone(),
                n_classes: c_n,
                values: vec![1; ids.len() * c_n],
            };
            Ok(DistilledTargets {
                supervision: Supervision {
                    clip_ids: ids,
                    n_classes: c_n,
                    targets: scores.values().to_vec(),
                    mask: vec![1.0; scores.values().len()],
                },
                mask,
            })
        }
        TargetTransform::Skeptical(fraction) => {
            let (_, enhanced) = enhance(labels, scores, fraction, "")?;
            let scored = enhanced.labels.select_rows(&rows);
            let mask = build_mask(&EnhancedLabelSet {
                labels: scored.clone(),
                fraction,
                teacher: String::new(),
            });
            let original = labels.select_rows(&rows);
            Ok(DistilledTargets {
                supervision: Supervision {
                    clip_ids: ids,
                    n_classes: c_n,
                    targets: original.states().iter().map(|s| s.target()).collect(),
                    mask: mask.values.iter().map(|&m| m as f64).collect(),
                },
                mask,
            })
        }
    }
}
