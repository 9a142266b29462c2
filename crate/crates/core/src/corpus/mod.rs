//! Multi-label corpora with explicit/implicit label provenance.
//!
//! A [`Corpus`] pairs clips (bags of fixed-width patch feature vectors) with a
//! [`LabelTable`]. Synthetic corpora also carry the exhaustive ground truth and
//! the log of true positives that were demoted to implicit negatives, which is
//! the oracle used to measure how well missing labels are recovered.

mod io;
mod synth;

use std::collections::HashMap;
use std::fmt;

pub use io::{
    load_clip_splits, load_corpus, load_features, load_injection_log, load_labels,
    save_clip_splits, save_corpus, save_features, save_injection_log, save_labels,
};
pub use synth::{generate_synthetic, SynthConfig};
pub(crate) use io::{read_text as read_text_file, write_file as write_text};

use crate::error::{Error, Result};

/// State of one (clip, class) label cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelState {
    /// Human-rated "present".
    ExplicitPositive,
    /// Human-rated "not present".
    ExplicitNegative,
    /// Never nominated for rating; negative by default.
    ImplicitNegative,
    /// Implicit negative flagged as a suspected missing label. Produced only
    /// by [`crate::relabel`].
    Ignored,
}

impl LabelState {
    pub const ALL: [LabelState; 4] = [
        LabelState::ExplicitPositive,
        LabelState::ExplicitNegative,
        LabelState::ImplicitNegative,
        LabelState::Ignored,
    ];

    pub fn code(self) -> &'static str {
        match self {
            LabelState::ExplicitPositive => "EP",
            LabelState::ExplicitNegative => "EN",
            LabelState::ImplicitNegative => "IN",
            LabelState::Ignored => "IG",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "EP" => Some(LabelState::ExplicitPositive),
            "EN" => Some(LabelState::ExplicitNegative),
            "IN" => Some(LabelState::ImplicitNegative),
            "IG" => Some(LabelState::Ignored),
            _ => None,
        }
    }

    /// Target value in the cross-entropy objective.
    pub fn target(self) -> f64 {
        match self {
            LabelState::ExplicitPositive => 1.0,
            _ => 0.0,
        }
    }

    /// Loss-mask value: 0 exactly for ignored cells.
    pub fn mask(self) -> f64 {
        match self {
            LabelState::Ignored => 0.0,
            _ => 1.0,
        }
    }

    pub fn is_explicit(self) -> bool {
        matches!(
            self,
            LabelState::ExplicitPositive | LabelState::ExplicitNegative
        )
    }
}

impl fmt::Display for LabelState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Dense clip × class matrix of [`LabelState`]s, rows keyed by clip id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTable {
    clip_ids: Vec<String>,
    n_classes: usize,
    states: Vec<LabelState>,
    index: HashMap<String, usize>,
}

impl LabelTable {
    /// A table with every cell set to `fill`. Clip ids must be unique.
    pub fn new(clip_ids: Vec<String>, n_classes: usize, fill: LabelState) -> Result<Self> {
        let mut index = HashMap::with_capacity(clip_ids.len());
        for (i, id) in clip_ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Domain(format!("duplicate clip id `{id}`")));
            }
        }
        let states = vec![fill; clip_ids.len() * n_classes];
        Ok(LabelTable {
            clip_ids,
            n_classes,
            states,
            index,
        })
    }

    pub fn n_clips(&self) -> usize {
        self.clip_ids.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn clip_ids(&self) -> &[String] {
        &self.clip_ids
    }

    pub fn row_of(&self, clip_id: &str) -> Option<usize> {
        self.index.get(clip_id).copied()
    }

    pub fn get(&self, row: usize, class: usize) -> LabelState {
        self.states[row * self.n_classes + class]
    }

    pub fn set(&mut self, row: usize, class: usize, state: LabelState) {
        self.states[row * self.n_classes + class] = state;
    }

    pub fn row(&self, row: usize) -> &[LabelState] {
        &self.states[row * self.n_classes..(row + 1) * self.n_classes]
    }

    pub fn states(&self) -> &[LabelState] {
        &self.states
    }

    pub fn count(&self, state: LabelState) -> usize {
        self.states.iter().filter(|&&s| s == state).count()
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> LabelTable {
        let ids = rows.iter().map(|&r| self.clip_ids[r].clone()).collect();
        let mut out = LabelTable::new(ids, self.n_classes, LabelState::ImplicitNegative)
            .expect("rows of a valid table have unique ids");
        for (i, &r) in rows.iter().enumerate() {
            let c = self.n_classes;
            out.states[i * c..(i + 1) * c].copy_from_slice(self.row(r));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Eval,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "eval" => Some(Split::Eval),
            _ => None,
        }
    }
}

/// One clip: `patch_count` feature vectors of width `dim`, stored patch-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    id: String,
    split: Split,
    dim: usize,
    data: Vec<f32>,
}

impl Clip {
    pub fn new(id: impl Into<String>, split: Split, dim: usize, data: Vec<f32>) -> Result<Self> {
        let id = id.into();
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(Error::Domain(format!(
                "clip `{id}` needs at least one patch of width {dim}, got {} values",
                data.len()
            )));
        }
        Ok(Clip {
            id,
            split,
            dim,
            data,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn set_split(&mut self, split: Split) {
        self.split = split;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn patch_count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn patches(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f32] {
        &self.data
    }
}

/// A (clip row, class) cell reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub row: usize,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub clips: Vec<Clip>,
    pub labels: LabelTable,
    /// Exhaustive ground truth (synthetic corpora only).
    pub truth: Option<LabelTable>,
    /// True positives demoted to implicit negatives (synthetic corpora only).
    pub injection_log: Option<Vec<Cell>>,
    pub class_priors: Vec<f64>,
}

impl Corpus {
    /// Assembles a corpus, checking that clips and label tables line up and
    /// computing the class priors.
    pub fn new(
        clips: Vec<Clip>,
        labels: LabelTable,
        truth: Option<LabelTable>,
        injection_log: Option<Vec<Cell>>,
    ) -> Result<Self> {
        if clips.len() != labels.n_clips() {
            return Err(Error::Shape(format!(
                "{} clips but {} label rows",
                clips.len(),
                labels.n_clips()
            )));
        }
        if let Some(first) = clips.first() {
            let dim = first.dim();
            if let Some(bad) = clips.iter().find(|c| c.dim() != dim) {
                return Err(Error::Shape(format!(
                    "clip `{}` has dimension {}, expected {dim}",
                    bad.id(),
                    bad.dim()
                )));
            }
        }
        for (clip, id) in clips.iter().zip(labels.clip_ids()) {
            if clip.id() != id {
                return Err(Error::Shape(format!(
                    "clip `{}` does not match label row `{id}`",
                    clip.id()
                )));
            }
        }
        if let Some(t) = &truth {
            if t.clip_ids() != labels.clip_ids() || t.n_classes() != labels.n_classes() {
                return Err(Error::Shape("truth table does not align with labels".into()));
            }
        }
        if let Some(log) = &injection_log {
            for cell in log {
                if cell.row >= labels.n_clips() || cell.class >= labels.n_classes() {
                    return Err(Error::Shape(format!(
                        "injection log cell ({}, {}) out of range",
                        cell.row, cell.class
                    )));
                }
            }
        }
        let mut corpus = Corpus {
            clips,
            labels,
            truth,
            injection_log,
            class_priors: Vec::new(),
        };
        corpus.class_priors = class_priors(&corpus).unwrap_or_default();
        Ok(corpus)
    }

    pub fn n_classes(&self) -> usize {
        self.labels.n_classes()
    }

    pub fn feature_dim(&self) -> usize {
        self.clips.first().map_or(0, Clip::dim)
    }

    pub fn rows_in(&self, split: Split) -> Vec<usize> {
        self.clips
            .iter()
            .enumerate()
            .filter(|(_, c)| c.split() == split)
            .map(|(i, _)| i)
            .collect()
    }

    /// Keeps every eval clip and a uniform random `ratio` of the train clips
    /// (at least one), preserving the original clip order.
    pub fn subsample_train(&self, ratio: f64, seed: u64) -> Result<Corpus> {
        use rand::seq::index::sample;
        use rand::SeedableRng;

        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::config("subsample", format!("ratio {ratio} not in (0, 1]")));
        }
        let train = self.rows_in(Split::Train);
        let keep_n = ((train.len() as f64 * ratio).round() as usize).clamp(1, train.len().max(1));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut picked: Vec<usize> = sample(&mut rng, train.len(), keep_n.min(train.len()))
            .into_iter()
            .map(|i| train[i])
            .collect();
        picked.sort_unstable();
        let mut keep = vec![false; self.clips.len()];
        for &r in &picked {
            keep[r] = true;
        }
        for r in self.rows_in(Split::Eval) {
            keep[r] = true;
        }
        let rows: Vec<usize> = (0..self.clips.len()).filter(|&r| keep[r]).collect();
        let mut new_row = vec![usize::MAX; self.clips.len()];
        for (i, &r) in rows.iter().enumerate() {
            new_row[r] = i;
        }
        let clips = rows.iter().map(|&r| self.clips[r].clone()).collect();
        let labels = self.labels.select_rows(&rows);
        let truth = self.truth.as_ref().map(|t| t.select_rows(&rows));
        let log = self.injection_log.as_ref().map(|log| {
            log.iter()
                .filter(|c| keep[c.row])
                .map(|c| Cell {
                    row: new_row[c.row],
                    class: c.class,
                })
                .collect()
        });
        Corpus::new(clips, labels, truth, log)
    }
}

/// Fraction of clips positive for each class. Uses the ground truth when the
/// corpus has one, otherwise explicit positives.
pub fn class_priors(corpus: &Corpus) -> Result<Vec<f64>> {
    let table = corpus.truth.as_ref().unwrap_or(&corpus.labels);
    let n = table.n_clips();
    if n == 0 {
        return Err(Error::Domain("class priors of an empty corpus".into()));
    }
    let mut counts = vec![0usize; table.n_classes()];
    for r in 0..n {
        for (c, s) in table.row(r).iter().enumerate() {
            if *s == LabelState::ExplicitPositive {
                counts[c] += 1;
            }
        }
    }
    Ok(counts.into_iter().map(|k| k as f64 / n as f64).collect())
}
