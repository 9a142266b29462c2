//! Line-oriented `section.key = value` configuration with `#` comments.
//!
//! Every [`SynthConfig`], [`TrainConfig`] and [`SweepConfig`] field is
//! addressable; unknown keys are rejected. [`RunConfig::to_text`] echoes the
//! fully resolved configuration in the same format.

use std::path::Path;

use crate::corpus::{read_text_file, SynthConfig};
use crate::error::{Error, Result};
use crate::netcore::{Capacity, TrainConfig};
use crate::sweep::{CorpusSize, SweepConfig};

/// Reads `key = value` lines, skipping blanks and `#` comments.
pub fn read_key_values(path: &Path) -> Result<Vec<(String, String)>> {
    parse_key_values(&read_text_file(path)?, path)
}

pub fn parse_key_values(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i + 1, format!("expected `key = value`, got `{line}`")))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub synth: SynthConfig,
    pub train: TrainConfig,
    /// Capacity for single-model commands (`train`).
    pub capacity: Capacity,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            capacity: Capacity::Linear,
            sweep: SweepConfig::default(),
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply(&read_key_values(path)?)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<()> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (s, t, w) = (&mut self.synth, &mut self.train, &mut self.sweep);
        match key {
            "synth.n_classes" => s.n_classes = num(key, value)?,
            "synth.n_clips" => s.n_clips = num(key, value)?,
            "synth.n_eval_clips" => s.n_eval_clips = num(key, value)?,
            "synth.feature_dim" => s.feature_dim = num(key, value)?,
            "synth.patches_per_clip" => s.patches_per_clip = num(key, value)?,
            "synth.labels_min" => s.labels_min = num(key, value)?,
            "synth.labels_max" => s.labels_max = num(key, value)?,
            "synth.class_skew" => s.class_skew = num(key, value)?,
            "synth.separation" => s.separation = num(key, value)?,
            "synth.noise" => s.noise = num(key, value)?,
            "synth.family_size" => s.family_size = num(key, value)?,
            "synth.family_similarity" => s.family_similarity = num(key, value)?,
            "synth.explicit_rating_rate" => s.explicit_rating_rate = num(key, value)?,
            "synth.missing_rate" => s.missing_rate = num(key, value)?,
            "synth.eval_explicit_rate" => s.eval_explicit_rate = num(key, value)?,
            "synth.seed" => s.seed = num(key, value)?,
            "train.learning_rate" => t.learning_rate = num(key, value)?,
            "train.beta1" => t.beta1 = num(key, value)?,
            "train.beta2" => t.beta2 = num(key, value)?,
            "train.epsilon" => t.epsilon = num(key, value)?,
            "train.epochs" => t.epochs = num(key, value)?,
            "train.batch_size" => t.batch_size = num(key, value)?,
            "train.init_std" => t.init_std = num(key, value)?,
            "train.hidden_width" => t.hidden_width = num(key, value)?,
            "train.seed" => t.seed = num(key, value)?,
            "train.capacity" => self.capacity = value.parse()?,
            "sweep.grid" => w.grid_percent = list(key, value)?,
            "sweep.seeds" => w.seeds = list(key, value)?,
            "sweep.capacities" => w.capacities = list(key, value)?,
            "sweep.sizes" => w.sizes = list(key, value)?,
            "sweep.subsample" => w.subsample = num(key, value)?,
            "sweep.workers" => w.workers = num(key, value)?,
            "sweep.teacher_capacity" => {
                w.teacher_capacity = match value {
                    "same" => None,
                    v => Some(v.parse()?),
                }
            }
            _ => return Err(Error::config(key, "unknown configuration key")),
        }
        Ok(())
    }

    /// The resolved configuration, one `section.key = value` line per field.
    pub fn to_text(&self) -> String {
        let (s, t, w) = (&self.synth, &self.train, &self.sweep);
        let lines = [
            ("synth.n_classes", s.n_classes.to_string()),
            ("synth.n_clips", s.n_clips.to_string()),
            ("synth.n_eval_clips", s.n_eval_clips.to_string()),
            ("synth.feature_dim", s.feature_dim.to_string()),
            ("synth.patches_per_clip", s.patches_per_clip.to_string()),
            ("synth.labels_min", s.labels_min.to_string()),
            ("synth.labels_max", s.labels_max.to_string()),
            ("synth.class_skew", s.class_skew.to_string()),
            ("synth.separation", s.separation.to_string()),
            ("synth.noise", s.noise.to_string()),
            ("synth.family_size", s.family_size.to_string()),
            ("synth.family_similarity", s.family_similarity.to_string()),
            ("synth.explicit_rating_rate", s.explicit_rating_rate.to_string()),
            ("synth.missing_rate", s.missing_rate.to_string()),
            ("synth.eval_explicit_rate", s.eval_explicit_rate.to_string()),
            ("synth.seed", s.seed.to_string()),
            ("train.learning_rate", t.learning_rate.to_string()),
            ("train.beta1", t.beta1.to_string()),
            ("train.beta2", t.beta2.to_string()),
            ("train.epsilon", t.epsilon.to_string()),
            ("train.epochs", t.epochs.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.init_std", t.init_std.to_string()),
            ("train.hidden_width", t.hidden_width.to_string()),
            ("train.seed", t.seed.to_string()),
            ("train.capacity", self.capacity.to_string()),
            ("sweep.grid", join(&w.grid_percent)),
            ("sweep.seeds", join(&w.seeds)),
            ("sweep.capacities", join(&w.capacities)),
            ("sweep.sizes", join(&w.sizes)),
            ("sweep.subsample", w.subsample.to_string()),
            ("sweep.workers", w.workers.to_string()),
            (
                "sweep.teacher_capacity",
                w.teacher_capacity.map_or("same".to_string(), |c| c.to_string()),
            ),
        ];
        let mut out = String::new();
        for (k, v) in lines {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

impl std::str::FromStr for CorpusSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "large" => Ok(CorpusSize::Large),
            "small" => Ok(CorpusSize::Small),
            other => Err(Error::config("sweep.sizes", format!("`{other}` is not large or small"))),
        }
    }
}
