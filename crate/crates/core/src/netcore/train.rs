use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{gradient, Example};
use super::{Capacity, ModelParams};
use crate::corpus::{Corpus, LabelTable, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub init_std: f64,
    pub hidden_width: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 20,
            batch_size: 64,
            init_std: 0.05,
            hidden_width: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", format!("{} must be finite and >= 0", self.learning_rate)));
        }
        for (field, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(field, format!("{v} not in (0, 1)")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("epsilon", "must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.hidden_width == 0 {
            return Err(Error::config("hidden_width", "must be at least 1"));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return Err(Error::config("init_std", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Per-clip targets and loss mask, rows keyed by clip id.
#[derive(Debug, Clone, PartialEq)]
pub struct Supervision {
    pub clip_ids: Vec<String>,
    pub n_classes: usize,
    pub targets: Vec<f64>,
    pub mask: Vec<f64>,
}

impl Supervision {
    /// Hard targets from label states; ignored cells get mask 0.
    pub fn from_labels(labels: &LabelTable) -> Self {
        Supervision {
            clip_ids: labels.clip_ids().to_vec(),
            n_classes: labels.n_classes(),
            targets: labels.states().iter().map(|s| s.target()).collect(),
            mask: labels.states().iter().map(|s| s.mask()).collect(),
        }
    }
}

/// Trains on the train split with targets and mask derived from `labels`.
pub fn train(
    corpus: &Corpus,
    labels: &LabelTable,
    config: &TrainConfig,
    capacity: Capacity,
) -> Result<ModelParams> {
    train_supervised(corpus, &Supervision::from_labels(labels), config, capacity)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut ModelParams, grad: &ModelParams, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for (((w, g), m), v) in params
            .values_mut()
            .zip(grad.values())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *w -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
        }
    }
}

/// Patch-level Adam training. Every patch inherits its clip's targets and
/// mask. The result depends only on the inputs and `config.seed`.
pub fn train_supervised(
    corpus: &Corpus,
    sup: &Supervision,
    config: &TrainConfig,
    capacity: Capacity,
) -> Result<ModelParams> {
    config.validate()?;
    let n_classes = corpus.n_classes();
    if sup.n_classes != n_classes {
        return Err(Error::Shape(format!(
            "supervision has {} classes, corpus has {n_classes}",
            sup.n_classes
        )));
    }
    let dim = corpus.feature_dim();
    let index: HashMap<&str, usize> = sup
        .clip_ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();

    // (feature offset, supervision row) per patch.
    let mut features = Vec::new();
    let mut patches = Vec::new();
    for clip in corpus.clips.iter().filter(|c| c.split() == Split::Train) {
        let row = *index
            .get(clip.id())
            .ok_or_else(|| Error::Shape(format!("train clip `{}` has no labels", clip.id())))?;
        for patch in clip.patches() {
            patches.push((features.len(), row));
            features.extend(patch.iter().map(|&v| v as f64));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::init(
        capacity,
        dim,
        n_classes,
        config.hidden_width,
        config.init_std,
        &mut rng,
    )?;
    if patches.is_empty() {
        return Ok(params);
    }
    let n_params = params.n_params();
    let mut adam = Adam {
        m: vec![0.0; n_params],
        v: vec![0.0; n_params],
        t: 0,
    };
    let mut order: Vec<usize> = (0..patches.len()).collect();
    let mut step = 0usize;
    let mut batch = Vec::with_capacity(config.batch_size);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| {
                let (off, row) = patches[i];
                let cells = row * n_classes..(row + 1) * n_classes;
                Example {
                    features: &features[off..off + dim],
                    targets: &sup.targets[cells.clone()],
                    mask: &sup.mask[cells],
                }
            }));
            let (loss, grad) = gradient(&params, &batch)?;
            if !loss.is_finite() || !grad.is_finite() {
                return Err(Error::Divergence { step, loss });
            }
            adam.step(&mut params, &grad, config);
            step += 1;
        }
    }
    if !params.is_finite() {
        return Err(Error::Divergence { step, loss: f64::NAN });
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, Clip, LabelState, SynthConfig};

    fn tiny() -> Corpus {
        generate_synthetic(&SynthConfig {
            n_classes: 4,
            n_clips: 60,
            n_eval_clips: 10,
            feature_dim: 5,
            patches_per_clip: 2,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            batch_size: 16,
            hidden_width: 8,
            seed: 9,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let c = tiny();
        for cap in [Capacity::Linear, Capacity::Hidden] {
            let a = train(&c, &c.labels, &quick(), cap).unwrap();
            let b = train(&c, &c.labels, &quick(), cap).unwrap();
            let bits = |p: &ModelParams| p.values().map(f64::to_bits).collect::<Vec<_>>();
            assert_eq!(bits(&a), bits(&b));
        }
    }

    #[test]
    fn zero_learning_rate_keeps_init() {
        let c = tiny();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..quick()
        };
        let trained = train(&c, &c.labels, &cfg, Capacity::Hidden).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let init = ModelParams::init(Capacity::Hidden, 5, 4, 8, cfg.init_std, &mut rng).unwrap();
        assert_eq!(trained, init);
    }

    #[test]
    fn divergence_reports_step() {
        let mut c = tiny();
        // A NaN feature poisons the loss of the first (single, full) batch.
        let first = c.clips[0].clone();
        let mut data = first.values().to_vec();
        data[0] = f32::NAN;
        c.clips[0] = Clip::new(first.id(), first.split(), first.dim(), data).unwrap();
        let cfg = TrainConfig {
            batch_size: 1000,
            ..quick()
        };
        match train(&c, &c.labels, &cfg, Capacity::Linear) {
            Err(Error::Divergence { step, .. }) => assert_eq!(step, 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn missing_labels_for_train_clip() {
        let c = tiny();
        let labels = c.labels.select_rows(&[0, 1]);
        assert!(matches!(
            train(&c, &labels, &quick(), Capacity::Linear),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn invalid_config_rejected() {
        let c = tiny();
        for cfg in [
            TrainConfig { batch_size: 0, ..quick() },
            TrainConfig { beta1: 1.0, ..quick() },
            TrainConfig { learning_rate: -1.0, ..quick() },
        ] {
            assert!(matches!(train(&c, &c.labels, &cfg, Capacity::Linear), Err(Error::Config { .. })));
        }
    }

    #[test]
    fn fully_masked_negatives_only_push_positives_up() {
        // With every negative masked, all remaining gradient pushes scores up.
        let c = tiny();
        let mut labels = c.labels.clone();
        for r in 0..labels.n_clips() {
            for k in 0..labels.n_classes() {
                if labels.get(r, k) == LabelState::ImplicitNegative {
                    labels.set(r, k, LabelState::Ignored);
                }
            }
        }
        let base = train(&c, &c.labels, &quick(), Capacity::Linear).unwrap();
        let masked = train(&c, &labels, &quick(), Capacity::Linear).unwrap();
        let mean_bias = |p: &ModelParams| p.layers()[0].bias.iter().sum::<f64>();
        assert!(mean_bias(&masked) > mean_bias(&base));
    }
}
