use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Cell, Clip, Corpus, LabelState, LabelTable, Split};
use crate::error::{Error, Result};

/// Parameters of the synthetic labeling simulator.
///
/// Each class owns a Gaussian prototype. A clip's base vector is the sum of
/// its active prototypes and every patch is that base plus isotropic noise.
/// Consecutive classes can be grouped into families whose prototypes share a
/// common component, which makes them confusable with each other.
/// Labels come from the exhaustive truth through a lossy rating process: true
/// positives survive as explicit positives with probability `1 - missing_rate`
/// and otherwise become implicit negatives; true negatives are explicitly
/// rated with probability `explicit_rating_rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_classes: usize,
    /// Number of train clips.
    pub n_clips: usize,
    pub n_eval_clips: usize,
    pub feature_dim: usize,
    pub patches_per_clip: usize,
    pub labels_min: usize,
    pub labels_max: usize,
    /// Class `c` is drawn with weight `(c + 1)^-class_skew`.
    pub class_skew: f64,
    pub separation: f64,
    pub noise: f64,
    /// Classes `c` with equal `c / family_size` form a family.
    pub family_size: usize,
    /// Share of prototype variance common to a family, in `[0, 1]`.
    pub family_similarity: f64,
    pub explicit_rating_rate: f64,
    pub missing_rate: f64,
    /// Rating rate for eval-split true negatives. 1.0 makes the eval split
    /// fully explicit.
    pub eval_explicit_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_classes: 20,
            n_clips: 5000,
            n_eval_clips: 2000,
            feature_dim: 32,
            patches_per_clip: 3,
            labels_min: 1,
            labels_max: 3,
            class_skew: 1.0,
            separation: 1.0,
            noise: 1.0,
            family_size: 2,
            family_similarity: 0.9,
            explicit_rating_rate: 0.1,
            missing_rate: 0.3,
            eval_explicit_rate: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_classes", self.n_classes),
            ("n_clips", self.n_clips),
            ("feature_dim", self.feature_dim),
            ("patches_per_clip", self.patches_per_clip),
            ("labels_min", self.labels_min),
            ("family_size", self.family_size),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        if self.labels_max < self.labels_min {
            return Err(Error::config("labels_max", "must be >= labels_min"));
        }
        if self.labels_min > self.n_classes {
            return Err(Error::config("labels_min", "exceeds n_classes"));
        }
        let rates = [
            ("explicit_rating_rate", self.explicit_rating_rate),
            ("missing_rate", self.missing_rate),
            ("eval_explicit_rate", self.eval_explicit_rate),
            ("family_similarity", self.family_similarity),
        ];
        for (field, v) in rates {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(field, format!("{v} not in [0, 1]")));
            }
        }
        let scales = [
            ("class_skew", self.class_skew),
            ("separation", self.separation),
            ("noise", self.noise),
        ];
        for (field, v) in scales {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(field, format!("{v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Draws `k` distinct indices with probability proportional to `weights`,
/// one at a time from the remaining pool.
fn weighted_without_replacement(rng: &mut ChaCha8Rng, weights: &[f64], k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..weights.len()).collect();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = pool.iter().map(|&i| weights[i]).sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = pool.len() - 1;
        for (j, &i) in pool.iter().enumerate() {
            if u < weights[i] {
                pick = j;
                break;
            }
            u -= weights[i];
        }
        out.push(pool.remove(pick));
    }
    out.sort_unstable();
    out
}

pub fn generate_synthetic(config: &SynthConfig) -> Result<Corpus> {
    config.validate()?;
    let c_n = config.n_classes;
    let dim = config.feature_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut prototypes: Vec<f64> = (0..c_n * dim)
        .map(|_| config.separation * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect::<Vec<f64>>();
    if config.family_size > 1 && config.family_similarity > 0.0 {
        let n_families = c_n.div_ceil(config.family_size);
        let shared: Vec<f64> = (0..n_families * dim)
            .map(|_| config.separation * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let (a, b) = (config.family_similarity.sqrt(), (1.0 - config.family_similarity).sqrt());
        for c in 0..c_n {
            let f = c / config.family_size;
            for d in 0..dim {
                let own = &mut prototypes[c * dim + d];
                *own = a * shared[f * dim + d] + b * *own;
            }
        }
    }
    let weights: Vec<f64> = (0..c_n)
        .map(|c| ((c + 1) as f64).powf(-config.class_skew))
        .collect();
    let labels_max = config.labels_max.min(c_n);

    let n_total = config.n_clips + config.n_eval_clips;
    let mut clips = Vec::with_capacity(n_total);
    let mut active_sets = Vec::with_capacity(n_total);
    for i in 0..n_total {
        let (id, split) = if i < config.n_clips {
            (format!("train_{i:06}"), Split::Train)
        } else {
            (format!("eval_{:06}", i - config.n_clips), Split::Eval)
        };
        let k = rng.random_range(config.labels_min..=labels_max);
        let active = weighted_without_replacement(&mut rng, &weights, k);
        let mut base = vec![0.0f64; dim];
        for &c in &active {
            for (b, p) in base.iter_mut().zip(&prototypes[c * dim..(c + 1) * dim]) {
                *b += p;
            }
        }
        let mut data = Vec::with_capacity(config.patches_per_clip * dim);
        for _ in 0..config.patches_per_clip {
            for b in &base {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push((b + config.noise * z) as f32);
            }
        }
        clips.push(Clip::new(id, split, dim, data)?);
        active_sets.push(active);
    }

    let ids: Vec<String> = clips.iter().map(|c| c.id().to_string()).collect();
    let mut truth = LabelTable::new(ids.clone(), c_n, LabelState::ExplicitNegative)?;
    let mut labels = LabelTable::new(ids, c_n, LabelState::ImplicitNegative)?;
    let mut log = Vec::new();
    for (row, active) in active_sets.iter().enumerate() {
        for &c in active {
            truth.set(row, c, LabelState::ExplicitPositive);
        }
        let is_train = clips[row].split() == Split::Train;
        for c in 0..c_n {
            let u: f64 = rng.random();
            let state = if truth.get(row, c) == LabelState::ExplicitPositive {
                if !is_train || u >= config.missing_rate {
                    LabelState::ExplicitPositive
                } else {
                    log.push(Cell { row, class: c });
                    LabelState::ImplicitNegative
                }
            } else {
                let rate = if is_train {
                    config.explicit_rating_rate
                } else {
                    config.eval_explicit_rate
                };
                if u < rate {
                    LabelState::ExplicitNegative
                } else {
                    LabelState::ImplicitNegative
                }
            };
            labels.set(row, c, state);
        }
    }
    Corpus::new(clips, labels, Some(truth), Some(log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_classes: 6,
            n_clips: 200,
            n_eval_clips: 50,
            feature_dim: 4,
            patches_per_clip: 2,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn no_missing_rate_means_no_injection() {
        let corpus = generate_synthetic(&SynthConfig {
            missing_rate: 0.0,
            ..small()
        })
        .unwrap();
        assert!(corpus.injection_log.as_ref().unwrap().is_empty());
        let truth = corpus.truth.as_ref().unwrap();
        for (l, t) in corpus.labels.states().iter().zip(truth.states()) {
            assert_eq!(
                *l == LabelState::ExplicitPositive,
                *t == LabelState::ExplicitPositive
            );
        }
    }

    #[test]
    fn injection_rate_matches_config() {
        let corpus = generate_synthetic(&SynthConfig {
            n_classes: 20,
            n_clips: 5000,
            missing_rate: 0.3,
            seed: 7,
            ..SynthConfig::default()
        })
        .unwrap();
        let truth = corpus.truth.as_ref().unwrap();
        // Count straight from the truth table.
        let train_pos: usize = corpus
            .rows_in(Split::Train)
            .into_iter()
            .map(|r| {
                truth
                    .row(r)
                    .iter()
                    .filter(|s| **s == LabelState::ExplicitPositive)
                    .count()
            })
            .sum();
        let injected = corpus.injection_log.as_ref().unwrap().len();
        let rate = injected as f64 / train_pos as f64;
        assert!((rate - 0.30).abs() <= 0.02, "rate {rate}");
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_synthetic(&small()).unwrap();
        let b = generate_synthetic(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn label_invariants() {
        let corpus = generate_synthetic(&small()).unwrap();
        let truth = corpus.truth.as_ref().unwrap();
        let log = corpus.injection_log.as_ref().unwrap();
        for cell in log {
            assert_eq!(corpus.labels.get(cell.row, cell.class), LabelState::ImplicitNegative);
            assert_eq!(truth.get(cell.row, cell.class), LabelState::ExplicitPositive);
        }
        // Every truth-positive, label-implicit cell is logged.
        let mut hidden = 0;
        for r in 0..corpus.labels.n_clips() {
            for c in 0..corpus.n_classes() {
                if truth.get(r, c) == LabelState::ExplicitPositive
                    && corpus.labels.get(r, c) == LabelState::ImplicitNegative
                {
                    hidden += 1;
                }
            }
        }
        assert_eq!(hidden, log.len());
        assert_eq!(corpus.labels.count(LabelState::Ignored), 0);
        for r in corpus.rows_in(Split::Eval) {
            assert!(corpus.labels.row(r).iter().all(|s| s.is_explicit()));
        }
    }

    #[test]
    fn partial_eval_rating_leaves_implicit_cells() {
        let corpus = generate_synthetic(&SynthConfig {
            eval_explicit_rate: 0.5,
            ..small()
        })
        .unwrap();
        let implicit = corpus
            .rows_in(Split::Eval)
            .into_iter()
            .flat_map(|r| corpus.labels.row(r).to_vec())
            .filter(|s| *s == LabelState::ImplicitNegative)
            .count();
        assert!(implicit > 0);
    }

    #[test]
    fn invalid_config_names_field() {
        let err = generate_synthetic(&SynthConfig {
            missing_rate: 1.5,
            ..small()
        })
        .unwrap_err();
        assert!(err.to_string().contains("missing_rate"), "{err}");
        let err = generate_synthetic(&SynthConfig {
            feature_dim: 0,
            ..small()
        })
        .unwrap_err();
        assert!(err.to_string().contains("feature_dim"), "{err}");
        let err = generate_synthetic(&SynthConfig {
            family_similarity: -0.1,
            ..small()
        })
        .unwrap_err();
        assert!(err.to_string().contains("family_similarity"), "{err}");
    }

    #[test]
    fn identical_families_share_a_prototype() {
        let corpus = generate_synthetic(&SynthConfig {
            n_classes: 4,
            n_clips: 2000,
            labels_max: 1,
            class_skew: 0.0,
            family_size: 2,
            family_similarity: 1.0,
            ..small()
        })
        .unwrap();
        let truth = corpus.truth.as_ref().unwrap();
        let dim = corpus.feature_dim();
        let mut sums = vec![vec![0.0f64; dim]; 4];
        let mut counts = [0usize; 4];
        for (r, clip) in corpus.clips.iter().enumerate() {
            let c = (0..4).find(|&c| truth.get(r, c) == LabelState::ExplicitPositive).unwrap();
            counts[c] += clip.patch_count();
            for p in clip.patches() {
                for (s, v) in sums[c].iter_mut().zip(p) {
                    *s += *v as f64;
                }
            }
        }
        let mean = |c: usize| sums[c].iter().map(|s| s / counts[c] as f64).collect::<Vec<_>>();
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let (m0, m1, m2) = (mean(0), mean(1), mean(2));
        assert!(dist(&m0, &m1) < 0.25 * dist(&m0, &m2));
    }

    #[test]
    fn skew_produces_uneven_priors() {
        let corpus = generate_synthetic(&SynthConfig {
            class_skew: 1.5,
            n_clips: 2000,
            ..small()
        })
        .unwrap();
        let p = &corpus.class_priors;
        assert!(p[0] > p[5]);
    }
}
