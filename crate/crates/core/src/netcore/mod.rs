//! Small multi-label classifiers trained with masked binary cross-entropy.
//!
//! Two capacities: a linear layer with sigmoid outputs, and a network with
//! one rectified hidden layer. All arithmetic is `f64`; checkpoints store
//! `f32`.

mod checkpoint;
mod loss;
mod train;

pub use checkpoint::{load_checkpoint, meta_path, save_checkpoint};
pub use loss::{bce, gradient, logit_gradient, masked_bce, Example, PROB_CLAMP};
pub use train::{train, train_supervised, Supervision, TrainConfig};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::Clip;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Capacity {
    Linear,
    Hidden,
}

impl Capacity {
    pub fn as_str(self) -> &'static str {
        match self {
            Capacity::Linear => "linear",
            Capacity::Hidden => "hidden",
        }
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Capacity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Capacity::Linear),
            "hidden" => Ok(Capacity::Hidden),
            other => Err(Error::config("capacity", format!("`{other}` is not linear or hidden"))),
        }
    }
}

/// Fully connected layer; `weights` is `outputs × inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let dot: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            out.push(dot + self.bias[o]);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    capacity: Capacity,
    /// Linear: `[output]`. Hidden: `[hidden, output]`.
    layers: Vec<Dense>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl ModelParams {
    /// All-zero parameters. `hidden` is ignored for [`Capacity::Linear`].
    pub fn zeros(capacity: Capacity, input_dim: usize, n_classes: usize, hidden: usize) -> Self {
        let layers = match capacity {
            Capacity::Linear => vec![Dense::zeros(input_dim, n_classes)],
            Capacity::Hidden => vec![Dense::zeros(input_dim, hidden), Dense::zeros(hidden, n_classes)],
        };
        ModelParams { capacity, layers }
    }

    /// Weights drawn from N(0, std²), biases zero.
    pub fn init<R: Rng>(
        capacity: Capacity,
        input_dim: usize,
        n_classes: usize,
        hidden: usize,
        std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let normal = Normal::new(0.0, std)
            .map_err(|_| Error::config("init_std", format!("{std} is not a valid standard deviation")))?;
        let mut p = Self::zeros(capacity, input_dim, n_classes, hidden);
        for layer in &mut p.layers {
            for w in &mut layer.weights {
                *w = normal.sample(rng);
            }
        }
        Ok(p)
    }

    pub fn from_layers(capacity: Capacity, layers: Vec<Dense>) -> Result<Self> {
        let expected = match capacity {
            Capacity::Linear => 1,
            Capacity::Hidden => 2,
        };
        if layers.len() != expected {
            return Err(Error::Shape(format!("{capacity} model needs {expected} layers, got {}", layers.len())));
        }
        for l in &layers {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::Shape("layer buffers do not match its dimensions".into()));
            }
        }
        if layers.len() == 2 && layers[0].outputs != layers[1].inputs {
            return Err(Error::Shape("hidden layer widths disagree".into()));
        }
        let p = ModelParams { capacity, layers };
        if !p.is_finite() {
            return Err(Error::Domain("non-finite parameter".into()));
        }
        Ok(p)
    }

    pub fn capacity(&self) -> Capacity {
        self.capacity
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn n_classes(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    /// Hidden width, 0 for the linear capacity.
    pub fn hidden_width(&self) -> usize {
        match self.capacity {
            Capacity::Linear => 0,
            Capacity::Hidden => self.layers[0].outputs,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    /// Every parameter in checkpoint order: per layer, weights then biases.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::Shape(format!(
                "feature dimension {len} does not match model input {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Output logits plus the hidden activations (empty for linear).
    pub(crate) fn logits(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut z = Vec::with_capacity(self.n_classes());
        match self.capacity {
            Capacity::Linear => {
                self.layers[0].apply(x, &mut z);
                (z, Vec::new())
            }
            Capacity::Hidden => {
                let mut h = Vec::with_capacity(self.layers[0].outputs);
                self.layers[0].apply(x, &mut h);
                for v in &mut h {
                    *v = v.max(0.0);
                }
                self.layers[1].apply(&h, &mut z);
                (z, h)
            }
        }
    }

    /// Class probabilities for one feature vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x.len())?;
        Ok(self.logits(x).0.into_iter().map(sigmoid).collect())
    }
}

/// Clip-level scores: the per-class mean of patch-level probabilities.
pub fn predict_clip(params: &ModelParams, clip: &Clip) -> Result<Vec<f64>> {
    let k = clip.patch_count();
    if k == 0 {
        return Err(Error::Domain(format!("clip `{}` has no patches", clip.id())));
    }
    let mut sum = vec![0.0; params.n_classes()];
    let mut x = Vec::with_capacity(clip.dim());
    for patch in clip.patches() {
        x.clear();
        x.extend(patch.iter().map(|&v| v as f64));
        for (s, p) in sum.iter_mut().zip(params.forward(&x)?) {
            *s += p;
        }
    }
    Ok(sum.into_iter().map(|s| s / k as f64).collect())
}
