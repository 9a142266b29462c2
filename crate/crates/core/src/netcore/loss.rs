use super::{sigmoid, Capacity, ModelParams};
use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the
/// loss and its gradient.
pub const PROB_CLAMP: f64 = 1e-7;

fn clamp(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn check_lengths(p: &[f64], y: &[f64], m: &[f64]) -> Result<()> {
    if p.len() != y.len() || p.len() != m.len() {
        return Err(Error::Shape(format!(
            "loss inputs disagree: {} predictions, {} targets, {} mask values",
            p.len(),
            y.len(),
            m.len()
        )));
    }
    Ok(())
}

/// `-Σ_c [y_c ln p_c + M_c (1 - y_c) ln(1 - p_c)]`, summed over classes.
///
/// The mask only touches the negative term, so a masked cell with target 0
/// contributes exactly nothing.
pub fn masked_bce(p: &[f64], targets: &[f64], mask: &[f64]) -> Result<f64> {
    check_lengths(p, targets, mask)?;
    let mut loss = 0.0;
    for ((&p, &y), &m) in p.iter().zip(targets).zip(mask) {
        let p = clamp(p);
        let mut term = 0.0;
        if y != 0.0 {
            term += y * p.ln();
        }
        if m != 0.0 && y != 1.0 {
            term += m * (1.0 - y) * (1.0 - p).ln();
        }
        loss -= term;
    }
    Ok(loss)
}

/// Unmasked binary cross-entropy.
pub fn bce(p: &[f64], targets: &[f64]) -> Result<f64> {
    masked_bce(p, targets, &vec![1.0; p.len()])
}

/// Derivative of [`masked_bce`] with respect to the output logits:
/// `y (p - 1) + M (1 - y) p`, i.e. `p - y` unmasked and `y (p - 1)` masked.
pub fn logit_gradient(p: &[f64], targets: &[f64], mask: &[f64]) -> Result<Vec<f64>> {
    check_lengths(p, targets, mask)?;
    Ok(p.iter()
        .zip(targets)
        .zip(mask)
        .map(|((&p, &y), &m)| {
            let p = clamp(p);
            y * (p - 1.0) + m * (1.0 - y) * p
        })
        .collect())
}

/// One training example: a feature vector with its per-class targets and
/// loss mask.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub features: &'a [f64],
    pub targets: &'a [f64],
    pub mask: &'a [f64],
}

/// Mean masked loss over the batch and its gradient with respect to every
/// parameter.
pub fn gradient(params: &ModelParams, batch: &[Example<'_>]) -> Result<(f64, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::Domain("gradient of an empty batch".into()));
    }
    let mut grad = ModelParams::zeros(
        params.capacity(),
        params.input_dim(),
        params.n_classes(),
        params.hidden_width(),
    );
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    let mut dh = Vec::new();
    for ex in batch {
        params.check_input(ex.features.len())?;
        let (z, h) = params.logits(ex.features);
        let p: Vec<f64> = z.into_iter().map(sigmoid).collect();
        total += masked_bce(&p, ex.targets, ex.mask)?;
        let g = logit_gradient(&p, ex.targets, ex.mask)?;
        match params.capacity() {
            Capacity::Linear => accumulate(&mut grad.layers_mut()[0], &g, ex.features, scale),
            Capacity::Hidden => {
                let out = &params.layers()[1];
                accumulate(&mut grad.layers_mut()[1], &g, &h, scale);
                dh.clear();
                dh.resize(out.inputs, 0.0);
                for (c, gc) in g.iter().enumerate() {
                    let row = &out.weights[c * out.inputs..(c + 1) * out.inputs];
                    for (d, w) in dh.iter_mut().zip(row) {
                        *d += gc * w;
                    }
                }
                for (d, a) in dh.iter_mut().zip(&h) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
                accumulate(&mut grad.layers_mut()[0], &dh, ex.features, scale);
            }
        }
    }
    Ok((total * scale, grad))
}

fn accumulate(layer: &mut super::Dense, delta: &[f64], input: &[f64], scale: f64) {
    for (o, d) in delta.iter().enumerate() {
        if *d == 0.0 {
            continue;
        }
        let d = d * scale;
        layer.bias[o] += d;
        let row = &mut layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
        for (w, x) in row.iter_mut().zip(input) {
            *w += d * x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_values() {
        let l = masked_bce(&[0.5, 0.5], &[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((l - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!((l - 1.3863).abs() < 1e-4);
        assert_eq!(masked_bce(&[0.99], &[0.0], &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn masked_equals_unmasked_minus_masked_negatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let c = rng.random_range(1..12);
            let p: Vec<f64> = (0..c).map(|_| rng.random_range(0.001..0.999)).collect();
            let y: Vec<f64> = (0..c).map(|_| rng.random_range(0..2) as f64).collect();
            let m: Vec<f64> = y
                .iter()
                .map(|&y| if y == 0.0 && rng.random_bool(0.4) { 0.0 } else { 1.0 })
                .collect();
            let full: f64 = p
                .iter()
                .zip(&y)
                .map(|(p, y)| -(y * p.ln() + (1.0 - y) * (1.0 - p).ln()))
                .sum();
            let removed: f64 = p
                .iter()
                .zip(&y)
                .zip(&m)
                .filter(|(_, m)| **m == 0.0)
                .map(|((p, _), _)| -(1.0 - p).ln())
                .sum();
            let got = masked_bce(&p, &y, &m).unwrap();
            assert!((got - (full - removed)).abs() < 1e-12);
            assert!(got >= 0.0);
            assert!(got <= bce(&p, &y).unwrap() + 1e-15);
        }
    }

    #[test]
    fn masked_negative_has_zero_logit_gradient() {
        let g = logit_gradient(&[0.9, 0.9], &[0.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        assert!(matches!(masked_bce(&[0.5], &[1.0, 0.0], &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn targets_equal_predictions_zero_output_bias_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for cap in [Capacity::Linear, Capacity::Hidden] {
            let params = ModelParams::init(cap, 4, 3, 5, 0.5, &mut rng).unwrap();
            let x = [0.3, -0.2, 0.9, 0.1];
            let p = params.forward(&x).unwrap();
            let mask = [1.0; 3];
            let ex = Example {
                features: &x,
                targets: &p,
                mask: &mask,
            };
            let (_, g) = gradient(&params, &[ex]).unwrap();
            for b in &g.layers().last().unwrap().bias {
                assert!(b.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn empty_batch_is_error() {
        let p = ModelParams::zeros(Capacity::Linear, 2, 2, 0);
        assert!(gradient(&p, &[]).is_err());
    }
}
