//! Multinomial logistic regression trained with full-batch gradient descent.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticModel {
    /// One weight row per class, `n_classes x n_features`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// Mean cross-entropy after each epoch.
    pub train_losses: Vec<f64>,
}

pub(crate) fn softmax_into(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for z in logits.iter_mut() {
        *z = (*z - max).exp();
        sum += *z;
    }
    for z in logits.iter_mut() {
        *z /= sum;
    }
}

/// Returns `None` if the loss becomes non-finite.
pub(crate) fn fit(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    lr: f64,
    epochs: usize,
) -> Option<LogisticModel> {
    let n = x.len();
    let d = x[0].len();
    let mut weights = vec![vec![0.0; d]; n_classes];
    let mut bias = vec![0.0; n_classes];
    let mut train_losses = Vec::with_capacity(epochs);

    let mut probs = vec![0.0; n_classes];
    for _ in 0..epochs {
        let mut grad_w = vec![vec![0.0; d]; n_classes];
        let mut grad_b = vec![0.0; n_classes];
        let mut loss = 0.0;
        for (row, &yi) in x.iter().zip(y) {
            for c in 0..n_classes {
                probs[c] = bias[c] + dot(&weights[c], row);
            }
            softmax_into(&mut probs);
            loss -= probs[yi].max(1e-300).ln();
            for c in 0..n_classes {
                let err = probs[c] - f64::from(c == yi);
                grad_b[c] += err;
                for (g, &xv) in grad_w[c].iter_mut().zip(row) {
                    *g += err * xv;
                }
            }
        }
        loss /= n as f64;
        if !loss.is_finite() {
            return None;
        }
        train_losses.push(loss);
        let scale = lr / n as f64;
        for c in 0..n_classes {
            bias[c] -= scale * grad_b[c];
            for (w, g) in weights[c].iter_mut().zip(&grad_w[c]) {
                *w -= scale * g;
            }
        }
    }

    Some(LogisticModel {
        weights,
        bias,
        train_losses,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LogisticModel {
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|row| {
                let mut logits: Vec<f64> = self
                    .weights
                    .iter()
                    .zip(&self.bias)
                    .map(|(w, b)| b + dot(w, row))
                    .collect();
                softmax_into(&mut logits);
                logits
            })
            .collect()
    }
}
