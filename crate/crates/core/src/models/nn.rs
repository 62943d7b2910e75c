//! Single-hidden-layer network (ReLU + softmax) trained with mini-batch SGD.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logistic::softmax_into;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeuralNet {
    /// hidden x input
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    /// output x hidden
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Returns `None` if the loss becomes non-finite.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fit(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    hidden: usize,
    lr: f64,
    batch: usize,
    epochs: usize,
    seed: u64,
) -> Option<NeuralNet> {
    let n = x.len();
    let d = x[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let he_in = (2.0 / d as f64).sqrt();
    let he_hidden = (2.0 / hidden as f64).sqrt();
    let mut w1: Vec<Vec<f64>> = (0..hidden)
        .map(|_| (0..d).map(|_| he_in * normal(&mut rng)).collect())
        .collect();
    let mut b1 = vec![0.0; hidden];
    let mut w2: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| (0..hidden).map(|_| he_hidden * normal(&mut rng)).collect())
        .collect();
    let mut b2 = vec![0.0; n_classes];

    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let m = chunk.len() as f64;
            let mut gw1 = vec![vec![0.0; d]; hidden];
            let mut gb1 = vec![0.0; hidden];
            let mut gw2 = vec![vec![0.0; hidden]; n_classes];
            let mut gb2 = vec![0.0; n_classes];

            for &i in chunk {
                let row = &x[i];
                // forward
                let mut h: Vec<f64> = (0..hidden)
                    .map(|k| b1[k] + w1[k].iter().zip(row).map(|(w, v)| w * v).sum::<f64>())
                    .collect();
                let pre: Vec<f64> = h.clone();
                for v in &mut h {
                    *v = v.max(0.0);
                }
                let mut p: Vec<f64> = (0..n_classes)
                    .map(|c| b2[c] + w2[c].iter().zip(&h).map(|(w, v)| w * v).sum::<f64>())
                    .collect();
                softmax_into(&mut p);
                if p.iter().any(|v| !v.is_finite()) {
                    return None;
                }
                // backward
                let mut delta_out = p;
                delta_out[y[i]] -= 1.0;
                for c in 0..n_classes {
                    gb2[c] += delta_out[c];
                    for k in 0..hidden {
                        gw2[c][k] += delta_out[c] * h[k];
                    }
                }
                for k in 0..hidden {
                    if pre[k] <= 0.0 {
                        continue;
                    }
                    let delta_h: f64 = (0..n_classes).map(|c| delta_out[c] * w2[c][k]).sum();
                    gb1[k] += delta_h;
                    for (g, v) in gw1[k].iter_mut().zip(row) {
                        *g += delta_h * v;
                    }
                }
            }

            let scale = lr / m;
            for k in 0..hidden {
                b1[k] -= scale * gb1[k];
                for (w, g) in w1[k].iter_mut().zip(&gw1[k]) {
                    *w -= scale * g;
                }
            }
            for c in 0..n_classes {
                b2[c] -= scale * gb2[c];
                for (w, g) in w2[c].iter_mut().zip(&gw2[c]) {
                    *w -= scale * g;
                }
            }
        }
    }

    if w1.iter().flatten().chain(w2.iter().flatten()).any(|v| !v.is_finite()) {
        return None;
    }
    Some(NeuralNet { w1, b1, w2, b2 })
}

impl NeuralNet {
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|row| {
                let h: Vec<f64> = self
                    .w1
                    .iter()
                    .zip(&self.b1)
                    .map(|(w, b)| {
                        (b + w.iter().zip(row).map(|(wv, v)| wv * v).sum::<f64>()).max(0.0)
                    })
                    .collect();
                let mut out: Vec<f64> = self
                    .w2
                    .iter()
                    .zip(&self.b2)
                    .map(|(w, b)| b + w.iter().zip(&h).map(|(wv, v)| wv * v).sum::<f64>())
                    .collect();
                softmax_into(&mut out);
                out
            })
            .collect()
    }
}
