//! One-vs-rest soft-margin SVM with an RBF kernel, trained by SMO.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stats::mix_seed;

/// A binary machine for one class against the rest.
/// Only rows with nonzero multipliers are retained.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinarySvm {
    pub support_x: Vec<Vec<f64>>,
    /// alpha_i (0 < alpha_i <= c_reg) for each support vector.
    pub alpha: Vec<f64>,
    /// +1 / -1 label of each support vector.
    pub label: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c_reg: f64,
    /// Residual of the dual equality constraint over all training rows,
    /// kept for diagnostics.
    pub constraint_residual: f64,
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * sq).exp()
}

/// Simplified SMO: sweep all multipliers, pairing each violator with a
/// random partner, until a few full passes make no progress.
fn smo(x: &[Vec<f64>], y: &[f64], c_reg: f64, gamma: f64, seed: u64) -> BinarySvm {
    let n = x.len();
    let tol = 1e-3;
    let max_quiet_passes = 3;
    let max_total_passes = 200;

    let kernel: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| rbf(&x[i], &x[j], gamma)).collect())
        .collect();

    let mut alpha = vec![0.0f64; n];
    let mut b = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let f = |alpha: &[f64], b: f64, i: usize, kernel: &[Vec<f64>]| -> f64 {
        let mut s = b;
        for j in 0..n {
            if alpha[j] != 0.0 {
                s += alpha[j] * y[j] * kernel[j][i];
            }
        }
        s
    };

    let mut quiet = 0;
    let mut passes = 0;
    while quiet < max_quiet_passes && passes < max_total_passes {
        passes += 1;
        let mut changed = 0;
        for i in 0..n {
            let e_i = f(&alpha, b, i, &kernel) - y[i];
            if !((y[i] * e_i < -tol && alpha[i] < c_reg) || (y[i] * e_i > tol && alpha[i] > 0.0)) {
                continue;
            }
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let e_j = f(&alpha, b, j, &kernel) - y[j];

            let (a_i_old, a_j_old) = (alpha[i], alpha[j]);
            let (lo, hi) = if (y[i] - y[j]).abs() < f64::EPSILON {
                ((a_i_old + a_j_old - c_reg).max(0.0), (a_i_old + a_j_old).min(c_reg))
            } else {
                ((a_j_old - a_i_old).max(0.0), (c_reg + a_j_old - a_i_old).min(c_reg))
            };
            if hi - lo < 1e-12 {
                continue;
            }
            let eta = 2.0 * kernel[i][j] - kernel[i][i] - kernel[j][j];
            if eta >= 0.0 {
                continue;
            }
            let mut a_j = a_j_old - y[j] * (e_i - e_j) / eta;
            a_j = a_j.clamp(lo, hi);
            if (a_j - a_j_old).abs() < 1e-7 {
                continue;
            }
            let a_i = a_i_old + y[i] * y[j] * (a_j_old - a_j);
            alpha[i] = a_i;
            alpha[j] = a_j;

            let b1 = b - e_i
                - y[i] * (a_i - a_i_old) * kernel[i][i]
                - y[j] * (a_j - a_j_old) * kernel[i][j];
            let b2 = b - e_j
                - y[i] * (a_i - a_i_old) * kernel[i][j]
                - y[j] * (a_j - a_j_old) * kernel[j][j];
            b = if a_i > 0.0 && a_i < c_reg {
                b1
            } else if a_j > 0.0 && a_j < c_reg {
                b2
            } else {
                (b1 + b2) / 2.0
            };
            changed += 1;
        }
        if changed == 0 {
            quiet += 1;
        } else {
            quiet = 0;
        }
    }

    let constraint_residual = alpha
        .iter()
        .zip(y)
        .map(|(a, yi)| a * yi)
        .sum::<f64>()
        .abs();

    let mut support_x = Vec::new();
    let mut sv_alpha = Vec::new();
    let mut sv_label = Vec::new();
    for i in 0..n {
        if alpha[i] > 1e-12 {
            support_x.push(x[i].clone());
            sv_alpha.push(alpha[i]);
            sv_label.push(y[i]);
        }
    }

    BinarySvm {
        support_x,
        alpha: sv_alpha,
        label: sv_label,
        bias: b,
        gamma,
        c_reg,
        constraint_residual,
    }
}

impl BinarySvm {
    pub fn decision(&self, row: &[f64]) -> f64 {
        let mut s = self.bias;
        for ((sv, a), yl) in self.support_x.iter().zip(&self.alpha).zip(&self.label) {
            s += a * yl * rbf(sv, row, self.gamma);
        }
        s
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmModel {
    /// One machine per class (that class vs the rest).
    pub machines: Vec<BinarySvm>,
}

pub(crate) fn fit_ovr(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    c_reg: f64,
    gamma: f64,
    seed: u64,
) -> SvmModel {
    let machines = (0..n_classes)
        .map(|c| {
            let labels: Vec<f64> = y.iter().map(|&yi| if yi == c { 1.0 } else { -1.0 }).collect();
            smo(
                x,
                &labels,
                c_reg,
                gamma,
                mix_seed(seed, &[b"ovr", &(c as u64).to_le_bytes()]),
            )
        })
        .collect();
    SvmModel { machines }
}

impl SvmModel {
    /// Probabilities as the softmax over one-vs-rest decision values.
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|row| {
                let mut decisions: Vec<f64> =
                    self.machines.iter().map(|m| m.decision(row)).collect();
                super::logistic::softmax_into(&mut decisions);
                decisions
            })
            .collect()
    }
}
