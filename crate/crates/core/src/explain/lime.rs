//! Local surrogate explanations: weighted ridge regression on perturbations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ExplainError, RawImportance, Technique};
use crate::models::TrainedClassifier;
use crate::stats::argmax;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Solve A x = b by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)] // the elimination indexes two rows of `a` at once
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        if diag.abs() < 1e-300 {
            continue;
        }
        for row in col + 1..n {
            let factor = a[row][col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = if a[col][col].abs() < 1e-300 {
            0.0
        } else {
            s / a[col][col]
        };
    }
    x
}

/// Weighted ridge surrogate coefficients for one instance.
/// The intercept is unpenalized; returns the d feature coefficients.
fn surrogate_coefficients(
    perturbations: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
    lambda: f64,
) -> Vec<f64> {
    let d = perturbations[0].len();
    let p = d + 1; // + intercept
    let mut ata = vec![vec![0.0; p]; p];
    let mut atb = vec![0.0; p];
    for ((row, &t), &w) in perturbations.iter().zip(targets).zip(weights) {
        for i in 0..p {
            let zi = if i < d { row[i] } else { 1.0 };
            atb[i] += w * zi * t;
            for j in i..p {
                let zj = if j < d { row[j] } else { 1.0 };
                ata[i][j] += w * zi * zj;
            }
        }
    }
    #[allow(clippy::needless_range_loop)] // mirrors across the diagonal
    for i in 0..p {
        for j in 0..i {
            ata[i][j] = ata[j][i];
        }
    }
    for (i, row) in ata.iter_mut().enumerate().take(d) {
        row[i] += lambda;
    }
    let mut beta = solve(ata, atb);
    beta.truncate(d);
    beta
}

/// Mean absolute surrogate coefficient per feature over explained instances.
///
/// Perturbations are drawn from a normal around each instance with the
/// per-feature standard deviations of the training data; each perturbation
/// is weighted by exp(-dist^2 / kernel_width^2).
pub fn lime_tabular(
    model: &TrainedClassifier,
    x_explain: &[Vec<f64>],
    feature_std: &[f64],
    n_samples: usize,
    kernel_width: f64,
    ridge_lambda: f64,
    seed: u64,
) -> Result<RawImportance, ExplainError> {
    let d = model.n_features;
    if x_explain.is_empty() {
        return Err(ExplainError::TooFewSamples { need: 1, got: 0 });
    }
    if feature_std.len() != d {
        return Err(ExplainError::ShapeMismatch(format!(
            "{} feature stds for {d} features",
            feature_std.len()
        )));
    }
    if n_samples < d + 2 {
        return Err(ExplainError::TooFewSamples {
            need: d + 2,
            got: n_samples,
        });
    }
    if kernel_width <= 0.0 {
        return Err(ExplainError::DegenerateKernel);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0f64; d];

    for instance in x_explain {
        let target_class = argmax(&model.predict_proba(&[instance.to_vec()])?[0]);

        let mut perturbations = Vec::with_capacity(n_samples);
        let mut weights = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let row: Vec<f64> = (0..d)
                .map(|j| instance[j] + feature_std[j].max(1e-12) * normal(&mut rng))
                .collect();
            let dist_sq: f64 = row
                .iter()
                .zip(instance)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            weights.push((-dist_sq / (kernel_width * kernel_width)).exp());
            perturbations.push(row);
        }
        if weights.iter().all(|&w| w < 1e-12) {
            return Err(ExplainError::DegenerateKernel);
        }

        let probs = model.predict_proba(&perturbations)?;
        let targets: Vec<f64> = probs.iter().map(|p| p[target_class]).collect();

        let beta = surrogate_coefficients(&perturbations, &targets, &weights, ridge_lambda);
        for (a, b) in acc.iter_mut().zip(&beta) {
            *a += b.abs();
        }
    }

    for a in &mut acc {
        *a /= x_explain.len() as f64;
    }
    Ok(RawImportance {
        technique: Technique::Lime,
        values: acc,
    })
}
