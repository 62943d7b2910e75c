//! Exact Shapley values by full coalition enumeration.

use super::{ExplainError, RawImportance, Technique};
use crate::models::TrainedClassifier;
use crate::stats::argmax;

const MAX_FEATURES: usize = 16;

/// Which model output the attribution explains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetPolicy {
    /// Probability of the class the model predicts for the explained instance.
    PredictedClass,
}

/// Shapley values of a single instance.
///
/// The value function of a coalition S is the mean model output over the
/// background rows with the features in S replaced by the instance's values.
pub fn shapley_values_instance(
    model: &TrainedClassifier,
    instance: &[f64],
    background: &[Vec<f64>],
    policy: TargetPolicy,
) -> Result<Vec<f64>, ExplainError> {
    let d = model.n_features;
    if d > MAX_FEATURES {
        return Err(ExplainError::TooManyFeatures(d));
    }
    if background.is_empty() {
        return Err(ExplainError::EmptyBackground);
    }
    if instance.len() != d {
        return Err(ExplainError::ShapeMismatch(format!(
            "instance has {} features, model expects {d}",
            instance.len()
        )));
    }

    let TargetPolicy::PredictedClass = policy;
    let target = argmax(&model.predict_proba(&[instance.to_vec()])?[0]);

    // v[mask]: mean probability of the target class with masked features
    // taken from the instance and the rest from each background row.
    let n_masks = 1usize << d;
    let mut v = vec![0.0f64; n_masks];
    let mut batch: Vec<Vec<f64>> = Vec::with_capacity(background.len());
    for (mask, value) in v.iter_mut().enumerate() {
        batch.clear();
        for bg in background {
            let row: Vec<f64> = (0..d)
                .map(|j| {
                    if mask & (1 << j) != 0 {
                        instance[j]
                    } else {
                        bg[j]
                    }
                })
                .collect();
            batch.push(row);
        }
        let probs = model.predict_proba(&batch)?;
        *value = probs.iter().map(|p| p[target]).sum::<f64>() / background.len() as f64;
    }

    // coalition weight |S|! (d-|S|-1)! / d!
    let mut factorial = vec![1.0f64; d + 1];
    for i in 1..=d {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    let weight: Vec<f64> = (0..d)
        .map(|s| factorial[s] * factorial[d - s - 1] / factorial[d])
        .collect();

    let mut phi = vec![0.0f64; d];
    for mask in 0..n_masks {
        let s = (mask as u32).count_ones() as usize;
        for (j, p) in phi.iter_mut().enumerate() {
            if mask & (1 << j) == 0 {
                *p += weight[s] * (v[mask | (1 << j)] - v[mask]);
            }
        }
    }
    Ok(phi)
}

/// Mean absolute Shapley value per feature over the explained instances.
pub fn shapley_exact(
    model: &TrainedClassifier,
    x_explain: &[Vec<f64>],
    background: &[Vec<f64>],
    policy: TargetPolicy,
) -> Result<RawImportance, ExplainError> {
    if x_explain.is_empty() {
        return Err(ExplainError::TooFewSamples { need: 1, got: 0 });
    }
    let d = model.n_features;
    let mut acc = vec![0.0f64; d];
    for instance in x_explain {
        let phi = shapley_values_instance(model, instance, background, policy)?;
        for (a, p) in acc.iter_mut().zip(&phi) {
            *a += p.abs();
        }
    }
    for a in &mut acc {
        *a /= x_explain.len() as f64;
    }
    Ok(RawImportance {
        technique: Technique::Shap,
        values: acc,
    })
}
