//! Permutation importance: accuracy drop after shuffling one column.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ExplainError, RawImportance, Technique};
use crate::models::TrainedClassifier;

/// Mean accuracy drop over `n_repeats` independent column permutations,
/// floored at zero per feature.
pub fn permutation_importance(
    model: &TrainedClassifier,
    x: &[Vec<f64>],
    y: &[usize],
    n_repeats: usize,
    seed: u64,
) -> Result<RawImportance, ExplainError> {
    if x.len() != y.len() {
        return Err(ExplainError::ShapeMismatch(format!(
            "{} rows vs {} labels",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(ExplainError::TooFewSamples {
            need: 2,
            got: x.len(),
        });
    }
    let n = x.len();
    let d = model.n_features;

    let accuracy = |preds: &[usize]| -> f64 {
        preds.iter().zip(y).filter(|(p, t)| p == t).count() as f64 / n as f64
    };
    let baseline = accuracy(&model.predict(x)?);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(d);
    for j in 0..d {
        let mut drop_sum = 0.0;
        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..n_repeats {
            order.shuffle(&mut rng);
            let permuted: Vec<Vec<f64>> = x
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    let mut r = row.clone();
                    r[j] = x[order[i]][j];
                    r
                })
                .collect();
            drop_sum += baseline - accuracy(&model.predict(&permuted)?);
        }
        values.push((drop_sum / n_repeats as f64).max(0.0));
    }

    Ok(RawImportance {
        technique: Technique::Pi,
        values,
    })
}
