//! Fuzzy interpretation of importance coefficients: low / moderate / high
//! membership functions built from percentile landmarks, centroid
//! defuzzification, and linguistic labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::quantile_sorted;

#[derive(Debug, Error)]
pub enum FuzzyError {
    #[error("need at least {need} samples to build membership functions, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("aggregated fuzzy region has zero area")]
    ZeroArea,
    #[error("sample {0} outside [0, 1]")]
    OutOfRange(f64),
}

/// Triangle with left foot `a`, peak `b`, right foot `c` (a <= b <= c).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 3]", from = "[f64; 3]")]
pub struct TriangularMF {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl From<TriangularMF> for [f64; 3] {
    fn from(mf: TriangularMF) -> Self {
        [mf.a, mf.b, mf.c]
    }
}

impl From<[f64; 3]> for TriangularMF {
    fn from(v: [f64; 3]) -> Self {
        TriangularMF {
            a: v[0],
            b: v[1],
            c: v[2],
        }
    }
}

impl TriangularMF {
    pub fn membership(&self, x: f64) -> f64 {
        if x < self.a || x > self.c {
            return 0.0;
        }
        if x == self.b {
            return 1.0; // also covers degenerate singletons
        }
        if x < self.b {
            (x - self.a) / (self.b - self.a)
        } else {
            (self.c - x) / (self.c - self.b)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinguisticImportance {
    pub low: TriangularMF,
    pub moderate: TriangularMF,
    pub high: TriangularMF,
}

impl LinguisticImportance {
    pub fn memberships(&self, x: f64) -> [f64; 3] {
        [
            self.low.membership(x),
            self.moderate.membership(x),
            self.high.membership(x),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Low,
    Moderate,
    High,
}

impl Label {
    pub fn name(&self) -> &'static str {
        match self {
            Label::Low => "low",
            Label::Moderate => "moderate",
            Label::High => "high",
        }
    }
}

/// Membership functions from percentile landmarks of the samples:
/// low = (p0, p0, p50), moderate = (p25, p50, p75), high = (p50, p100, p100).
pub fn build_mfs(samples: &[f64]) -> Result<LinguisticImportance, FuzzyError> {
    if samples.len() < 3 {
        return Err(FuzzyError::TooFewSamples {
            need: 3,
            got: samples.len(),
        });
    }
    for &s in samples {
        if !s.is_finite() || !(0.0..=1.0).contains(&s) {
            return Err(FuzzyError::OutOfRange(s));
        }
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|x, y| x.total_cmp(y));
    let p0 = sorted[0];
    let p25 = quantile_sorted(&sorted, 0.25);
    let p50 = quantile_sorted(&sorted, 0.50);
    let p75 = quantile_sorted(&sorted, 0.75);
    let p100 = sorted[sorted.len() - 1];

    Ok(LinguisticImportance {
        low: TriangularMF {
            a: p0,
            b: p0,
            c: p50,
        },
        moderate: TriangularMF {
            a: p25,
            b: p50,
            c: p75,
        },
        high: TriangularMF {
            a: p50,
            b: p100,
            c: p100,
        },
    })
}

pub const REGION_GRID: usize = 512;

/// Centroid of a membership curve sampled uniformly on [0, 1],
/// by the trapezoidal rule.
pub fn defuzzify_centroid(mu: &[f64]) -> Result<f64, FuzzyError> {
    assert!(mu.len() >= 2, "region needs at least two samples");
    let n = mu.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n - 1 {
        let x0 = i as f64 / (n - 1) as f64;
        let x1 = (i + 1) as f64 / (n - 1) as f64;
        num += (x0 * mu[i] + x1 * mu[i + 1]) / 2.0 * (x1 - x0);
        den += (mu[i] + mu[i + 1]) / 2.0 * (x1 - x0);
    }
    if den <= 0.0 {
        return Err(FuzzyError::ZeroArea);
    }
    Ok(num / den)
}

/// Index of the peak nearest to `x`; ties go to the higher-importance term.
fn nearest_term(mfs: &LinguisticImportance, x: f64) -> usize {
    let peaks = [mfs.low.b, mfs.moderate.b, mfs.high.b];
    let mut best = 0;
    for t in 1..3 {
        if (x - peaks[t]).abs() <= (x - peaks[best]).abs() {
            best = t;
        }
    }
    best
}

/// Pool samples across models, build MFs on the pool, then defuzzify the
/// aggregated region (each term clipped at the fraction of pooled samples
/// nearest its peak) into a crisp coefficient.
pub fn aggregate_feature(
    per_model_samples: &BTreeMap<String, Vec<f64>>,
) -> Result<(LinguisticImportance, f64), FuzzyError> {
    let pool: Vec<f64> = per_model_samples.values().flatten().copied().collect();
    let mfs = build_mfs(&pool)?;

    let mut counts = [0usize; 3];
    for &s in &pool {
        counts[nearest_term(&mfs, s)] += 1;
    }
    let weights = counts.map(|c| c as f64 / pool.len() as f64);

    let terms = [mfs.low, mfs.moderate, mfs.high];
    let mu: Vec<f64> = (0..REGION_GRID)
        .map(|i| {
            let x = i as f64 / (REGION_GRID - 1) as f64;
            terms
                .iter()
                .zip(weights)
                .map(|(t, w)| t.membership(x).min(w))
                .fold(0.0f64, f64::max)
        })
        .collect();

    let centroid = match defuzzify_centroid(&mu) {
        Ok(c) => c,
        // all-equal pools produce zero-width triangles with zero area
        Err(FuzzyError::ZeroArea) => crate::stats::mean(&pool),
        Err(e) => return Err(e),
    };
    Ok((mfs, centroid))
}

/// Evaluate the three memberships at the centroid; the label is the argmax
/// term (ties resolve to the higher-importance term).
pub fn label_feature(mfs: &LinguisticImportance, centroid: f64) -> (Label, f64) {
    let m = mfs.memberships(centroid);
    let mut best = 0;
    for t in 1..3 {
        if m[t] >= m[best] {
            best = t;
        }
    }
    let label = [Label::Low, Label::Moderate, Label::High][best];
    (label, m[best])
}

/// Per-feature fuzzy summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureFuzzy {
    pub mfs: LinguisticImportance,
    pub label: Label,
    pub degree: f64,
    /// Observed min/max of the feature's coefficients.
    pub support: [f64; 2],
    pub centroid: f64,
}

/// Full fuzzy interpretation of an importance tensor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FuzzyReport {
    /// Per model, MFs over all of that model's feature coefficients pooled.
    pub per_model: BTreeMap<String, LinguisticImportance>,
    /// Per feature, per model.
    pub per_feature_model: BTreeMap<String, BTreeMap<String, LinguisticImportance>>,
    /// Per feature, pooled over all models, with label and centroid.
    /// Labels are judged against `dataset_scope` so that features are rated
    /// relative to the whole coefficient distribution.
    pub per_feature: BTreeMap<String, FeatureFuzzy>,
    /// MFs over every coefficient from every model, technique, and feature.
    pub dataset_scope: LinguisticImportance,
}

/// Build the fuzzy report from per-(feature, model) coefficient samples.
/// `samples[feature][model]` lists that pair's coefficients across
/// techniques and repetitions.
pub fn fuzzy_report(
    samples: &BTreeMap<String, BTreeMap<String, Vec<f64>>>,
) -> Result<FuzzyReport, FuzzyError> {
    let all: Vec<f64> = samples
        .values()
        .flat_map(|m| m.values().flatten().copied())
        .collect();
    let dataset_scope = build_mfs(&all)?;

    let mut per_model_pool: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for models in samples.values() {
        for (model, vals) in models {
            per_model_pool
                .entry(model.clone())
                .or_default()
                .extend(vals.iter().copied());
        }
    }
    let mut per_model = BTreeMap::new();
    for (model, pool) in &per_model_pool {
        per_model.insert(model.clone(), build_mfs(pool)?);
    }

    let mut per_feature_model = BTreeMap::new();
    let mut per_feature = BTreeMap::new();
    for (feature, models) in samples {
        let mut by_model = BTreeMap::new();
        for (model, vals) in models {
            by_model.insert(model.clone(), build_mfs(vals)?);
        }
        per_feature_model.insert(feature.clone(), by_model);

        let (mfs, centroid) = aggregate_feature(models)?;
        let (label, degree) = label_feature(&dataset_scope, centroid);
        let pool: Vec<f64> = models.values().flatten().copied().collect();
        let lo = pool.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pool.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        per_feature.insert(
            feature.clone(),
            FeatureFuzzy {
                mfs,
                label,
                degree,
                support: [lo, hi],
                centroid,
            },
        );
    }

    Ok(FuzzyReport {
        per_model,
        per_feature_model,
        per_feature,
        dataset_scope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_hat_shape() {
        let mf = TriangularMF {
            a: 0.0,
            b: 0.5,
            c: 1.0,
        };
        assert_eq!(mf.membership(0.5), 1.0);
        assert_eq!(mf.membership(0.25), 0.5);
        assert_eq!(mf.membership(1.2), 0.0);
        assert_eq!(mf.membership(-0.1), 0.0);
    }

    #[test]
    fn membership_degenerate_singleton() {
        let mf = TriangularMF {
            a: 0.4,
            b: 0.4,
            c: 0.4,
        };
        assert_eq!(mf.membership(0.4), 1.0);
        assert_eq!(mf.membership(0.41), 0.0);
    }

    #[test]
    fn build_mfs_uniform_grid() {
        let mfs = build_mfs(&[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        assert_eq!(mfs.low, TriangularMF { a: 0.0, b: 0.0, c: 0.5 });
        assert_eq!(
            mfs.moderate,
            TriangularMF {
                a: 0.25,
                b: 0.5,
                c: 0.75
            }
        );
        assert_eq!(mfs.high, TriangularMF { a: 0.5, b: 1.0, c: 1.0 });
    }

    #[test]
    fn build_mfs_degenerate_and_guards() {
        let mfs = build_mfs(&[0.4, 0.4, 0.4]).unwrap();
        for mf in [mfs.low, mfs.moderate, mfs.high] {
            assert_eq!(mf, TriangularMF { a: 0.4, b: 0.4, c: 0.4 });
        }
        // coverage still holds at the point itself
        assert!(mfs.memberships(0.4).iter().copied().fold(0.0f64, f64::max) > 0.0);

        assert!(matches!(
            build_mfs(&[0.1, 0.2]),
            Err(FuzzyError::TooFewSamples { need: 3, got: 2 })
        ));
        assert!(matches!(
            build_mfs(&[0.1, 0.2, 1.4]),
            Err(FuzzyError::OutOfRange(_))
        ));
    }

    #[test]
    fn coverage_and_peak_ordering() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = rng.gen_range(3..30);
            let samples: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let mfs = build_mfs(&samples).unwrap();
            assert!(mfs.low.b <= mfs.moderate.b && mfs.moderate.b <= mfs.high.b);
            for &s in &samples {
                let peak = mfs.memberships(s).iter().copied().fold(0.0f64, f64::max);
                assert!(peak > 0.0, "no coverage at {s}");
            }
        }
    }

    fn sample_region(mfs: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..REGION_GRID)
            .map(|i| mfs(i as f64 / (REGION_GRID - 1) as f64))
            .collect()
    }

    #[test]
    fn centroid_symmetric_triangle() {
        let mf = TriangularMF {
            a: 0.2,
            b: 0.5,
            c: 0.8,
        };
        let c = defuzzify_centroid(&sample_region(|x| mf.membership(x))).unwrap();
        assert!((c - 0.5).abs() < 1e-3);
    }

    #[test]
    fn centroid_right_triangle_closed_form() {
        // mu(x) = 1 - x on [0, 1]: centroid = 1/3
        let c = defuzzify_centroid(&sample_region(|x| 1.0 - x)).unwrap();
        assert!((c - 1.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn centroid_narrow_spike() {
        let eps = 0.01;
        let c = defuzzify_centroid(&sample_region(|x| {
            (1.0 - (x - 0.7).abs() / eps).max(0.0)
        }))
        .unwrap();
        assert!((c - 0.7).abs() < eps);
    }

    #[test]
    fn centroid_zero_area_rejected() {
        assert!(matches!(
            defuzzify_centroid(&vec![0.0; REGION_GRID]),
            Err(FuzzyError::ZeroArea)
        ));
    }

    #[test]
    fn aggregate_single_model_is_build_mfs() {
        let samples: Vec<f64> = vec![0.1, 0.3, 0.5, 0.7, 0.9];
        let mut map = BTreeMap::new();
        map.insert("m".to_string(), samples.clone());
        let (mfs, _) = aggregate_feature(&map).unwrap();
        assert_eq!(mfs, build_mfs(&samples).unwrap());
    }

    #[test]
    fn aggregate_duplicate_model_invariance() {
        let samples: Vec<f64> = vec![0.1, 0.3, 0.5, 0.7, 0.9];
        let mut one = BTreeMap::new();
        one.insert("a".to_string(), samples.clone());
        let mut two = one.clone();
        two.insert("b".to_string(), samples.clone());
        assert_eq!(
            aggregate_feature(&one).unwrap().0,
            aggregate_feature(&two).unwrap().0
        );
    }

    #[test]
    fn aggregate_bimodal_centroid_in_gap() {
        let mut map = BTreeMap::new();
        map.insert(
            "a".to_string(),
            vec![0.18, 0.19, 0.20, 0.21, 0.22],
        );
        map.insert(
            "b".to_string(),
            vec![0.78, 0.79, 0.80, 0.81, 0.82],
        );
        let (mfs, centroid) = aggregate_feature(&map).unwrap();
        // the moderate MF spans the gap between the clusters
        assert!(mfs.moderate.a <= 0.25 && mfs.moderate.c >= 0.75);
        assert!((0.4..=0.6).contains(&centroid), "centroid {centroid}");
    }

    #[test]
    fn aggregate_degenerate_pool() {
        let mut map = BTreeMap::new();
        map.insert("a".to_string(), vec![0.4, 0.4, 0.4]);
        let (_, centroid) = aggregate_feature(&map).unwrap();
        assert!((centroid - 0.4).abs() < 1e-12);
    }

    #[test]
    fn labels_from_memberships() {
        let mfs = build_mfs(&[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        assert_eq!(label_feature(&mfs, 1.0), (Label::High, 1.0));
        let (label, degree) = label_feature(&mfs, 0.05);
        assert_eq!(label, Label::Low);
        assert!(degree > 0.0 && degree <= 1.0);
        // equidistant between moderate and high peaks with equal membership:
        // tie resolves upward
        let (label, _) = label_feature(&mfs, 0.75);
        assert_eq!(label, Label::High);
    }

    #[test]
    fn report_structure() {
        let mut samples: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
        for (feature, base) in [("f_low", 0.05), ("f_high", 0.85)] {
            let mut by_model = BTreeMap::new();
            for model in ["m1", "m2"] {
                by_model.insert(
                    model.to_string(),
                    vec![base, base + 0.05, base + 0.1],
                );
            }
            samples.insert(feature.to_string(), by_model);
        }
        let report = fuzzy_report(&samples).unwrap();
        assert_eq!(report.per_model.len(), 2);
        assert_eq!(report.per_feature.len(), 2);
        let low = &report.per_feature["f_low"];
        let high = &report.per_feature["f_high"];
        assert_eq!(low.label, Label::Low);
        assert_eq!(high.label, Label::High);
        assert!(low.support[0] <= low.support[1]);
        assert!(low.degree > 0.0 && high.degree > 0.0);
    }
}
