//! Crisp decision fusion of importance tensors into one coefficient per feature.

mod rank;

pub use rank::{kendall_tau, kendall_tau_p_value, spearman_rho, spearman_rho_p_value};

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::stats::{mean, quantile_sorted, sample_std};

#[derive(Debug, Error)]
pub enum FuseError {
    #[error("method {method} needs at least {need} source vectors, got {got}")]
    InsufficientSources {
        method: String,
        need: usize,
        got: usize,
    },
    #[error("source vectors disagree on length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("unknown fusion method '{0}'")]
    UnknownMethod(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FusionMethod {
    Mean,
    Median,
    Mode,
    BoxWhiskers,
    TauTest,
    MajorityVote,
    RateKendall,
    RateSpearman,
}

impl FusionMethod {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "mean" => Some(Self::Mean),
            "median" => Some(Self::Median),
            "mode" => Some(Self::Mode),
            "box_whiskers" | "box" => Some(Self::BoxWhiskers),
            "tau_test" | "tau" => Some(Self::TauTest),
            "majority_vote" | "majority" => Some(Self::MajorityVote),
            "rate_kendall" | "rate_kendall_tau" => Some(Self::RateKendall),
            "rate_spearman" | "rate_spearman_rho" => Some(Self::RateSpearman),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::Median => "median",
            Self::Mode => "mode",
            Self::BoxWhiskers => "box_whiskers",
            Self::TauTest => "tau_test",
            Self::MajorityVote => "majority_vote",
            Self::RateKendall => "rate_kendall",
            Self::RateSpearman => "rate_spearman",
        }
    }

    pub const ALL: [FusionMethod; 8] = [
        Self::Mean,
        Self::Median,
        Self::Mode,
        Self::BoxWhiskers,
        Self::TauTest,
        Self::MajorityVote,
        Self::RateKendall,
        Self::RateSpearman,
    ];

    pub fn min_sources(&self) -> usize {
        match self {
            Self::TauTest | Self::RateKendall | Self::RateSpearman => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Tuning knobs shared by the rank-based methods.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FuseParams {
    /// Significance level for the tau test and the RATE correlation gate.
    pub alpha: f64,
    /// Fraction of top ranks considered by majority vote, in (0, 1].
    pub num_features: f64,
}

impl Default for FuseParams {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            num_features: 1.0,
        }
    }
}

fn check_sources(method: FusionMethod, sources: &[Vec<f64>]) -> Result<usize, FuseError> {
    let need = method.min_sources();
    if sources.len() < need {
        return Err(FuseError::InsufficientSources {
            method: method.name().into(),
            need,
            got: sources.len(),
        });
    }
    let d = sources[0].len();
    for s in sources {
        if s.len() != d {
            return Err(FuseError::LengthMismatch(d, s.len()));
        }
    }
    Ok(d)
}

fn feature_column(sources: &[Vec<f64>], j: usize) -> Vec<f64> {
    sources.iter().map(|s| s[j]).collect()
}

/// Arithmetic mean per feature.
pub fn fuse_mean(sources: &[Vec<f64>]) -> Result<Vec<f64>, FuseError> {
    let d = check_sources(FusionMethod::Mean, sources)?;
    Ok((0..d).map(|j| mean(&feature_column(sources, j))).collect())
}

/// Middle order statistic per feature (even counts average the two middle values).
pub fn fuse_median(sources: &[Vec<f64>]) -> Result<Vec<f64>, FuseError> {
    let d = check_sources(FusionMethod::Median, sources)?;
    Ok((0..d)
        .map(|j| {
            let mut col = feature_column(sources, j);
            col.sort_by(|a, b| a.total_cmp(b));
            quantile_sorted(&col, 0.5)
        })
        .collect())
}

/// Argmax of a Gaussian KDE (Silverman bandwidth) evaluated on a 512-point
/// grid over [0, 1]; grid ties resolve to the lower abscissa.
pub fn fuse_mode_kde(sources: &[Vec<f64>]) -> Result<Vec<f64>, FuseError> {
    let d = check_sources(FusionMethod::Mode, sources)?;
    Ok((0..d)
        .map(|j| {
            let col = feature_column(sources, j);
            kde_mode(&col)
        })
        .collect())
}

const KDE_GRID: usize = 512;

fn kde_mode(values: &[f64]) -> f64 {
    let m = values.len() as f64;
    let sigma = sample_std(values);
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let h = (0.9 * sigma.min(iqr / 1.34) * m.powf(-0.2)).max(1e-3);

    let mut best_x = 0.0;
    let mut best_density = f64::NEG_INFINITY;
    for i in 0..KDE_GRID {
        let x = i as f64 / (KDE_GRID - 1) as f64;
        let density: f64 = values
            .iter()
            .map(|&v| {
                let z = (x - v) / h;
                (-0.5 * z * z).exp()
            })
            .sum();
        if density > best_density {
            best_density = density;
            best_x = x;
        }
    }
    // the grid can overshoot the observed range by up to one step
    best_x.clamp(sorted[0], sorted[sorted.len() - 1])
}

/// Mean of the values inside [Q1 - 1.5 IQR, Q3 + 1.5 IQR] per feature.
pub fn fuse_box_whiskers(sources: &[Vec<f64>]) -> Result<Vec<f64>, FuseError> {
    let d = check_sources(FusionMethod::BoxWhiskers, sources)?;
    Ok((0..d)
        .map(|j| {
            let mut col = feature_column(sources, j);
            col.sort_by(|a, b| a.total_cmp(b));
            let q1 = quantile_sorted(&col, 0.25);
            let q3 = quantile_sorted(&col, 0.75);
            let iqr = q3 - q1;
            let lo = q1 - 1.5 * iqr;
            let hi = q3 + 1.5 * iqr;
            let kept: Vec<f64> = col.into_iter().filter(|&v| v >= lo && v <= hi).collect();
            mean(&kept)
        })
        .collect())
}

fn thompson_tau(m: usize, alpha: f64) -> f64 {
    let df = (m - 2) as f64;
    let t = StudentsT::new(0.0, 1.0, df)
        .expect("valid t distribution")
        .inverse_cdf(1.0 - alpha / 2.0);
    t * (m as f64 - 1.0) / ((m as f64).sqrt() * (df + t * t).sqrt())
}

/// Iterative Thompson tau outlier rejection, then the mean of survivors.
/// One point is rejected per iteration; with two points left the test is
/// undefined and the plain mean is returned.
pub fn fuse_tau_test(sources: &[Vec<f64>], alpha: f64) -> Result<Vec<f64>, FuseError> {
    let d = check_sources(FusionMethod::TauTest, sources)?;
    Ok((0..d)
        .map(|j| {
            let mut col = feature_column(sources, j);
            loop {
                if col.len() <= 2 {
                    return mean(&col);
                }
                let mu = mean(&col);
                let s = sample_std(&col);
                if s == 0.0 {
                    return mu;
                }
                let (worst, dev) = col
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| (i, (v - mu).abs()))
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                if dev > thompson_tau(col.len(), alpha) * s {
                    col.swap_remove(worst);
                } else {
                    return mu;
                }
            }
        })
        .collect())
}

/// Descending ranks per source (rank 1 = largest coefficient; ties give the
/// lower feature index the better rank). Features ranked beyond
/// `considered` are assigned rank d + 1.
fn rank_features(source: &[f64], considered: usize) -> Vec<usize> {
    let d = source.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| source[b].total_cmp(&source[a]).then(a.cmp(&b)));
    let mut ranks = vec![0usize; d];
    for (pos, &feat) in order.iter().enumerate() {
        let rank = pos + 1;
        ranks[feat] = if rank <= considered { rank } else { d + 1 };
    }
    ranks
}

/// Majority-vote fusion: each feature's fused value is the mean of its
/// coefficients from the sources where it held its modal rank.
/// Modal-rank ties resolve to the numerically smaller (better) rank.
pub fn fuse_majority_vote(sources: &[Vec<f64>], num_features: f64) -> Result<Vec<f64>, FuseError> {
    let d = check_sources(FusionMethod::MajorityVote, sources)?;
    let considered = ((num_features.clamp(f64::MIN_POSITIVE, 1.0) * d as f64).ceil() as usize)
        .clamp(1, d);
    let ranks: Vec<Vec<usize>> = sources.iter().map(|s| rank_features(s, considered)).collect();

    Ok((0..d)
        .map(|j| {
            let mut count: BTreeMap<usize, usize> = BTreeMap::new();
            for r in &ranks {
                *count.entry(r[j]).or_insert(0) += 1;
            }
            // BTreeMap iterates ranks ascending, so strict > keeps the smaller
            // rank on ties
            let (&modal, _) = count
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .unwrap();
            let picked: Vec<f64> = sources
                .iter()
                .zip(&ranks)
                .filter(|(_, r)| r[j] == modal)
                .map(|(s, _)| s[j])
                .collect();
            mean(&picked)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankCorrelation {
    Kendall,
    Spearman,
}

/// RATE fusion: drop sources whose rank correlation with the consensus of
/// the remaining sources is not significantly positive, then majority-vote
/// the survivors. If every source would be dropped, all are kept.
pub fn fuse_rate(
    sources: &[Vec<f64>],
    correlation: RankCorrelation,
    alpha: f64,
    num_features: f64,
) -> Result<Vec<f64>, FuseError> {
    let method = match correlation {
        RankCorrelation::Kendall => FusionMethod::RateKendall,
        RankCorrelation::Spearman => FusionMethod::RateSpearman,
    };
    let d = check_sources(method, sources)?;
    let m = sources.len();

    let mut survivors: Vec<Vec<f64>> = Vec::new();
    for i in 0..m {
        let mut consensus = vec![0.0f64; d];
        for (k, s) in sources.iter().enumerate() {
            if k != i {
                for (c, v) in consensus.iter_mut().zip(s) {
                    *c += v;
                }
            }
        }
        for c in &mut consensus {
            *c /= (m - 1) as f64;
        }
        let (r, p) = match correlation {
            RankCorrelation::Kendall => {
                let r = kendall_tau(&sources[i], &consensus);
                (r, kendall_tau_p_value(&sources[i], &consensus))
            }
            RankCorrelation::Spearman => {
                let r = spearman_rho(&sources[i], &consensus);
                (r, spearman_rho_p_value(&sources[i], &consensus))
            }
        };
        if r > 0.0 && p < alpha {
            survivors.push(sources[i].clone());
        }
    }

    if survivors.len() < 2 {
        // degenerate fall-through: nothing (or only one source) passed the gate
        survivors = sources.to_vec();
    }
    fuse_majority_vote(&survivors, num_features)
}

/// Fused coefficients: one column per method, one row per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedImportance {
    pub feature_names: Vec<String>,
    pub methods: BTreeMap<FusionMethod, Vec<f64>>,
}

impl FusedImportance {
    /// fused.csv: feature, then one 4-decimal column per method.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), FuseError> {
        write!(w, "feature")?;
        for method in self.methods.keys() {
            write!(w, ",{method}")?;
        }
        writeln!(w)?;
        for (j, name) in self.feature_names.iter().enumerate() {
            write!(w, "{name}")?;
            for values in self.methods.values() {
                write!(w, ",{:.4}", values[j])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), FuseError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }
}

/// Apply each requested method to the same source vectors.
pub fn fuse_methods(
    feature_names: &[String],
    sources: &[Vec<f64>],
    methods: &[FusionMethod],
    params: &FuseParams,
) -> Result<FusedImportance, FuseError> {
    let mut out = BTreeMap::new();
    for &method in methods {
        let values = match method {
            FusionMethod::Mean => fuse_mean(sources)?,
            FusionMethod::Median => fuse_median(sources)?,
            FusionMethod::Mode => fuse_mode_kde(sources)?,
            FusionMethod::BoxWhiskers => fuse_box_whiskers(sources)?,
            FusionMethod::TauTest => fuse_tau_test(sources, params.alpha)?,
            FusionMethod::MajorityVote => fuse_majority_vote(sources, params.num_features)?,
            FusionMethod::RateKendall => {
                fuse_rate(sources, RankCorrelation::Kendall, params.alpha, params.num_features)?
            }
            FusionMethod::RateSpearman => {
                fuse_rate(sources, RankCorrelation::Spearman, params.alpha, params.num_features)?
            }
        };
        out.insert(method, values);
    }
    Ok(FusedImportance {
        feature_names: feature_names.to_vec(),
        methods: out,
    })
}

/// Number of values `fuse_tau_test` rejects for one feature column
/// (exposed for diagnostics and tests).
pub fn tau_test_rejections(column: &[f64], alpha: f64) -> usize {
    let mut col = column.to_vec();
    let mut rejected = 0;
    loop {
        if col.len() <= 2 {
            return rejected;
        }
        let mu = mean(&col);
        let s = sample_std(&col);
        if s == 0.0 {
            return rejected;
        }
        let (worst, dev) = col
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, (v - mu).abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if dev > thompson_tau(col.len(), alpha) * s {
            col.swap_remove(worst);
            rejected += 1;
        } else {
            return rejected;
        }
    }
}

#[cfg(test)]
mod tests;
