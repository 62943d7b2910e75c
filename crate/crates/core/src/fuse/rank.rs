//! Tie-corrected rank correlations and their significance.

use statrs::distribution::{ContinuousCDF, Normal};

fn concordance(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len();
    let mut concordant = 0.0;
    let mut discordant = 0.0;
    let mut ties_x = 0.0;
    let mut ties_y = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                ties_x += 1.0;
                ties_y += 1.0;
            } else if dx == 0.0 {
                ties_x += 1.0;
            } else if dy == 0.0 {
                ties_y += 1.0;
            } else if dx * dy > 0.0 {
                concordant += 1.0;
            } else {
                discordant += 1.0;
            }
        }
    }
    (concordant, discordant, ties_x, ties_y)
}

/// Kendall's tau-b. Returns 0 when either vector is constant.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "rank correlation needs equal lengths");
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let (c, d, tx, ty) = concordance(x, y);
    let n0 = (n * (n - 1) / 2) as f64;
    let denom = ((n0 - tx) * (n0 - ty)).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    (c - d) / denom
}

fn has_ties(v: &[f64]) -> bool {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted.windows(2).any(|w| w[0] == w[1])
}

/// Number of permutations of n elements with k inversions (Mahonian numbers).
fn inversion_counts(n: usize) -> Vec<f64> {
    let max_inv = n * (n - 1) / 2;
    let mut counts = vec![0.0f64; max_inv + 1];
    counts[0] = 1.0;
    for m in 2..=n {
        let mut next = vec![0.0f64; max_inv + 1];
        // inserting the m-th element adds 0..m-1 inversions
        let mut window = 0.0;
        for k in 0..=max_inv {
            window += counts[k];
            if k >= m {
                window -= counts[k - m];
            }
            next[k] = window;
        }
        counts = next;
    }
    counts
}

/// Two-sided p-value for Kendall's tau. Exact permutation distribution when
/// neither vector has ties and n <= 10, otherwise the normal approximation
/// with variance n(n-1)(2n+5)/18.
pub fn kendall_tau_p_value(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    if n < 3 {
        return 1.0;
    }
    let (c, d, _, _) = concordance(x, y);
    let s = c - d;

    if n <= 10 && !has_ties(x) && !has_ties(y) {
        let counts = inversion_counts(n);
        let n0 = (n * (n - 1) / 2) as f64;
        let total: f64 = counts.iter().sum();
        let p: f64 = counts
            .iter()
            .enumerate()
            .filter(|(k, _)| (n0 - 2.0 * *k as f64).abs() >= s.abs() - 1e-9)
            .map(|(_, cnt)| cnt)
            .sum::<f64>()
            / total;
        return p.min(1.0);
    }

    let nf = n as f64;
    let var = nf * (nf - 1.0) * (2.0 * nf + 5.0) / 18.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = s / var.sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    (2.0 * (1.0 - normal.cdf(z.abs()))).min(1.0)
}

/// Average (midrank) ranks, 1-based.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of average ranks.
/// Returns 0 when either vector is constant.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "rank correlation needs equal lengths");
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let mx = crate::stats::mean(&rx);
    let my = crate::stats::mean(&ry);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Two-sided p-value for Spearman's rho via the normal approximation
/// z = rho * sqrt(n - 1).
pub fn spearman_rho_p_value(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    if n < 3 {
        return 1.0;
    }
    let rho = spearman_rho(x, y);
    let z = rho * ((n - 1) as f64).sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    (2.0 * (1.0 - normal.cdf(z.abs()))).min(1.0)
}
