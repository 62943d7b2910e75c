//! CART decision trees and a bagged forest with soft-vote probabilities.

use serde::{Deserialize, Serialize};

use crate::data::bootstrap;
use crate::stats::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitCriterion {
    Gini,
    Entropy,
}

impl SplitCriterion {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gini" => Some(Self::Gini),
            "entropy" => Some(Self::Entropy),
            _ => None,
        }
    }

    fn impurity(&self, counts: &[usize], total: usize) -> f64 {
        if total == 0 {
            return 0.0;
        }
        let t = total as f64;
        match self {
            SplitCriterion::Gini => {
                1.0 - counts
                    .iter()
                    .map(|&c| {
                        let p = c as f64 / t;
                        p * p
                    })
                    .sum::<f64>()
            }
            SplitCriterion::Entropy => counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let p = c as f64 / t;
                    -p * p.log2()
                })
                .sum(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "node")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Class frequencies of the training rows that reached this leaf.
        probs: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    min_leaf: usize,
    max_depth: usize,
    criterion: SplitCriterion,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl<'a> TreeBuilder<'a> {
    fn class_counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &r in rows {
            counts[self.y[r]] += 1;
        }
        counts
    }

    fn leaf(&mut self, counts: &[usize]) -> usize {
        let total: usize = counts.iter().sum();
        let probs = counts
            .iter()
            .map(|&c| c as f64 / total as f64)
            .collect();
        self.nodes.push(Node::Leaf { probs });
        self.nodes.len() - 1
    }

    /// Best split over all features; ties break toward the lowest feature
    /// index, then the lowest threshold.
    fn find_split(&self, rows: &[usize], parent_impurity: f64) -> Option<BestSplit> {
        let d = self.x[0].len();
        let total = rows.len();
        let mut best: Option<BestSplit> = None;

        for feature in 0..d {
            let mut order: Vec<usize> = rows.to_vec();
            order.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));

            let mut left_counts = vec![0usize; self.n_classes];
            let right_all = self.class_counts(rows);
            let mut right_counts = right_all;

            for i in 0..total - 1 {
                let r = order[i];
                left_counts[self.y[r]] += 1;
                right_counts[self.y[r]] -= 1;
                let v = self.x[r][feature];
                let next = self.x[order[i + 1]][feature];
                if next <= v {
                    continue; // not a distinct value boundary
                }
                let n_left = i + 1;
                let n_right = total - n_left;
                if n_left < self.min_leaf || n_right < self.min_leaf {
                    continue;
                }
                let imp = (n_left as f64 * self.criterion.impurity(&left_counts, n_left)
                    + n_right as f64 * self.criterion.impurity(&right_counts, n_right))
                    / total as f64;
                let threshold = (v + next) / 2.0;
                let better = match &best {
                    None => imp < parent_impurity - 1e-12,
                    Some(b) => {
                        imp < b.impurity - 1e-12
                            || ((imp - b.impurity).abs() <= 1e-12
                                && (feature < b.feature
                                    || (feature == b.feature && threshold < b.threshold)))
                    }
                };
                if better {
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        impurity: imp,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, rows: &[usize], depth: usize) -> usize {
        let counts = self.class_counts(rows);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.max_depth || rows.len() < 2 * self.min_leaf {
            return self.leaf(&counts);
        }
        let parent_impurity = self.criterion.impurity(&counts, rows.len());
        let Some(split) = self.find_split(rows, parent_impurity) else {
            return self.leaf(&counts);
        };

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.x[r][split.feature] <= split.threshold);

        // placeholder, patched after children are built
        self.nodes.push(Node::Leaf { probs: vec![] });
        let id = self.nodes.len() - 1;
        let left = self.build(&left_rows, depth + 1);
        let right = self.build(&right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

pub(crate) fn fit_tree(
    x: &[Vec<f64>],
    y: &[usize],
    rows: &[usize],
    n_classes: usize,
    min_leaf: usize,
    criterion: SplitCriterion,
    max_depth: usize,
) -> DecisionTree {
    let mut builder = TreeBuilder {
        x,
        y,
        n_classes,
        min_leaf,
        max_depth,
        criterion,
        nodes: Vec::new(),
    };
    // the root is always node 0: build() pushes it before any child
    let root = builder.build(rows, 0);
    debug_assert_eq!(root, 0);
    DecisionTree {
        nodes: builder.nodes,
    }
}

impl DecisionTree {
    pub fn leaf_probs(&self, row: &[f64]) -> &[f64] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { probs } => return probs,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    id = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
    pub n_classes: usize,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn fit_forest(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    n_trees: usize,
    min_leaf: usize,
    criterion: SplitCriterion,
    use_bootstrap: bool,
    max_depth: usize,
    seed: u64,
) -> Forest {
    let all_rows: Vec<usize> = (0..x.len()).collect();
    let trees = (0..n_trees)
        .map(|t| {
            let rows = if use_bootstrap {
                bootstrap(x.len(), mix_seed(seed, &[b"tree", &(t as u64).to_le_bytes()])).indices
            } else {
                all_rows.clone()
            };
            fit_tree(x, y, &rows, n_classes, min_leaf, criterion, max_depth)
        })
        .collect();
    Forest { trees, n_classes }
}

impl Forest {
    /// Soft vote: the mean of per-tree leaf class frequencies.
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|row| {
                let mut acc = vec![0.0; self.n_classes];
                for tree in &self.trees {
                    for (a, p) in acc.iter_mut().zip(tree.leaf_probs(row)) {
                        *a += p;
                    }
                }
                let nt = self.trees.len() as f64;
                for a in &mut acc {
                    *a /= nt;
                }
                acc
            })
            .collect()
    }
}
