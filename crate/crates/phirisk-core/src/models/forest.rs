//! Random forest of Gini-split decision trees over bootstrap samples.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::seeding::rng_for;

use super::{check_training_input, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomForestParams {
    pub trees: usize,
    pub seed: u64,
    /// Test hook: with bootstrapping off every tree trains on the full
    /// sample, so a single tree memorizes consistent data.
    pub bootstrap: bool,
}

impl Default for RandomForestParams {
    fn default() -> Self {
        RandomForestParams {
            trees: 100,
            seed: 42,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        /// Indices into the tree's node arena; `left` covers
        /// `value <= threshold`.
        left: usize,
        right: usize,
    },
    Leaf {
        /// Class frequency distribution; sums to 1.
        dist: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
}

impl DecisionTree {
    /// Class-1 frequency at the leaf this row falls into.
    fn class1_frequency(&self, x: &FeatureMatrix, row: usize) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { dist } => return dist[1],
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x.value(row, *feature) <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    params: RandomForestParams,
    n_features: usize,
    pub trees: Vec<DecisionTree>,
}

/// The best Gini split over the given rows and candidate features, or `None`
/// when every candidate feature is constant on these rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GiniSplit {
    pub feature: usize,
    pub threshold: f64,
    /// Weighted impurity of the two children.
    pub impurity: f64,
}

/// Exhaustive search over `(feature, midpoint threshold)` pairs, minimizing
/// the size-weighted Gini impurity of the partition. Ties keep the first
/// candidate in `features` order, thresholds ascending.
pub fn best_gini_split(
    x: &FeatureMatrix,
    y: &[u8],
    rows: &[usize],
    features: &[usize],
) -> Option<GiniSplit> {
    let n = rows.len() as f64;
    let mut best: Option<GiniSplit> = None;
    for &feature in features {
        let mut vals: Vec<(f64, u8)> = rows.iter().map(|&r| (x.value(r, feature), y[r])).collect();
        vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let total1 = vals.iter().filter(|(_, l)| *l != 0).count() as f64;
        let mut left_n = 0f64;
        let mut left1 = 0f64;
        for k in 0..vals.len() - 1 {
            left_n += 1.0;
            if vals[k].1 != 0 {
                left1 += 1.0;
            }
            if vals[k].0 < vals[k + 1].0 {
                let right_n = n - left_n;
                let right1 = total1 - left1;
                let gini = |count1: f64, count: f64| {
                    let p1 = count1 / count;
                    let p0 = 1.0 - p1;
                    1.0 - p0 * p0 - p1 * p1
                };
                let impurity =
                    (left_n * gini(left1, left_n) + right_n * gini(right1, right_n)) / n;
                if best.is_none_or(|b| impurity < b.impurity) {
                    best = Some(GiniSplit {
                        feature,
                        threshold: 0.5 * (vals[k].0 + vals[k + 1].0),
                        impurity,
                    });
                }
            }
        }
    }
    best
}

fn grow_tree(
    x: &FeatureMatrix,
    y: &[u8],
    rows: Vec<usize>,
    n_subset_features: usize,
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let count1 = rows.iter().filter(|&&r| y[r] != 0).count();
    let make_leaf = |nodes: &mut Vec<TreeNode>| {
        let n = rows.len() as f64;
        nodes.push(TreeNode::Leaf {
            dist: [(rows.len() - count1) as f64 / n, count1 as f64 / n],
        });
        nodes.len() - 1
    };
    if rows.len() < 2 || count1 == 0 || count1 == rows.len() {
        return make_leaf(nodes);
    }

    let d = x.n_cols();
    let sampled: Vec<usize> = sample_indices(rng, d, n_subset_features.min(d)).into_vec();
    let split = best_gini_split(x, y, &rows, &sampled).or_else(|| {
        // every sampled feature was constant here; fall back to scanning all
        let all: Vec<usize> = (0..d).collect();
        best_gini_split(x, y, &rows, &all)
    });
    let Some(split) = split else {
        return make_leaf(nodes);
    };

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&r| x.value(r, split.feature) <= split.threshold);
    let at = nodes.len();
    nodes.push(TreeNode::Leaf { dist: [0.0, 0.0] }); // placeholder
    let left = grow_tree(x, y, left_rows, n_subset_features, rng, nodes);
    let right = grow_tree(x, y, right_rows, n_subset_features, rng, nodes);
    nodes[at] = TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    at
}

/// Trains `params.trees` trees, each on a bootstrap sample drawn from a
/// generator seeded by `(seed, tree index)`, splitting on
/// `floor(sqrt(d))` features sampled per node and growing until pure or
/// fewer than two samples remain. Trees train in parallel; the result is
/// identical regardless of scheduling.
pub fn train_random_forest(
    x: &FeatureMatrix,
    y: &[u8],
    params: &RandomForestParams,
) -> Result<RandomForestModel, ModelError> {
    check_training_input(x, y)?;
    let n = x.n_rows();
    let d = x.n_cols();
    let n_subset_features = ((d as f64).sqrt().floor() as usize).max(1);

    let trees: Vec<DecisionTree> = (0..params.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(params.seed, "tree", t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut nodes = Vec::new();
            grow_tree(x, y, rows, n_subset_features, &mut rng, &mut nodes);
            DecisionTree { nodes }
        })
        .collect();

    Ok(RandomForestModel {
        params: *params,
        n_features: d,
        trees,
    })
}

impl RandomForestModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn seed(&self) -> u64 {
        self.params.seed
    }

    /// Mean class-1 leaf frequency over trees, in [0, 1].
    pub fn decision_scores(&self, x: &FeatureMatrix) -> Vec<f64> {
        let n_trees = self.trees.len() as f64;
        (0..x.n_rows())
            .map(|i| {
                self.trees
                    .iter()
                    .map(|t| t.class1_frequency(x, i))
                    .sum::<f64>()
                    / n_trees
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::TrainedModel;

    fn dense(data: Vec<f64>, n_cols: usize) -> FeatureMatrix {
        FeatureMatrix::Emb { n_cols, data }
    }

    #[test]
    fn single_full_tree_memorizes_consistent_data() {
        let x = dense(vec![0.2, 1.1, 0.4, 0.9, 1.8, 0.3, 2.2, 0.1, 1.5, 0.8, 0.1, 1.9], 2);
        let y = vec![0, 0, 1, 1, 0, 0];
        let params = RandomForestParams {
            trees: 1,
            seed: 7,
            bootstrap: false,
        };
        let model = train_random_forest(&x, &y, &params).unwrap();
        let labels = TrainedModel::RandomForest(model).predict(&x).unwrap();
        assert_eq!(labels, y);
    }

    #[test]
    fn same_seed_reproduces_the_forest() {
        use rand::Rng;
        let mut rng = crate::seeding::rng_for(11, "forest-test-data", 0);
        let n = 40;
        let data: Vec<f64> = (0..n * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<u8> = (0..n).map(|i| u8::from(data[i * 3] > 0.0)).collect();
        let x = dense(data, 3);
        let params = RandomForestParams {
            trees: 15,
            seed: 123,
            bootstrap: true,
        };
        let a = train_random_forest(&x, &y, &params).unwrap();
        let b = train_random_forest(&x, &y, &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.decision_scores(&x), b.decision_scores(&x));
        let different = train_random_forest(
            &x,
            &y,
            &RandomForestParams {
                seed: 124,
                ..params
            },
        )
        .unwrap();
        assert_ne!(a, different);
    }

    /// Exhaustive oracle over every (feature, threshold) pair on a 6-point
    /// dataset, enumerating candidate thresholds as midpoints and computing
    /// both child impurities from scratch.
    #[test]
    fn root_split_matches_enumeration_oracle() {
        let x = dense(
            vec![0.9, 2.1, 0.2, 1.4, 1.7, 0.6, 0.4, 2.8, 1.1, 0.3, 2.4, 1.9],
            2,
        );
        let y = vec![1, 0, 1, 0, 1, 0];
        let rows: Vec<usize> = (0..6).collect();
        let features = vec![0, 1];
        let ours = best_gini_split(&x, &y, &rows, &features).unwrap();

        let mut best: Option<(usize, f64, f64)> = None;
        for f in 0..2 {
            let mut vals: Vec<f64> = rows.iter().map(|&r| x.value(r, f)).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            for pair in vals.windows(2) {
                let thr = 0.5 * (pair[0] + pair[1]);
                let left: Vec<usize> = rows.iter().copied().filter(|&r| x.value(r, f) <= thr).collect();
                let right: Vec<usize> = rows.iter().copied().filter(|&r| x.value(r, f) > thr).collect();
                let gini = |subset: &[usize]| {
                    let n = subset.len() as f64;
                    let p1 = subset.iter().filter(|&&r| y[r] != 0).count() as f64 / n;
                    1.0 - p1 * p1 - (1.0 - p1) * (1.0 - p1)
                };
                let imp = (left.len() as f64 * gini(&left) + right.len() as f64 * gini(&right))
                    / rows.len() as f64;
                if best.is_none_or(|(_, _, b)| imp < b) {
                    best = Some((f, thr, imp));
                }
            }
        }
        let (feature, threshold, impurity) = best.unwrap();
        assert_eq!(ours.feature, feature);
        assert_eq!(ours.threshold, threshold);
        assert!((ours.impurity - impurity).abs() < 1e-12);
    }

    #[test]
    fn prediction_is_invariant_to_tree_order() {
        use rand::Rng;
        let mut rng = crate::seeding::rng_for(13, "forest-order", 0);
        let n = 30;
        let data: Vec<f64> = (0..n * 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<u8> = (0..n).map(|i| u8::from(data[i * 2] + data[i * 2 + 1] > 0.0)).collect();
        let x = dense(data, 2);
        let model = train_random_forest(
            &x,
            &y,
            &RandomForestParams {
                trees: 9,
                seed: 5,
                bootstrap: true,
            },
        )
        .unwrap();
        let mut reversed = model.clone();
        reversed.trees.reverse();
        let a = TrainedModel::RandomForest(model).predict(&x).unwrap();
        let b = TrainedModel::RandomForest(reversed).predict(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn leaf_distributions_sum_to_one() {
        let x = dense(vec![0.0, 1.0, 0.5, 1.5, 1.0, 0.0, 1.5, 0.5], 2);
        let y = vec![0, 0, 1, 1];
        let model = train_random_forest(
            &x,
            &y,
            &RandomForestParams {
                trees: 5,
                seed: 1,
                bootstrap: true,
            },
        )
        .unwrap();
        assert_eq!(model.trees.len(), 5);
        for tree in &model.trees {
            for node in &tree.nodes {
                if let TreeNode::Leaf { dist } = node {
                    assert!((dist[0] + dist[1] - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
