//! Random forest: bootstrap-sampled CART trees with per-node feature
//! subsampling, combined by majority vote.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::features::FeatureVector;
use crate::trees::{
    check_fit_inputs, grow_binary_tree, Criterion, FeatureSelector, Prediction, TreeError, TreeModel, TreeParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features examined per node; `None` means `floor(sqrt(F))`.
    pub mtry: Option<usize>,
    pub seed: u64,
    pub tree_params: TreeParams,
    /// When false every tree sees the training rows once, in order.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            mtry: None,
            seed: 0,
            tree_params: TreeParams::default(),
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn resolved_mtry(&self, n_features: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| ((n_features as f64).sqrt().floor() as usize).max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    /// Training-row indices each tree was grown on.
    pub samples: Vec<Vec<usize>>,
    pub params: ForestParams,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
}

/// `n` draws with replacement, uniform over `0..n`.
pub fn bootstrap_sample(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Generator for tree `tree_index`: one ChaCha stream per tree, so results
/// do not depend on the order trees are built in.
pub fn tree_rng(seed: u64, tree_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree_index as u64);
    rng
}

struct RandomSubspace<'a> {
    rng: &'a mut ChaCha8Rng,
    mtry: usize,
}

impl FeatureSelector for RandomSubspace<'_> {
    fn select(&mut self, n_features: usize) -> Vec<usize> {
        let mut picked = index::sample(self.rng, n_features, self.mtry.min(n_features)).into_vec();
        picked.sort_unstable();
        picked
    }
}

pub fn fit_forest(train: &Dataset, params: &ForestParams) -> Result<ForestModel, TreeError> {
    check_fit_inputs(train, &params.tree_params)?;
    if params.tree_params.criterion == Criterion::InfoGain {
        return Err(TreeError::InvalidParams("forest trees use the gini or entropy criterion".into()));
    }
    if params.n_trees == 0 {
        return Err(TreeError::InvalidParams("n_trees must be positive".into()));
    }
    let n_features = train.n_features();
    let mtry = params.resolved_mtry(n_features);
    if mtry == 0 || mtry > n_features {
        return Err(TreeError::InvalidParams(format!("mtry {mtry} must be in 1..={n_features}")));
    }

    let grown: Vec<(TreeModel, Vec<usize>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(params.seed, t);
            let rows = if params.bootstrap {
                bootstrap_sample(train.len(), &mut rng)
            } else {
                (0..train.len()).collect()
            };
            let mut selector = RandomSubspace { rng: &mut rng, mtry };
            let root = grow_binary_tree(train, rows.clone(), &params.tree_params, &mut selector);
            let tree = TreeModel {
                root,
                params: params.tree_params.clone(),
                feature_names: train.feature_names.clone(),
                class_names: train.class_names.clone(),
            };
            (tree, rows)
        })
        .collect();
    let (trees, samples) = grown.into_iter().unzip();

    Ok(ForestModel {
        trees,
        samples,
        params: ForestParams {
            mtry: Some(mtry),
            ..params.clone()
        },
        feature_names: train.feature_names.clone(),
        class_names: train.class_names.clone(),
    })
}

impl ForestModel {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Majority vote; `scores` are vote fractions. Ties go to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction, TreeError> {
        let mut votes = vec![0usize; self.n_classes()];
        for tree in &self.trees {
            votes[tree.predict_label(x)?] += 1;
        }
        Ok(tally(&votes))
    }

    pub fn predict_vector(&self, x: &FeatureVector) -> Result<(String, Vec<f64>), TreeError> {
        if x.names[..] != self.feature_names[..] {
            return Err(TreeError::FeatureNames);
        }
        let p = self.predict(&x.values)?;
        Ok((self.class_names[p.label].clone(), p.scores))
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<Prediction>, TreeError> {
        rows.par_iter().map(|r| self.predict(r)).collect()
    }

    /// Mean decrease in impurity per feature, normalized to sum to 1
    /// (uniform when no tree ever split).
    pub fn feature_importance(&self) -> Vec<f64> {
        let n_features = self.feature_names.len();
        let mut total = vec![0.0; n_features];
        for tree in &self.trees {
            for (acc, v) in total.iter_mut().zip(tree.weighted_decreases()) {
                *acc += v;
            }
        }
        let sum: f64 = total.iter().sum();
        if sum > 0.0 {
            total.iter().map(|v| v / sum).collect()
        } else {
            vec![1.0 / n_features as f64; n_features]
        }
    }

    /// Accuracy of out-of-bag votes over the rows of `train` that at least
    /// one tree did not see. `None` when every row was in every sample.
    pub fn oob_accuracy(&self, train: &Dataset) -> Result<Option<f64>, TreeError> {
        let mut in_bag = vec![vec![false; train.len()]; self.trees.len()];
        for (t, sample) in self.samples.iter().enumerate() {
            for &r in sample {
                if r < train.len() {
                    in_bag[t][r] = true;
                }
            }
        }
        let (mut scored, mut correct) = (0usize, 0usize);
        for (r, row) in train.rows.iter().enumerate() {
            let mut votes = vec![0usize; self.n_classes()];
            let mut any = false;
            for (t, tree) in self.trees.iter().enumerate() {
                if !in_bag[t][r] {
                    votes[tree.predict_label(row)?] += 1;
                    any = true;
                }
            }
            if any {
                scored += 1;
                correct += usize::from(tally(&votes).label == train.labels[r]);
            }
        }
        Ok((scored > 0).then(|| correct as f64 / scored as f64))
    }
}

fn tally(votes: &[usize]) -> Prediction {
    let n: usize = votes.iter().sum();
    let mut label = 0;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[label] {
            label = c;
        }
    }
    Prediction {
        label,
        scores: votes.iter().map(|&v| v as f64 / n.max(1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::{fit_cart, ClassDistribution, NodeKind, TreeNode};

    fn table(rows: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Dataset {
        let features = (0..rows[0].len()).map(|i| format!("f{i}")).collect();
        let classes = (0..n_classes).map(|c| format!("c{c}")).collect();
        Dataset::new(features, classes, rows, labels).unwrap()
    }

    fn noisy_table(seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..120)
            .map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let labels = rows
            .iter()
            .map(|r: &Vec<f64>| if r[0] + 0.5 * r[3] > 0.2 { 2 } else if r[1] > 0.0 { 1 } else { 0 })
            .collect();
        table(rows, labels, 3)
    }

    #[test]
    fn bootstrap_basics() {
        let mut rng = tree_rng(1, 0);
        assert_eq!(bootstrap_sample(1, &mut rng), vec![0]);
        assert_eq!(bootstrap_sample(50, &mut tree_rng(9, 3)), bootstrap_sample(50, &mut tree_rng(9, 3)));
        assert_ne!(bootstrap_sample(50, &mut tree_rng(9, 3)), bootstrap_sample(50, &mut tree_rng(9, 4)));
    }

    #[test]
    fn bootstrap_frequencies_are_uniform() {
        // 1000 samples of n = 10 give 10 000 draws; each index expects 1000
        let mut rng = tree_rng(2024, 0);
        let mut counts = [0usize; 10];
        for _ in 0..1000 {
            for i in bootstrap_sample(10, &mut rng) {
                counts[i] += 1;
            }
        }
        let sigma = (10_000.0 * 0.1 * 0.9f64).sqrt();
        for c in counts {
            assert!((c as f64 - 1000.0).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn degenerate_forest_equals_cart() {
        let ds = noisy_table(4);
        let params = ForestParams {
            n_trees: 1,
            mtry: Some(ds.n_features()),
            bootstrap: false,
            ..Default::default()
        };
        let forest = fit_forest(&ds, &params).unwrap();
        let cart = fit_cart(&ds, &TreeParams::default()).unwrap();
        assert_eq!(forest.trees[0].root, cart.root);
        for row in &ds.rows {
            assert_eq!(forest.predict(row).unwrap().label, cart.predict_label(row).unwrap());
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let ds = noisy_table(8);
        let params = ForestParams { n_trees: 15, seed: 7, ..Default::default() };
        let a = fit_forest(&ds, &params).unwrap();
        let b = fit_forest(&ds, &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.feature_importance(), b.feature_importance());
        let c = fit_forest(&ds, &ForestParams { seed: 8, ..params }).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    fn stub(label: usize, n_classes: usize) -> TreeModel {
        let mut counts = vec![0; n_classes];
        counts[label] = 1;
        TreeModel {
            root: TreeNode {
                distribution: ClassDistribution::new(counts),
                impurity: 0.0,
                kind: NodeKind::Leaf,
            },
            params: TreeParams::default(),
            feature_names: vec!["x".into()],
            class_names: (0..n_classes).map(|c| c.to_string()).collect(),
        }
    }

    fn stub_forest(labels: &[usize], n_classes: usize) -> ForestModel {
        ForestModel {
            trees: labels.iter().map(|&l| stub(l, n_classes)).collect(),
            samples: vec![vec![]; labels.len()],
            params: ForestParams::default(),
            feature_names: vec!["x".into()],
            class_names: (0..n_classes).map(|c| c.to_string()).collect(),
        }
    }

    #[test]
    fn voting() {
        let unanimous = stub_forest(&[2, 2, 2], 3).predict(&[0.0]).unwrap();
        assert_eq!((unanimous.label, unanimous.scores[2]), (2, 1.0));

        let tie = stub_forest(&[1, 0], 2).predict(&[0.0]).unwrap();
        assert_eq!(tie.label, 0);
        assert_eq!(tie.scores, vec![0.5, 0.5]);

        let five = stub_forest(&[3, 1, 3, 0, 1], 4).predict(&[0.0]).unwrap();
        assert_eq!(five.scores, vec![1.0 / 5.0, 2.0 / 5.0, 0.0, 2.0 / 5.0]);
        assert_eq!(five.label, 1);

        assert!(matches!(
            stub_forest(&[0], 2).predict(&[0.0, 1.0]),
            Err(TreeError::Arity { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn importance_cases() {
        let single = table((0..20).map(|i| vec![i as f64]).collect(), (0..20).map(|i| usize::from(i > 9)).collect(), 2);
        let f = fit_forest(&single, &ForestParams { n_trees: 5, ..Default::default() }).unwrap();
        assert_eq!(f.feature_importance(), vec![1.0]);

        // feature 0 separates the classes, feature 1 is noise, feature 2 is constant
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|i| vec![if i % 2 == 0 { -1.0 } else { 1.0 } + rng.gen_range(-0.3..0.3), rng.gen_range(0.0..1.0), 4.0])
            .collect();
        let labels = (0..200).map(|i| i % 2).collect();
        let ds = table(rows, labels, 2);
        let f = fit_forest(&ds, &ForestParams { n_trees: 50, mtry: Some(2), seed: 3, ..Default::default() }).unwrap();
        let imp = f.feature_importance();
        assert!(imp[0] > 0.9, "{imp:?}");
        assert_eq!(imp[2], 0.0);
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let stumps = stub_forest(&[0, 1], 2);
        assert_eq!(stumps.feature_importance(), vec![1.0]);
    }

    #[test]
    fn vote_fractions_are_a_distribution() {
        let ds = noisy_table(21);
        let f = fit_forest(&ds, &ForestParams { n_trees: 11, seed: 1, ..Default::default() }).unwrap();
        for p in f.predict_batch(&ds.rows).unwrap() {
            assert!(p.scores.iter().all(|s| (0.0..=1.0).contains(s)));
            assert!((p.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oob_is_reported() {
        let ds = noisy_table(2);
        let f = fit_forest(&ds, &ForestParams { n_trees: 25, seed: 5, ..Default::default() }).unwrap();
        let oob = f.oob_accuracy(&ds).unwrap().unwrap();
        assert!(oob > 0.6 && oob <= 1.0, "{oob}");

        let identity = fit_forest(&ds, &ForestParams { n_trees: 2, bootstrap: false, ..Default::default() }).unwrap();
        assert_eq!(identity.oob_accuracy(&ds).unwrap(), None);
    }

    #[test]
    fn parameter_errors() {
        let ds = noisy_table(1);
        assert!(fit_forest(&ds, &ForestParams { n_trees: 0, ..Default::default() }).is_err());
        assert!(fit_forest(&ds, &ForestParams { mtry: Some(7), ..Default::default() }).is_err());
        assert!(matches!(
            fit_forest(&ds.subset(&[]), &ForestParams::default()),
            Err(TreeError::EmptyTrainingSet)
        ));
    }
}
