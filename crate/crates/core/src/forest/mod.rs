//! Random-forest regression from `[x | q]` to predicted intra-frame bits.
//!
//! Each tree is grown on its own bootstrap resample, drawn from a PRNG whose
//! seed is derived from the master seed and the tree index, so training is
//! reproducible and independent of how trees are scheduled across threads.

mod codec;
mod tree;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use codec::{FORMAT_VERSION, MAGIC};
pub use tree::{Node, Tree};

use crate::analyzer::FrameFeatures;
use crate::error::{Error, Result};
use crate::seed;
use crate::MAX_QP;

/// Number of model inputs: six frame features plus the QP.
pub const N_INPUTS: usize = 7;

/// Input order of the model.
pub const FEATURE_NAMES: [&str; N_INPUTS] = ["e_y", "l_y", "e_u", "l_u", "e_v", "l_v", "q"];

/// Index of the QP among the model inputs.
pub const QP_INPUT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub features: FrameFeatures,
    pub q: i32,
    /// Frame size in bits.
    pub bits: f64,
}

impl TrainingSample {
    pub fn input(&self) -> [f64; N_INPUTS] {
        model_input(&self.features, self.q)
    }

    pub fn validate(&self) -> Result<()> {
        check_qp(self.q)?;
        if !self.features.values().iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sample for frame {} has a non-finite feature",
                self.features.frame_index
            )));
        }
        if !(self.bits.is_finite() && self.bits > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sample for frame {} has invalid bit count {}",
                self.features.frame_index, self.bits
            )));
        }
        Ok(())
    }
}

pub fn model_input(features: &FrameFeatures, q: i32) -> [f64; N_INPUTS] {
    let [a, b, c, d, e, f] = features.values();
    [a, b, c, d, e, f, q as f64]
}

pub(crate) fn check_qp(q: i32) -> Result<()> {
    if (0..=MAX_QP).contains(&q) {
        Ok(())
    } else {
        Err(Error::QpOutOfRange(q as i64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestHyperparams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub seed: u64,
    /// Candidate features drawn per split.
    pub max_features: usize,
}

impl Default for ForestHyperparams {
    fn default() -> Self {
        ForestHyperparams {
            n_estimators: 100,
            max_depth: 12,
            min_samples_leaf: 1,
            min_samples_split: 2,
            seed: 0,
            max_features: N_INPUTS,
        }
    }
}

impl ForestHyperparams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.n_estimators == 0 {
            return fail("n_estimators must be at least 1");
        }
        if self.max_depth == 0 {
            return fail("max_depth must be at least 1");
        }
        if self.min_samples_split < 2 {
            return fail("min_samples_split must be at least 2");
        }
        if self.min_samples_leaf == 0 {
            return fail("min_samples_leaf must be at least 1");
        }
        if !(1..=N_INPUTS).contains(&self.max_features) {
            return fail("max_features must be in [1, 7]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingStats {
    pub n_samples: u64,
    pub feature_min: [f64; N_INPUTS],
    pub feature_max: [f64; N_INPUTS],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub(crate) trees: Vec<Tree>,
    pub(crate) hyperparams: ForestHyperparams,
    pub(crate) stats: TrainingStats,
}

/// Mean-decrease-in-impurity weights in [`FEATURE_NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Importance {
    pub weights: [f64; N_INPUTS],
    /// Set when the forest has no split nodes; `weights` is then all zero.
    pub no_splits: bool,
}

impl ForestModel {
    /// Assembles a model from explicit trees, mostly useful for tests.
    pub fn from_trees(trees: Vec<Tree>, hyperparams: ForestHyperparams, stats: TrainingStats) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidInput("a forest needs at least one tree".into()));
        }
        for tree in &trees {
            codec::validate_tree(tree).map_err(Error::Model)?;
        }
        Ok(ForestModel { trees, hyperparams, stats })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn hyperparams(&self) -> &ForestHyperparams {
        &self.hyperparams
    }

    pub fn training_stats(&self) -> &TrainingStats {
        &self.stats
    }

    pub fn feature_names(&self) -> [&'static str; N_INPUTS] {
        FEATURE_NAMES
    }

    /// Mean over trees for a raw model input vector.
    pub fn predict_input(&self, x: &[f64; N_INPUTS]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, features: &FrameFeatures, q: i32) -> Result<f64> {
        check_qp(q)?;
        Ok(self.predict_input(&model_input(features, q)))
    }

    pub fn importance(&self) -> Importance {
        let mut totals = [0.0f64; N_INPUTS];
        for tree in &self.trees {
            for node in tree.nodes() {
                if let Node::Split { feature, gain, .. } = *node {
                    totals[feature as usize] += gain.max(0.0);
                }
            }
        }
        let norm: f64 = totals.iter().sum();
        if norm <= 0.0 {
            return Importance { weights: [0.0; N_INPUTS], no_splits: true };
        }
        Importance { weights: totals.map(|t| t / norm), no_splits: false }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        codec::encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        codec::decode(bytes).map_err(Error::Model)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

pub fn predict(model: &ForestModel, features: &FrameFeatures, q: i32) -> Result<f64> {
    model.predict(features, q)
}

pub fn importance(model: &ForestModel) -> Importance {
    model.importance()
}

fn training_stats(x: &[[f64; N_INPUTS]]) -> TrainingStats {
    let mut feature_min = [f64::INFINITY; N_INPUTS];
    let mut feature_max = [f64::NEG_INFINITY; N_INPUTS];
    for row in x {
        for k in 0..N_INPUTS {
            feature_min[k] = feature_min[k].min(row[k]);
            feature_max[k] = feature_max[k].max(row[k]);
        }
    }
    TrainingStats { n_samples: x.len() as u64, feature_min, feature_max }
}

pub fn train(samples: &[TrainingSample], hp: &ForestHyperparams) -> Result<ForestModel> {
    hp.validate()?;
    if samples.len() < hp.min_samples_split {
        return Err(Error::InvalidInput(format!(
            "need at least {} training samples, got {}",
            hp.min_samples_split,
            samples.len()
        )));
    }
    for s in samples {
        s.validate()?;
    }
    let x: Vec<[f64; N_INPUTS]> = samples.iter().map(TrainingSample::input).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.bits).collect();
    let params = tree::GrowParams {
        max_depth: hp.max_depth,
        min_samples_split: hp.min_samples_split,
        min_samples_leaf: hp.min_samples_leaf,
        max_features: hp.max_features,
    };
    let n = samples.len();
    let trees = (0..hp.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::child_rng(hp.seed, t as u64);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            tree::grow(&x, &y, rows, &params, rng)
        })
        .collect();
    Ok(ForestModel { trees, hyperparams: *hp, stats: training_stats(&x) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionScores {
    pub mae: f64,
    pub mse: f64,
    pub r2: f64,
}

/// MAE, MSE and coefficient of determination of `model` on `samples`.
pub fn evaluate(model: &ForestModel, samples: &[TrainingSample]) -> Result<RegressionScores> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("cannot score an empty sample set".into()));
    }
    let n = samples.len() as f64;
    let preds: Vec<f64> = samples.par_iter().map(|s| model.predict_input(&s.input())).collect();
    let mean = samples.iter().map(|s| s.bits).sum::<f64>() / n;
    let (mut abs, mut sq, mut tot) = (0.0, 0.0, 0.0);
    for (s, p) in samples.iter().zip(&preds) {
        abs += (s.bits - p).abs();
        sq += (s.bits - p).powi(2);
        tot += (s.bits - mean).powi(2);
    }
    let r2 = if tot > 0.0 { 1.0 - sq / tot } else { 0.0 };
    Ok(RegressionScores { mae: abs / n, mse: sq / n, r2 })
}

/// Deterministically shuffles and splits off `fraction` of the samples as a holdout set.
pub fn split_holdout(
    samples: &[TrainingSample],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<TrainingSample>, Vec<TrainingSample>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!("holdout fraction {fraction} must lie in (0, 1)")));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut seed::child_rng(seed, u64::MAX));
    let n_test = ((samples.len() as f64) * fraction).round() as usize;
    if n_test == 0 || n_test == samples.len() {
        return Err(Error::InvalidInput("holdout split leaves an empty partition".into()));
    }
    let test = order[..n_test].iter().map(|&i| samples[i]).collect();
    let train = order[n_test..].iter().map(|&i| samples[i]).collect();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(q: i32, bits: f64, e_y: f64) -> TrainingSample {
        TrainingSample { features: FrameFeatures::new(0, [e_y, 0.5, 0.1, 0.5, 0.1, 0.5]), q, bits }
    }

    fn stats() -> TrainingStats {
        TrainingStats { n_samples: 1, feature_min: [0.0; 7], feature_max: [1.0; 7] }
    }

    #[test]
    fn zero_variance_gives_single_leaves() {
        let samples: Vec<_> = (0..10).map(|i| sample(20 + i, 1000.0, 0.1 * i as f64)).collect();
        let m = train(&samples, &ForestHyperparams::default()).unwrap();
        assert_eq!(m.trees().len(), 100);
        for t in m.trees() {
            assert_eq!(t.nodes(), &[Node::Leaf { value: 1000.0 }]);
        }
        let imp = m.importance();
        assert!(imp.no_splits);
        assert_eq!(imp.weights, [0.0; 7]);
    }

    #[test]
    fn mean_of_trees() {
        let trees = vec![
            Tree::from_nodes(vec![Node::Leaf { value: 800.0 }]),
            Tree::from_nodes(vec![Node::Leaf { value: 1200.0 }]),
        ];
        let m = ForestModel::from_trees(trees, ForestHyperparams::default(), stats()).unwrap();
        let f = FrameFeatures::new(0, [0.3; 6]);
        assert_eq!(m.predict(&f, 30).unwrap(), 1000.0);
    }

    #[test]
    fn qp_range_checked() {
        let m = ForestModel::from_trees(
            vec![Tree::from_nodes(vec![Node::Leaf { value: 1000.0 }])],
            ForestHyperparams::default(),
            stats(),
        )
        .unwrap();
        let f = FrameFeatures::new(0, [0.3; 6]);
        assert_eq!(m.predict(&f, 0).unwrap(), 1000.0);
        assert_eq!(m.predict(&f, 63).unwrap(), 1000.0);
        assert!(matches!(m.predict(&f, 64), Err(Error::QpOutOfRange(64))));
        assert!(matches!(m.predict(&f, -1), Err(Error::QpOutOfRange(-1))));
    }

    #[test]
    fn bad_inputs_rejected() {
        let hp = ForestHyperparams::default();
        assert!(train(&[], &hp).is_err());
        assert!(train(&[sample(20, 10.0, 0.1)], &hp).is_err());
        let bad = [sample(20, 10.0, f64::NAN), sample(22, 20.0, 0.1)];
        assert!(train(&bad, &hp).is_err());
        let bad = [sample(20, f64::INFINITY, 0.1), sample(22, 20.0, 0.1)];
        assert!(train(&bad, &hp).is_err());
        let ok = [sample(20, 10.0, 0.1), sample(22, 20.0, 0.1)];
        let bad_hp = ForestHyperparams { min_samples_split: 1, ..hp };
        assert!(train(&ok, &bad_hp).is_err());
        let bad_hp = ForestHyperparams { n_estimators: 0, ..hp };
        assert!(train(&ok, &bad_hp).is_err());
    }

    #[test]
    fn max_features_subsampling_is_deterministic() {
        let samples: Vec<_> = (0..200)
            .map(|i| sample(18 + (i % 30), 1e5 * (0.5 + (i % 7) as f64) / (1 + i % 30) as f64, (i % 11) as f64 / 11.0))
            .collect();
        let hp = ForestHyperparams { n_estimators: 8, max_features: 3, ..Default::default() };
        let a = train(&samples, &hp).unwrap();
        let b = train(&samples, &hp).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn holdout_split_sizes() {
        let samples: Vec<_> = (0..100).map(|i| sample(20, 10.0 + i as f64, 0.1)).collect();
        let (tr, te) = split_holdout(&samples, 0.2, 0).unwrap();
        assert_eq!((tr.len(), te.len()), (80, 20));
        assert!(split_holdout(&samples, 1.0, 0).is_err());
    }
}
