//! Histogram-based gradient-boosted decision trees.
//!
//! Two objectives: weighted softmax multiclass classification and
//! squared-error regression. Features are quantile-binned once; trees are
//! grown depth-first on gradient/hessian histograms with the sibling
//! obtained by subtraction. NaN feature values are treated as missing and
//! routed to whichever side maximizes gain.

pub mod binning;
pub mod config;
pub mod tree;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use binning::HistogramBinning;
pub use config::{GbdtConfig, Objective};
pub use tree::{Tree, TreeNode};

use binning::BinnedMatrix;
use tree::{build_tree, TreeParams};

use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLoss {
    pub round: usize,
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub format_version: u32,
    pub objective: Objective,
    pub n_classes: usize,
    pub feature_names: Vec<String>,
    pub learning_rate: f64,
    pub base_score: Vec<f64>,
    pub binning: HistogramBinning,
    /// `trees[round][output]`.
    pub trees: Vec<Vec<Tree>>,
    pub history: Vec<RoundLoss>,
    /// Number of rounds used for prediction (1-based count; 0 = base score only).
    pub best_round: usize,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

/// Optional held-out set for early stopping.
#[derive(Debug, Clone, Copy)]
pub struct Validation<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: &'a [u8],
    pub weights: Option<&'a [f64]>,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Gradient and diagonal hessian of the weighted softmax cross-entropy
/// `-w log p_y` with respect to the logits.
pub fn softmax_grad_hess(logits: &[f64], y: usize, w: f64) -> (Vec<f64>, Vec<f64>) {
    let p = softmax(logits);
    let g = p
        .iter()
        .enumerate()
        .map(|(c, &pc)| w * (pc - if c == y { 1.0 } else { 0.0 }))
        .collect();
    let h = p.iter().map(|&pc| w * pc * (1.0 - pc)).collect();
    (g, h)
}

const CLIP: f64 = 1e-15;

/// `-Σ w_i log P[i][y_i] / Σ w_i` with probabilities clipped to `[1e-15, 1-1e-15]`.
pub fn weighted_log_loss(y: &[u8], p: &[Vec<f64>], weights: Option<&[f64]>) -> Result<f64> {
    if y.len() != p.len() || weights.is_some_and(|w| w.len() != y.len()) {
        return Err(Error::invalid("labels, probabilities and weights differ in length"));
    }
    if y.is_empty() {
        return Err(Error::invalid("log loss of an empty set"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, (&yi, row)) in y.iter().zip(p).enumerate() {
        let pi = *row
            .get(yi as usize)
            .ok_or_else(|| Error::invalid(format!("label {yi} outside probability row")))?;
        let w = weights.map_or(1.0, |w| w[i]);
        num -= w * pi.clamp(CLIP, 1.0 - CLIP).ln();
        den += w;
    }
    Ok(num / den)
}

fn check_weights(w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::invalid("weights length differs from row count"));
    }
    if w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Training("sample weights must be positive and finite".into()));
    }
    Ok(())
}

fn feature_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("f{i}")).collect()
}

struct Booster<'a> {
    config: &'a GbdtConfig,
    binning: HistogramBinning,
    train: BinnedMatrix,
    outputs: usize,
}

impl Booster<'_> {
    fn rows_for_round(&self, round: usize) -> Vec<u32> {
        let n = self.train.n_rows;
        if self.config.subsample >= 1.0 {
            return (0..n as u32).collect();
        }
        let k = ((n as f64 * self.config.subsample).ceil() as usize).clamp(1, n);
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed.wrapping_add(round as u64));
        let mut rows: Vec<u32> = sample(&mut rng, n, k).into_iter().map(|i| i as u32).collect();
        rows.sort_unstable();
        rows
    }

    fn params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.config.max_depth,
            min_child_weight: self.config.min_child_weight,
            lambda: self.config.l2_lambda,
            eta: self.config.eta(),
        }
    }

    /// One tree per output from per-output gradient/hessian vectors.
    fn grow_round(&self, round: usize, grads: &[(Vec<f64>, Vec<f64>)]) -> Vec<Tree> {
        let rows = self.rows_for_round(round);
        let params = self.params();
        grads
            .par_iter()
            .map(|(g, h)| build_tree(&self.train, &self.binning, rows.clone(), g, h, params))
            .collect()
    }

    fn add_round(scores: &mut [f64], outputs: usize, trees: &[Tree], m: &BinnedMatrix) {
        scores.par_chunks_mut(outputs).enumerate().for_each(|(r, s)| {
            for (c, t) in trees.iter().enumerate() {
                s[c] += t.predict_binned(m, r);
            }
        });
    }
}

fn probabilities(scores: &[f64], k: usize) -> Vec<Vec<f64>> {
    scores.par_chunks(k).map(softmax).collect()
}

/// Trains a weighted softmax classifier. With `valid`, training stops once
/// the validation weighted log-loss has not improved for
/// `early_stopping_rounds` consecutive rounds.
pub fn fit_classifier(
    x: ArrayView2<f64>,
    y: &[u8],
    weights: Option<&[f64]>,
    config: &GbdtConfig,
    valid: Option<Validation>,
) -> Result<GbdtModel> {
    config.validate()?;
    if config.objective != Objective::MulticlassSoftmax {
        return Err(Error::WrongObjective { expected: "multiclass_softmax" });
    }
    let n = x.nrows();
    let k = config.n_classes;
    if n == 0 {
        return Err(Error::Training("empty training data".into()));
    }
    if y.len() != n {
        return Err(Error::invalid("label count differs from row count"));
    }
    if let Some(&bad) = y.iter().find(|&&c| c as usize >= k) {
        return Err(Error::Training(format!("label {bad} outside 0..{k}")));
    }
    if y.iter().all(|&c| c == y[0]) {
        return Err(Error::Training("only one class present in training labels".into()));
    }
    let w: Vec<f64> = match weights {
        Some(w) => {
            check_weights(w, n)?;
            w.to_vec()
        }
        None => vec![1.0; n],
    };
    let binning = HistogramBinning::fit(x, config.max_bins)?;
    let train = binning.transform(x)?;
    let valid_binned = match &valid {
        Some(v) => {
            if v.y.len() != v.x.nrows() {
                return Err(Error::invalid("validation label count differs from row count"));
            }
            if let Some(vw) = v.weights {
                check_weights(vw, v.y.len())?;
            }
            if v.y.iter().any(|&c| c as usize >= k) {
                return Err(Error::Training("validation label out of range".into()));
            }
            Some(binning.transform(v.x)?)
        }
        None => None,
    };
    let booster = Booster { config, binning, train, outputs: k };

    let mut scores = vec![0.0; n * k];
    let mut valid_scores = valid_binned.as_ref().map(|m| vec![0.0; m.n_rows * k]);
    let mut trees: Vec<Vec<Tree>> = Vec::new();
    let mut history = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for round in 1..=config.rounds {
        let per_row: Vec<(Vec<f64>, Vec<f64>)> = scores
            .par_chunks(k)
            .zip(y.par_iter().zip(w.par_iter()))
            .map(|(s, (&yi, &wi))| softmax_grad_hess(s, yi as usize, wi))
            .collect();
        let grads: Vec<(Vec<f64>, Vec<f64>)> = (0..k)
            .map(|c| (per_row.iter().map(|(g, _)| g[c]).collect(), per_row.iter().map(|(_, h)| h[c]).collect()))
            .collect();
        drop(per_row);
        let round_trees = booster.grow_round(round, &grads);
        Booster::add_round(&mut scores, booster.outputs, &round_trees, &booster.train);
        let train_loss = weighted_log_loss(y, &probabilities(&scores, k), Some(&w))?;
        let valid_loss = match (&valid, &valid_binned, &mut valid_scores) {
            (Some(v), Some(m), Some(vs)) => {
                Booster::add_round(vs, k, &round_trees, m);
                Some(weighted_log_loss(v.y, &probabilities(vs, k), v.weights)?)
            }
            _ => None,
        };
        trees.push(round_trees);
        history.push(RoundLoss { round, train_loss, valid_loss });
        if !train_loss.is_finite() || valid_loss.is_some_and(|l| !l.is_finite()) {
            return Err(Error::Numerical(format!("non-finite loss at round {round}")));
        }
        if let Some(vl) = valid_loss {
            if best.is_none_or(|(_, b)| vl < b) {
                best = Some((round, vl));
            }
            let (best_round, _) = best.expect("set above");
            if config.early_stopping_rounds > 0 && round - best_round >= config.early_stopping_rounds {
                break;
            }
        }
    }
    let best_round = best.map_or(trees.len(), |(r, _)| r);
    Ok(GbdtModel {
        format_version: MODEL_FORMAT_VERSION,
        objective: Objective::MulticlassSoftmax,
        n_classes: k,
        feature_names: feature_names(x.ncols()),
        learning_rate: config.eta(),
        base_score: vec![0.0; k],
        binning: booster.binning,
        trees,
        history,
        best_round,
        metadata: BTreeMap::new(),
    })
}

/// Trains a squared-error regressor starting from the mean target.
pub fn fit_regressor(x: ArrayView2<f64>, y: &[f64], config: &GbdtConfig) -> Result<GbdtModel> {
    let config = GbdtConfig { objective: Objective::RegressionL2, n_classes: 1, ..config.clone() };
    config.validate()?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::Training("empty training data".into()));
    }
    if y.len() != n {
        return Err(Error::invalid("target count differs from row count"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Training("regression targets must be finite".into()));
    }
    let binning = HistogramBinning::fit(x, config.max_bins)?;
    let train = binning.transform(x)?;
    let booster = Booster { config: &config, binning, train, outputs: 1 };
    let base = y.iter().sum::<f64>() / n as f64;
    let mut scores = vec![base; n];
    let h = vec![1.0; n];
    let mut trees = Vec::new();
    let mut history = Vec::new();
    for round in 1..=config.rounds {
        let g: Vec<f64> = scores.iter().zip(y).map(|(s, t)| s - t).collect();
        let round_trees = booster.grow_round(round, &[(g, h.clone())]);
        Booster::add_round(&mut scores, 1, &round_trees, &booster.train);
        let mse = scores.iter().zip(y).map(|(s, t)| (s - t).powi(2)).sum::<f64>() / n as f64;
        trees.push(round_trees);
        history.push(RoundLoss { round, train_loss: mse, valid_loss: None });
        if !mse.is_finite() {
            return Err(Error::Numerical(format!("non-finite loss at round {round}")));
        }
    }
    Ok(GbdtModel {
        format_version: MODEL_FORMAT_VERSION,
        objective: Objective::RegressionL2,
        n_classes: 1,
        feature_names: feature_names(x.ncols()),
        learning_rate: config.eta(),
        base_score: vec![base],
        best_round: trees.len(),
        binning: booster.binning,
        trees,
        history,
        metadata: BTreeMap::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGain {
    pub feature: String,
    pub gain: f64,
}

/// Total split gain per feature, descending (ties by feature order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance(pub Vec<FeatureGain>);

impl FeatureImportance {
    pub fn top_k(&self, k: usize) -> &[FeatureGain] {
        &self.0[..k.min(self.0.len())]
    }

    pub fn gain_of(&self, feature: &str) -> Option<f64> {
        self.0.iter().find(|f| f.feature == feature).map(|f| f.gain)
    }
}

impl GbdtModel {
    pub fn n_features(&self) -> usize {
        self.binning.n_features()
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features() {
            return Err(Error::invalid(format!(
                "{} feature names for {} features",
                names.len(),
                self.n_features()
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    fn check_row(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::invalid(format!("expected {} features, got {}", self.n_features(), x.len())));
        }
        if x.iter().any(|v| v.is_infinite()) {
            return Err(Error::invalid("infinite feature value"));
        }
        Ok(())
    }

    /// Accumulated per-output scores through `best_round`.
    pub fn predict_raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_row(x)?;
        let mut s = self.base_score.clone();
        for round in &self.trees[..self.best_round] {
            for (c, t) in round.iter().enumerate() {
                s[c] += t.predict(x);
            }
        }
        Ok(s)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.objective != Objective::MulticlassSoftmax {
            return Err(Error::WrongObjective { expected: "multiclass_softmax" });
        }
        Ok(softmax(&self.predict_raw(x)?))
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<u8> {
        Ok(argmax_severe(&self.predict_proba(x)?))
    }

    pub fn predict_value(&self, x: &[f64]) -> Result<f64> {
        if self.objective != Objective::RegressionL2 {
            return Err(Error::WrongObjective { expected: "regression_l2" });
        }
        Ok(self.predict_raw(x)?[0])
    }

    fn rows<'a>(x: &'a ArrayView2<'a, f64>) -> Vec<ArrayView1<'a, f64>> {
        x.rows().into_iter().collect()
    }

    pub fn predict_proba_batch(&self, x: ArrayView2<f64>) -> Result<Vec<Vec<f64>>> {
        Self::rows(&x)
            .par_iter()
            .map(|r| self.predict_proba(&r.to_vec()))
            .collect()
    }

    pub fn predict_values_batch(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        Self::rows(&x)
            .par_iter()
            .map(|r| self.predict_value(&r.to_vec()))
            .collect()
    }

    pub fn feature_importance(&self) -> FeatureImportance {
        let mut gains = vec![0.0; self.n_features()];
        for round in &self.trees[..self.best_round] {
            for t in round {
                for (f, g) in t.splits() {
                    gains[f] += g;
                }
            }
        }
        let mut entries: Vec<(usize, f64)> = gains.into_iter().enumerate().collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        FeatureImportance(
            entries
                .into_iter()
                .map(|(f, gain)| FeatureGain { feature: self.feature_names[f].clone(), gain })
                .collect(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_json()?.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn load<R: Read>(r: R) -> Result<GbdtModel> {
        let m: GbdtModel = serde_json::from_reader(r)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!("unsupported model format version {}", m.format_version)));
        }
        if m.best_round > m.trees.len() || m.base_score.len() != m.trees.first().map_or(m.base_score.len(), Vec::len) {
            return Err(Error::invalid("inconsistent model file"));
        }
        Ok(m)
    }

    /// Writes the per-round loss history as CSV.
    pub fn write_training_log<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["round", "train_loss", "valid_loss"])?;
        for h in &self.history {
            wtr.write_record([
                h.round.to_string(),
                h.train_loss.to_string(),
                h.valid_loss.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Index of the largest probability; ties go to the higher index.
pub fn argmax_severe(p: &[f64]) -> u8 {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v >= p[best] {
            best = i;
        }
    }
    best as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn quartile_data(n: usize, seed: u64) -> (Array2<f64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y = xs.iter().map(|&v| (v * 4.0).floor().min(3.0) as u8).collect();
        (Array2::from_shape_vec((n, 1), xs).unwrap(), y)
    }

    #[test]
    fn separable_quartiles() {
        let (x, y) = quartile_data(1000, 1);
        let cfg = GbdtConfig { rounds: 50, ..GbdtConfig::default() };
        let m = fit_classifier(x.view(), &y, None, &cfg, None).unwrap();
        let correct = (0..1000)
            .filter(|&i| m.predict_label(x.row(i).as_slice().unwrap()).unwrap() == y[i])
            .count();
        assert!(correct as f64 / 1000.0 >= 0.99, "accuracy {correct}/1000");
    }

    #[test]
    fn zero_rounds_is_uniform() {
        let (x, y) = quartile_data(50, 2);
        let mut m = fit_classifier(x.view(), &y, None, &GbdtConfig { rounds: 1, ..GbdtConfig::default() }, None).unwrap();
        m.best_round = 0;
        assert_eq!(m.predict_proba(&[0.3]).unwrap(), vec![0.25; 4]);
        assert!(m.feature_importance().0.iter().all(|f| f.gain == 0.0));
    }

    #[test]
    fn predict_label_tie_rule() {
        assert_eq!(argmax_severe(&[0.1, 0.2, 0.3, 0.4]), 3);
        assert_eq!(argmax_severe(&[0.25; 4]), 3);
        assert_eq!(argmax_severe(&[0.7, 0.1, 0.1, 0.1]), 0);
    }

    #[test]
    fn log_loss_examples() {
        let perfect = weighted_log_loss(&[0, 2], &[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]], None).unwrap();
        assert!(perfect <= 1e-14);
        let uniform = weighted_log_loss(&[1], &[vec![0.25; 4]], None).unwrap();
        assert!((uniform - 4f64.ln()).abs() < 1e-12);
        let p = vec![vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 0.0, 0.25, 0.75]];
        let l = weighted_log_loss(&[0, 3], &p, Some(&[1.0, 1.0])).unwrap();
        assert!((l - (2f64.ln() + (4.0f64 / 3.0).ln()) / 2.0).abs() < 1e-12);
        assert!(weighted_log_loss(&[0], &p, None).is_err());
    }

    #[test]
    fn regression_constant_and_single() {
        let x = Array2::from_shape_vec((4, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let cfg = GbdtConfig { rounds: 1, l2_lambda: 0.0, ..GbdtConfig::regression() };
        let m = fit_regressor(x.view(), &[7.0; 4], &cfg).unwrap();
        for v in [0.0, 2.5, 10.0] {
            assert_eq!(m.predict_value(&[v]).unwrap(), 7.0);
        }
        let one = Array2::from_shape_vec((1, 1), vec![3.0]).unwrap();
        let m = fit_regressor(one.view(), &[-2.5], &cfg).unwrap();
        assert_eq!(m.predict_value(&[3.0]).unwrap(), -2.5);
        assert!(matches!(m.predict_proba(&[3.0]), Err(Error::WrongObjective { .. })));
    }

    #[test]
    fn regression_step_function() {
        let xs: Vec<f64> = (0..200).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = xs.iter().map(|&v| if v < 7.3 { -1.0 } else { 4.0 }).collect();
        let x = Array2::from_shape_vec((200, 1), xs).unwrap();
        let cfg = GbdtConfig { rounds: 20, learning_rate: Some(0.5), ..GbdtConfig::regression() };
        let m = fit_regressor(x.view(), &y, &cfg).unwrap();
        let mse = m.history.last().unwrap().train_loss;
        assert!(mse < 1e-3, "mse {mse}");
    }

    #[test]
    fn training_errors() {
        let x = Array2::from_shape_vec((3, 1), vec![1.0, 2.0, 3.0]).unwrap();
        let cfg = GbdtConfig::default();
        assert!(matches!(fit_classifier(x.view(), &[1, 1, 1], None, &cfg, None), Err(Error::Training(_))));
        let empty = Array2::<f64>::zeros((0, 1));
        assert!(fit_classifier(empty.view(), &[], None, &cfg, None).is_err());
        let inf = Array2::from_shape_vec((2, 1), vec![1.0, f64::INFINITY]).unwrap();
        assert!(fit_classifier(inf.view(), &[0, 1], None, &cfg, None).is_err());
        assert!(fit_classifier(x.view(), &[0, 1, 2], Some(&[1.0, 0.0, 1.0]), &cfg, None).is_err());
    }

    #[test]
    fn doubled_weights_same_model() {
        let (x, y) = quartile_data(300, 3);
        let cfg = GbdtConfig { rounds: 10, l2_lambda: 0.0, min_child_weight: 0.0, ..GbdtConfig::default() };
        let w1 = vec![1.0; 300];
        let w2 = vec![2.0; 300];
        let a = fit_classifier(x.view(), &y, Some(&w1), &cfg, None).unwrap();
        let b = fit_classifier(x.view(), &y, Some(&w2), &cfg, None).unwrap();
        for (ra, rb) in a.trees.iter().zip(&b.trees) {
            for (ta, tb) in ra.iter().zip(rb) {
                assert_eq!(ta.nodes.len(), tb.nodes.len());
                for (na, nb) in ta.nodes.iter().zip(&tb.nodes) {
                    match (na, nb) {
                        (TreeNode::Leaf { value: va }, TreeNode::Leaf { value: vb }) => assert_eq!(va, vb),
                        (
                            TreeNode::Split { feature: fa, threshold: sa, .. },
                            TreeNode::Split { feature: fb, threshold: sb, .. },
                        ) => assert_eq!((fa, sa), (fb, sb)),
                        _ => panic!("structure differs"),
                    }
                }
            }
        }
    }

    #[test]
    fn importance_tracks_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 400;
        let mut data = Vec::with_capacity(n * 3);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let s: f64 = rng.gen_range(0.0..1.0);
            data.extend([s, 5.0, rng.gen_range(0.0..1.0)]);
            y.push((s * 4.0).floor().min(3.0) as u8);
        }
        let x = Array2::from_shape_vec((n, 3), data).unwrap();
        let m = fit_classifier(x.view(), &y, None, &GbdtConfig { rounds: 20, ..GbdtConfig::default() }, None).unwrap();
        let imp = m.feature_importance();
        assert_eq!(imp.0[0].feature, "f0");
        assert_eq!(imp.gain_of("f1"), Some(0.0));
    }

    #[test]
    fn save_load_roundtrip() {
        let (x, y) = quartile_data(200, 4);
        let m = fit_classifier(x.view(), &y, None, &GbdtConfig { rounds: 5, ..GbdtConfig::default() }, None).unwrap();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let back = GbdtModel::load(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        for i in 0..200 {
            let r = x.row(i).to_vec();
            let (pa, pb) = (m.predict_proba(&r).unwrap(), back.predict_proba(&r).unwrap());
            assert!(pa.iter().zip(&pb).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
