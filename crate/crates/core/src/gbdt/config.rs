use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MulticlassSoftmax,
    RegressionL2,
}

/// Boosting hyperparameters. `learning_rate = None` picks 0.3 for
/// multiclass and 0.1 for regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbdtConfig {
    pub objective: Objective,
    pub n_classes: usize,
    pub rounds: usize,
    /// Patience on the validation loss; 0 disables early stopping.
    pub early_stopping_rounds: usize,
    pub learning_rate: Option<f64>,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub l2_lambda: f64,
    pub max_bins: usize,
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig::multiclass(4)
    }
}

impl GbdtConfig {
    pub fn multiclass(n_classes: usize) -> Self {
        GbdtConfig {
            objective: Objective::MulticlassSoftmax,
            n_classes,
            rounds: 300,
            early_stopping_rounds: 5,
            learning_rate: None,
            max_depth: 6,
            min_child_weight: 1.0,
            l2_lambda: 1.0,
            max_bins: 255,
            subsample: 1.0,
            seed: 0,
        }
    }

    pub fn regression() -> Self {
        GbdtConfig {
            objective: Objective::RegressionL2,
            n_classes: 1,
            ..GbdtConfig::multiclass(4)
        }
    }

    pub fn eta(&self) -> f64 {
        self.learning_rate.unwrap_or(match self.objective {
            Objective::MulticlassSoftmax => 0.3,
            Objective::RegressionL2 => 0.1,
        })
    }

    /// Number of trees grown per round.
    pub fn outputs(&self) -> usize {
        match self.objective {
            Objective::MulticlassSoftmax => self.n_classes,
            Objective::RegressionL2 => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.rounds < 1 {
            return bad("rounds must be at least 1");
        }
        if !(2..=255).contains(&self.max_bins) {
            return bad("max_bins must be in 2..=255");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must be in (0, 1]");
        }
        if !(self.eta() > 0.0 && self.eta().is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2_lambda >= 0.0) || !(self.min_child_weight >= 0.0) {
            return bad("l2_lambda and min_child_weight must be non-negative");
        }
        if self.objective == Objective::MulticlassSoftmax && self.n_classes < 2 {
            return bad("multiclass objective needs n_classes >= 2");
        }
        Ok(())
    }
}
