//! Chained-equations imputation with gradient-boosted regressors.
//!
//! Missing cells are first filled with the column median (mode for
//! categorical columns). Each sweep then visits the numeric columns that
//! had missing values, in ascending order of missingness, fits a regressor
//! on the rows where that column was observed using every other column as
//! features, and overwrites only the originally-missing cells.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::gbdt::{fit_regressor, GbdtConfig};
use crate::pipeline::{AdmissionSeries, Column, MaskedFrame, RowIssue, SanitizeRanges};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImputeConfig {
    pub n_iterations: usize,
    /// Stop once the largest change of an imputed value between sweeps,
    /// in units of the column's observed standard deviation, is below this.
    pub tolerance: f64,
    /// The objective is forced to squared-error regression.
    pub regressor: GbdtConfig,
}

impl Default for ImputeConfig {
    fn default() -> Self {
        ImputeConfig {
            n_iterations: 5,
            tolerance: 1e-3,
            regressor: GbdtConfig { rounds: 100, early_stopping_rounds: 0, ..GbdtConfig::regression() },
        }
    }
}

impl ImputeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iterations < 1 {
            return Err(Error::Config("n_iterations must be at least 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::Config("tolerance must be non-negative".into()));
        }
        self.regressor.validate()
    }
}

/// Column-major table with missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputeTable {
    pub names: Vec<String>,
    pub columns: Vec<Vec<Option<f64>>>,
    /// Categorical columns are filled with their mode and not regressed.
    pub categorical: Vec<bool>,
    /// Imputed values are clamped into these bounds.
    pub bounds: Vec<Option<(f64, f64)>>,
}

impl ImputeTable {
    /// A table of numeric columns without bounds.
    pub fn numeric(names: Vec<String>, columns: Vec<Vec<Option<f64>>>) -> Self {
        let p = columns.len();
        ImputeTable { names, columns, categorical: vec![false; p], bounds: vec![None; p] }
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    fn check(&self) -> Result<()> {
        let p = self.columns.len();
        if self.names.len() != p || self.categorical.len() != p || self.bounds.len() != p {
            return Err(Error::invalid("impute table metadata does not match its columns"));
        }
        if self.columns.iter().any(|c| c.len() != self.n_rows()) {
            return Err(Error::invalid("impute table columns differ in length"));
        }
        if self.columns.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("impute table holds non-finite values"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAudit {
    pub sweep: usize,
    /// Mean absolute change of the imputed cells per column.
    pub mean_abs_change: BTreeMap<String, f64>,
    /// Largest change in units of the column's observed standard deviation.
    pub max_scaled_change: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputeAudit {
    pub missing_before: usize,
    pub missing_after: usize,
    pub missing_by_column: BTreeMap<String, usize>,
    pub column_order: Vec<String>,
    pub sweeps: Vec<SweepAudit>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Imputed {
    pub values: Vec<Vec<f64>>,
    /// 1 exactly where the input cell was missing.
    pub masks: Vec<Vec<u8>>,
    pub audit: ImputeAudit,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Most frequent value; ties go to the smallest.
fn mode(values: &[f64]) -> f64 {
    let mut counts: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for &v in values {
        // Order-preserving key for finite floats.
        let bits = v.to_bits();
        let key = if v.is_sign_negative() { !bits } else { bits | (1 << 63) };
        counts.entry(key).or_insert((v, 0)).1 += 1;
    }
    let mut best = (f64::NAN, 0);
    for (v, c) in counts.values() {
        if *c > best.1 {
            best = (*v, *c);
        }
    }
    best.0
}

fn clamp(v: f64, bounds: Option<(f64, f64)>) -> f64 {
    match bounds {
        Some((lo, hi)) => v.clamp(lo, hi),
        None => v,
    }
}

/// Fills every missing cell with the column median (mode for categorical
/// columns). Observed cells are copied unchanged.
pub fn initial_fill(table: &ImputeTable) -> Result<Vec<Vec<f64>>> {
    table.check()?;
    table
        .columns
        .iter()
        .enumerate()
        .map(|(j, col)| {
            let mut observed: Vec<f64> = col.iter().flatten().copied().collect();
            if observed.is_empty() && !col.is_empty() {
                return Err(Error::UnimputableColumn(table.names[j].clone()));
            }
            if observed.len() == col.len() {
                return Ok(observed);
            }
            let fill = if table.categorical[j] { mode(&observed) } else { median(&mut observed) };
            let fill = clamp(fill, table.bounds[j]);
            Ok(col.iter().map(|v| v.unwrap_or(fill)).collect())
        })
        .collect()
}

fn std_dev(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Runs the chained-equations sweeps.
pub fn mice(table: &ImputeTable, config: &ImputeConfig) -> Result<Imputed> {
    config.validate()?;
    let mut values = initial_fill(table)?;
    let n = table.n_rows();
    let p = table.columns.len();
    let masks: Vec<Vec<u8>> = table
        .columns
        .iter()
        .map(|c| c.iter().map(|v| v.is_none() as u8).collect())
        .collect();
    let missing_count: Vec<usize> = masks.iter().map(|m| m.iter().map(|&b| b as usize).sum()).collect();
    let mut audit = ImputeAudit {
        missing_before: missing_count.iter().sum(),
        missing_by_column: table.names.iter().cloned().zip(missing_count.iter().copied()).collect(),
        ..ImputeAudit::default()
    };

    let mut order: Vec<usize> = (0..p)
        .filter(|&j| missing_count[j] > 0 && !table.categorical[j])
        .collect();
    order.sort_by_key(|&j| (missing_count[j], j));
    audit.column_order = order.iter().map(|&j| table.names[j].clone()).collect();

    if !order.is_empty() && p >= 2 {
        let scales: Vec<f64> = (0..p)
            .map(|j| {
                let s = std_dev(table.columns[j].iter().flatten().copied());
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        let regressor = GbdtConfig { early_stopping_rounds: 0, ..config.regressor.clone() };
        for sweep in 1..=config.n_iterations {
            let mut changes = BTreeMap::new();
            let mut max_scaled: f64 = 0.0;
            for &j in &order {
                let observed: Vec<usize> = (0..n).filter(|&r| masks[j][r] == 0).collect();
                let missing: Vec<usize> = (0..n).filter(|&r| masks[j][r] == 1).collect();
                let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
                let design = |rows: &[usize]| {
                    Array2::from_shape_fn((rows.len(), others.len()), |(i, k)| values[others[k]][rows[i]])
                };
                let x_obs = design(&observed);
                let y_obs: Vec<f64> = observed.iter().map(|&r| values[j][r]).collect();
                let cfg = GbdtConfig { seed: regressor.seed.wrapping_add((sweep * p + j) as u64), ..regressor.clone() };
                let model = fit_regressor(x_obs.view(), &y_obs, &cfg)?;
                let preds = model.predict_values_batch(design(&missing).view())?;
                let mut total = 0.0;
                for (&r, pred) in missing.iter().zip(preds) {
                    let v = clamp(pred, table.bounds[j]);
                    if !v.is_finite() {
                        return Err(Error::Numerical(format!("non-finite imputation in `{}`", table.names[j])));
                    }
                    let d = (v - values[j][r]).abs();
                    total += d;
                    max_scaled = max_scaled.max(d / scales[j]);
                    values[j][r] = v;
                }
                changes.insert(table.names[j].clone(), total / missing.len() as f64);
            }
            audit.sweeps.push(SweepAudit { sweep, mean_abs_change: changes, max_scaled_change: max_scaled });
            if max_scaled < config.tolerance {
                audit.converged = true;
                break;
            }
        }
    } else {
        audit.converged = true;
    }
    audit.missing_after = 0;
    Ok(Imputed { values, masks, audit })
}

fn raw_bounds(column: Column, ranges: &SanitizeRanges) -> Option<(f64, f64)> {
    column.vital().map(|k| ranges.get(k))
}

/// Imputes all admissions jointly, then builds per-admission frames with
/// MAP and BMI. Demographic cells that were imputed are harmonized to one
/// value per admission (mean, or mode for categorical columns).
/// Admissions whose derived values fail are returned as issues.
pub fn impute_admissions(
    set: &[AdmissionSeries],
    config: &ImputeConfig,
    ranges: &SanitizeRanges,
) -> Result<(Vec<MaskedFrame>, ImputeAudit, Vec<RowIssue>)> {
    if set.is_empty() {
        return Err(Error::InsufficientData("no admissions to impute".into()));
    }
    let table = ImputeTable {
        names: Column::RAW.iter().map(|c| c.name().to_string()).collect(),
        columns: Column::RAW
            .iter()
            .map(|c| set.iter().flat_map(|s| s.columns[c.index()].iter().copied()).collect())
            .collect(),
        categorical: Column::RAW.iter().map(|c| c.is_categorical()).collect(),
        bounds: Column::RAW.iter().map(|&c| raw_bounds(c, ranges)).collect(),
    };
    let imputed = mice(&table, config)?;

    let mut frames = Vec::with_capacity(set.len());
    let mut issues = Vec::new();
    let mut offset = 0;
    for s in set {
        let rows = offset..offset + s.len();
        offset += s.len();
        let mut values: Vec<Vec<f64>> = imputed.values.iter().map(|c| c[rows.clone()].to_vec()).collect();
        let masks: Vec<Vec<u8>> = imputed.masks.iter().map(|c| c[rows.clone()].to_vec()).collect();
        for column in Column::DEMOGRAPHICS {
            let j = column.index();
            if masks[j].iter().all(|&m| m == 0) {
                continue;
            }
            let col = &values[j];
            let v = if column.is_categorical() {
                mode(col)
            } else {
                col.iter().sum::<f64>() / col.len() as f64
            };
            for (cell, &m) in values[j].iter_mut().zip(&masks[j]) {
                if m == 1 {
                    *cell = v;
                }
            }
        }
        match MaskedFrame::with_derived(
            s.subject_id.clone(),
            s.hadm_id.clone(),
            s.copd.unwrap_or(false),
            s.minutes.clone(),
            values,
            masks,
        ) {
            Ok(f) => frames.push(f),
            Err(e) => issues.push(RowIssue { hadm_id: s.hadm_id.clone(), message: e.to_string() }),
        }
    }
    Ok((frames, imputed.audit, issues))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(cols: Vec<Vec<Option<f64>>>) -> ImputeTable {
        let names = (0..cols.len()).map(|i| format!("c{i}")).collect();
        ImputeTable::numeric(names, cols)
    }

    #[test]
    fn initial_fill_examples() {
        let t = table(vec![vec![Some(1.0), None, Some(3.0)]]);
        assert_eq!(initial_fill(&t).unwrap(), vec![vec![1.0, 2.0, 3.0]]);
        let t = table(vec![vec![Some(1.0), Some(4.0)]]);
        assert_eq!(initial_fill(&t).unwrap(), vec![vec![1.0, 4.0]]);
        let t = table(vec![vec![None, None]]);
        assert!(matches!(initial_fill(&t), Err(Error::UnimputableColumn(_))));
    }

    #[test]
    fn categorical_uses_mode() {
        let mut t = table(vec![vec![Some(1.0), Some(0.0), Some(1.0), None], vec![Some(2.0); 4]]);
        t.categorical[0] = true;
        let out = mice(&t, &ImputeConfig::default()).unwrap();
        assert_eq!(out.values[0][3], 1.0);
        assert_eq!(out.masks[0], vec![0, 0, 0, 1]);
    }

    #[test]
    fn complete_table_unchanged() {
        let t = table(vec![vec![Some(1.0), Some(2.0)], vec![Some(3.0), Some(5.0)]]);
        let out = mice(&t, &ImputeConfig::default()).unwrap();
        assert_eq!(out.values, vec![vec![1.0, 2.0], vec![3.0, 5.0]]);
        assert!(out.masks.iter().flatten().all(|&m| m == 0));
    }

    #[test]
    fn constant_column_imputes_constant() {
        let t = table(vec![
            vec![Some(5.0), Some(5.0), None, Some(5.0)],
            vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)],
        ]);
        let out = mice(&t, &ImputeConfig::default()).unwrap();
        assert_eq!(out.values[0][2], 5.0);
    }

    #[test]
    fn correlated_column_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..50.0)).collect();
        let mut y: Vec<Option<f64>> = x.iter().map(|&v| Some(2.0 * v)).collect();
        y[17] = None;
        let t = table(vec![x.iter().map(|&v| Some(v)).collect(), y]);
        let out = mice(&t, &ImputeConfig::default()).unwrap();
        assert!((out.values[1][17] - 2.0 * x[17]).abs() <= 0.5, "{} vs {}", out.values[1][17], 2.0 * x[17]);
        for r in 0..200 {
            if r != 17 {
                assert_eq!(out.values[1][r].to_bits(), (2.0 * x[r]).to_bits());
            }
        }
    }

    #[test]
    fn imputations_are_clamped() {
        let mut t = table(vec![
            vec![Some(10.0), Some(20.0), Some(30.0), None],
            vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)],
        ]);
        t.bounds[0] = Some((0.0, 15.0));
        let out = mice(&t, &ImputeConfig::default()).unwrap();
        assert!(out.values[0][3] <= 15.0);
    }
}
