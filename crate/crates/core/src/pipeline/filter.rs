use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::series::AdmissionSeries;
use super::stats::{DurationStats, LabelDistribution};

/// Inclusion thresholds applied by [`filter_admissions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    /// Rows with at least this fraction of missing feature cells are dropped.
    pub row_missing_fraction: f64,
    pub min_charttimes: usize,
    /// Admissions need at least this fraction of non-missing cells.
    pub min_non_missing_fraction: f64,
    pub max_gap_minutes: i64,
    pub min_rows: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            row_missing_fraction: 0.76,
            min_charttimes: 30,
            min_non_missing_fraction: 0.8645,
            max_gap_minutes: 60,
            min_rows: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCount {
    pub stage: String,
    pub admissions_in: usize,
    pub admissions_dropped: usize,
    pub rows_in: usize,
    pub rows_dropped: usize,
}

/// A problem confined to one admission or row; the rest of the run continues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowIssue {
    pub hadm_id: String,
    pub message: String,
}

/// Per-stage bookkeeping of the preprocessing run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub stages: Vec<StageCount>,
    pub sanitized_cells: usize,
    /// Missing fraction of the raw feature cells that survive filtering.
    pub missingness_fraction: f64,
    pub label_distribution_before: Option<LabelDistribution>,
    pub label_distribution_after: Option<LabelDistribution>,
    pub label_durations: BTreeMap<u8, DurationStats>,
    pub out_of_range_after_interpolation: usize,
    pub issues: Vec<RowIssue>,
}

impl PipelineReport {
    /// Combines reports of disjoint admission sets. Stage counts are summed
    /// stage by stage.
    pub fn merge(&mut self, other: &PipelineReport) {
        for s in &other.stages {
            match self.stages.iter_mut().find(|x| x.stage == s.stage) {
                Some(x) => {
                    x.admissions_in += s.admissions_in;
                    x.admissions_dropped += s.admissions_dropped;
                    x.rows_in += s.rows_in;
                    x.rows_dropped += s.rows_dropped;
                }
                None => self.stages.push(s.clone()),
            }
        }
        self.sanitized_cells += other.sanitized_cells;
        self.out_of_range_after_interpolation += other.out_of_range_after_interpolation;
        self.issues.extend(other.issues.iter().cloned());
    }
}

fn total_rows(set: &[AdmissionSeries]) -> usize {
    set.iter().map(AdmissionSeries::len).sum()
}

fn stage<F>(name: &str, set: Vec<AdmissionSeries>, report: &mut PipelineReport, f: F) -> Vec<AdmissionSeries>
where
    F: FnMut(AdmissionSeries) -> Option<AdmissionSeries>,
{
    let admissions_in = set.len();
    let rows_in = total_rows(&set);
    let out: Vec<AdmissionSeries> = set.into_iter().filter_map(f).collect();
    report.stages.push(StageCount {
        stage: name.to_string(),
        admissions_in,
        admissions_dropped: admissions_in - out.len(),
        rows_in,
        rows_dropped: rows_in - total_rows(&out),
    });
    out
}

/// Applies the inclusion filters in fixed order:
///
/// 1. drop rows whose missing fraction is at least `row_missing_fraction`;
/// 2. drop admissions with fewer than `min_charttimes` charttimes;
/// 3. keep admissions with at least `min_non_missing_fraction` observed cells;
/// 4. drop admissions with a gap longer than `max_gap_minutes`;
/// 5. drop admissions with fewer than `min_rows` rows.
pub fn filter_admissions(set: Vec<AdmissionSeries>, config: &FilterConfig) -> (Vec<AdmissionSeries>, PipelineReport) {
    let mut report = PipelineReport::default();
    let set = stage("drop_sparse_rows", set, &mut report, |mut s| {
        let keep: Vec<bool> = (0..s.len())
            .map(|r| s.row_missing_fraction(r) < config.row_missing_fraction)
            .collect();
        s.retain_rows(&keep);
        (!s.is_empty()).then_some(s)
    });
    let set = stage("min_charttimes", set, &mut report, |s| {
        (s.len() >= config.min_charttimes).then_some(s)
    });
    let set = stage("min_non_missing_fraction", set, &mut report, |s| {
        let observed = 1.0 - s.missing_cells() as f64 / s.total_cells().max(1) as f64;
        (observed >= config.min_non_missing_fraction).then_some(s)
    });
    let set = stage("max_gap", set, &mut report, |s| {
        (s.max_gap() <= config.max_gap_minutes).then_some(s)
    });
    let set = stage("min_rows", set, &mut report, |s| (s.len() >= config.min_rows).then_some(s));
    let cells: usize = set.iter().map(AdmissionSeries::total_cells).sum();
    let missing: usize = set.iter().map(AdmissionSeries::missing_cells).sum();
    report.missingness_fraction = if cells == 0 { 0.0 } else { missing as f64 / cells as f64 };
    (set, report)
}
