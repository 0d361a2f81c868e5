//! Cleaning, filtering, minute-grid interpolation and scoring of admissions.
//!
//! The stages run in this order: merge records per charttime, sanitize
//! implausible vitals, apply the inclusion filters, impute (see
//! [`crate::impute`]), derive MAP and BMI, interpolate to one-minute
//! resolution, round, and score every row.

pub mod filter;
pub mod frame;
pub mod io;
pub mod record;
pub mod series;
pub mod spline;
pub mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use filter::{filter_admissions, FilterConfig, PipelineReport, RowIssue, StageCount};
pub use frame::{
    derive_bmi, derive_map, interpolate_minutes, round_to, round_values, score_frame, MaskedFrame, ScoredFrame,
};
pub use record::{RawRecord, Race};
pub use series::{build_admissions, merge_same_charttime, sanitize, AdmissionSeries, Column, SanitizeRanges};
pub use stats::{label_duration_stats, DurationStats, LabelDistribution};

use crate::scoring::{self, ScoringMatrix, VitalKind, Vitals};
use crate::Result;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub filter: FilterConfig,
    pub ranges: SanitizeRanges,
}

/// Merges, sanitizes and filters raw records.
pub fn preprocess(records: &[RawRecord], config: &PreprocessConfig) -> Result<(Vec<AdmissionSeries>, PipelineReport)> {
    let mut admissions = build_admissions(records)?;
    let sanitized: usize = admissions.iter_mut().map(|a| a.sanitize_in_place(&config.ranges)).sum();
    let (kept, mut report) = filter_admissions(admissions, &config.filter);
    report.sanitized_cells = sanitized;
    Ok((kept, report))
}

/// Flattens admissions back into one record per charttime.
pub fn series_to_records(set: &[AdmissionSeries]) -> Vec<RawRecord> {
    let mut out = Vec::new();
    for s in set {
        for r in 0..s.len() {
            let mut vitals = Vitals::default();
            for kind in VitalKind::ALL {
                vitals.set(kind, s.value(Column::from_vital(kind), r));
            }
            out.push(RawRecord {
                subject_id: s.subject_id.clone(),
                hadm_id: s.hadm_id.clone(),
                charttime: s.minutes[r],
                vitals,
                age: s.value(Column::Age, r),
                gender: s.value(Column::Gender, r),
                height: s.value(Column::Height, r),
                weight: s.value(Column::Weight, r),
                race: s.value(Column::Race, r).and_then(Race::from_code),
                copd: s.copd,
            });
        }
    }
    out
}

/// Severity labels at the recorded charttimes, before interpolation.
fn charttime_labels(frame: &MaskedFrame, matrix: &ScoringMatrix) -> Result<Vec<u8>> {
    let group = scoring::classify_population(frame.age(), frame.copd)?;
    frame
        .column(Column::Spo2)
        .iter()
        .map(|&v| matrix.severity_label(round_to(v, 0), group))
        .collect()
}

fn finalize_one(frame: &MaskedFrame, matrix: &ScoringMatrix, ranges: &SanitizeRanges) -> Result<(Vec<u8>, usize, ScoredFrame)> {
    let before = charttime_labels(frame, matrix)?;
    let grid = interpolate_minutes(frame)?;
    let out_of_range = grid.out_of_range_count(ranges);
    let scored = score_frame(round_values(grid), matrix)?;
    Ok((before, out_of_range, scored))
}

/// Interpolates, rounds and scores completed frames. Admissions that fail
/// (too short, unsupported population, values outside the scoring domain)
/// are reported as issues and left out.
pub fn finalize(
    frames: &[MaskedFrame],
    matrix: &ScoringMatrix,
    ranges: &SanitizeRanges,
) -> (Vec<ScoredFrame>, PipelineReport) {
    let results: Vec<Result<(Vec<u8>, usize, ScoredFrame)>> =
        frames.par_iter().map(|f| finalize_one(f, matrix, ranges)).collect();
    let mut report = PipelineReport::default();
    let mut before = [0u64; 4];
    let mut after = [0u64; 4];
    let mut runs = Vec::new();
    let mut scored = Vec::new();
    let rows_in: usize = frames.iter().map(MaskedFrame::len).sum();
    let mut rows_dropped = 0;
    for (frame, result) in frames.iter().zip(results) {
        match result {
            Ok((b, oor, s)) => {
                for l in b {
                    before[l as usize] += 1;
                }
                for &l in &s.labels {
                    after[l as usize] += 1;
                }
                runs.extend(stats::label_runs(&s.labels));
                report.out_of_range_after_interpolation += oor;
                scored.push(s);
            }
            Err(e) => {
                rows_dropped += frame.len();
                report.issues.push(RowIssue {
                    hadm_id: frame.hadm_id.clone(),
                    message: e.to_string(),
                });
            }
        }
    }
    report.stages.push(StageCount {
        stage: "interpolate_and_score".into(),
        admissions_in: frames.len(),
        admissions_dropped: frames.len() - scored.len(),
        rows_in,
        rows_dropped,
    });
    report.label_distribution_before = Some(LabelDistribution::from_counts(before));
    report.label_distribution_after = Some(LabelDistribution::from_counts(after));
    report.label_durations = stats::duration_stats_from_runs(runs);
    (scored, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records(hadm: &str, n: i64, step: i64) -> Vec<RawRecord> {
        (0..n)
            .map(|i| RawRecord {
                subject_id: format!("s{hadm}"),
                hadm_id: hadm.into(),
                charttime: i * step,
                vitals: Vitals::new(16.0, 96.0 - (i % 3) as f64, 80.0, 120.0, 70.0, 37.0),
                age: Some(60.0),
                gender: Some(0.0),
                height: Some(170.0),
                weight: Some(70.0),
                race: Some(Race::Asian),
                copd: Some(false),
            })
            .collect()
    }

    #[test]
    fn preprocess_then_finalize() {
        let mut input = records("a", 40, 5);
        input.extend(records("b", 10, 5));
        let (kept, report) = preprocess(&input, &PreprocessConfig::default()).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(report.stages[1].admissions_dropped, 1);

        let back = series_to_records(&kept);
        assert_eq!(back, records("a", 40, 5));

        let frames: Vec<MaskedFrame> = kept
            .iter()
            .map(|s| {
                let values = s.columns.iter().map(|c| c.iter().map(|v| v.unwrap()).collect()).collect();
                let masks = vec![vec![0u8; s.len()]; Column::RAW.len()];
                MaskedFrame::with_derived(s.subject_id.clone(), s.hadm_id.clone(), false, s.minutes.clone(), values, masks)
                    .unwrap()
            })
            .collect();
        let (scored, report) = finalize(&frames, ScoringMatrix::embedded(), &SanitizeRanges::default());
        assert_eq!(scored.len(), 1);
        assert_eq!(scored[0].frame.len(), 39 * 5 + 1);
        assert_eq!(report.label_distribution_before.unwrap().counts.iter().sum::<u64>(), 40);
        assert_eq!(report.out_of_range_after_interpolation, 0);
    }
}
