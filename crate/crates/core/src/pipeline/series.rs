use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::record::RawRecord;
use crate::scoring::VitalKind;
use crate::{Error, Result};

/// Numeric columns carried through the pipeline. The first
/// [`Column::RAW`] come from the input file; MAP and BMI are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    RespRate,
    Spo2,
    HeartRate,
    Sbp,
    Dbp,
    Temperature,
    Age,
    Weight,
    Height,
    Gender,
    Race,
    Map,
    Bmi,
}

impl Column {
    pub const RAW: [Column; 11] = [
        Column::RespRate,
        Column::Spo2,
        Column::HeartRate,
        Column::Sbp,
        Column::Dbp,
        Column::Temperature,
        Column::Age,
        Column::Weight,
        Column::Height,
        Column::Gender,
        Column::Race,
    ];

    pub const ALL: [Column; 13] = [
        Column::RespRate,
        Column::Spo2,
        Column::HeartRate,
        Column::Sbp,
        Column::Dbp,
        Column::Temperature,
        Column::Age,
        Column::Weight,
        Column::Height,
        Column::Gender,
        Column::Race,
        Column::Map,
        Column::Bmi,
    ];

    pub const DEMOGRAPHICS: [Column; 5] = [Column::Age, Column::Weight, Column::Height, Column::Gender, Column::Race];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Column::RespRate => "resp_rate",
            Column::Spo2 => "spo2",
            Column::HeartRate => "heart_rate",
            Column::Sbp => "sbp",
            Column::Dbp => "dbp",
            Column::Temperature => "temperature",
            Column::Age => "age",
            Column::Weight => "weight",
            Column::Height => "height",
            Column::Gender => "gender",
            Column::Race => "race",
            Column::Map => "map",
            Column::Bmi => "bmi",
        }
    }

    pub fn vital(self) -> Option<VitalKind> {
        match self {
            Column::RespRate => Some(VitalKind::RespiratoryRate),
            Column::Spo2 => Some(VitalKind::SpO2),
            Column::HeartRate => Some(VitalKind::HeartRate),
            Column::Sbp => Some(VitalKind::SystolicBp),
            Column::Dbp => Some(VitalKind::DiastolicBp),
            Column::Temperature => Some(VitalKind::Temperature),
            _ => None,
        }
    }

    pub fn from_vital(kind: VitalKind) -> Column {
        match kind {
            VitalKind::RespiratoryRate => Column::RespRate,
            VitalKind::SpO2 => Column::Spo2,
            VitalKind::HeartRate => Column::HeartRate,
            VitalKind::SystolicBp => Column::Sbp,
            VitalKind::DiastolicBp => Column::Dbp,
            VitalKind::Temperature => Column::Temperature,
        }
    }

    pub fn is_categorical(self) -> bool {
        matches!(self, Column::Gender | Column::Race)
    }

    pub fn is_demographic(self) -> bool {
        Column::DEMOGRAPHICS.contains(&self)
    }
}

/// Per-vital plausibility bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SanitizeRanges {
    pub bounds: [(f64, f64); 6],
}

impl Default for SanitizeRanges {
    fn default() -> Self {
        let mut bounds = [(0.0, 0.0); 6];
        for kind in VitalKind::ALL {
            bounds[kind.index()] = kind.domain();
        }
        SanitizeRanges { bounds }
    }
}

impl SanitizeRanges {
    pub fn get(&self, kind: VitalKind) -> (f64, f64) {
        self.bounds[kind.index()]
    }

    pub fn contains(&self, kind: VitalKind, value: f64) -> bool {
        let (lo, hi) = self.get(kind);
        value >= lo && value <= hi
    }

    pub fn clamp(&self, kind: VitalKind, value: f64) -> f64 {
        let (lo, hi) = self.get(kind);
        value.clamp(lo, hi)
    }
}

/// One admission at its recorded charttimes, before imputation.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissionSeries {
    pub subject_id: String,
    pub hadm_id: String,
    pub copd: Option<bool>,
    /// Strictly increasing epoch minutes.
    pub minutes: Vec<i64>,
    /// Column store indexed by [`Column::index`] over [`Column::RAW`].
    pub columns: Vec<Vec<Option<f64>>>,
}

impl AdmissionSeries {
    pub fn len(&self) -> usize {
        self.minutes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minutes.is_empty()
    }

    pub fn value(&self, column: Column, row: usize) -> Option<f64> {
        self.columns[column.index()][row]
    }

    pub fn missing_cells(&self) -> usize {
        self.columns.iter().flatten().filter(|v| v.is_none()).count()
    }

    pub fn total_cells(&self) -> usize {
        self.columns.len() * self.len()
    }

    /// Missing cells in one row, as a fraction of the raw feature columns.
    pub fn row_missing_fraction(&self, row: usize) -> f64 {
        let missing = self.columns.iter().filter(|c| c[row].is_none()).count();
        missing as f64 / self.columns.len() as f64
    }

    pub fn retain_rows(&mut self, keep: &[bool]) {
        let mut it = keep.iter();
        self.minutes.retain(|_| *it.next().expect("mask length"));
        for col in &mut self.columns {
            let mut it = keep.iter();
            col.retain(|_| *it.next().expect("mask length"));
        }
    }

    /// Largest gap between successive charttimes, in minutes.
    pub fn max_gap(&self) -> i64 {
        self.minutes.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    /// Replaces implausible vitals with missing values; returns how many
    /// cells were cleared.
    pub fn sanitize_in_place(&mut self, ranges: &SanitizeRanges) -> usize {
        let mut cleared = 0;
        for kind in VitalKind::ALL {
            for cell in &mut self.columns[Column::from_vital(kind).index()] {
                if let Some(v) = *cell {
                    if !ranges.contains(kind, v) {
                        *cell = None;
                        cleared += 1;
                    }
                }
            }
        }
        cleared
    }
}

pub fn sanitize(mut series: AdmissionSeries, ranges: &SanitizeRanges) -> AdmissionSeries {
    series.sanitize_in_place(ranges);
    series
}

fn raw_value(record: &RawRecord, column: Column) -> Option<f64> {
    match column {
        Column::Age => record.age,
        Column::Weight => record.weight,
        Column::Height => record.height,
        Column::Gender => record.gender,
        Column::Race => record.race.map(|r| r.code()),
        Column::Map | Column::Bmi => None,
        c => record.vitals.get(c.vital().expect("vital column")),
    }
}

/// Collapses records of one admission to one row per charttime.
///
/// Non-null values recorded at the same charttime are combined; when two
/// records disagree the one later in input order wins. Demographics are
/// admission attributes: the last recorded value of each is applied to
/// every row.
pub fn merge_same_charttime(records: &[RawRecord]) -> Result<AdmissionSeries> {
    let first = records
        .first()
        .ok_or_else(|| Error::invalid("cannot merge an empty record list"))?;
    if let Some(other) = records.iter().find(|r| r.hadm_id != first.hadm_id) {
        return Err(Error::invalid(format!(
            "records mix admissions `{}` and `{}`",
            first.hadm_id, other.hadm_id
        )));
    }
    if let Some(other) = records.iter().find(|r| r.subject_id != first.subject_id) {
        return Err(Error::invalid(format!(
            "admission `{}` has records for subjects `{}` and `{}`",
            first.hadm_id, first.subject_id, other.subject_id
        )));
    }

    let mut rows: BTreeMap<i64, [Option<f64>; 11]> = BTreeMap::new();
    let mut demographics: [Option<f64>; 11] = [None; 11];
    let mut copd = None;
    for record in records {
        let row = rows.entry(record.charttime).or_insert([None; 11]);
        for column in Column::RAW {
            if let Some(v) = raw_value(record, column) {
                if column.is_demographic() {
                    demographics[column.index()] = Some(v);
                } else {
                    row[column.index()] = Some(v);
                }
            }
        }
        if record.copd.is_some() {
            copd = record.copd;
        }
    }

    let minutes: Vec<i64> = rows.keys().copied().collect();
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(minutes.len()); Column::RAW.len()];
    for row in rows.values() {
        for column in Column::RAW {
            let v = if column.is_demographic() {
                demographics[column.index()]
            } else {
                row[column.index()]
            };
            columns[column.index()].push(v);
        }
    }
    Ok(AdmissionSeries {
        subject_id: first.subject_id.clone(),
        hadm_id: first.hadm_id.clone(),
        copd,
        minutes,
        columns,
    })
}

/// Groups records by admission (in order of first appearance) and merges each.
pub fn build_admissions(records: &[RawRecord]) -> Result<Vec<AdmissionSeries>> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<RawRecord>> = BTreeMap::new();
    for r in records {
        let entry = groups.entry(r.hadm_id.as_str()).or_default();
        if entry.is_empty() {
            order.push(r.hadm_id.as_str());
        }
        entry.push(r.clone());
    }
    order.iter().map(|id| merge_same_charttime(&groups[id])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::Vitals;

    fn record(t: i64, hr: Option<f64>, spo2: Option<f64>) -> RawRecord {
        let mut vitals = Vitals::default();
        vitals.set(VitalKind::HeartRate, hr);
        vitals.set(VitalKind::SpO2, spo2);
        RawRecord {
            subject_id: "s1".into(),
            hadm_id: "h1".into(),
            charttime: t,
            vitals,
            age: Some(60.0),
            gender: Some(1.0),
            height: None,
            weight: None,
            race: None,
            copd: None,
        }
    }

    #[test]
    fn merges_disjoint_non_nulls() {
        let s = merge_same_charttime(&[record(5, Some(80.0), None), record(5, None, Some(95.0))]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.value(Column::HeartRate, 0), Some(80.0));
        assert_eq!(s.value(Column::Spo2, 0), Some(95.0));
    }

    #[test]
    fn later_value_wins() {
        let s = merge_same_charttime(&[record(5, Some(80.0), None), record(5, Some(82.0), None)]).unwrap();
        assert_eq!(s.value(Column::HeartRate, 0), Some(82.0));
    }

    #[test]
    fn single_row_unchanged() {
        let s = merge_same_charttime(&[record(7, Some(70.0), Some(99.0))]).unwrap();
        assert_eq!(s.minutes, vec![7]);
        assert_eq!(s.value(Column::HeartRate, 0), Some(70.0));
        assert_eq!(s.value(Column::Age, 0), Some(60.0));
    }

    #[test]
    fn rejects_mixed_admissions() {
        let mut other = record(1, None, None);
        other.hadm_id = "h2".into();
        assert!(merge_same_charttime(&[record(1, None, None), other]).is_err());
    }

    #[test]
    fn sanitize_examples() {
        let mut s = merge_same_charttime(&[record(1, Some(120.0), Some(105.0))]).unwrap();
        s.columns[Column::Temperature.index()][0] = Some(61.0);
        let cleaned = sanitize(s, &SanitizeRanges::default());
        assert_eq!(cleaned.value(Column::Spo2, 0), None);
        assert_eq!(cleaned.value(Column::Temperature, 0), None);
        assert_eq!(cleaned.value(Column::HeartRate, 0), Some(120.0));
        let again = sanitize(cleaned.clone(), &SanitizeRanges::default());
        assert_eq!(again, cleaned);
    }

    #[test]
    fn rows_sorted_by_charttime() {
        let s = merge_same_charttime(&[record(9, Some(1.0), None), record(3, Some(2.0), None)]).unwrap();
        assert_eq!(s.minutes, vec![3, 9]);
        assert_eq!(s.value(Column::HeartRate, 0), Some(2.0));
    }
}
