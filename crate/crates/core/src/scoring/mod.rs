//! NEWS2+ rule engine: population classification, SpO₂ severity labels,
//! per-vital TAG scores and alarm-persistence runs.

mod matrix;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use matrix::{Anomaly, AnomalyKind, MatrixDump, ScoringMatrix, TableDump, MATRIX_VERSION};

use crate::{Error, Result};

/// Per-vital deviation score, 0 (normal) to 3 (severe).
pub type TagScore = u8;
/// Hypoxemia severity, 0 (normal) to 3 (severe).
pub type SeverityLabel = u8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgeBand {
    #[serde(rename = "infant_0_11m")]
    Infant0to11m,
    #[serde(rename = "toddler_12_23m")]
    Toddler12to23m,
    #[serde(rename = "child_2_4y")]
    Child2to4y,
    #[serde(rename = "child_5_11y")]
    Child5to11y,
    #[serde(rename = "adolescent_12_17y")]
    Adolescent12to17y,
    #[serde(rename = "adult_18plus")]
    Adult18plus,
}

impl AgeBand {
    pub const ALL: [AgeBand; 6] = [
        AgeBand::Infant0to11m,
        AgeBand::Toddler12to23m,
        AgeBand::Child2to4y,
        AgeBand::Child5to11y,
        AgeBand::Adolescent12to17y,
        AgeBand::Adult18plus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgeBand::Infant0to11m => "infant_0_11m",
            AgeBand::Toddler12to23m => "toddler_12_23m",
            AgeBand::Child2to4y => "child_2_4y",
            AgeBand::Child5to11y => "child_5_11y",
            AgeBand::Adolescent12to17y => "adolescent_12_17y",
            AgeBand::Adult18plus => "adult_18plus",
        }
    }
}

impl FromStr for AgeBand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgeBand::ALL
            .into_iter()
            .find(|b| b.as_str() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown age band `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopulationGroup {
    AdultNoCopd,
    AdultCopd,
    PediatricNoCopd,
}

impl PopulationGroup {
    pub const ALL: [PopulationGroup; 3] = [
        PopulationGroup::AdultNoCopd,
        PopulationGroup::AdultCopd,
        PopulationGroup::PediatricNoCopd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PopulationGroup::AdultNoCopd => "adult_no_copd",
            PopulationGroup::AdultCopd => "adult_copd",
            PopulationGroup::PediatricNoCopd => "pediatric_no_copd",
        }
    }
}

impl FromStr for PopulationGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PopulationGroup::ALL
            .into_iter()
            .find(|g| g.as_str() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown population group `{s}`")))
    }
}

/// The six scored vitals, in TAG vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VitalKind {
    RespiratoryRate,
    SpO2,
    HeartRate,
    SystolicBp,
    DiastolicBp,
    Temperature,
}

impl VitalKind {
    pub const ALL: [VitalKind; 6] = [
        VitalKind::RespiratoryRate,
        VitalKind::SpO2,
        VitalKind::HeartRate,
        VitalKind::SystolicBp,
        VitalKind::DiastolicBp,
        VitalKind::Temperature,
    ];

    /// Column name used in CSV files and matrix data.
    pub fn as_str(self) -> &'static str {
        match self {
            VitalKind::RespiratoryRate => "resp_rate",
            VitalKind::SpO2 => "spo2",
            VitalKind::HeartRate => "heart_rate",
            VitalKind::SystolicBp => "sbp",
            VitalKind::DiastolicBp => "dbp",
            VitalKind::Temperature => "temperature",
        }
    }

    /// Name of the derived TAG feature column.
    pub fn tag_column(self) -> &'static str {
        match self {
            VitalKind::RespiratoryRate => "TAG_Respiratory_Rate",
            VitalKind::SpO2 => "TAG_SpO2",
            VitalKind::HeartRate => "TAG_Heart_Rate",
            VitalKind::SystolicBp => "TAG_Systolic_BP",
            VitalKind::DiastolicBp => "TAG_Diastolic_BP",
            VitalKind::Temperature => "TAG_Temperature",
        }
    }

    /// Plausibility bounds; values outside are treated as recording errors.
    pub fn domain(self) -> (f64, f64) {
        match self {
            VitalKind::SpO2 => (0.0, 100.0),
            VitalKind::Temperature => (0.0, 60.0),
            _ => (0.0, 300.0),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for VitalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VitalKind::ALL
            .into_iter()
            .find(|v| v.as_str() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown vital `{s}`")))
    }
}

impl fmt::Display for VitalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Low,
    Normal,
    High,
}

/// One normalized band: values in `[lo, hi)` (or `[lo, hi]` when
/// `hi_closed`) score `level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeverityBin {
    pub side: Side,
    pub level: u8,
    pub lo: f64,
    pub hi: f64,
    pub hi_closed: bool,
}

/// One reading of each of the six vitals, indexed by [`VitalKind`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Vitals(pub [Option<f64>; 6]);

impl Vitals {
    pub fn new(rr: f64, spo2: f64, hr: f64, sbp: f64, dbp: f64, temperature: f64) -> Self {
        Vitals([Some(rr), Some(spo2), Some(hr), Some(sbp), Some(dbp), Some(temperature)])
    }

    pub fn get(&self, kind: VitalKind) -> Option<f64> {
        self.0[kind.index()]
    }

    pub fn set(&mut self, kind: VitalKind, value: Option<f64>) {
        self.0[kind.index()] = value;
    }
}

/// A maximal stretch of consecutive minutes with the same nonzero TAG score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AlarmRun {
    pub vital: VitalKind,
    pub start_minute: i64,
    pub duration_minutes: u32,
    pub score: TagScore,
}

pub fn age_band(age_years: f64) -> Result<AgeBand> {
    if !age_years.is_finite() || age_years < 0.0 {
        return Err(Error::invalid(format!("age {age_years} must be finite and non-negative")));
    }
    Ok(match age_years {
        a if a < 1.0 => AgeBand::Infant0to11m,
        a if a < 2.0 => AgeBand::Toddler12to23m,
        a if a < 5.0 => AgeBand::Child2to4y,
        a if a < 12.0 => AgeBand::Child5to11y,
        a if a < 18.0 => AgeBand::Adolescent12to17y,
        _ => AgeBand::Adult18plus,
    })
}

pub fn classify_population(age_years: f64, copd: bool) -> Result<PopulationGroup> {
    let adult = age_band(age_years)? == AgeBand::Adult18plus;
    match (adult, copd) {
        (true, true) => Ok(PopulationGroup::AdultCopd),
        (true, false) => Ok(PopulationGroup::AdultNoCopd),
        (false, false) => Ok(PopulationGroup::PediatricNoCopd),
        (false, true) => Err(Error::UnsupportedPopulation),
    }
}

/// Hypoxemia severity from SpO₂ using the embedded tables.
pub fn severity_label(spo2_pct: f64, group: PopulationGroup) -> Result<SeverityLabel> {
    ScoringMatrix::embedded().severity_label(spo2_pct, group)
}

/// TAG score of one vital using the embedded tables.
pub fn tag_score(kind: VitalKind, value: f64, band: AgeBand) -> Result<TagScore> {
    ScoringMatrix::embedded().tag_score(kind, value, band)
}

/// TAG scores of all six vitals, in [`VitalKind::ALL`] order.
pub fn tag_vector(vitals: &Vitals, band: AgeBand) -> Result<[TagScore; 6]> {
    tag_vector_with(ScoringMatrix::embedded(), vitals, band)
}

pub fn tag_vector_with(matrix: &ScoringMatrix, vitals: &Vitals, band: AgeBand) -> Result<[TagScore; 6]> {
    let mut out = [0u8; 6];
    for kind in VitalKind::ALL {
        let value = vitals
            .get(kind)
            .ok_or_else(|| Error::MissingInput(format!("{kind} is missing")))?;
        out[kind.index()] = matrix.tag_score(kind, value, band)?;
    }
    Ok(out)
}

/// Run-length encodes nonzero scores of a minute-regular series; element
/// `i` is minute `i`.
pub fn alarm_runs(series: &[TagScore], vital: VitalKind) -> Vec<AlarmRun> {
    let minutes: Vec<i64> = (0..series.len() as i64).collect();
    alarm_runs_at(&minutes, series, vital)
}

/// Like [`alarm_runs`] for series sampled at explicit minutes: a run also
/// breaks wherever consecutive samples are not one minute apart.
pub fn alarm_runs_at(minutes: &[i64], series: &[TagScore], vital: VitalKind) -> Vec<AlarmRun> {
    assert_eq!(minutes.len(), series.len(), "minutes and scores must align");
    let mut runs: Vec<AlarmRun> = Vec::new();
    let mut prev_minute: Option<i64> = None;
    for (&minute, &score) in minutes.iter().zip(series) {
        let extends = matches!(
            (runs.last(), prev_minute),
            (Some(run), Some(p)) if p + 1 == minute
                && run.score == score
                && run.start_minute + run.duration_minutes as i64 == minute
        );
        if score > 0 {
            if extends {
                runs.last_mut().expect("checked").duration_minutes += 1;
            } else {
                runs.push(AlarmRun { vital, start_minute: minute, duration_minutes: 1, score });
            }
        }
        prev_minute = Some(minute);
    }
    runs
}
