use ndarray::Array2;

use crate::pipeline::{Column, Race, ScoredFrame};
use crate::scoring::VitalKind;
use crate::{Error, Result};

/// Number of model features.
pub const N_FEATURES: usize = 41;

/// Race categories with their own one-hot column; `Undefined` is the
/// all-zero reference level.
pub const ONE_HOT_RACES: [Race; 7] = [
    Race::White,
    Race::BlackAfricanAmerican,
    Race::HispanicLatino,
    Race::Asian,
    Race::AmericanIndianAlaskaNative,
    Race::NativeHawaiianPacificIslander,
    Race::Multiracial,
];

const MASKED_COLUMNS: [Column; 10] = [
    Column::RespRate,
    Column::Spo2,
    Column::HeartRate,
    Column::Sbp,
    Column::Dbp,
    Column::Temperature,
    Column::Bmi,
    Column::Map,
    Column::Height,
    Column::Weight,
];

const CONTINUOUS: [Column; 11] = [
    Column::RespRate,
    Column::Spo2,
    Column::HeartRate,
    Column::Sbp,
    Column::Dbp,
    Column::Temperature,
    Column::Age,
    Column::Weight,
    Column::Height,
    Column::Bmi,
    Column::Map,
];

/// What a feature column holds; decides standardization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Continuous(Column),
    RaceOneHot(Race),
    Gender,
    Tag(VitalKind),
    Mask(Column),
    TagMask(VitalKind),
}

impl FeatureKind {
    pub fn name(self) -> String {
        match self {
            FeatureKind::Continuous(c) => c.name().to_string(),
            FeatureKind::RaceOneHot(r) => format!("race_{}", r.slug()),
            FeatureKind::Gender => "gender".to_string(),
            FeatureKind::Tag(k) => k.tag_column().to_string(),
            FeatureKind::Mask(c) => format!("mask_{}", c.name()),
            FeatureKind::TagMask(k) => format!("mask_{}", k.tag_column()),
        }
    }

    pub fn is_standardized(self) -> bool {
        matches!(self, FeatureKind::Continuous(_))
    }
}

/// Ordered model features: the six vitals, age, weight, height, BMI, MAP,
/// race one-hots, gender, the six TAG scores, then the mask columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    pub features: Vec<FeatureKind>,
}

impl Default for FeatureSchema {
    fn default() -> Self {
        let mut features: Vec<FeatureKind> = CONTINUOUS.iter().map(|&c| FeatureKind::Continuous(c)).collect();
        features.extend(ONE_HOT_RACES.iter().map(|&r| FeatureKind::RaceOneHot(r)));
        features.push(FeatureKind::Gender);
        features.extend(VitalKind::ALL.iter().map(|&k| FeatureKind::Tag(k)));
        features.extend(MASKED_COLUMNS.iter().map(|&c| FeatureKind::Mask(c)));
        features.extend(VitalKind::ALL.iter().map(|&k| FeatureKind::TagMask(k)));
        FeatureSchema { features }
    }
}

impl FeatureSchema {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name()).collect()
    }

    /// Identifier columns plus features plus label, as in the sequence export.
    pub fn sequence_columns(&self) -> Vec<String> {
        let mut cols = vec!["subject_id".to_string(), "hadm_id".to_string(), "charttime".to_string()];
        cols.extend(self.names());
        cols.push("label".to_string());
        cols
    }

    /// One feature row per frame row.
    pub fn assemble(&self, s: &ScoredFrame) -> Result<Array2<f64>> {
        let f = &s.frame;
        let n = f.len();
        if s.tags.len() != n || s.labels.len() != n || f.values.len() != Column::ALL.len() {
            return Err(Error::invalid(format!("admission {} frame is inconsistent", f.hadm_id)));
        }
        let race_col = f.column(Column::Race);
        let mut x = Array2::zeros((n, self.len()));
        for (j, feature) in self.features.iter().enumerate() {
            for r in 0..n {
                x[[r, j]] = match *feature {
                    FeatureKind::Continuous(c) => f.column(c)[r],
                    FeatureKind::RaceOneHot(race) => {
                        let actual = Race::from_code(race_col[r])
                            .ok_or_else(|| Error::invalid(format!("bad race code {}", race_col[r])))?;
                        (actual == race) as u8 as f64
                    }
                    FeatureKind::Gender => f.column(Column::Gender)[r],
                    FeatureKind::Tag(k) => s.tags[r][k.index()] as f64,
                    FeatureKind::Mask(c) => f.mask(c)[r] as f64,
                    FeatureKind::TagMask(k) => s.tag_mask(k, r) as f64,
                };
            }
        }
        Ok(x)
    }
}
