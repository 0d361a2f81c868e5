//! Raw per-measurement input records and their CSV schema.

use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::scoring::{VitalKind, Vitals};
use crate::{Error, Result};

/// Header of the raw input CSV.
pub const INPUT_HEADER: [&str; 15] = [
    "subject_id",
    "hadm_id",
    "charttime",
    "heart_rate",
    "resp_rate",
    "spo2",
    "sbp",
    "dbp",
    "temperature",
    "age",
    "gender",
    "height",
    "weight",
    "race",
    "copd",
];

/// Race / ethnicity categories. `Undefined` covers unknown or unmapped values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Race {
    White,
    BlackAfricanAmerican,
    HispanicLatino,
    Asian,
    AmericanIndianAlaskaNative,
    NativeHawaiianPacificIslander,
    Multiracial,
    Undefined,
}

impl Race {
    pub const ALL: [Race; 8] = [
        Race::White,
        Race::BlackAfricanAmerican,
        Race::HispanicLatino,
        Race::Asian,
        Race::AmericanIndianAlaskaNative,
        Race::NativeHawaiianPacificIslander,
        Race::Multiracial,
        Race::Undefined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Race::White => "White",
            Race::BlackAfricanAmerican => "Black / African American",
            Race::HispanicLatino => "Hispanic / Latino",
            Race::Asian => "Asian",
            Race::AmericanIndianAlaskaNative => "American Indian / Alaska Native",
            Race::NativeHawaiianPacificIslander => "Native Hawaiian / Other Pacific Islander",
            Race::Multiracial => "Multiracial",
            Race::Undefined => "Undefined",
        }
    }

    /// Suffix used for one-hot feature columns.
    pub fn slug(self) -> &'static str {
        match self {
            Race::White => "white",
            Race::BlackAfricanAmerican => "black_african_american",
            Race::HispanicLatino => "hispanic_latino",
            Race::Asian => "asian",
            Race::AmericanIndianAlaskaNative => "american_indian_alaska_native",
            Race::NativeHawaiianPacificIslander => "native_hawaiian_pacific_islander",
            Race::Multiracial => "multiracial",
            Race::Undefined => "undefined",
        }
    }

    pub fn code(self) -> f64 {
        self as usize as f64
    }

    pub fn from_code(code: f64) -> Option<Race> {
        if code.fract() != 0.0 || code < 0.0 {
            return None;
        }
        Race::ALL.get(code as usize).copied()
    }

    /// Lenient mapping of free-text race/ethnicity values; anything
    /// unrecognised is `Undefined`.
    pub fn parse_lenient(s: &str) -> Race {
        let s = s.trim().to_ascii_lowercase();
        if s.contains("hawaiian") || s.contains("pacific") {
            Race::NativeHawaiianPacificIslander
        } else if s.contains("american indian") || s.contains("alaska") {
            Race::AmericanIndianAlaskaNative
        } else if s.contains("multi") {
            Race::Multiracial
        } else if s.contains("hispanic") || s.contains("latino") {
            Race::HispanicLatino
        } else if s.contains("black") || s.contains("african") {
            Race::BlackAfricanAmerican
        } else if s.contains("asian") {
            Race::Asian
        } else if s.contains("white") {
            Race::White
        } else {
            Race::Undefined
        }
    }
}

/// One row of the input file. Vital and demographic fields may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub subject_id: String,
    pub hadm_id: String,
    /// Minutes since the Unix epoch.
    pub charttime: i64,
    pub vitals: Vitals,
    pub age: Option<f64>,
    /// 1 = male, 0 = female.
    pub gender: Option<f64>,
    pub height: Option<f64>,
    pub weight: Option<f64>,
    pub race: Option<Race>,
    pub copd: Option<bool>,
}

/// Parses an ISO 8601 timestamp with minute resolution into epoch minutes.
/// Seconds, if present, must be zero.
pub fn parse_charttime(s: &str) -> Result<i64> {
    let s = s.trim();
    const FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];
    let parsed = FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .ok_or_else(|| Error::invalid(format!("unparseable charttime `{s}`")))?;
    if parsed.second() != 0 || parsed.nanosecond() != 0 {
        return Err(Error::invalid(format!("charttime `{s}` has a sub-minute component")));
    }
    Ok(parsed.and_utc().timestamp().div_euclid(60))
}

pub fn format_charttime(minutes: i64) -> String {
    chrono::DateTime::from_timestamp(minutes * 60, 0)
        .map(|t| t.format("%Y-%m-%d %H:%M").to_string())
        .unwrap_or_default()
}

fn parse_opt_f64(field: &str, name: &str) -> Result<Option<f64>> {
    let field = field.trim();
    if field.is_empty() || field.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    let v = f64::from_str(field).map_err(|_| Error::invalid(format!("{name}: `{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::invalid(format!("{name}: `{field}` is not finite")));
    }
    Ok(Some(v))
}

fn parse_gender(field: &str) -> Result<Option<f64>> {
    match field.trim().to_ascii_lowercase().as_str() {
        "" => Ok(None),
        "m" | "male" | "1" => Ok(Some(1.0)),
        "f" | "female" | "0" => Ok(Some(0.0)),
        other => Err(Error::invalid(format!("gender: `{other}` is not M/F"))),
    }
}

fn parse_copd(field: &str) -> Result<Option<bool>> {
    match field.trim().to_ascii_lowercase().as_str() {
        "" => Ok(None),
        "1" | "true" | "yes" | "y" => Ok(Some(true)),
        "0" | "false" | "no" | "n" => Ok(Some(false)),
        other => Err(Error::invalid(format!("copd: `{other}` is not a boolean"))),
    }
}

impl RawRecord {
    fn from_fields(fields: &csv::StringRecord) -> Result<RawRecord> {
        let get = |i: usize| fields.get(i).unwrap_or("");
        let subject_id = get(0).trim().to_string();
        let hadm_id = get(1).trim().to_string();
        if subject_id.is_empty() || hadm_id.is_empty() {
            return Err(Error::invalid("subject_id and hadm_id must be non-empty"));
        }
        let mut vitals = Vitals::default();
        let vital_cols = [
            (3, VitalKind::HeartRate),
            (4, VitalKind::RespiratoryRate),
            (5, VitalKind::SpO2),
            (6, VitalKind::SystolicBp),
            (7, VitalKind::DiastolicBp),
            (8, VitalKind::Temperature),
        ];
        for (i, kind) in vital_cols {
            vitals.set(kind, parse_opt_f64(get(i), kind.as_str())?);
        }
        let race = match get(13).trim() {
            "" => None,
            s => Some(Race::parse_lenient(s)),
        };
        Ok(RawRecord {
            subject_id,
            hadm_id,
            charttime: parse_charttime(get(2))?,
            vitals,
            age: parse_opt_f64(get(9), "age")?,
            gender: parse_gender(get(10))?,
            height: parse_opt_f64(get(11), "height")?,
            weight: parse_opt_f64(get(12), "weight")?,
            race,
            copd: parse_copd(get(14))?,
        })
    }

    pub fn to_fields(&self) -> Vec<String> {
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.subject_id.clone(),
            self.hadm_id.clone(),
            format_charttime(self.charttime),
            f(self.vitals.get(VitalKind::HeartRate)),
            f(self.vitals.get(VitalKind::RespiratoryRate)),
            f(self.vitals.get(VitalKind::SpO2)),
            f(self.vitals.get(VitalKind::SystolicBp)),
            f(self.vitals.get(VitalKind::DiastolicBp)),
            f(self.vitals.get(VitalKind::Temperature)),
            f(self.age),
            match self.gender {
                Some(g) if g >= 0.5 => "M".to_string(),
                Some(_) => "F".to_string(),
                None => String::new(),
            },
            f(self.height),
            f(self.weight),
            self.race.map(|r| r.as_str().to_string()).unwrap_or_default(),
            self.copd.map(|c| if c { "1" } else { "0" }.to_string()).unwrap_or_default(),
        ]
    }
}

/// A schema problem tied to a line of the input file (1-based, header = line 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineError {
    pub line: u64,
    pub message: String,
}

/// Reads raw records, failing on the first malformed line.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<RawRecord>> {
    let (records, errors) = read_records_lenient(reader)?;
    match errors.first() {
        Some(e) => Err(Error::invalid(format!("line {}: {}", e.line, e.message))),
        None => Ok(records),
    }
}

/// Reads raw records, collecting per-line schema errors instead of stopping.
/// Returns `Err` only when the header itself is wrong.
pub fn read_records_lenient<R: Read>(reader: R) -> Result<(Vec<RawRecord>, Vec<LineError>)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != INPUT_HEADER {
        return Err(Error::invalid(format!(
            "line 1: header must be `{}`",
            INPUT_HEADER.join(",")
        )));
    }
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let outcome = row.map_err(Error::from).and_then(|row| {
            if row.len() != INPUT_HEADER.len() {
                return Err(Error::invalid(format!(
                    "expected {} fields, found {}",
                    INPUT_HEADER.len(),
                    row.len()
                )));
            }
            RawRecord::from_fields(&row)
        });
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => errors.push(LineError { line, message: e.to_string() }),
        }
    }
    Ok((records, errors))
}

pub fn write_records<W: Write>(writer: W, records: &[RawRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(INPUT_HEADER)?;
    for r in records {
        wtr.write_record(r.to_fields())?;
    }
    wtr.flush()?;
    Ok(())
}
