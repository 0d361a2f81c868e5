use super::series::{Column, SanitizeRanges};
use crate::scoring::{self, ScoringMatrix, TagScore, VitalKind, Vitals};
use crate::{Error, Result};

/// Completed per-admission matrix with synthetic-data masks.
///
/// Before interpolation the rows sit at the recorded charttimes; after
/// [`interpolate_minutes`] they form a one-minute grid. `masks[c][r] == 1`
/// marks a synthetic (imputed or interpolated) cell; `row_mask[r] == 1`
/// marks a row that did not exist in the source data.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedFrame {
    pub subject_id: String,
    pub hadm_id: String,
    pub copd: bool,
    pub minutes: Vec<i64>,
    pub row_mask: Vec<u8>,
    /// Indexed by [`Column::index`], all of [`Column::ALL`].
    pub values: Vec<Vec<f64>>,
    pub masks: Vec<Vec<u8>>,
}

pub fn derive_map(sbp: f64, dbp: f64) -> f64 {
    (sbp + 2.0 * dbp) / 3.0
}

pub fn derive_bmi(weight_kg: f64, height_cm: f64) -> Result<f64> {
    if !(height_cm > 0.0) {
        return Err(Error::invalid(format!("height {height_cm} cm must be positive")));
    }
    let m = height_cm / 100.0;
    Ok(weight_kg / (m * m))
}

/// Rounds half away from zero to `decimals` places.
pub fn round_to(value: f64, decimals: i32) -> f64 {
    if decimals == 0 {
        return value.round();
    }
    let scale = 10f64.powi(decimals);
    (value * scale).round() / scale
}

impl MaskedFrame {
    /// Builds a frame from completed raw columns (no missing cells) and
    /// derives MAP and BMI. A derived cell is synthetic when any input is.
    pub fn with_derived(
        subject_id: String,
        hadm_id: String,
        copd: bool,
        minutes: Vec<i64>,
        mut values: Vec<Vec<f64>>,
        mut masks: Vec<Vec<u8>>,
    ) -> Result<MaskedFrame> {
        if values.len() != Column::RAW.len() || masks.len() != Column::RAW.len() {
            return Err(Error::invalid("frame needs one value and mask column per raw column"));
        }
        let n = minutes.len();
        if values.iter().any(|c| c.len() != n) || masks.iter().any(|m| m.len() != n) {
            return Err(Error::invalid("frame columns differ in length"));
        }
        let col = |c: Column| &values[c.index()];
        let mask = |c: Column| &masks[c.index()];
        let map: Vec<f64> = (0..n).map(|r| derive_map(col(Column::Sbp)[r], col(Column::Dbp)[r])).collect();
        let map_mask: Vec<u8> = (0..n).map(|r| mask(Column::Sbp)[r] | mask(Column::Dbp)[r]).collect();
        let bmi = (0..n)
            .map(|r| derive_bmi(col(Column::Weight)[r], col(Column::Height)[r]))
            .collect::<Result<Vec<f64>>>()?;
        let bmi_mask: Vec<u8> = (0..n).map(|r| mask(Column::Weight)[r] | mask(Column::Height)[r]).collect();
        values.push(map);
        values.push(bmi);
        masks.push(map_mask);
        masks.push(bmi_mask);
        Ok(MaskedFrame {
            subject_id,
            hadm_id,
            copd,
            row_mask: vec![0; n],
            minutes,
            values,
            masks,
        })
    }

    pub fn len(&self) -> usize {
        self.minutes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minutes.is_empty()
    }

    pub fn column(&self, c: Column) -> &[f64] {
        &self.values[c.index()]
    }

    pub fn mask(&self, c: Column) -> &[u8] {
        &self.masks[c.index()]
    }

    pub fn vitals(&self, row: usize) -> Vitals {
        let mut v = Vitals::default();
        for kind in VitalKind::ALL {
            v.set(kind, Some(self.values[Column::from_vital(kind).index()][row]));
        }
        v
    }

    pub fn age(&self) -> f64 {
        self.values[Column::Age.index()].first().copied().unwrap_or(f64::NAN)
    }

    /// Vital cells outside the plausibility ranges.
    pub fn out_of_range_count(&self, ranges: &SanitizeRanges) -> usize {
        VitalKind::ALL
            .iter()
            .map(|&k| {
                self.column(Column::from_vital(k))
                    .iter()
                    .filter(|&&v| !ranges.contains(k, v))
                    .count()
            })
            .sum()
    }

    /// Keeps rows `range`, used to cut frames into pieces.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> MaskedFrame {
        MaskedFrame {
            subject_id: self.subject_id.clone(),
            hadm_id: self.hadm_id.clone(),
            copd: self.copd,
            minutes: self.minutes[range.clone()].to_vec(),
            row_mask: self.row_mask[range.clone()].to_vec(),
            values: self.values.iter().map(|c| c[range.clone()].to_vec()).collect(),
            masks: self.masks.iter().map(|c| c[range.clone()].to_vec()).collect(),
        }
    }
}

/// Linearly interpolates every numeric column onto a one-minute grid
/// spanning the first to last charttime.
///
/// Rows at original charttimes keep their values and masks bit for bit.
/// New rows get `row_mask = 1` and every cell mask set to 1. Demographic
/// and categorical columns are carried forward unchanged rather than
/// interpolated.
pub fn interpolate_minutes(frame: &MaskedFrame) -> Result<MaskedFrame> {
    let n = frame.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "admission {} has {n} charttime(s); interpolation needs at least 2",
            frame.hadm_id
        )));
    }
    if frame.minutes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!(
            "admission {} charttimes are not strictly increasing",
            frame.hadm_id
        )));
    }
    let first = frame.minutes[0];
    let last = frame.minutes[n - 1];
    let len = (last - first + 1) as usize;
    let minutes: Vec<i64> = (first..=last).collect();

    let mut row_mask = vec![1u8; len];
    for (k, &m) in frame.minutes.iter().enumerate() {
        row_mask[(m - first) as usize] = frame.row_mask[k];
    }

    let mut values = Vec::with_capacity(Column::ALL.len());
    let mut masks = Vec::with_capacity(Column::ALL.len());
    for column in Column::ALL {
        let src = &frame.values[column.index()];
        let src_mask = &frame.masks[column.index()];
        let linear = !(column.is_demographic() || column.is_categorical());
        let mut out = Vec::with_capacity(len);
        let mut out_mask = Vec::with_capacity(len);
        for k in 0..n - 1 {
            let (t0, t1) = (frame.minutes[k], frame.minutes[k + 1]);
            let (v0, v1) = (src[k], src[k + 1]);
            out.push(v0);
            out_mask.push(src_mask[k]);
            let span = (t1 - t0) as f64;
            let (lo, hi) = if v0 <= v1 { (v0, v1) } else { (v1, v0) };
            for t in t0 + 1..t1 {
                let v = if linear {
                    let frac = (t - t0) as f64 / span;
                    (v0 + (v1 - v0) * frac).clamp(lo, hi)
                } else {
                    v0
                };
                out.push(v);
                out_mask.push(1);
            }
        }
        out.push(src[n - 1]);
        out_mask.push(src_mask[n - 1]);
        values.push(out);
        masks.push(out_mask);
    }
    Ok(MaskedFrame {
        subject_id: frame.subject_id.clone(),
        hadm_id: frame.hadm_id.clone(),
        copd: frame.copd,
        minutes,
        row_mask,
        values,
        masks,
    })
}

/// Decimal places kept per column after rounding; `None` leaves the column as is.
pub fn rounding_decimals(column: Column) -> Option<i32> {
    match column {
        Column::RespRate | Column::HeartRate | Column::Sbp | Column::Dbp | Column::Spo2 => Some(0),
        Column::Temperature | Column::Map | Column::Bmi | Column::Weight | Column::Height => Some(1),
        Column::Age | Column::Gender | Column::Race => None,
    }
}

/// Rounds physiological values: integer vitals to whole units;
/// temperature, MAP, BMI, weight and height to one decimal.
pub fn round_values(mut frame: MaskedFrame) -> MaskedFrame {
    for column in Column::ALL {
        if let Some(d) = rounding_decimals(column) {
            for v in &mut frame.values[column.index()] {
                *v = round_to(*v, d);
            }
        }
    }
    frame
}

/// A frame with TAG scores and hypoxemia severity labels per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredFrame {
    pub frame: MaskedFrame,
    pub tags: Vec<[TagScore; 6]>,
    pub labels: Vec<u8>,
}

impl ScoredFrame {
    /// TAG cells inherit the synthetic flag of the vital they score.
    pub fn tag_mask(&self, kind: VitalKind, row: usize) -> u8 {
        self.frame.mask(Column::from_vital(kind))[row]
    }
}

/// Scores every row; fails for pediatric COPD admissions and for vitals
/// outside the scoring domain.
pub fn score_frame(frame: MaskedFrame, matrix: &ScoringMatrix) -> Result<ScoredFrame> {
    let age = frame.age();
    let band = scoring::age_band(age)?;
    let group = scoring::classify_population(age, frame.copd)?;
    let mut tags = Vec::with_capacity(frame.len());
    let mut labels = Vec::with_capacity(frame.len());
    for r in 0..frame.len() {
        let vitals = frame.vitals(r);
        tags.push(scoring::tag_vector_with(matrix, &vitals, band)?);
        labels.push(matrix.severity_label(frame.column(Column::Spo2)[r], group)?);
    }
    Ok(ScoredFrame { frame, tags, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn frame(minutes: Vec<i64>, spo2: Vec<f64>) -> MaskedFrame {
        let n = minutes.len();
        let mut values = vec![vec![0.0; n]; Column::RAW.len()];
        let fill = |v: &mut Vec<Vec<f64>>, c: Column, x: f64| v[c.index()] = vec![x; n];
        fill(&mut values, Column::RespRate, 16.0);
        fill(&mut values, Column::HeartRate, 80.0);
        fill(&mut values, Column::Sbp, 120.0);
        fill(&mut values, Column::Dbp, 60.0);
        fill(&mut values, Column::Temperature, 37.0);
        fill(&mut values, Column::Age, 50.0);
        fill(&mut values, Column::Weight, 80.0);
        fill(&mut values, Column::Height, 200.0);
        values[Column::Spo2.index()] = spo2;
        let masks = vec![vec![0u8; n]; Column::RAW.len()];
        MaskedFrame::with_derived("s".into(), "h".into(), false, minutes, values, masks).unwrap()
    }

    #[test]
    fn derived_columns() {
        assert_eq!(derive_map(120.0, 60.0), 80.0);
        assert_eq!(derive_map(90.0, 90.0), 90.0);
        assert_eq!(derive_map(150.0, 75.0), 100.0);
        assert_eq!(derive_bmi(80.0, 200.0).unwrap(), 20.0);
        assert_eq!(round_to(derive_bmi(70.0, 175.0).unwrap(), 1), 22.9);
        assert!(derive_bmi(60.0, 0.0).is_err());
        let f = frame(vec![0, 1], vec![95.0, 96.0]);
        assert_eq!(f.column(Column::Map), &[80.0, 80.0]);
        assert_eq!(f.column(Column::Bmi), &[20.0, 20.0]);
    }

    #[test]
    fn rounding_examples() {
        // Half-away-from-zero on exactly representable halves.
        for (x, want) in [(92.5, 93.0), (93.5, 94.0), (-0.5, -1.0), (81.0, 81.0), (92.49, 92.0)] {
            assert_eq!(round_to(x, 0), want, "{x}");
        }
        assert_eq!(round_to(37.04, 1), 37.0);
        assert_eq!(round_to(37.25, 1), 37.3);
        let mut f = frame(vec![0, 1], vec![92.5, 96.0]);
        f.values[Column::Temperature.index()][0] = 37.04;
        let r = round_values(f);
        assert_eq!(r.column(Column::Spo2)[0], 93.0);
        assert_eq!(r.column(Column::Temperature)[0], 37.0);
    }

    #[test]
    fn interpolation_midpoint_and_knots() {
        let f = frame(vec![0, 2], vec![90.0, 94.0]);
        let g = interpolate_minutes(&f).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.column(Column::Spo2), &[90.0, 92.0, 94.0]);
        assert_eq!(g.mask(Column::Spo2), &[0, 1, 0]);
        assert_eq!(g.row_mask, vec![0, 1, 0]);
        assert_eq!(g.mask(Column::Age), &[0, 1, 0]);
        assert_eq!(g.column(Column::Age), &[50.0, 50.0, 50.0]);
    }

    #[test]
    fn interpolation_needs_two_rows() {
        let f = frame(vec![0], vec![90.0]);
        assert!(matches!(interpolate_minutes(&f), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn scoring_rows() {
        let f = frame(vec![0, 1, 2], vec![97.0, 93.0, 90.0]);
        let s = score_frame(f, ScoringMatrix::embedded()).unwrap();
        assert_eq!(s.labels, vec![0, 2, 3]);
        assert_eq!(s.tags[0][VitalKind::SpO2.index()], 0);
        assert_eq!(s.tags[2][VitalKind::SpO2.index()], 1);
    }

    #[test]
    fn pediatric_copd_is_rejected() {
        let mut f = frame(vec![0, 1], vec![97.0, 97.0]);
        f.values[Column::Age.index()] = vec![10.0, 10.0];
        f.copd = true;
        assert!(matches!(score_frame(f, ScoringMatrix::embedded()), Err(Error::UnsupportedPopulation)));
    }

    proptest! {
        #[test]
        fn interpolation_stays_in_hull(
            knots in proptest::collection::vec((1i64..20, 0.0f64..100.0), 2..12)
        ) {
            let mut t = 0;
            let mut minutes = Vec::new();
            let mut spo2 = Vec::new();
            for (step, v) in &knots {
                minutes.push(t);
                spo2.push(*v);
                t += step;
            }
            let f = frame(minutes.clone(), spo2.clone());
            let g = interpolate_minutes(&f).unwrap();
            prop_assert_eq!(g.len() as i64, minutes[minutes.len() - 1] - minutes[0] + 1);
            for k in 0..minutes.len() - 1 {
                let (lo, hi) = (spo2[k].min(spo2[k + 1]), spo2[k].max(spo2[k + 1]));
                for t in minutes[k]..=minutes[k + 1] {
                    let v = g.column(Column::Spo2)[t as usize];
                    prop_assert!(v >= lo && v <= hi);
                }
            }
            for (k, &m) in minutes.iter().enumerate() {
                prop_assert_eq!(g.column(Column::Spo2)[m as usize].to_bits(), spo2[k].to_bits());
                prop_assert_eq!(g.mask(Column::Spo2)[m as usize], 0);
            }
        }
    }
}
