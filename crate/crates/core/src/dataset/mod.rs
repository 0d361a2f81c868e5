//! Model-ready datasets: feature assembly, shift-lag labels, sliding
//! windows, patient-wise splits, standardization, class weights and the
//! padded sequence export.

pub mod schema;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use schema::{FeatureKind, FeatureSchema, N_FEATURES, ONE_HOT_RACES};

use crate::pipeline::record::format_charttime;
use crate::pipeline::ScoredFrame;
use crate::{Error, Result};

pub const N_CLASSES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "valid",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub fractions: [f64; 3],
    pub assignment: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn get(&self, subject_id: &str) -> Option<Split> {
        self.assignment.get(subject_id).copied()
    }

    pub fn count(&self, split: Split) -> usize {
        self.assignment.values().filter(|&&s| s == split).count()
    }

    pub fn subjects(&self, split: Split) -> BTreeSet<&str> {
        self.assignment
            .iter()
            .filter(|(_, &s)| s == split)
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

/// Assigns whole patients to train/validation/test.
///
/// Ids are deduplicated and sorted, then shuffled with the seed. The
/// validation and test counts are the rounded fractions of the patient
/// count; the remainder goes to train.
pub fn split_patients<S: AsRef<str>>(subject_ids: &[S], fractions: [f64; 3], seed: u64) -> Result<SplitAssignment> {
    if fractions.iter().any(|&f| !(0.0..=1.0).contains(&f)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split fractions {fractions:?} must be in [0,1] and sum to 1")));
    }
    let mut ids: Vec<&str> = subject_ids.iter().map(AsRef::as_ref).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() {
        return Err(Error::InsufficientData("no patients to split".into()));
    }
    let n = ids.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n_valid = ((n as f64 * fractions[1]).round() as usize).min(n);
    let n_test = ((n as f64 * fractions[2]).round() as usize).min(n - n_valid);
    let assignment = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let s = if i < n_valid {
                Split::Validation
            } else if i < n_valid + n_test {
                Split::Test
            } else {
                Split::Train
            };
            (id.to_string(), s)
        })
        .collect();
    Ok(SplitAssignment { seed, fractions, assignment })
}

/// Row `t` receives the label of row `t + lag`; the last `lag` rows are dropped.
pub fn shift_labels<T: Clone>(labels: &[T], lag: usize) -> Vec<T> {
    if labels.len() <= lag {
        return Vec::new();
    }
    labels[lag..].to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    /// First row of the window.
    pub start: usize,
    pub target: u8,
}

/// Windows of `width` rows every `stride` rows; each target is the
/// (already shifted) label at the window's last row.
pub fn sliding_windows(shifted: &[u8], width: usize, stride: usize) -> Vec<Window> {
    if width == 0 || stride == 0 || shifted.len() < width {
        return Vec::new();
    }
    (0..=shifted.len() - width)
        .step_by(stride)
        .map(|start| Window { start, target: shifted[start + width - 1] })
        .collect()
}

/// `w_c = N / (K · n_c)`.
pub fn class_weights(labels: &[u8]) -> Result<[f64; N_CLASSES]> {
    let mut counts = [0usize; N_CLASSES];
    for &l in labels {
        let slot = counts
            .get_mut(l as usize)
            .ok_or_else(|| Error::invalid(format!("label {l} outside 0..{N_CLASSES}")))?;
        *slot += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::DegenerateClass(c));
    }
    let n = labels.len() as f64;
    let mut w = [0.0; N_CLASSES];
    for (wc, &nc) in w.iter_mut().zip(&counts) {
        *wc = n / (N_CLASSES as f64 * nc as f64);
    }
    Ok(w)
}

/// Per-feature z-score parameters; features left alone have mean 0, std 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub features: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub standardized: Vec<bool>,
}

impl Standardizer {
    /// Statistics from `x` (training rows). Zero-variance features get std 1.
    pub fn fit(x: ArrayView2<f64>, schema: &FeatureSchema) -> Result<Standardizer> {
        if x.ncols() != schema.len() {
            return Err(Error::invalid("matrix width differs from schema"));
        }
        if x.nrows() == 0 {
            return Err(Error::InsufficientData("no training rows for standardization".into()));
        }
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(schema.len());
        let mut std = Vec::with_capacity(schema.len());
        let mut standardized = Vec::with_capacity(schema.len());
        for (col, feature) in x.columns().into_iter().zip(&schema.features) {
            if feature.is_standardized() {
                let m = col.sum() / n;
                let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
                let s = var.sqrt();
                mean.push(m);
                std.push(if s > 0.0 { s } else { 1.0 });
                standardized.push(true);
            } else {
                mean.push(0.0);
                std.push(1.0);
                standardized.push(false);
            }
        }
        Ok(Standardizer { features: schema.names(), mean, std, standardized })
    }

    pub fn apply(&self, x: &mut Array2<f64>) {
        for (j, mut col) in x.columns_mut().into_iter().enumerate() {
            if self.standardized[j] {
                let (m, s) = (self.mean[j], self.std[j]);
                col.mapv_inplace(|v| (v - m) / s);
            }
        }
    }
}

/// A fixed-length block of an admission; rows past the real data hold the
/// pad value and have `valid = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedSequence {
    pub data: Array2<f64>,
    pub valid: Vec<u8>,
}

impl PaddedSequence {
    pub fn real_rows(&self) -> usize {
        self.valid.iter().filter(|&&v| v == 1).count()
    }
}

/// Cuts `x` into `target_len`-row segments, padding the last one.
pub fn pad_and_segment(x: ArrayView2<f64>, target_len: usize, pad_value: f64) -> Vec<PaddedSequence> {
    if x.nrows() == 0 || target_len == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start < x.nrows() {
        let end = (start + target_len).min(x.nrows());
        let mut data = Array2::from_elem((target_len, x.ncols()), pad_value);
        data.slice_mut(ndarray::s![..end - start, ..]).assign(&x.slice(ndarray::s![start..end, ..]));
        let mut valid = vec![0u8; target_len];
        valid[..end - start].fill(1);
        out.push(PaddedSequence { data, valid });
        start = end;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub lag_minutes: usize,
    pub window_width: usize,
    pub window_stride: usize,
    pub split_fractions: [f64; 3],
    pub sequence_length: usize,
    pub pad_value: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            lag_minutes: 5,
            window_width: 5,
            window_stride: 1,
            split_fractions: [0.75, 0.125, 0.125],
            sequence_length: 1024,
            pad_value: 1000.0,
        }
    }
}

/// One admission after shift-lag: feature rows and their future labels.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissionFeatures {
    pub subject_id: String,
    pub hadm_id: String,
    pub minutes: Vec<i64>,
    pub x: Array2<f64>,
    pub y: Vec<u8>,
}

/// Features of a scored admission with labels shifted by `lag` rows.
pub fn admission_features(s: &ScoredFrame, schema: &FeatureSchema, lag: usize) -> Result<AdmissionFeatures> {
    let y = shift_labels(&s.labels, lag);
    let keep = y.len();
    let x = schema.assemble(s)?;
    Ok(AdmissionFeatures {
        subject_id: s.frame.subject_id.clone(),
        hadm_id: s.frame.hadm_id.clone(),
        minutes: s.frame.minutes[..keep].to_vec(),
        x: x.slice(ndarray::s![..keep, ..]).to_owned(),
        y,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitSummary {
    pub patients: usize,
    pub admissions: usize,
    pub rows: usize,
    pub label_counts: [usize; N_CLASSES],
    pub windows: usize,
}

/// Standardized, split dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub config: DatasetConfig,
    pub split: SplitAssignment,
    pub standardizer: Standardizer,
    pub class_weights: [f64; N_CLASSES],
    pub admissions: Vec<(Split, AdmissionFeatures)>,
}

impl Dataset {
    /// Shift-lags every admission, splits patients, standardizes with
    /// training statistics and derives class weights from training labels.
    pub fn build(frames: &[ScoredFrame], config: DatasetConfig, seed: u64) -> Result<Dataset> {
        let schema = FeatureSchema::default();
        let split = split_patients(
            &frames.iter().map(|f| f.frame.subject_id.as_str()).collect::<Vec<_>>(),
            config.split_fractions,
            seed,
        )?;
        let mut admissions = Vec::with_capacity(frames.len());
        for f in frames {
            let a = admission_features(f, &schema, config.lag_minutes)?;
            if a.y.is_empty() {
                continue;
            }
            let s = split.get(&a.subject_id).expect("every subject is assigned");
            admissions.push((s, a));
        }
        let train_views: Vec<ArrayView2<f64>> = admissions
            .iter()
            .filter(|(s, _)| *s == Split::Train)
            .map(|(_, a)| a.x.view())
            .collect();
        if train_views.is_empty() {
            return Err(Error::InsufficientData("training split is empty".into()));
        }
        let train_x = concatenate(Axis(0), &train_views).map_err(|e| Error::invalid(e.to_string()))?;
        let standardizer = Standardizer::fit(train_x.view(), &schema)?;
        for (_, a) in &mut admissions {
            standardizer.apply(&mut a.x);
        }
        let train_y: Vec<u8> = admissions
            .iter()
            .filter(|(s, _)| *s == Split::Train)
            .flat_map(|(_, a)| a.y.iter().copied())
            .collect();
        let class_weights = class_weights(&train_y)?;
        Ok(Dataset { schema, config, split, standardizer, class_weights, admissions })
    }

    pub fn admissions_in(&self, split: Split) -> impl Iterator<Item = &AdmissionFeatures> {
        self.admissions.iter().filter(move |(s, _)| *s == split).map(|(_, a)| a)
    }

    /// Stacked rows and labels of one split.
    pub fn matrix(&self, split: Split) -> (Array2<f64>, Vec<u8>) {
        let views: Vec<ArrayView2<f64>> = self.admissions_in(split).map(|a| a.x.view()).collect();
        let x = if views.is_empty() {
            Array2::zeros((0, self.schema.len()))
        } else {
            concatenate(Axis(0), &views).expect("equal widths")
        };
        let y = self.admissions_in(split).flat_map(|a| a.y.iter().copied()).collect();
        (x, y)
    }

    pub fn sample_weights(&self, y: &[u8]) -> Vec<f64> {
        y.iter().map(|&c| self.class_weights[c as usize]).collect()
    }

    pub fn summary(&self, split: Split) -> SplitSummary {
        let mut label_counts = [0; N_CLASSES];
        let mut rows = 0;
        let mut windows = 0;
        let mut admissions = 0;
        for a in self.admissions_in(split) {
            admissions += 1;
            rows += a.y.len();
            for &l in &a.y {
                label_counts[l as usize] += 1;
            }
            windows += sliding_windows(&a.y, self.config.window_width, self.config.window_stride).len();
        }
        SplitSummary { patients: self.split.count(split), admissions, rows, label_counts, windows }
    }

    /// Flat export: features then label, one row per minute.
    pub fn write_flat<W: Write>(&self, split: Split, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = self.schema.names();
        header.push("label".into());
        wtr.write_record(&header)?;
        for a in self.admissions_in(split) {
            for (r, row) in a.x.rows().into_iter().enumerate() {
                let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                rec.push(a.y[r].to_string());
                wtr.write_record(&rec)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Padded sequence export: `segment,valid` followed by the identifier,
    /// feature and label columns. Each segment is `sequence_length` rows;
    /// pad rows carry the pad value, an empty charttime and an empty label.
    pub fn write_sequences<W: Write>(&self, split: Split, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["segment".to_string(), "valid".to_string()];
        header.extend(self.schema.sequence_columns());
        wtr.write_record(&header)?;
        let mut segment = 0usize;
        for a in self.admissions_in(split) {
            let segs = pad_and_segment(a.x.view(), self.config.sequence_length, self.config.pad_value);
            for (k, seg) in segs.iter().enumerate() {
                for r in 0..self.config.sequence_length {
                    let src = k * self.config.sequence_length + r;
                    let valid = seg.valid[r] == 1;
                    let mut rec = vec![
                        segment.to_string(),
                        seg.valid[r].to_string(),
                        a.subject_id.clone(),
                        a.hadm_id.clone(),
                        if valid { format_charttime(a.minutes[src]) } else { String::new() },
                    ];
                    rec.extend(seg.data.row(r).iter().map(|v| v.to_string()));
                    rec.push(if valid { a.y[src].to_string() } else { String::new() });
                    wtr.write_record(&rec)?;
                }
                segment += 1;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Window index: one row per sliding window with its target.
    pub fn write_windows<W: Write>(&self, split: Split, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["subject_id", "hadm_id", "window_start", "window_end", "target"])?;
        for a in self.admissions_in(split) {
            for win in sliding_windows(&a.y, self.config.window_width, self.config.window_stride) {
                wtr.write_record([
                    a.subject_id.clone(),
                    a.hadm_id.clone(),
                    format_charttime(a.minutes[win.start]),
                    format_charttime(a.minutes[win.start + self.config.window_width - 1]),
                    win.target.to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Reads a flat export back into features and labels.
pub fn read_flat<R: std::io::Read>(r: R, schema: &FeatureSchema) -> Result<(Array2<f64>, Vec<u8>)> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut expected = schema.names();
    expected.push("label".into());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != expected {
        return Err(Error::invalid("line 1: flat dataset header does not match the feature schema"));
    }
    let mut data = Vec::new();
    let mut y = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        for k in 0..schema.len() {
            let v: f64 = rec[k]
                .parse()
                .map_err(|_| Error::invalid(format!("line {line}: bad value `{}`", &rec[k])))?;
            data.push(v);
        }
        let label: u8 = rec[schema.len()]
            .parse()
            .map_err(|_| Error::invalid(format!("line {line}: bad label `{}`", &rec[schema.len()])))?;
        if label as usize >= N_CLASSES {
            return Err(Error::invalid(format!("line {line}: label {label} out of range")));
        }
        y.push(label);
    }
    let x = Array2::from_shape_vec((y.len(), schema.len()), data).map_err(|e| Error::invalid(e.to_string()))?;
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shift_examples() {
        let y = [316.1, 317.3, 317.6, 317.5, 316.4, 316.9];
        assert_eq!(shift_labels(&y, 1), vec![317.3, 317.6, 317.5, 316.4, 316.9]);
        assert_eq!(shift_labels(&[2u8; 10], 5), vec![2u8; 5]);
        assert!(shift_labels(&[1u8; 5], 5).is_empty());
    }

    #[test]
    fn window_examples() {
        let y: Vec<u8> = (0..10).map(|i| (i % 4) as u8).collect();
        let w = sliding_windows(&y, 5, 1);
        assert_eq!(w.len(), 6);
        assert_eq!(sliding_windows(&y[..5], 5, 1).len(), 1);
        assert!(sliding_windows(&y[..4], 5, 1).is_empty());
        for win in &w {
            assert_eq!(win.target, y[win.start + 4]);
        }
        // Consecutive windows share four rows.
        let (a, b) = (w[0].start..w[0].start + 5, w[1].start..w[1].start + 5);
        assert_eq!(a.filter(|r| b.contains(r)).count(), 4);
    }

    #[test]
    fn padding_examples() {
        let x = Array2::from_shape_fn((2048, 2), |(r, c)| (r * 2 + c) as f64);
        let segs = pad_and_segment(x.view(), 1024, 1000.0);
        assert_eq!(segs.len(), 2);
        assert!(segs.iter().all(|s| s.real_rows() == 1024));

        let x = Array2::<f64>::zeros((1030, 3));
        let segs = pad_and_segment(x.view(), 1024, 1000.0);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[1].real_rows(), 6);
        assert_eq!(segs[1].data[[6, 0]], 1000.0);
        assert_eq!(segs[1].valid[1023], 0);

        let x = Array2::<f64>::zeros((952, 3));
        let segs = pad_and_segment(x.view(), 1024, 1000.0);
        assert_eq!(segs.len(), 1);
        assert_eq!(1024 - segs[0].real_rows(), 72);
        assert!(pad_and_segment(Array2::<f64>::zeros((0, 3)).view(), 1024, 1000.0).is_empty());
    }

    #[test]
    fn class_weight_examples() {
        let w = class_weights(&[0, 0, 0, 0, 1, 1, 2, 3]).unwrap();
        assert_eq!(w, [0.5, 1.0, 2.0, 2.0]);
        assert_eq!(class_weights(&[0, 1, 2, 3]).unwrap(), [1.0; 4]);
        assert!(matches!(class_weights(&[0, 1, 2]), Err(Error::DegenerateClass(3))));
    }

    #[test]
    fn split_examples() {
        let ids: Vec<String> = (0..8).map(|i| format!("p{i}")).collect();
        let s = split_patients(&ids, [0.75, 0.125, 0.125], 3).unwrap();
        assert_eq!((s.count(Split::Train), s.count(Split::Validation), s.count(Split::Test)), (6, 1, 1));
        assert_eq!(s, split_patients(&ids, [0.75, 0.125, 0.125], 3).unwrap());
        assert!(split_patients(&ids, [0.7, 0.2, 0.2], 3).is_err());
    }

    #[test]
    fn standardize_with_train_stats() {
        let schema = FeatureSchema::default();
        let mut train = Array2::<f64>::zeros((2, schema.len()));
        train[[0, 0]] = 8.0;
        train[[1, 0]] = 12.0;
        train[[0, 11]] = 1.0;
        let st = Standardizer::fit(train.view(), &schema).unwrap();
        assert_eq!((st.mean[0], st.std[0]), (10.0, 2.0));
        let mut valid = Array2::<f64>::zeros((1, schema.len()));
        valid[[0, 0]] = 14.0;
        valid[[0, 1]] = 3.0;
        valid[[0, 11]] = 1.0;
        st.apply(&mut valid);
        assert_eq!(valid[[0, 0]], 2.0);
        // Zero-variance column: std treated as 1.
        assert_eq!(valid[[0, 1]], 3.0);
        // One-hot column left alone.
        assert_eq!(valid[[0, 11]], 1.0);
    }

    proptest! {
        #[test]
        fn shift_lag_alignment(labels in proptest::collection::vec(0u8..4, 0..60), lag in 1usize..8) {
            let out = shift_labels(&labels, lag);
            prop_assert_eq!(out.len(), labels.len().saturating_sub(lag));
            for t in 0..out.len() {
                prop_assert_eq!(out[t], labels[t + lag]);
            }
        }

        #[test]
        fn padding_reconstructs(rows in 1usize..3000, len in 1usize..1100) {
            let x = Array2::from_shape_fn((rows, 2), |(r, c)| (r * 3 + c) as f64);
            let segs = pad_and_segment(x.view(), len, 1000.0);
            prop_assert_eq!(segs.len(), rows.div_ceil(len));
            let mut rebuilt = Vec::new();
            for s in &segs {
                let real = s.real_rows();
                prop_assert!(s.valid[..real].iter().all(|&v| v == 1));
                for r in 0..real {
                    rebuilt.extend(s.data.row(r).iter().copied());
                }
            }
            prop_assert_eq!(rebuilt, x.iter().copied().collect::<Vec<_>>());
        }

        #[test]
        fn class_weight_identity(labels in proptest::collection::vec(0u8..4, 4..200)) {
            prop_assume!((0..4).all(|c| labels.contains(&c)));
            let w = class_weights(&labels).unwrap();
            let total: f64 = (0..4).map(|c| w[c] * labels.iter().filter(|&&l| l == c as u8).count() as f64).sum();
            prop_assert!((total - labels.len() as f64).abs() < 1e-9);
        }
    }
}
