//! Multiclass evaluation: confusion matrix, per-class and averaged rates,
//! Matthews correlation and one-vs-rest AUROC/AUPRC.
//!
//! Rates whose denominator is zero are reported as 0 and listed in
//! [`ClassificationReport::zero_division`].

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `counts[true][predicted]`.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn true_positives(&self, c: usize) -> u64 {
        self.counts[c][c]
    }

    /// Row sum: samples whose true class is `c`.
    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    /// Column sum: samples predicted as `c`.
    pub fn predicted(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8], n_classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t as usize >= n_classes || p as usize >= n_classes {
            return Err(Error::invalid(format!("label outside 0..{n_classes}")));
        }
        counts[t as usize][p as usize] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Multiclass Matthews correlation (Gorodkin's R_K); 0 when undefined.
pub fn mcc(c: &ConfusionMatrix) -> f64 {
    let k = c.n_classes();
    let s = c.total() as f64;
    let correct: f64 = (0..k).map(|i| c.true_positives(i) as f64).sum();
    let pt: f64 = (0..k).map(|i| c.predicted(i) as f64 * c.support(i) as f64).sum();
    let pp: f64 = (0..k).map(|i| (c.predicted(i) as f64).powi(2)).sum();
    let tt: f64 = (0..k).map(|i| (c.support(i) as f64).powi(2)).sum();
    let den = ((s * s - pp) * (s * s - tt)).sqrt();
    if den == 0.0 {
        0.0
    } else {
        (correct * s - pt) / den
    }
}

fn binarize(y_true: &[u8], class: u8) -> (usize, usize) {
    let pos = y_true.iter().filter(|&&y| y == class).count();
    (pos, y_true.len() - pos)
}

/// One-vs-rest AUROC: probability a random positive scores above a random
/// negative, ties counting one half.
pub fn auroc_ovr(y_true: &[u8], scores: &[f64], class: u8) -> Result<f64> {
    if y_true.len() != scores.len() {
        return Err(Error::invalid("labels and scores differ in length"));
    }
    let (n_pos, n_neg) = binarize(y_true, class);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!("AUROC for class {class} needs positives and negatives")));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Midranks (1-based) over tie groups.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if y_true[k] == class {
                rank_sum_pos += mid;
            }
        }
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// One-vs-rest average precision: `Σ (R_k − R_{k−1}) P_k` over descending
/// distinct score thresholds.
pub fn auprc_ovr(y_true: &[u8], scores: &[f64], class: u8) -> Result<f64> {
    if y_true.len() != scores.len() {
        return Err(Error::invalid("labels and scores differ in length"));
    }
    let (n_pos, _) = binarize(y_true, class);
    if n_pos == 0 {
        return Err(Error::UndefinedMetric(format!("AUPRC for class {class} needs positives")));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            if y_true[idx[j]] == class {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(area)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: u8,
    pub support: u64,
    pub precision: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_sensitivity: f64,
    pub macro_specificity: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_sensitivity: f64,
    pub weighted_f1: f64,
    pub mcc: f64,
    /// Mean over classes where the metric is defined; absent without scores.
    pub macro_auroc: Option<f64>,
    pub macro_auprc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub n_samples: u64,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    pub aggregates: Aggregates,
    /// Rates set to 0 because their denominator was 0, e.g. `precision[2]`.
    pub zero_division: Vec<String>,
    /// Score-based metrics that were undefined for a class.
    pub undefined: Vec<String>,
}

fn ratio(num: u64, den: u64, name: &str, class: usize, flags: &mut Vec<String>) -> f64 {
    if den == 0 {
        flags.push(format!("{name}[{class}]"));
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for x in v {
        s += x;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

/// Builds the full report. `scores[i][c]` is the predicted probability of
/// class `c` for sample `i`; without scores AUROC/AUPRC are absent.
pub fn report(c: &ConfusionMatrix, scores: Option<&[Vec<f64>]>, y_true: &[u8]) -> Result<ClassificationReport> {
    let k = c.n_classes();
    let total = c.total();
    if let Some(s) = scores {
        if s.len() != y_true.len() || s.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("score matrix shape does not match labels and classes"));
        }
        if y_true.len() as u64 != total {
            return Err(Error::invalid("confusion matrix total differs from label count"));
        }
    }
    let mut zero_division = Vec::new();
    let mut undefined = Vec::new();
    let mut per_class = Vec::with_capacity(k);
    for class in 0..k {
        let tp = c.true_positives(class);
        let fp = c.predicted(class) - tp;
        let fn_ = c.support(class) - tp;
        let tn = total - tp - fp - fn_;
        let precision = ratio(tp, tp + fp, "precision", class, &mut zero_division);
        let sensitivity = ratio(tp, tp + fn_, "sensitivity", class, &mut zero_division);
        let specificity = ratio(tn, tn + fp, "specificity", class, &mut zero_division);
        let f1 = if precision + sensitivity == 0.0 {
            zero_division.push(format!("f1[{class}]"));
            0.0
        } else {
            2.0 * precision * sensitivity / (precision + sensitivity)
        };
        let (auroc, auprc) = match scores {
            Some(s) => {
                let col: Vec<f64> = s.iter().map(|r| r[class]).collect();
                let roc = auroc_ovr(y_true, &col, class as u8).ok();
                let pr = auprc_ovr(y_true, &col, class as u8).ok();
                if roc.is_none() {
                    undefined.push(format!("auroc[{class}]"));
                }
                if pr.is_none() {
                    undefined.push(format!("auprc[{class}]"));
                }
                (roc, pr)
            }
            None => (None, None),
        };
        per_class.push(ClassMetrics {
            class: class as u8,
            support: c.support(class),
            precision,
            sensitivity,
            specificity,
            f1,
            auroc,
            auprc,
        });
    }
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        if total == 0 {
            0.0
        } else {
            per_class.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64
        }
    };
    let macro_ = |f: fn(&ClassMetrics) -> f64| mean(per_class.iter().map(f)).unwrap_or(0.0);
    let aggregates = Aggregates {
        accuracy: if total == 0 {
            0.0
        } else {
            (0..k).map(|i| c.true_positives(i)).sum::<u64>() as f64 / total as f64
        },
        macro_precision: macro_(|m| m.precision),
        macro_sensitivity: macro_(|m| m.sensitivity),
        macro_specificity: macro_(|m| m.specificity),
        macro_f1: macro_(|m| m.f1),
        weighted_precision: weighted(|m| m.precision),
        weighted_sensitivity: weighted(|m| m.sensitivity),
        weighted_f1: weighted(|m| m.f1),
        mcc: mcc(c),
        macro_auroc: mean(per_class.iter().filter_map(|m| m.auroc)),
        macro_auprc: mean(per_class.iter().filter_map(|m| m.auprc)),
    };
    Ok(ClassificationReport {
        n_samples: total,
        confusion: c.clone(),
        per_class,
        aggregates,
        zero_division,
        undefined,
    })
}

/// Rounds half away from zero to four decimals.
pub fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

impl ClassificationReport {
    /// Copy with every rate rounded to four decimals, for serialization.
    pub fn rounded(&self) -> ClassificationReport {
        let r = round4;
        let mut out = self.clone();
        for m in &mut out.per_class {
            m.precision = r(m.precision);
            m.sensitivity = r(m.sensitivity);
            m.specificity = r(m.specificity);
            m.f1 = r(m.f1);
            m.auroc = m.auroc.map(r);
            m.auprc = m.auprc.map(r);
        }
        let a = &mut out.aggregates;
        for v in [
            &mut a.accuracy,
            &mut a.macro_precision,
            &mut a.macro_sensitivity,
            &mut a.macro_specificity,
            &mut a.macro_f1,
            &mut a.weighted_precision,
            &mut a.weighted_sensitivity,
            &mut a.weighted_f1,
            &mut a.mcc,
        ] {
            *v = r(*v);
        }
        a.macro_auroc = a.macro_auroc.map(r);
        a.macro_auprc = a.macro_auprc.map(r);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.rounded())?)
    }

    pub const CSV_HEADER: [&'static str; 12] = [
        "model",
        "accuracy",
        "macro_precision",
        "macro_sensitivity",
        "macro_specificity",
        "macro_f1",
        "weighted_precision",
        "weighted_sensitivity",
        "weighted_f1",
        "mcc",
        "macro_auroc",
        "macro_auprc",
    ];

    /// One comparison-table row, rounded to four decimals.
    pub fn csv_row(&self, model: &str) -> Vec<String> {
        let a = &self.rounded().aggregates;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            model.to_string(),
            a.accuracy.to_string(),
            a.macro_precision.to_string(),
            a.macro_sensitivity.to_string(),
            a.macro_specificity.to_string(),
            a.macro_f1.to_string(),
            a.weighted_precision.to_string(),
            a.weighted_sensitivity.to_string(),
            a.weighted_f1.to_string(),
            a.mcc.to_string(),
            opt(a.macro_auroc),
            opt(a.macro_auprc),
        ]
    }

    pub fn write_csv<W: Write>(&self, model: &str, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(Self::CSV_HEADER)?;
        wtr.write_record(self.csv_row(model))?;
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn confusion_examples() {
        let c = confusion(&[0, 1, 2, 3], &[0, 1, 2, 3], 4).unwrap();
        assert!((0..4).all(|i| c.counts[i][i] == 1) && c.total() == 4);
        let c = confusion(&[0, 1], &[1, 0], 2).unwrap();
        assert_eq!(c.counts, vec![vec![0, 1], vec![1, 0]]);
        assert!(confusion(&[0], &[0, 1], 4).is_err());
    }

    #[test]
    fn perfect_report() {
        let y = [0, 1, 2, 3, 3, 2];
        let c = confusion(&y, &y, 4).unwrap();
        let r = report(&c, None, &y).unwrap();
        assert_eq!(r.aggregates.accuracy, 1.0);
        assert_eq!(r.aggregates.mcc, 1.0);
        assert!(r.per_class.iter().all(|m| m.precision == 1.0 && m.sensitivity == 1.0 && m.f1 == 1.0));
        assert!(r.aggregates.macro_auroc.is_none());
    }

    #[test]
    fn constant_predictor_mcc_zero() {
        let y = [0, 1, 2, 3];
        let c = confusion(&y, &[1; 4], 4).unwrap();
        let r = report(&c, None, &y).unwrap();
        assert_eq!(r.aggregates.mcc, 0.0);
        assert!(r.zero_division.contains(&"precision[0]".to_string()));
    }

    #[test]
    fn auc_examples() {
        let y = [0, 0, 1, 1];
        let s = [0.1, 0.4, 0.35, 0.8];
        assert_eq!(auroc_ovr(&y, &s, 1).unwrap(), 0.75);
        assert_eq!(auroc_ovr(&y, &[0.1, 0.2, 0.3, 0.4], 1).unwrap(), 1.0);
        assert_eq!(auroc_ovr(&y, &[0.4, 0.3, 0.2, 0.1], 1).unwrap(), 0.0);
        assert_eq!(auroc_ovr(&y, &[0.5; 4], 1).unwrap(), 0.5);
        assert!(matches!(auroc_ovr(&[1, 1], &[0.1, 0.2], 1), Err(Error::UndefinedMetric(_))));
        // Thresholds 0.8 (P=1, R=.5), 0.4 (P=.5), 0.35 (P=2/3, R=1).
        let ap = auprc_ovr(&y, &s, 1).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
        assert_eq!(auprc_ovr(&y, &[0.1, 0.2, 0.3, 0.4], 1).unwrap(), 1.0);
        assert_eq!(auprc_ovr(&[0, 1, 0, 0], &[0.5; 4], 1).unwrap(), 0.25);
        assert!(auprc_ovr(&[0, 0], &[0.1, 0.2], 1).is_err());
    }

    #[test]
    fn rounding_for_output() {
        assert_eq!(round4(0.123_45), 0.1235);
        assert_eq!(round4(2.0 / 3.0), 0.6667);
    }

    proptest! {
        #[test]
        fn mcc_permutation_invariant(
            pairs in proptest::collection::vec((0u8..4, 0u8..4), 1..60),
            perm in Just([0u8, 1, 2, 3]).prop_shuffle(),
        ) {
            let (t, p): (Vec<u8>, Vec<u8>) = pairs.iter().copied().unzip();
            let a = mcc(&confusion(&t, &p, 4).unwrap());
            let tp: Vec<u8> = t.iter().map(|&v| perm[v as usize]).collect();
            let pp: Vec<u8> = p.iter().map(|&v| perm[v as usize]).collect();
            let b = mcc(&confusion(&tp, &pp, 4).unwrap());
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&a));
        }

        #[test]
        fn auroc_transform_and_swap(
            data in proptest::collection::vec((0u8..2, 0.0f64..1.0), 2..50),
        ) {
            let (y, s): (Vec<u8>, Vec<f64>) = data.iter().copied().unzip();
            prop_assume!(y.contains(&0) && y.contains(&1));
            let a = auroc_ovr(&y, &s, 1).unwrap();
            let t: Vec<f64> = s.iter().map(|v| v.exp() * 3.0 + 1.0).collect();
            prop_assert!((a - auroc_ovr(&y, &t, 1).unwrap()).abs() < 1e-12);
            prop_assert!((a + auroc_ovr(&y, &s, 0).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn macro_f1_between_extremes(pairs in proptest::collection::vec((0u8..4, 0u8..4), 1..60)) {
            let (t, p): (Vec<u8>, Vec<u8>) = pairs.iter().copied().unzip();
            let r = report(&confusion(&t, &p, 4).unwrap(), None, &t).unwrap();
            let f1s: Vec<f64> = r.per_class.iter().map(|m| m.f1).collect();
            let lo = f1s.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = f1s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(r.aggregates.macro_f1 >= lo - 1e-12 && r.aggregates.macro_f1 <= hi + 1e-12);
            let tp: u64 = (0..4).map(|c| r.confusion.true_positives(c)).sum();
            prop_assert!((r.aggregates.accuracy - tp as f64 / t.len() as f64).abs() < 1e-15);
        }
    }
}
