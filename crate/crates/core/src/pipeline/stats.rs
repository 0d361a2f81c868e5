use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub counts: [u64; 4],
    pub percentages: [f64; 4],
}

impl LabelDistribution {
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a u8>) -> Self {
        let mut counts = [0u64; 4];
        for &l in labels {
            counts[l as usize] += 1;
        }
        Self::from_counts(counts)
    }

    pub fn from_counts(counts: [u64; 4]) -> Self {
        let total: u64 = counts.iter().sum();
        let mut percentages = [0.0; 4];
        if total > 0 {
            for (p, &c) in percentages.iter_mut().zip(&counts) {
                *p = 100.0 * c as f64 / total as f64;
            }
        }
        LabelDistribution { counts, percentages }
    }
}

/// Run-length statistics of one label value, in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationStats {
    pub runs: usize,
    pub mean: f64,
    pub median: f64,
}

/// `(label, run length)` for each maximal run of equal labels.
pub fn label_runs(labels: &[u8]) -> Vec<(u8, usize)> {
    let mut runs: Vec<(u8, usize)> = Vec::new();
    for &l in labels {
        match runs.last_mut() {
            Some((label, len)) if *label == l => *len += 1,
            _ => runs.push((l, 1)),
        }
    }
    runs
}

/// Mean and median run durations per label, from runs of possibly many
/// admissions.
pub fn duration_stats_from_runs(runs: impl IntoIterator<Item = (u8, usize)>) -> BTreeMap<u8, DurationStats> {
    let mut by_label: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (label, len) in runs {
        by_label.entry(label).or_default().push(len);
    }
    by_label
        .into_iter()
        .map(|(label, mut lens)| {
            lens.sort_unstable();
            let n = lens.len();
            let mean = lens.iter().sum::<usize>() as f64 / n as f64;
            let median = if n % 2 == 1 {
                lens[n / 2] as f64
            } else {
                (lens[n / 2 - 1] + lens[n / 2]) as f64 / 2.0
            };
            (label, DurationStats { runs: n, mean, median })
        })
        .collect()
}

/// Run-duration statistics of a minute-regular label sequence.
pub fn label_duration_stats(labels: &[u8]) -> BTreeMap<u8, DurationStats> {
    duration_stats_from_runs(label_runs(labels))
}
