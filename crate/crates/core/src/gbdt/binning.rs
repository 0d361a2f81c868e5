use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Bin index reserved for missing (NaN) values.
pub const MISSING_BIN: u8 = 255;

/// Per-feature bin edges. A value `x` falls in bin `j` where `j` is the
/// number of edges strictly below `x`, so bin `j` covers
/// `(edges[j-1], edges[j]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBinning {
    pub edges: Vec<Vec<f64>>,
    /// Whether the training data had missing values in this feature.
    pub has_missing: Vec<bool>,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m < b {
        m
    } else {
        a
    }
}

fn feature_edges(mut values: Vec<f64>, max_bins: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut distinct = values.clone();
    distinct.dedup();
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect();
    }
    let n = values.len();
    let mut edges: Vec<f64> = Vec::with_capacity(max_bins - 1);
    for q in 1..max_bins {
        let idx = q * n / max_bins;
        if idx == 0 || idx >= n {
            continue;
        }
        let (a, b) = (values[idx - 1], values[idx]);
        if a < b {
            let e = midpoint(a, b);
            if edges.last().is_none_or(|&l| e > l) {
                edges.push(e);
            }
        }
    }
    edges
}

/// Column-major binned copy of an instance matrix.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    pub n_rows: usize,
    pub columns: Vec<Vec<u8>>,
}

impl HistogramBinning {
    /// Quantile bins per feature; at most `max_bins` bins for observed
    /// values plus the missing bin. Infinite values are rejected.
    pub fn fit(x: ArrayView2<f64>, max_bins: usize) -> Result<HistogramBinning> {
        check_finite(x)?;
        let mut edges = Vec::with_capacity(x.ncols());
        let mut has_missing = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let observed: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
            has_missing.push(observed.len() < col.len());
            edges.push(feature_edges(observed, max_bins.min(255)));
        }
        Ok(HistogramBinning { edges, has_missing })
    }

    pub fn n_features(&self) -> usize {
        self.edges.len()
    }

    pub fn bin(&self, feature: usize, value: f64) -> u8 {
        if value.is_nan() {
            return MISSING_BIN;
        }
        self.edges[feature].partition_point(|&e| e < value) as u8
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Result<BinnedMatrix> {
        if x.ncols() != self.n_features() {
            return Err(Error::invalid(format!(
                "expected {} features, got {}",
                self.n_features(),
                x.ncols()
            )));
        }
        check_finite(x)?;
        let columns = x
            .columns()
            .into_iter()
            .enumerate()
            .map(|(f, col)| col.iter().map(|&v| self.bin(f, v)).collect())
            .collect();
        Ok(BinnedMatrix { n_rows: x.nrows(), columns })
    }
}

/// NaN is allowed (treated as missing); infinities are not.
pub fn check_finite(x: ArrayView2<f64>) -> Result<()> {
    match x.indexed_iter().find(|(_, v)| v.is_infinite()) {
        Some(((r, c), _)) => Err(Error::Training(format!("infinite value at row {r}, feature {c}"))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    #[test]
    fn few_distinct_values_get_midpoints() {
        let x = Array2::from_shape_vec((4, 1), vec![1.0, 3.0, 3.0, 2.0]).unwrap();
        let b = HistogramBinning::fit(x.view(), 255).unwrap();
        assert_eq!(b.edges[0], vec![1.5, 2.5]);
        assert_eq!(b.bin(0, 1.0), 0);
        assert_eq!(b.bin(0, 2.0), 1);
        assert_eq!(b.bin(0, 3.0), 2);
        assert_eq!(b.bin(0, 1.5), 0);
        assert_eq!(b.bin(0, f64::NAN), MISSING_BIN);
    }

    #[test]
    fn infinities_rejected() {
        let x = Array2::from_shape_vec((2, 1), vec![1.0, f64::INFINITY]).unwrap();
        assert!(HistogramBinning::fit(x.view(), 255).is_err());
    }

    proptest! {
        #[test]
        fn edges_increasing_and_bins_bounded(
            values in proptest::collection::vec(-1e3f64..1e3, 1..2000),
            max_bins in 2usize..=255,
        ) {
            let n = values.len();
            let x = Array2::from_shape_vec((n, 1), values.clone()).unwrap();
            let b = HistogramBinning::fit(x.view(), max_bins).unwrap();
            let e = &b.edges[0];
            prop_assert!(e.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(e.len() < max_bins);
            for &v in &values {
                let bin = b.bin(0, v) as usize;
                prop_assert!(bin <= e.len());
                if bin > 0 { prop_assert!(v > e[bin - 1]); }
                if bin < e.len() { prop_assert!(v <= e[bin]); }
            }
        }
    }
}
