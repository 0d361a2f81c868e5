//! Pearson correlation and principal component analysis.

use std::io::Write;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub features: Vec<String>,
    /// `None` where a column has zero variance over the compared rows.
    pub values: Vec<Vec<Option<f64>>>,
    pub zero_variance: Vec<String>,
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Pairwise Pearson correlation; NaN cells are missing and each pair uses
/// the rows where both columns are present.
pub fn correlation_matrix(x: ArrayView2<f64>, names: &[String]) -> Result<CorrelationMatrix> {
    if x.nrows() < 2 {
        return Err(Error::invalid("correlation needs at least 2 rows"));
    }
    if names.len() != x.ncols() {
        return Err(Error::invalid("feature names do not match columns"));
    }
    let p = x.ncols();
    let mut values = vec![vec![None; p]; p];
    for i in 0..p {
        for j in i..p {
            let (a, b): (Vec<f64>, Vec<f64>) = x
                .column(i)
                .iter()
                .zip(x.column(j))
                .filter(|(u, v)| !u.is_nan() && !v.is_nan())
                .map(|(u, v)| (*u, *v))
                .unzip();
            let r = if a.len() < 2 {
                None
            } else if i == j {
                pearson(&a, &b).map(|_| 1.0)
            } else {
                pearson(&a, &b)
            };
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    let zero_variance = (0..p).filter(|&i| values[i][i].is_none()).map(|i| names[i].clone()).collect();
    Ok(CorrelationMatrix { features: names.to_vec(), values, zero_variance })
}

impl CorrelationMatrix {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec![String::new()];
        header.extend(self.features.iter().cloned());
        wtr.write_record(&header)?;
        for (name, row) in self.features.iter().zip(&self.values) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues (descending) and eigenvectors as columns.
pub fn symmetric_eigen(a: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::invalid("matrix is not square"));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix holds non-finite values".into()));
    }
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let off = |m: &Array2<f64>| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[[i, j]] * m[[i, j]];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&m) / scale >= 1e-10 {
        sweeps += 1;
        if sweeps > 100 {
            return Err(Error::Numerical("Jacobi iteration did not converge".into()));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].total_cmp(&m[[i, i]]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[[i, i]]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[[r, order[c]]]);
    Ok((values, vectors))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub features: Vec<String>,
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// `components[k]` is the k-th unit eigenvector over features.
    pub components: Vec<Vec<f64>>,
    /// Component weights scaled by the square root of the eigenvalue.
    pub loadings: Vec<Vec<f64>>,
}

/// Sample covariance of the columns (rows with NaN are skipped).
pub fn covariance(x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let rows: Vec<_> = x.rows().into_iter().filter(|r| r.iter().all(|v| !v.is_nan())).collect();
    if rows.len() < 2 {
        return Err(Error::invalid("covariance needs at least 2 complete rows"));
    }
    let p = x.ncols();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; p];
    for r in &rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = Array2::zeros((p, p));
    for r in &rows {
        for i in 0..p {
            let di = r[i] - mean[i];
            for j in i..p {
                cov[[i, j]] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..p {
        for j in i..p {
            let v = cov[[i, j]] / (n - 1.0);
            cov[[i, j]] = v;
            cov[[j, i]] = v;
        }
    }
    Ok(cov)
}

/// Column z-scores with sample standard deviation; zero-variance columns
/// are only centred.
pub fn standardize_columns(x: ArrayView2<f64>) -> Array2<f64> {
    let mut out = x.to_owned();
    for mut col in out.columns_mut() {
        let obs: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
        let n = obs.len() as f64;
        if n < 2.0 {
            continue;
        }
        let m = obs.iter().sum::<f64>() / n;
        let s = (obs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let s = if s > 0.0 { s } else { 1.0 };
        col.mapv_inplace(|v| (v - m) / s);
    }
    out
}

/// PCA of already-standardized data via the covariance matrix.
pub fn pca(x: ArrayView2<f64>, names: &[String]) -> Result<PcaResult> {
    if x.ncols() < 2 {
        return Err(Error::invalid("PCA needs at least 2 columns"));
    }
    if names.len() != x.ncols() {
        return Err(Error::invalid("feature names do not match columns"));
    }
    let cov = covariance(x)?;
    let (values, vectors) = symmetric_eigen(&cov)?;
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numerical("covariance has zero total variance".into()));
    }
    let p = values.len();
    let mut components = Vec::with_capacity(p);
    let mut loadings = Vec::with_capacity(p);
    for (k, &lambda) in values.iter().enumerate() {
        let mut comp: Vec<f64> = vectors.column(k).to_vec();
        let mut lead = 0;
        for (i, c) in comp.iter().enumerate() {
            if c.abs() > comp[lead].abs() {
                lead = i;
            }
        }
        if comp[lead] < 0.0 {
            comp.iter_mut().for_each(|c| *c = -*c);
        }
        let s = lambda.max(0.0).sqrt();
        loadings.push(comp.iter().map(|c| c * s).collect());
        components.push(comp);
    }
    Ok(PcaResult {
        features: names.to_vec(),
        explained_variance_ratio: values.iter().map(|v| v / total).collect(),
        eigenvalues: values,
        components,
        loadings,
    })
}

impl PcaResult {
    /// Rows: one per component with its eigenvalue, ratio and weights.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["component".to_string(), "eigenvalue".into(), "explained_variance_ratio".into()];
        header.extend(self.features.iter().cloned());
        wtr.write_record(&header)?;
        for (k, comp) in self.components.iter().enumerate() {
            let mut rec = vec![
                format!("PC{}", k + 1),
                self.eigenvalues[k].to_string(),
                self.explained_variance_ratio[k].to_string(),
            ];
            rec.extend(comp.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
