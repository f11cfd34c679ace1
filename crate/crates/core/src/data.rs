//! Client-side data: slicing of the response, truncation, and the raw slice
//! mean and covariance statistics that get perturbed before upload.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, FsirError, Result};
use crate::numerics::Matrix;

/// How a continuous response is turned into slice labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "breaks")]
pub enum Slicing {
    /// Equal-frequency slices on the client's own order statistics.
    #[default]
    Local,
    /// Shared interior breakpoints `b_1 < … < b_{H-1}`; `y ≤ b_1` is slice 1.
    FixedBreaks(Vec<f64>),
}

/// Covariates with one slice label per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    x: Matrix,
    y: Vec<f64>,
    labels: Vec<usize>,
    h: usize,
}

impl LabeledDataset {
    /// Dataset whose response already is a slice label in `1..=h`.
    pub fn from_labels(x: Matrix, labels: Vec<usize>, h: usize) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return invalid("dataset must have at least one sample and one covariate");
        }
        if labels.len() != x.nrows() {
            return invalid(format!(
                "{} labels for {} samples",
                labels.len(),
                x.nrows()
            ));
        }
        if h == 0 {
            return invalid("slice count must be positive");
        }
        if let Some(bad) = labels.iter().find(|&&l| l == 0 || l > h) {
            return invalid(format!("label {bad} outside 1..={h}"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return invalid("covariates contain non-finite values");
        }
        let y = labels.iter().map(|&l| l as f64).collect();
        Ok(Self { x, y, labels, h })
    }

    /// Dataset with a binary 0/1 response, mapped to labels 1 (y = 0) and 2 (y = 1).
    pub fn from_binary(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return invalid("binary response must be 0 or 1");
        }
        let labels = y.iter().map(|&v| v as usize + 1).collect();
        let mut d = Self::from_labels(x, labels, 2)?;
        d.y = y;
        Ok(d)
    }

    /// Dataset with a continuous response sliced into `h` slices.
    pub fn from_continuous(x: Matrix, y: Vec<f64>, h: usize, slicing: &Slicing) -> Result<Self> {
        if y.len() != x.nrows() {
            return invalid(format!("{} responses for {} samples", y.len(), x.nrows()));
        }
        let labels = match slicing {
            Slicing::Local => slice_response(&y, h)?,
            Slicing::FixedBreaks(breaks) => slice_by_breaks(&y, h, breaks)?,
        };
        let mut d = Self::from_labels(x, labels, h)?;
        d.y = y;
        Ok(d)
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Samples per slice, index `h - 1` for slice `h`.
    pub fn slice_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.h];
        for &l in &self.labels {
            counts[l - 1] += 1;
        }
        counts
    }

    /// Copy with the client's column means subtracted.
    pub fn centered(&self) -> Self {
        let mut x = self.x.clone();
        for mut col in x.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        Self { x, ..self.clone() }
    }

    /// Copy keeping only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return invalid("row selection is empty");
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n()) {
            return invalid(format!("row {bad} out of range"));
        }
        let x = self.x.select_rows(rows.iter());
        Ok(Self {
            x,
            y: rows.iter().map(|&r| self.y[r]).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            h: self.h,
        })
    }

    /// Copy keeping only the listed columns (0-based), in the given order.
    pub(crate) fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            x: self.x.select_columns(cols.iter()),
            y: self.y.clone(),
            labels: self.labels.clone(),
            h: self.h,
        }
    }
}

/// Equal-frequency slicing: the sample with 0-based rank `r` (ties broken by
/// original index) gets label `⌊r·h/n⌋ + 1`.
pub fn slice_response(y: &[f64], h: usize) -> Result<Vec<usize>> {
    if h < 2 {
        return invalid("slice count must be at least 2");
    }
    let n = y.len();
    if n < h {
        return invalid(format!("{n} samples cannot fill {h} slices"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return invalid("response contains non-finite values");
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
    let mut labels = vec![0; n];
    for (rank, &idx) in order.iter().enumerate() {
        labels[idx] = rank * h / n + 1;
    }
    Ok(labels)
}

fn slice_by_breaks(y: &[f64], h: usize, breaks: &[f64]) -> Result<Vec<usize>> {
    if breaks.len() + 1 != h {
        return invalid(format!(
            "{} breaks given for {h} slices (need {})",
            breaks.len(),
            h.saturating_sub(1)
        ));
    }
    if breaks.windows(2).any(|w| !(w[0] < w[1])) {
        return invalid("breaks must be strictly increasing");
    }
    Ok(y.iter()
        .map(|&v| breaks.iter().filter(|&&b| v > b).count() + 1)
        .collect())
}

/// Entrywise clamp to `[-r, r]`.
pub fn truncate(x: &Matrix, r: f64) -> Matrix {
    x.map(|v| v.clamp(-r, r))
}

/// `p × H` matrix of truncated slice means with divisor `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceMeanMatrix {
    pub m: Matrix,
    pub n: usize,
    pub r: f64,
}

impl SliceMeanMatrix {
    pub fn p(&self) -> usize {
        self.m.nrows()
    }

    pub fn h(&self) -> usize {
        self.m.ncols()
    }
}

/// Column `h`, row `j`: `(1/n) Σ_i Π_r(X_ij) 1(y_i = h)`.
///
/// The divisor is the client sample size, not the slice size, so the columns
/// estimate `E[X 1(Y = h)]` and no slice proportions need to be released.
pub fn slice_mean_matrix(d: &LabeledDataset, r: f64) -> Result<SliceMeanMatrix> {
    if !(r > 0.0) {
        return invalid("truncation level must be positive");
    }
    let n = d.n();
    if n == 0 {
        return invalid("empty dataset");
    }
    let p = d.p();
    let mut m = Matrix::zeros(p, d.h());
    for (j, xj) in d.x().column_iter().enumerate() {
        for (&v, &label) in xj.iter().zip(d.labels()) {
            m[(j, label - 1)] += v.clamp(-r, r);
        }
    }
    m /= n as f64;
    Ok(SliceMeanMatrix { m, n, r })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    /// `(1/n) XᵀX` on the truncated design.
    pub sigma: Matrix,
    /// Largest row norm of the truncated design.
    pub c_r: f64,
    pub n: usize,
}

/// Second-moment matrix of the truncated design, without mean subtraction.
pub fn covariance_estimate(d: &LabeledDataset, r: f64) -> Result<CovarianceEstimate> {
    if !(r > 0.0) {
        return invalid("truncation level must be positive");
    }
    let n = d.n();
    let xt = truncate(d.x(), r);
    let c_r = xt
        .row_iter()
        .map(|row| row.norm())
        .fold(0.0f64, f64::max);
    if c_r == 0.0 {
        return Err(FsirError::DegenerateData(
            "all covariates are zero after truncation".into(),
        ));
    }
    let mut sigma = xt.transpose() * &xt / n as f64;
    // exact symmetry
    let sym = (&sigma + sigma.transpose()) * 0.5;
    sigma.copy_from(&sym);
    Ok(CovarianceEstimate { sigma, c_r, n })
}
