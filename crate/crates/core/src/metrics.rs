//! Subspace distances and the tracing (membership-inference) attack.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{truncate, LabeledDataset, SliceMeanMatrix};
use crate::dp::{iid_gaussian_mechanism, vgm_mechanism, PrivacyBudget, VgmBound};
use crate::error::{invalid, Result};
use crate::numerics::{svd, sym_eig, Matrix, SeededRng};

const RANK_TOL: f64 = 1e-12;

/// Orthonormal basis of the column span, rejecting rank-deficient input.
fn span_basis(b: &Matrix, what: &str) -> Result<Matrix> {
    if b.ncols() == 0 || b.ncols() > b.nrows() {
        return invalid(format!("{what}: need 1 ≤ columns ≤ rows, got {}x{}", b.nrows(), b.ncols()));
    }
    let dec = svd(b)?;
    let top = dec.singular_values[0];
    let low = *dec.singular_values.last().expect("non-empty");
    if !(top > 0.0) || low <= RANK_TOL * top {
        return invalid(format!("{what}: matrix is not of full column rank"));
    }
    Ok(dec.u)
}

/// `‖P₁ − P₂‖_F` for the orthogonal projectors onto the column spans.
pub fn projection_loss(b1: &Matrix, b2: &Matrix) -> Result<f64> {
    if b1.nrows() != b2.nrows() {
        return invalid(format!("row counts differ: {} vs {}", b1.nrows(), b2.nrows()));
    }
    let q1 = span_basis(b1, "projection_loss")?;
    let q2 = span_basis(b2, "projection_loss")?;
    let p1 = &q1 * q1.transpose();
    let p2 = &q2 * q2.transpose();
    Ok((p1 - p2).norm())
}

/// Angle in `[0, π/2]` between two spans; the largest principal angle when
/// either has more than one column.
pub fn subspace_angle(b1: &Matrix, b2: &Matrix) -> Result<f64> {
    if b1.nrows() != b2.nrows() {
        return invalid(format!("row counts differ: {} vs {}", b1.nrows(), b2.nrows()));
    }
    if b1.ncols() == 1 && b2.ncols() == 1 {
        let (n1, n2) = (b1.norm(), b2.norm());
        if n1 == 0.0 || n2 == 0.0 {
            return invalid("subspace_angle: zero vector");
        }
        let c = (b1.column(0).dot(&b2.column(0)).abs() / (n1 * n2)).min(1.0);
        return Ok(c.acos());
    }
    let q1 = span_basis(b1, "subspace_angle")?;
    let q2 = span_basis(b2, "subspace_angle")?;
    let cosines = svd(&(q1.transpose() * q2))?.singular_values;
    let c = cosines.last().copied().unwrap_or(0.0).clamp(0.0, 1.0);
    Ok(c.acos())
}

/// `⟨x₀(1(y₀=1) − 1(y₀=0)) − β_ref, β̂⟩`.
pub fn tracing_attack_score(x0: &[f64], y0: bool, beta_hat: &[f64], beta_ref: &[f64]) -> f64 {
    let sign = if y0 { 1.0 } else { -1.0 };
    x0.iter()
        .zip(beta_ref)
        .zip(beta_hat)
        .map(|((x, r), b)| (sign * x - r) * b)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)`, from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocCurve {
    /// Trapezoidal area under `points`.
    pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
        points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum()
    }
}

/// ROC over every distinct threshold; higher scores predict `true`. Tied
/// scores move together, so the area equals the Mann-Whitney statistic with
/// ties counted one half.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return invalid(format!("{} scores for {} labels", scores.len(), labels.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return invalid("scores contain non-finite values");
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return invalid("roc_curve needs both positive and negative samples");
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = RocCurve::trapezoid(&points);
    Ok(RocCurve { points, auc })
}

/// How the attacked mean-difference vector is released.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackTarget {
    Raw,
    Iid,
    Vgm,
    /// Ignores the data.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct TracingOutcome {
    pub roc: RocCurve,
    pub scores: Vec<f64>,
    /// True for members of the released half.
    pub members: Vec<bool>,
}

/// Holds out one random sample as the surrogate for `β`, splits the rest into
/// equal "in" and "out" halves, releases `β̂ = (1/|in|) Σ x_i(1(y_i=1) − 1(y_i=0))`
/// over the in half, and scores every sample of both halves.
///
/// The private arms truncate at `budget.r` and perturb `β̂` as a `p × 1`
/// one-slice matrix with sensitivity `2R√p/|in|`.
pub fn tracing_experiment(
    d: &LabeledDataset,
    target: &AttackTarget,
    budget: &PrivacyBudget,
    rng: &mut SeededRng,
) -> Result<TracingOutcome> {
    let n = d.n();
    let p = d.p();
    if n < 20 {
        return invalid(format!("tracing experiment needs at least 20 samples, got {n}"));
    }
    if d.h() != 2 {
        return invalid("tracing experiment needs a binary response");
    }
    let sign: Vec<f64> = d.labels().iter().map(|&l| if l == 2 { 1.0 } else { -1.0 }).collect();

    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let held = idx[0];
    let half = (n - 1) / 2;
    let inside = &idx[1..1 + half];
    let outside = &idx[1 + half..1 + 2 * half];

    let x = d.x();
    let beta_ref: Vec<f64> = (0..p).map(|j| sign[held] * x[(held, j)]).collect();

    let mean_diff = |m: &Matrix| -> Matrix {
        let mut v = Matrix::zeros(p, 1);
        for &i in inside {
            for j in 0..p {
                v[(j, 0)] += sign[i] * m[(i, j)];
            }
        }
        v / half as f64
    };
    let beta_hat: Vec<f64> = match target {
        AttackTarget::Raw => mean_diff(x).iter().copied().collect(),
        AttackTarget::Fixed(b) => {
            if b.len() != p {
                return invalid(format!("fixed attack target has length {}, expected {p}", b.len()));
            }
            b.clone()
        }
        AttackTarget::Iid | AttackTarget::Vgm => {
            let m_bar = SliceMeanMatrix {
                m: mean_diff(&truncate(x, budget.r)),
                n: half,
                r: budget.r,
            };
            let released = if *target == AttackTarget::Iid {
                iid_gaussian_mechanism(&m_bar, budget, rng)?
            } else {
                vgm_mechanism(&m_bar, budget, VgmBound::Approx, rng)?.m_tilde
            };
            released.iter().copied().collect()
        }
    };

    let mut scores = Vec::with_capacity(2 * half);
    let mut members = Vec::with_capacity(2 * half);
    for (set, member) in [(inside, true), (outside, false)] {
        for &i in set {
            let xi: Vec<f64> = x.row(i).iter().copied().collect();
            scores.push(tracing_attack_score(&xi, sign[i] > 0.0, &beta_hat, &beta_ref));
            members.push(member);
        }
    }
    let roc = roc_curve(&scores, &members)?;
    Ok(TracingOutcome { roc, scores, members })
}

/// Centers the columns and maps them through `Σ̂^{-1/2}` of the pooled
/// empirical covariance.
pub fn whiten(x: &Matrix) -> Result<Matrix> {
    let n = x.nrows();
    if n < 2 {
        return invalid("whitening needs at least two samples");
    }
    let mut c = x.clone();
    for mut col in c.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    let cov = c.transpose() * &c / (n - 1) as f64;
    let eig = sym_eig(&cov)?;
    let top = eig.eigenvalues[0];
    if eig.eigenvalues.iter().any(|&l| l <= RANK_TOL * top) {
        return invalid("whitening: covariance is singular");
    }
    let inv_sqrt = Matrix::from_diagonal(&nalgebra::DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()),
    ));
    let w = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    Ok(c * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn projection_loss_examples() {
        let e1 = col(&[1.0, 0.0]);
        let e2 = col(&[0.0, 1.0]);
        assert_abs_diff_eq!(projection_loss(&e1, &e1).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(projection_loss(&e1, &e2).unwrap(), SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(projection_loss(&e1, &(&e1 * 3.0)).unwrap(), 0.0, epsilon = 1e-12);
        assert!(projection_loss(&col(&[0.0, 0.0]), &e1).is_err());
        let deficient = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(projection_loss(&deficient, &deficient).is_err());
    }

    #[test]
    fn angle_examples() {
        let b = col(&[1.0, 2.0, -1.0]);
        assert_abs_diff_eq!(subspace_angle(&b, &b).unwrap(), 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(subspace_angle(&b, &(-&b)).unwrap(), 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(
            subspace_angle(&col(&[1.0, 0.0]), &col(&[0.0, 1.0])).unwrap(),
            FRAC_PI_2,
            epsilon = 1e-12
        );
        assert!(subspace_angle(&col(&[0.0, 0.0]), &col(&[1.0, 0.0])).is_err());

        // planes sharing e1, tilted by 30 degrees in the second direction
        let a = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let t = std::f64::consts::PI / 6.0;
        let b = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, t.cos(), 0.0, t.sin()]);
        assert_abs_diff_eq!(subspace_angle(&a, &b).unwrap(), t, epsilon = 1e-12);
    }

    #[test]
    fn score_examples() {
        let bh = [1.0, 2.0];
        assert_eq!(tracing_attack_score(&[1.0, 2.0], true, &bh, &[0.0, 0.0]), 5.0);
        assert_eq!(tracing_attack_score(&[1.0, 2.0], false, &bh, &[-1.0, -2.0]), 0.0);
        let s1 = tracing_attack_score(&[0.3, -1.0], false, &bh, &[0.1, 0.2]);
        let s2 = tracing_attack_score(&[0.3, -1.0], false, &[2.0, 4.0], &[0.1, 0.2]);
        assert_abs_diff_eq!(s2, 2.0 * s1, epsilon = 1e-15);
    }

    #[test]
    fn roc_by_hand() {
        let roc = roc_curve(&[0.9, 0.8, 0.7, 0.1], &[true, false, true, false]).unwrap();
        assert_eq!(roc.points, vec![(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]);
        assert_abs_diff_eq!(roc.auc, 0.75, epsilon = 1e-15);

        let tied = roc_curve(&[1.0, 1.0], &[true, false]).unwrap();
        assert_eq!(tied.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_abs_diff_eq!(tied.auc, 0.5, epsilon = 1e-15);

        assert!(roc_curve(&[1.0], &[true]).is_err());
    }

    #[test]
    fn whitened_covariance_is_identity() {
        let mut rng = SeededRng::new(3, 0);
        let x = crate::numerics::gaussian_matrix(&mut rng, 200, 3, 1.0, 2.0).unwrap();
        let w = whiten(&x).unwrap();
        let cov = w.transpose() * &w / 199.0;
        assert_abs_diff_eq!(cov, Matrix::identity(3, 3), epsilon = 1e-10);
    }
}
