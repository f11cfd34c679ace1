//! Differential-privacy noise for the two client releases.
//!
//! The slice mean matrix is released either with the i.i.d. Gaussian
//! mechanism or with the vectorized Gaussian mechanism (VGM), whose noise
//! covariance shares its eigenbasis with the left singular vectors of the
//! slice means. The covariance is released with a symmetric Gaussian
//! perturbation calibrated for unit-norm rows and rescaled by `c_r²`.
//!
//! Sensitivity after truncation at `R` is `Δ₂ = 2R√p/n`. Every column of the
//! slice mean matrix is perturbed independently; slices are disjoint, so each
//! record touches exactly one column.

use serde::{Deserialize, Serialize};

use crate::data::{CovarianceEstimate, SliceMeanMatrix};
use crate::error::{invalid, Result};
use crate::numerics::{full_left_basis, gaussian_matrix, symmetric_gaussian, Matrix, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
    /// Truncation level `R`.
    pub r: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64, r: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return invalid(format!("epsilon must be positive, got {epsilon}"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return invalid(format!("delta must lie in (0, 1), got {delta}"));
        }
        if !(r > 0.0) || !r.is_finite() {
            return invalid(format!("truncation level must be positive, got {r}"));
        }
        Ok(Self { epsilon, delta, r })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    Iid,
    Vgm,
}

/// Which bound on `‖Σ_ξ⁻¹‖₂` fixes the VGM noise floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VgmBound {
    /// `‖Σ_ξ⁻¹‖₂ ≤ ε² / (2 Δ₂² log(2/δ))`, the first-order expansion.
    #[default]
    Approx,
    /// `‖Σ_ξ⁻¹‖₂ ≤ (4L + 2ε − 4√(L² + Lε)) / Δ₂²` with `L = log(2/δ)`.
    Exact,
}

/// `2 R √p / n`.
pub fn l2_sensitivity(p: usize, n: usize, r: f64) -> f64 {
    2.0 * r * (p as f64).sqrt() / n as f64
}

/// Sample size below which the i.i.d. noise sd would exceed `sigma0`:
/// `⌈2R√(2p log(1.25/δ)) / (σ₀ ε)⌉`, at least 1.
pub fn min_sample_size(budget: &PrivacyBudget, p: usize, sigma0: f64) -> usize {
    let raw = min_sample_size_raw(budget, p, sigma0);
    (raw.ceil() as usize).max(1)
}

pub(crate) fn min_sample_size_raw(budget: &PrivacyBudget, p: usize, sigma0: f64) -> f64 {
    2.0 * budget.r * (2.0 * p as f64 * (1.25 / budget.delta).ln()).sqrt() / (sigma0 * budget.epsilon)
}

/// Whether a client with `n` samples may take part in the round.
pub fn budget_check(n: usize, budget: &PrivacyBudget, p: usize, sigma0: f64) -> bool {
    n >= min_sample_size(budget, p, sigma0)
}

/// Per-entry variance of the i.i.d. mechanism: `2 Δ₂² log(1.25/δ) / ε²`.
pub fn iid_noise_variance(budget: &PrivacyBudget, p: usize, n: usize) -> f64 {
    let d2 = l2_sensitivity(p, n, budget.r);
    2.0 * d2 * d2 * (1.25 / budget.delta).ln() / (budget.epsilon * budget.epsilon)
}

pub fn iid_gaussian_mechanism(
    m_bar: &SliceMeanMatrix,
    budget: &PrivacyBudget,
    rng: &mut SeededRng,
) -> Result<Matrix> {
    let var = iid_noise_variance(budget, m_bar.p(), m_bar.n);
    if !(var > 0.0) || !var.is_finite() {
        return invalid("i.i.d. mechanism: noise variance is not finite and positive");
    }
    let noise = column_noise(rng, m_bar.p(), m_bar.h(), var.sqrt())?;
    Ok(&m_bar.m + noise)
}

/// Draws column by column so each slice release has its own consecutive
/// block of the stream.
fn column_noise(rng: &mut SeededRng, p: usize, h: usize, sd: f64) -> Result<Matrix> {
    let mut out = Matrix::zeros(p, h);
    for c in 0..h {
        let col = gaussian_matrix(rng, p, 1, 0.0, sd)?;
        out.set_column(c, &col.column(0));
    }
    Ok(out)
}

/// Smallest admissible eigenvalue of the VGM noise covariance,
/// `8 R² p log(2/δ) / (n² ε²)`.
///
/// This is the reciprocal of the approximate bound on `‖Σ_ξ⁻¹‖₂`, so a
/// covariance whose spectrum sits at or above it satisfies the condition.
pub fn vgm_noise_floor(budget: &PrivacyBudget, p: usize, n: usize) -> f64 {
    vgm_noise_floor_with(VgmBound::Approx, budget, p, n)
}

pub fn vgm_noise_floor_with(bound: VgmBound, budget: &PrivacyBudget, p: usize, n: usize) -> f64 {
    let l = (2.0 / budget.delta).ln();
    let eps = budget.epsilon;
    let d2 = l2_sensitivity(p, n, budget.r);
    match bound {
        VgmBound::Approx => 2.0 * d2 * d2 * l / (eps * eps),
        VgmBound::Exact => {
            // 4L + 2ε − 4√(L² + Lε), rationalized to avoid cancellation
            let admissible = 4.0 * eps * eps / (4.0 * l + 2.0 * eps + 4.0 * (l * l + l * eps).sqrt());
            d2 * d2 / admissible
        }
    }
}

/// `n² ε² / (8 R² p log(2/δ))`, the approximate upper bound on `‖Σ_ξ⁻¹‖₂`.
pub fn vgm_inverse_norm_bound(budget: &PrivacyBudget, p: usize, n: usize) -> f64 {
    1.0 / vgm_noise_floor(budget, p, n)
}

/// Noise covariance `Σ_ξ = basis · diag(eigvals) · basisᵀ` used by the VGM.
#[derive(Debug, Clone, PartialEq)]
pub struct VgmNoiseSpec {
    /// `p × p` orthonormal, leading columns are the left singular vectors of
    /// the slice mean matrix.
    pub basis: Matrix,
    /// Entry `j` goes with basis column `j`: `floor + gap_j` for `j < d̂`,
    /// `floor` after. Not sorted, since the gaps need not be.
    pub eigvals: Vec<f64>,
    pub floor: f64,
}

impl VgmNoiseSpec {
    pub fn covariance(&self) -> Matrix {
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(self.eigvals.clone()));
        &self.basis * d * self.basis.transpose()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigvals.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Eigengaps `s_j − s_{j+1}` for `j < min(p, H)`; empty if only one value.
pub fn eigengaps(singular_values: &[f64], rank_bound: usize) -> Vec<f64> {
    let k = rank_bound.min(singular_values.len());
    (0..k.saturating_sub(1))
        .map(|j| singular_values[j] - singular_values[j + 1])
        .collect()
}

/// Structure dimension by largest eigengap, smallest index on ties; 1 when
/// there is no gap to rank.
pub fn largest_gap_dimension(singular_values: &[f64], rank_bound: usize) -> usize {
    let gaps = eigengaps(singular_values, rank_bound);
    let mut best = 0usize;
    for (j, g) in gaps.iter().enumerate() {
        if *g > gaps[best] {
            best = j;
        }
    }
    best + 1
}

#[derive(Debug, Clone)]
pub struct VgmRelease {
    pub m_tilde: Matrix,
    pub d_hat: usize,
    pub spec: VgmNoiseSpec,
}

/// Builds the VGM noise covariance for `m_bar` without drawing noise.
pub fn vgm_noise_spec(
    m_bar: &SliceMeanMatrix,
    budget: &PrivacyBudget,
    bound: VgmBound,
) -> Result<(VgmNoiseSpec, usize)> {
    let p = m_bar.p();
    if p < 2 {
        return invalid("VGM needs at least two covariates");
    }
    let floor = vgm_noise_floor_with(bound, budget, p, m_bar.n);
    if !(floor > 0.0) || !floor.is_finite() {
        return invalid("VGM noise floor is not finite and positive");
    }
    let (basis, s) = full_left_basis(&m_bar.m)?;
    let rank_bound = p.min(m_bar.h());
    let gaps = eigengaps(&s, rank_bound);
    let d_hat = largest_gap_dimension(&s, rank_bound);
    let eigvals = (0..p)
        .map(|j| {
            if j < d_hat {
                floor + gaps.get(j).copied().unwrap_or(0.0)
            } else {
                floor
            }
        })
        .collect();
    Ok((
        VgmNoiseSpec {
            basis,
            eigvals,
            floor,
        },
        d_hat,
    ))
}

/// Vectorized Gaussian mechanism: `M̃ = M̄ + W₁ V^{1/2} Z` with `Z` standard
/// normal `p × H`.
pub fn vgm_mechanism(
    m_bar: &SliceMeanMatrix,
    budget: &PrivacyBudget,
    bound: VgmBound,
    rng: &mut SeededRng,
) -> Result<VgmRelease> {
    let (spec, d_hat) = vgm_noise_spec(m_bar, budget, bound)?;
    let z = column_noise(rng, m_bar.p(), m_bar.h(), 1.0)?;
    let mut scaled = spec.basis.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= spec.eigvals[j].sqrt();
    }
    let m_tilde = &m_bar.m + scaled * z;
    Ok(VgmRelease {
        m_tilde,
        d_hat,
        spec,
    })
}

/// Entry sd of the symmetric perturbation for a unit-row-norm design:
/// `(p+1)/(nε) · {2 log((p²+p)/(2√(2π)δ))}^{1/2} + 1/(n ε^{1/2})`.
pub fn covariance_noise_sd(p: usize, n: usize, epsilon: f64, delta: f64) -> f64 {
    let pf = p as f64;
    let nf = n as f64;
    let arg = (pf * pf + pf) / (2.0 * (2.0 * std::f64::consts::PI).sqrt() * delta);
    (pf + 1.0) / (nf * epsilon) * (2.0 * arg.ln()).sqrt() + 1.0 / (nf * epsilon.sqrt())
}

/// `Σ̂ + c_r² A` where `A` is symmetric with i.i.d. `N(0, σ_x²)` entries; the
/// perturbation is calibrated on `Σ̂ / c_r²`, whose rows have norm at most 1.
pub fn private_covariance(
    cov: &CovarianceEstimate,
    budget_x: &PrivacyBudget,
    rng: &mut SeededRng,
) -> Result<Matrix> {
    if !(cov.c_r > 0.0) {
        return invalid("private covariance: c_r must be positive");
    }
    let p = cov.sigma.nrows();
    let sd = covariance_noise_sd(p, cov.n, budget_x.epsilon, budget_x.delta);
    let a = symmetric_gaussian(rng, p, sd)?;
    Ok(&cov.sigma + a * (cov.c_r * cov.c_r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn budget(eps: f64, delta: f64, r: f64) -> PrivacyBudget {
        PrivacyBudget::new(eps, delta, r).unwrap()
    }

    #[test]
    fn sensitivity_values() {
        assert_relative_eq!(l2_sensitivity(4, 100, 1.0), 0.04, max_relative = 1e-15);
        assert_eq!(l2_sensitivity(1, 2, 1.0), 1.0);
        assert_eq!(l2_sensitivity(7, 200, 2.5), l2_sensitivity(7, 100, 2.5) / 2.0);
    }

    #[test]
    fn minimal_sample_size() {
        // 2·√(20·ln 1250) = 2·√(142.618…) = 23.884…
        assert_eq!(min_sample_size(&budget(1.0, 1e-3, 1.0), 10, 1.0), 24);
        let b = budget(1.0, 1e-3, 1.0);
        assert_relative_eq!(
            min_sample_size_raw(&b, 40, 1.0),
            2.0 * min_sample_size_raw(&b, 10, 1.0),
            max_relative = 1e-14
        );
        assert_eq!(min_sample_size(&b, 10, 1e9), 1);
    }

    #[test]
    fn budget_check_boundary() {
        let b = budget(1.0, 1e-3, 1.0);
        let n0 = min_sample_size(&b, 10, 1.0);
        assert!(!budget_check(n0 - 1, &b, 10, 1.0));
        assert!(budget_check(n0, &b, 10, 1.0));
        assert!(budget_check(1, &b, 10, 1e12));
    }

    #[test]
    fn iid_variance_formula() {
        // Δ₂ = 0.04 at p=4, n=100, R=1; 2·0.0016·ln 25 = 0.0103004…
        let b = budget(1.0, 0.05, 1.0);
        assert_relative_eq!(iid_noise_variance(&b, 4, 100), 0.010_300_402_639_578_243, max_relative = 1e-12);
    }

    #[test]
    fn vgm_floor_values() {
        let b = budget(1.0, 1e-3, 1.0);
        // 80·ln 2000 / 1e6
        assert_relative_eq!(vgm_noise_floor(&b, 10, 1000), 6.080_721_967_633_666e-4, max_relative = 1e-12);
        assert_relative_eq!(
            vgm_noise_floor(&b, 10, 1000) * vgm_inverse_norm_bound(&b, 10, 1000),
            1.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            vgm_noise_floor(&b, 10, 2000),
            vgm_noise_floor(&b, 10, 1000) / 4.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn exact_floor_is_close_to_approx_for_small_epsilon() {
        let b = budget(0.01, 1e-5, 1.0);
        let a = vgm_noise_floor_with(VgmBound::Approx, &b, 10, 1000);
        let e = vgm_noise_floor_with(VgmBound::Exact, &b, 10, 1000);
        assert_relative_eq!(a, e, max_relative = 1e-2);
        // the expansion drops a negative ε³ term, so the exact floor is higher
        let b = budget(1.0, 1e-3, 1.0);
        assert!(vgm_noise_floor_with(VgmBound::Exact, &b, 10, 1000) > vgm_noise_floor(&b, 10, 1000));
    }

    #[test]
    fn gap_rule() {
        assert_eq!(largest_gap_dimension(&[5.0, 1.0, 0.0, 0.0], 4), 1);
        assert_eq!(largest_gap_dimension(&[5.0, 4.0, 0.0], 3), 2);
        assert_eq!(largest_gap_dimension(&[3.0, 2.0, 1.0], 3), 1);
        assert_eq!(largest_gap_dimension(&[3.0], 1), 1);
        assert_eq!(eigengaps(&[5.0, 1.0, 0.0, 0.0], 2), vec![4.0]);
    }

    #[test]
    fn vgm_spec_by_hand() {
        // singular values (5, 1, 0) with H = 3
        let mut m = Matrix::zeros(4, 3);
        m[(0, 0)] = 5.0;
        m[(1, 1)] = 1.0;
        let m_bar = SliceMeanMatrix { m, n: 1000, r: 1.0 };
        let b = budget(1.0, 1e-3, 1.0);
        let (spec, d_hat) = vgm_noise_spec(&m_bar, &b, VgmBound::Approx).unwrap();
        let floor = vgm_noise_floor(&b, 4, 1000);
        assert_eq!(d_hat, 1);
        assert_relative_eq!(spec.eigvals[0], floor + 4.0, max_relative = 1e-12);
        assert!(spec.eigvals[1..].iter().all(|v| *v == floor));
        assert_eq!(spec.min_eigenvalue(), floor);
    }

    #[test]
    fn zero_signal_vgm_is_isotropic() {
        let m_bar = SliceMeanMatrix { m: Matrix::zeros(5, 3), n: 500, r: 1.0 };
        let b = budget(1.0, 1e-3, 1.0);
        let (spec, _) = vgm_noise_spec(&m_bar, &b, VgmBound::Approx).unwrap();
        let floor = spec.floor;
        assert!(spec.eigvals.iter().all(|v| *v == floor));
        let cov = spec.covariance();
        approx::assert_abs_diff_eq!(cov, Matrix::identity(5, 5) * floor, epsilon = 1e-15);
    }

    #[test]
    fn covariance_sd_formula() {
        // p=1, n=100, ε=1, δ=0.01: (2/100)·√(2·ln(2/(2√(2π)·0.01))) + 1/100
        let expected = 0.02 * (2.0 * (2.0 / (2.0 * (2.0 * std::f64::consts::PI).sqrt() * 0.01)).ln()).sqrt() + 0.01;
        assert_relative_eq!(covariance_noise_sd(1, 100, 1.0, 0.01), expected, max_relative = 1e-15);
        assert_relative_eq!(covariance_noise_sd(1, 100, 1.0, 0.01), 0.064_304_560_786_611_05, max_relative = 1e-10);
    }

    #[test]
    fn private_covariance_is_symmetric() {
        let cov = CovarianceEstimate {
            sigma: Matrix::identity(4, 4),
            c_r: 2.0,
            n: 200,
        };
        let mut rng = SeededRng::new(1, 1);
        let out = private_covariance(&cov, &budget(1.0, 1e-3, 3.0), &mut rng).unwrap();
        assert_eq!(out, out.transpose());
    }

    #[test]
    fn budget_validation() {
        assert!(PrivacyBudget::new(0.0, 0.1, 1.0).is_err());
        assert!(PrivacyBudget::new(1.0, 1.0, 1.0).is_err());
        assert!(PrivacyBudget::new(1.0, 0.1, 0.0).is_err());
    }
}
