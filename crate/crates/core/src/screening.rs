//! Collaborative conditional-mean-difference (CCMD) variable screening.
//!
//! Each client thresholds the magnitudes of its within-slice truncated means
//! and uploads the flagged indices as a multiset; the server keeps every index
//! whose pooled multiplicity exceeds half the number of clients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{invalid, FsirError, Result};
use crate::numerics::Matrix;

/// Multiset of flagged covariate indices (0-based), stored as index → count.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientVote {
    counts: BTreeMap<usize, usize>,
    /// Slices skipped because they held no samples.
    pub empty_slices: usize,
}

impl ClientVote {
    pub fn multiplicity(&self, index: usize) -> usize {
        self.counts.get(&index).copied().unwrap_or(0)
    }

    /// Sorted `(index, multiplicity)` pairs.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.counts.iter().map(|(&i, &c)| (i, c)).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut v = Self::default();
        for (i, c) in pairs {
            if c > 0 {
                *v.counts.entry(i).or_default() += c;
            }
        }
        v
    }

    /// Multiset sum.
    pub fn union(&mut self, other: &ClientVote) {
        for (&i, &c) in &other.counts {
            *self.counts.entry(i).or_default() += c;
        }
        self.empty_slices += other.empty_slices;
    }

    /// Collapses every multiplicity to 1.
    pub fn distinct(&self) -> Self {
        Self {
            counts: self.counts.keys().map(|&i| (i, 1)).collect(),
            empty_slices: self.empty_slices,
        }
    }
}

/// Sorted, distinct covariate indices (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveSet {
    indices: Vec<usize>,
}

impl ActiveSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices }
    }

    pub fn full(p: usize) -> Self {
        Self {
            indices: (0..p).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    pub fn is_superset_of(&self, other: &[usize]) -> bool {
        other.iter().all(|&j| self.contains(j))
    }
}

/// How a client's flags are counted towards the majority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteUnit {
    /// Every (slice, index) flag counts.
    Slice,
    /// Each client counts an index at most once.
    #[default]
    Client,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum Threshold {
    Fixed(f64),
    /// `(1 − γ)`-quantile of the client's own `|Ω_{j,h}|` values.
    Quantile(f64),
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Quantile(0.05)
    }
}

/// `Ω_{j,h}`: absolute within-slice mean of truncated `X_j` (divisor `n_h`).
/// The returned mask is false for empty slices, whose column stays zero.
pub fn conditional_mean_magnitudes(d: &LabeledDataset, r: f64) -> Result<(Matrix, Vec<bool>)> {
    if !(r > 0.0) {
        return invalid("truncation level must be positive");
    }
    let p = d.p();
    let mut sums = Matrix::zeros(p, d.h());
    for (j, xj) in d.x().column_iter().enumerate() {
        for (&v, &label) in xj.iter().zip(d.labels()) {
            sums[(j, label - 1)] += v.clamp(-r, r);
        }
    }
    let counts = d.slice_counts();
    let mut present = vec![true; d.h()];
    for (h, &c) in counts.iter().enumerate() {
        if c == 0 {
            present[h] = false;
        } else {
            let mut col = sums.column_mut(h);
            col /= c as f64;
            col.apply(|v| *v = v.abs());
        }
    }
    Ok((sums, present))
}

/// Resolves a threshold rule against a client's Ω values.
pub fn resolve_threshold(rule: Threshold, omega: &Matrix, present: &[bool]) -> Result<f64> {
    match rule {
        Threshold::Fixed(t) if t > 0.0 => Ok(t),
        Threshold::Fixed(t) => invalid(format!("screening threshold must be positive, got {t}")),
        Threshold::Quantile(g) if g > 0.0 && g < 1.0 => {
            let mut values: Vec<f64> = present
                .iter()
                .enumerate()
                .filter(|(_, &ok)| ok)
                .flat_map(|(h, _)| omega.column(h).iter().copied().collect::<Vec<_>>())
                .collect();
            if values.is_empty() {
                return invalid("no non-empty slices to set a threshold from");
            }
            values.sort_by(f64::total_cmp);
            // lower empirical quantile
            let k = (((1.0 - g) * values.len() as f64).ceil() as usize).clamp(1, values.len());
            Ok(values[k - 1])
        }
        Threshold::Quantile(g) => invalid(format!("quantile level must lie in (0, 1), got {g}")),
    }
}

/// Client step: flag `{ j : Ω_{j,h} > t }` in every non-empty slice and
/// return the multiset sum over slices.
pub fn ccmd_client(d: &LabeledDataset, r: f64, t: Threshold) -> Result<ClientVote> {
    let (omega, present) = conditional_mean_magnitudes(d, r)?;
    let t = resolve_threshold(t, &omega, &present)?;
    let mut vote = ClientVote::default();
    for (h, &ok) in present.iter().enumerate() {
        if !ok {
            vote.empty_slices += 1;
            continue;
        }
        for (j, &w) in omega.column(h).iter().enumerate() {
            if w > t {
                *vote.counts.entry(j).or_default() += 1;
            }
        }
    }
    if vote.empty_slices > 0 {
        log::warn!("ccmd: {} empty slice(s) skipped", vote.empty_slices);
    }
    Ok(vote)
}

/// Server step: pool the votes and keep indices with multiplicity `> k/2`.
pub fn ccmd_aggregate(votes: &[ClientVote], k: usize, unit: VoteUnit) -> Result<ActiveSet> {
    if votes.is_empty() {
        return invalid("no votes to aggregate");
    }
    let mut pooled = ClientVote::default();
    for v in votes {
        match unit {
            VoteUnit::Slice => pooled.union(v),
            VoteUnit::Client => pooled.union(&v.distinct()),
        }
    }
    let indices = pooled
        .counts
        .iter()
        .filter(|(_, &c)| 2 * c > k)
        .map(|(&i, _)| i)
        .collect();
    Ok(ActiveSet::new(indices))
}

/// Column subset of `d` on the active set, preserving sample order and labels.
pub fn restrict_dataset(d: &LabeledDataset, a: &ActiveSet) -> Result<LabeledDataset> {
    if a.is_empty() {
        return Err(FsirError::ScreeningDegenerate);
    }
    if let Some(&bad) = a.indices().iter().find(|&&j| j >= d.p()) {
        return invalid(format!("active index {bad} out of range for p = {}", d.p()));
    }
    Ok(d.select_columns(a.indices()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dataset whose within-slice means equal `means[(j, h)]` exactly: each
    /// slice holds two copies of its mean vector.
    fn planted(means: &Matrix) -> LabeledDataset {
        let (p, h) = means.shape();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for s in 0..h {
            for _ in 0..2 {
                rows.push(means.column(s).iter().copied().collect::<Vec<_>>());
                labels.push(s + 1);
            }
        }
        let x = Matrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        LabeledDataset::from_labels(x, labels, h).unwrap()
    }

    #[test]
    fn client_vote_by_hand() {
        let means = Matrix::from_row_slice(2, 2, &[5.0, 0.0, 0.0, 0.0]);
        let vote = ccmd_client(&planted(&means), 10.0, Threshold::Fixed(1.0)).unwrap();
        assert_eq!(vote.pairs(), vec![(0, 1)]);

        let vote = ccmd_client(&planted(&means), 10.0, Threshold::Fixed(6.0)).unwrap();
        assert!(vote.is_empty());
    }

    #[test]
    fn multiplicity_counts_slices() {
        let mut means = Matrix::zeros(4, 4);
        means.row_mut(2).fill(3.0);
        let vote = ccmd_client(&planted(&means), 10.0, Threshold::Fixed(1.0)).unwrap();
        assert_eq!(vote.multiplicity(2), 4);
    }

    #[test]
    fn aggregate_majority_rule() {
        let v = ClientVote::from_pairs([(7, 1)]);
        let empty = ClientVote::default();
        let out = ccmd_aggregate(&[v.clone(), v.clone(), empty.clone()], 3, VoteUnit::Slice).unwrap();
        assert_eq!(out.indices(), &[7]);

        let out = ccmd_aggregate(&[v.clone(), empty.clone()], 2, VoteUnit::Slice).unwrap();
        assert!(out.is_empty());

        let both = ClientVote::from_pairs([(3, 2)]);
        let out = ccmd_aggregate(
            &[both.clone(), both.clone(), empty.clone(), empty.clone()],
            4,
            VoteUnit::Slice,
        )
        .unwrap();
        assert_eq!(out.indices(), &[3]);
        let out = ccmd_aggregate(&[both.clone(), both, empty.clone(), empty], 4, VoteUnit::Client).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn restrict_keeps_columns() {
        let x = Matrix::from_row_slice(1, 3, &[5.0, 7.0, 9.0]);
        let d = LabeledDataset::from_labels(x, vec![1], 1).unwrap();
        let r = restrict_dataset(&d, &ActiveSet::new(vec![1])).unwrap();
        assert_eq!(r.x(), &Matrix::from_row_slice(1, 1, &[7.0]));
        assert_eq!(restrict_dataset(&d, &ActiveSet::full(3)).unwrap(), d);
        assert!(matches!(
            restrict_dataset(&d, &ActiveSet::new(vec![])),
            Err(FsirError::ScreeningDegenerate)
        ));
        assert!(restrict_dataset(&d, &ActiveSet::new(vec![3])).is_err());
    }

    #[test]
    fn empty_slice_is_skipped() {
        let x = Matrix::from_row_slice(2, 2, &[4.0, 0.0, 4.0, 0.0]);
        let d = LabeledDataset::from_labels(x, vec![1, 1], 3).unwrap();
        let vote = ccmd_client(&d, 10.0, Threshold::Fixed(1.0)).unwrap();
        assert_eq!(vote.empty_slices, 2);
        assert_eq!(vote.pairs(), vec![(0, 1)]);
    }

    #[test]
    fn quantile_threshold() {
        let omega = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(resolve_threshold(Threshold::Quantile(0.25), &omega, &[true, true]).unwrap(), 3.0);
        assert_eq!(resolve_threshold(Threshold::Quantile(0.5), &omega, &[true, false]).unwrap(), 1.0);
        assert!(resolve_threshold(Threshold::Fixed(0.0), &omega, &[true, true]).is_err());
    }
}
