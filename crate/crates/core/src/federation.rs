//! The one-shot federated SIR protocol.
//!
//! Clients compute truncated slice means and second moments, perturb them
//! and upload them once together with their sample size. The server takes the
//! sample-size weighted averages, extracts the leading left singular vectors
//! of the merged slice means and maps them through the inverse of the merged
//! covariance. High-dimensional clients first agree on an active variable set
//! through the CCMD vote and run the same pipeline on the retained columns.

use serde::{Deserialize, Serialize};

use crate::data::{covariance_estimate, slice_mean_matrix, LabeledDataset};
use crate::dp::{
    budget_check, iid_gaussian_mechanism, largest_gap_dimension, min_sample_size,
    private_covariance, vgm_inverse_norm_bound, vgm_mechanism, MechanismKind, PrivacyBudget,
    VgmBound, VgmNoiseSpec,
};
use crate::error::{invalid, FsirError, Result};
use crate::numerics::{solve_spd, stream_id, svd, sym_eig, Matrix, SeededRng};
use crate::screening::{ccmd_aggregate, ccmd_client, restrict_dataset, ActiveSet, Threshold, VoteUnit};
use crate::trace::{checksum, TraceEvent};

/// Stream domain tag for client-side mechanism noise.
pub const CLIENT_NOISE_STREAM: u64 = 0x6e6f_6973_65;

/// Noise applied to the client releases. `None` disables both releases'
/// perturbation and the budget check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    None,
    Iid,
    #[default]
    Vgm,
}

impl Mechanism {
    pub fn kind(self) -> Option<MechanismKind> {
        match self {
            Mechanism::None => None,
            Mechanism::Iid => Some(MechanismKind::Iid),
            Mechanism::Vgm => Some(MechanismKind::Vgm),
        }
    }
}

/// `δ` either fixed or `n^{-a}` resolved against each client's sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum DeltaRule {
    Fixed(f64),
    PowerOfN(f64),
}

impl DeltaRule {
    pub fn resolve(self, n: usize) -> f64 {
        match self {
            DeltaRule::Fixed(d) => d,
            DeltaRule::PowerOfN(a) => (n as f64).powf(-a),
        }
    }
}

impl Default for DeltaRule {
    fn default() -> Self {
        DeltaRule::PowerOfN(1.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HighDimMode {
    /// Screen when `p` exceeds the smallest client sample size.
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsirConfig {
    pub mechanism: Mechanism,
    pub epsilon_m: f64,
    pub delta_m: DeltaRule,
    pub epsilon_x: f64,
    pub delta_x: DeltaRule,
    /// Truncation level.
    pub r: f64,
    /// Tolerated noise sd for the minimal-sample-size rule.
    pub sigma0: f64,
    pub vgm_bound: VgmBound,
    pub forced_d: Option<usize>,
    pub high_dim: HighDimMode,
    pub threshold: Threshold,
    pub vote_unit: VoteUnit,
    /// Subtract each client's column means before truncation.
    pub center: bool,
    pub seed: u64,
}

impl Default for FsirConfig {
    fn default() -> Self {
        Self {
            mechanism: Mechanism::Vgm,
            epsilon_m: 1.0,
            delta_m: DeltaRule::default(),
            epsilon_x: 1.0,
            delta_x: DeltaRule::default(),
            r: 3.0,
            sigma0: 1.0,
            vgm_bound: VgmBound::Approx,
            forced_d: None,
            high_dim: HighDimMode::Auto,
            threshold: Threshold::default(),
            vote_unit: VoteUnit::Client,
            center: false,
            seed: 0,
        }
    }
}

impl FsirConfig {
    pub fn budget_m(&self, n: usize) -> Result<PrivacyBudget> {
        PrivacyBudget::new(self.epsilon_m, self.delta_m.resolve(n), self.r)
    }

    pub fn budget_x(&self, n: usize) -> Result<PrivacyBudget> {
        PrivacyBudget::new(self.epsilon_x, self.delta_x.resolve(n), self.r)
    }

    /// Whether a client of size `n` releasing `p` columns passes the budget
    /// check; always true without noise.
    pub fn admits(&self, n: usize, p: usize) -> Result<bool> {
        if self.mechanism == Mechanism::None {
            return Ok(true);
        }
        Ok(budget_check(n, &self.budget_m(n)?, p, self.sigma0))
    }
}

/// What a client releases to the server.
#[derive(Debug, Clone)]
pub struct ClientUpload {
    pub client: usize,
    pub m_tilde: Matrix,
    pub sigma_tilde: Matrix,
    pub n: usize,
    /// Largest truncated row norm, needed to interpret the covariance noise.
    pub c_r: f64,
    pub mechanism: Option<MechanismKind>,
    pub d_hat: Option<usize>,
    pub vgm: Option<VgmNoiseSpec>,
}

impl ClientUpload {
    /// `λ_min(Σ_ξ) · σ²_vgm` for a VGM upload, where `σ²_vgm` bounds
    /// `‖Σ_ξ⁻¹‖₂`. At least 1 means the privacy condition holds.
    pub fn vgm_condition(&self, config: &FsirConfig) -> Result<Option<f64>> {
        let Some(spec) = &self.vgm else {
            return Ok(None);
        };
        let budget = config.budget_m(self.n)?;
        let lambda_min = *sym_eig(&spec.covariance())?
            .eigenvalues
            .last()
            .expect("non-empty spectrum");
        Ok(Some(lambda_min * vgm_inverse_norm_bound(&budget, self.m_tilde.nrows(), self.n)))
    }
}

/// Client steps: local statistics, perturbation, upload.
pub fn client_pipeline(
    client: usize,
    d: &LabeledDataset,
    config: &FsirConfig,
    rng: &mut SeededRng,
) -> Result<ClientUpload> {
    let local;
    let d = if config.center {
        local = d.centered();
        &local
    } else {
        d
    };
    let n = d.n();
    let p = d.p();
    let m_bar = slice_mean_matrix(d, config.r)?;
    let cov = covariance_estimate(d, config.r)?;

    let (m_tilde, sigma_tilde, d_hat, vgm) = match config.mechanism {
        Mechanism::None => (m_bar.m, cov.sigma, None, None),
        mech => {
            let budget_m = config.budget_m(n)?;
            if !budget_check(n, &budget_m, p, config.sigma0) {
                return Err(FsirError::ClientExcluded {
                    client,
                    n,
                    required: min_sample_size(&budget_m, p, config.sigma0),
                });
            }
            let (m_tilde, d_hat, vgm) = if mech == Mechanism::Iid {
                (iid_gaussian_mechanism(&m_bar, &budget_m, rng)?, None, None)
            } else {
                let rel = vgm_mechanism(&m_bar, &budget_m, config.vgm_bound, rng)?;
                (rel.m_tilde, Some(rel.d_hat), Some(rel.spec))
            };
            let sigma_tilde = private_covariance(&cov, &config.budget_x(n)?, rng)?;
            (m_tilde, sigma_tilde, d_hat, vgm)
        }
    };
    Ok(ClientUpload {
        client,
        m_tilde,
        sigma_tilde,
        n,
        c_r: cov.c_r,
        mechanism: config.mechanism.kind(),
        d_hat,
        vgm,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    pub merged_m: Matrix,
    pub merged_sigma: Matrix,
    pub total_n: usize,
    pub active: Option<ActiveSet>,
    pub clients: usize,
}

impl ServerState {
    /// `Λ̃ = M̃ M̃ᵀ`.
    pub fn kernel(&self) -> Matrix {
        &self.merged_m * self.merged_m.transpose()
    }
}

/// Sample-size weighted averages of the uploads, accumulated in client-id
/// order so the result does not depend on arrival order.
pub fn server_merge(uploads: &[ClientUpload]) -> Result<ServerState> {
    let Some(first) = uploads.first() else {
        return invalid("no uploads to merge");
    };
    let (p, h) = first.m_tilde.shape();
    for u in uploads {
        if u.m_tilde.shape() != (p, h) {
            return Err(FsirError::Protocol {
                client: u.client,
                message: format!(
                    "slice mean matrix is {}x{}, expected {p}x{h}",
                    u.m_tilde.nrows(),
                    u.m_tilde.ncols()
                ),
            });
        }
        if u.sigma_tilde.shape() != (p, p) {
            return Err(FsirError::Protocol {
                client: u.client,
                message: format!(
                    "covariance is {}x{}, expected {p}x{p}",
                    u.sigma_tilde.nrows(),
                    u.sigma_tilde.ncols()
                ),
            });
        }
        if u.n == 0 {
            return Err(FsirError::Protocol {
                client: u.client,
                message: "zero sample size".into(),
            });
        }
    }
    let mut order: Vec<&ClientUpload> = uploads.iter().collect();
    order.sort_by_key(|u| u.client);

    let total_n: usize = order.iter().map(|u| u.n).sum();
    let mut merged_m = Matrix::zeros(p, h);
    let mut merged_sigma = Matrix::zeros(p, p);
    for u in &order {
        let w = u.n as f64 / total_n as f64;
        merged_m += &u.m_tilde * w;
        merged_sigma += &u.sigma_tilde * w;
    }
    Ok(ServerState {
        merged_m,
        merged_sigma,
        total_n,
        active: None,
        clients: order.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceEstimate {
    /// Columns span the estimated dimension-reduction subspace; unnormalized.
    pub beta: Matrix,
    pub d: usize,
    /// Dimension the largest-gap rule picked, whatever `d` was used.
    pub d_rule: usize,
    /// Global coordinates that the rows of `beta` refer to.
    pub embedding: Option<ActiveSet>,
}

/// Server steps: SVD of the merged slice means, structure dimension, and
/// `β̃ = Σ̃⁻¹ Ũ_d`.
pub fn estimate_subspace(state: &ServerState, forced_d: Option<usize>) -> Result<SubspaceEstimate> {
    let dec = svd(&state.merged_m)?;
    let p = state.merged_m.nrows();
    let rank_bound = p.min(state.merged_m.ncols());
    let d_rule = largest_gap_dimension(&dec.singular_values, rank_bound);
    let d = match forced_d {
        Some(d) if d == 0 || d > rank_bound => {
            return invalid(format!("forced dimension {d} outside 1..={rank_bound}"));
        }
        Some(d) => {
            if d != d_rule {
                log::info!("forced structure dimension {d} overrides gap rule choice {d_rule}");
            }
            d
        }
        None => d_rule,
    };
    let u = dec.u.columns(0, d).into_owned();
    let beta = solve_spd(&state.merged_sigma, &u, 0.0)?;
    Ok(SubspaceEstimate {
        beta,
        d,
        d_rule,
        embedding: state.active.clone(),
    })
}

/// Places the rows of `est.beta` at the embedded global indices and zeros
/// elsewhere.
pub fn embed(est: &SubspaceEstimate, p_global: usize) -> Result<SubspaceEstimate> {
    let Some(active) = &est.embedding else {
        return invalid("estimate carries no embedding");
    };
    if active.len() != est.beta.nrows() {
        return invalid(format!(
            "embedding has {} indices for {} rows",
            active.len(),
            est.beta.nrows()
        ));
    }
    if let Some(&bad) = active.indices().iter().find(|&&j| j >= p_global) {
        return invalid(format!("embedded index {bad} out of range for p = {p_global}"));
    }
    let mut beta = Matrix::zeros(p_global, est.beta.ncols());
    for (row, &j) in active.indices().iter().enumerate() {
        beta.set_row(j, &est.beta.row(row));
    }
    Ok(SubspaceEstimate {
        beta,
        d: est.d,
        d_rule: est.d_rule,
        embedding: None,
    })
}

#[derive(Debug, Clone)]
pub struct FsirOutcome {
    /// Estimate in global coordinates.
    pub estimate: SubspaceEstimate,
    pub state: ServerState,
    pub uploads: Vec<ClientUpload>,
    pub excluded: Vec<usize>,
    pub events: Vec<TraceEvent>,
}

/// Rng for client `k` in replication `replication`.
pub fn client_rng(seed: u64, replication: u64, client: usize) -> SeededRng {
    SeededRng::new(seed, stream_id(&[CLIENT_NOISE_STREAM, replication, client as u64]))
}

/// End-to-end protocol over `clients`; client `k` is `clients[k]`.
pub fn run_fsir(clients: &[LabeledDataset], config: &FsirConfig, replication: u64) -> Result<FsirOutcome> {
    server_round(client_round(clients, config, replication)?, config)
}

/// Everything the server has received once the clients are done.
#[derive(Debug, Clone)]
pub struct ClientRound {
    pub uploads: Vec<ClientUpload>,
    pub active: Option<ActiveSet>,
    /// Sorted ids of clients left out by the budget check.
    pub excluded: Vec<usize>,
    pub events: Vec<TraceEvent>,
    /// Covariate count before screening.
    pub p: usize,
}

/// Budget check, optional screening and the client uploads.
pub fn client_round(clients: &[LabeledDataset], config: &FsirConfig, replication: u64) -> Result<ClientRound> {
    let Some(first) = clients.first() else {
        return Err(FsirError::Run("no clients".into()));
    };
    let p = first.p();
    let h = first.h();
    if let Some((k, _)) = clients.iter().enumerate().find(|(_, d)| d.p() != p || d.h() != h) {
        return Err(FsirError::Protocol {
            client: k,
            message: "dimension or slice count differs from client 0".into(),
        });
    }
    let mut events = Vec::new();

    let high_dim = match config.high_dim {
        HighDimMode::Always => true,
        HighDimMode::Never => false,
        HighDimMode::Auto => clients.iter().any(|d| p > d.n()),
    };

    // Budget eligibility at the full dimension; the restricted release is
    // smaller so an admitted client stays admissible after screening.
    let mut admitted = Vec::new();
    let mut excluded = Vec::new();
    for (k, d) in clients.iter().enumerate() {
        if config.admits(d.n(), p)? {
            admitted.push(k);
        } else {
            let budget = config.budget_m(d.n())?;
            events.push(TraceEvent::Exclusion {
                client: k,
                n: d.n(),
                required: min_sample_size(&budget, p, config.sigma0),
            });
            excluded.push(k);
        }
    }
    if admitted.is_empty() {
        return Err(FsirError::Run(format!(
            "all {} clients excluded by the privacy budget",
            clients.len()
        )));
    }

    let active = if high_dim {
        let mut votes = Vec::with_capacity(admitted.len());
        for &k in &admitted {
            let local;
            let d = if config.center {
                local = clients[k].centered();
                &local
            } else {
                &clients[k]
            };
            let vote = ccmd_client(d, config.r, config.threshold)?;
            events.push(TraceEvent::ClientVote {
                client: k,
                pairs: vote.pairs(),
            });
            votes.push(vote);
        }
        let set = ccmd_aggregate(&votes, votes.len(), config.vote_unit)?;
        events.push(TraceEvent::Screen {
            active: set.indices().to_vec(),
        });
        if set.is_empty() {
            return Err(FsirError::ScreeningDegenerate);
        }
        Some(set)
    } else {
        None
    };

    let mut uploads = Vec::with_capacity(admitted.len());
    for &k in &admitted {
        let restricted;
        let d = match &active {
            Some(a) => {
                restricted = restrict_dataset(&clients[k], a)?;
                &restricted
            }
            None => &clients[k],
        };
        let mut rng = client_rng(config.seed, replication, k);
        match client_pipeline(k, d, config, &mut rng) {
            Ok(u) => {
                events.push(TraceEvent::ClientUpload {
                    client: k,
                    n: u.n,
                    m_checksum: checksum(&u.m_tilde),
                    sigma_checksum: checksum(&u.sigma_tilde),
                });
                uploads.push(u);
            }
            Err(FsirError::ClientExcluded { client, n, required }) => {
                events.push(TraceEvent::Exclusion { client, n, required });
                excluded.push(client);
            }
            Err(e) => return Err(e),
        }
    }
    if uploads.is_empty() {
        return Err(FsirError::Run("no client uploads after exclusions".into()));
    }
    excluded.sort_unstable();
    Ok(ClientRound {
        uploads,
        active,
        excluded,
        events,
        p,
    })
}

/// Merge, structure dimension and directions, embedded back into the full
/// covariate space after screening.
pub fn server_round(round: ClientRound, config: &FsirConfig) -> Result<FsirOutcome> {
    let ClientRound {
        uploads,
        active,
        excluded,
        mut events,
        p,
    } = round;
    let mut state = server_merge(&uploads)?;
    state.active = active;
    events.push(TraceEvent::Merge {
        clients: state.clients,
        total_n: state.total_n,
        m_checksum: checksum(&state.merged_m),
        sigma_checksum: checksum(&state.merged_sigma),
    });

    let local = estimate_subspace(&state, config.forced_d)?;
    let estimate = if local.embedding.is_some() {
        embed(&local, p)?
    } else {
        local
    };
    events.push(TraceEvent::Estimate {
        d: estimate.d,
        d_rule: estimate.d_rule,
        beta_checksum: checksum(&estimate.beta),
    });

    Ok(FsirOutcome {
        estimate,
        state,
        uploads,
        excluded,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn upload(client: usize, n: usize, m: Matrix, sigma: Matrix) -> ClientUpload {
        ClientUpload {
            client,
            m_tilde: m,
            sigma_tilde: sigma,
            n,
            c_r: 1.0,
            mechanism: None,
            d_hat: None,
            vgm: None,
        }
    }

    #[test]
    fn merge_single_and_weighted() {
        let m1 = Matrix::from_element(3, 2, 1.0);
        let m2 = Matrix::from_element(3, 2, 5.0);
        let s1 = Matrix::identity(3, 3);
        let s2 = Matrix::identity(3, 3) * 3.0;

        let st = server_merge(&[upload(0, 100, m1.clone(), s1.clone())]).unwrap();
        assert_eq!(st.merged_m, m1);
        assert_eq!(st.total_n, 100);

        let st = server_merge(&[upload(0, 50, m1.clone(), s1.clone()), upload(1, 50, m2.clone(), s2.clone())])
            .unwrap();
        assert_abs_diff_eq!(st.merged_m, Matrix::from_element(3, 2, 3.0), epsilon = 1e-15);

        let st = server_merge(&[upload(0, 100, m1.clone(), s1.clone()), upload(1, 300, m2.clone(), s2.clone())])
            .unwrap();
        assert_abs_diff_eq!(st.merged_m, &m1 * 0.25 + &m2 * 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(st.merged_sigma, &s1 * 0.25 + &s2 * 0.75, epsilon = 1e-15);
        assert_eq!(st.total_n, 400);
    }

    #[test]
    fn merge_is_order_invariant() {
        let a = upload(0, 10, Matrix::from_element(2, 2, 0.1), Matrix::identity(2, 2));
        let b = upload(1, 30, Matrix::from_element(2, 2, 0.7), Matrix::identity(2, 2) * 2.0);
        let c = upload(2, 70, Matrix::from_element(2, 2, -0.3), Matrix::identity(2, 2) * 0.5);
        let x = server_merge(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let y = server_merge(&[c, a, b]).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn merge_rejects_mismatch() {
        let a = upload(0, 10, Matrix::zeros(2, 2), Matrix::identity(2, 2));
        let b = upload(4, 10, Matrix::zeros(3, 2), Matrix::identity(3, 3));
        match server_merge(&[a, b]) {
            Err(FsirError::Protocol { client, .. }) => assert_eq!(client, 4),
            other => panic!("expected protocol error, got {other:?}"),
        }
    }

    #[test]
    fn estimate_with_identity_covariance() {
        let mut m = Matrix::zeros(4, 3);
        m.row_mut(0).copy_from_slice(&[1.0, 1.0, 1.0]);
        let st = ServerState {
            merged_m: m,
            merged_sigma: Matrix::identity(4, 4),
            total_n: 10,
            active: None,
            clients: 1,
        };
        let est = estimate_subspace(&st, None).unwrap();
        assert_eq!(est.d, 1);
        assert_abs_diff_eq!(est.beta.abs(), Matrix::from_column_slice(4, 1, &[1.0, 0.0, 0.0, 0.0]), epsilon = 1e-12);

        let est = estimate_subspace(&st, Some(2)).unwrap();
        assert_eq!(est.d, 2);
        assert_eq!(est.d_rule, 1);
        assert!(estimate_subspace(&st, Some(4)).is_err());
    }

    #[test]
    fn embed_places_rows() {
        let est = SubspaceEstimate {
            beta: Matrix::from_column_slice(2, 1, &[3.0, 4.0]),
            d: 1,
            d_rule: 1,
            embedding: Some(ActiveSet::new(vec![1, 3])),
        };
        let e = embed(&est, 4).unwrap();
        assert_eq!(e.beta, Matrix::from_column_slice(4, 1, &[0.0, 3.0, 0.0, 4.0]));
        let back = e.beta.select_rows([1usize, 3].iter());
        assert_eq!(back, est.beta);
        assert!(embed(&est, 3).is_err());

        let full = SubspaceEstimate {
            embedding: Some(ActiveSet::full(2)),
            ..est.clone()
        };
        assert_eq!(embed(&full, 2).unwrap().beta, est.beta);
    }

    #[test]
    fn delta_rule_resolution() {
        assert_eq!(DeltaRule::Fixed(0.01).resolve(123), 0.01);
        approx::assert_relative_eq!(DeltaRule::PowerOfN(1.1).resolve(1000), 1000f64.powf(-1.1));
    }
}
