//! Replication loops and the artifacts they write.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use fsir::dp::PrivacyBudget;
use fsir::federation::{client_round, run_fsir, server_round, FsirOutcome, HighDimMode, Mechanism};
use fsir::metrics::{projection_loss, subspace_angle, tracing_experiment, whiten, AttackTarget, RocCurve};
use fsir::numerics::{gaussian_matrix, stream_id, SeededRng};
use fsir::screening::{ccmd_aggregate, ccmd_client, ActiveSet};
use fsir::simgen::{Model, ModelSpec};
use fsir::trace::to_json_lines;
use fsir::{FsirError, LabeledDataset, Matrix};

use crate::config::{AttackResponse, ExperimentConfig};
use crate::io::{fmt_num, fmt_opt, read_dataset, to_labeled, write_matrix, write_roc, write_rows, IoError};
use crate::reference::{reference_table, ReferenceCell};

const MODEL_STREAM: u64 = 0x6d6f_6465_6c;
const DATA_STREAM: u64 = 0x6461_7461;
const ATTACK_STREAM: u64 = 0x6174_7461_636b;

/// Largest tolerated share of failed replications.
pub const MAX_FAILED_SHARE: f64 = 0.10;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Fsir(#[from] FsirError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{failed} of {total} replications failed (first: {first})")]
    TooManyFailures { failed: usize, total: usize, first: String },
    #[error("{0}")]
    Setup(String),
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.into())
    }
}

/// Runs `f` on a pool of `threads` workers (all cores when `None`).
pub fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, RunError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t);
    }
    let pool = b.build().map_err(|e| RunError::Setup(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Model coefficients and `k` client datasets for replication `rep`.
pub fn synthetic_clients(cfg: &ExperimentConfig, rep: u64) -> Result<(ModelSpec, Vec<LabeledDataset>), FsirError> {
    let sparse = cfg.p > 10;
    let spec = ModelSpec::new(cfg.model, cfg.p, sparse, &mut SeededRng::new(cfg.seed, stream_id(&[MODEL_STREAM, rep])))?
        .with_model1_law(cfg.model1);
    let clients = (0..cfg.k)
        .map(|c| {
            let mut rng = SeededRng::new(cfg.seed, stream_id(&[DATA_STREAM, rep, c as u64]));
            spec.generate(cfg.n, cfg.h, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((spec, clients))
}

/// Client datasets from the configured CSV file.
pub fn csv_clients(cfg: &ExperimentConfig) -> Result<(Vec<LabeledDataset>, Vec<String>), RunError> {
    let path = cfg.csv.as_ref().ok_or_else(|| RunError::Setup("no csv configured".into()))?;
    let exclude: Vec<&str> = cfg.client_column.iter().map(String::as_str).collect();
    let (x, y, names) = read_dataset(path, &cfg.response, &exclude)?;
    let n = x.nrows();
    let groups: Vec<Vec<usize>> = match &cfg.client_column {
        Some(col) => {
            let t = crate::io::read_table(path)?;
            let ids = t
                .column(col)
                .ok_or_else(|| RunError::Setup(format!("no client column `{col}`")))?;
            let mut keys: Vec<i64> = ids.iter().map(|&v| v as i64).collect();
            keys.sort_unstable();
            keys.dedup();
            keys.iter()
                .map(|&key| (0..n).filter(|&i| ids[i] as i64 == key).collect())
                .collect()
        }
        None => {
            if cfg.k > n {
                return Err(RunError::Setup(format!("{} clients for {n} rows", cfg.k)));
            }
            (0..cfg.k)
                .map(|c| (c * n / cfg.k..(c + 1) * n / cfg.k).collect())
                .collect()
        }
    };
    let clients = groups
        .iter()
        .map(|rows| {
            let xs = x.select_rows(rows.iter());
            let ys = rows.iter().map(|&i| y[i]).collect();
            to_labeled(xs, ys, cfg.h, &cfg.slicing)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((clients, names))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRow {
    pub replication: usize,
    pub loss: Option<f64>,
    pub angle: Option<f64>,
    pub d: Option<usize>,
    pub excluded: usize,
    pub active: Option<usize>,
    /// Smallest `λ_min(Σ_ξ)·σ²_vgm` over the VGM uploads.
    pub min_vgm_condition: Option<f64>,
    pub error: Option<String>,
}

/// Everything one replication produces.
pub struct Replication {
    pub row: ReplicationRow,
    pub outcome: Option<FsirOutcome>,
}

pub fn run_replication(cfg: &ExperimentConfig, rep: usize) -> Replication {
    let fail = |e: String| Replication {
        row: ReplicationRow {
            replication: rep,
            loss: None,
            angle: None,
            d: None,
            excluded: 0,
            active: None,
            min_vgm_condition: None,
            error: Some(e),
        },
        outcome: None,
    };
    let (truth, clients) = if cfg.csv.is_some() {
        match csv_clients(cfg) {
            Ok((c, _)) => (None, c),
            Err(e) => return fail(e.to_string()),
        }
    } else {
        match synthetic_clients(cfg, rep as u64) {
            Ok((spec, c)) => (Some(spec.true_beta), c),
            Err(e) => return fail(e.to_string()),
        }
    };
    let fcfg = cfg.fsir();
    let round = match client_round(&clients, &fcfg, rep as u64) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    // recorded even when the server step fails
    let mut min_cond: Option<f64> = None;
    for u in &round.uploads {
        match u.vgm_condition(&fcfg) {
            Ok(Some(c)) => min_cond = Some(min_cond.map_or(c, |m| m.min(c))),
            Ok(None) => {}
            Err(e) => return fail(e.to_string()),
        }
    }
    let excluded = round.excluded.len();
    let outcome = match server_round(round, &fcfg) {
        Ok(o) => o,
        Err(e) => {
            let mut r = fail(e.to_string());
            r.row.excluded = excluded;
            r.row.min_vgm_condition = min_cond;
            return r;
        }
    };
    let (loss, angle) = match &truth {
        Some(b) => match (
            projection_loss(&outcome.estimate.beta, b),
            subspace_angle(&outcome.estimate.beta, b),
        ) {
            (Ok(l), Ok(a)) => (Some(l), Some(a)),
            (Err(e), _) | (_, Err(e)) => return fail(e.to_string()),
        },
        None => (None, None),
    };
    Replication {
        row: ReplicationRow {
            replication: rep,
            loss,
            angle,
            d: Some(outcome.estimate.d),
            excluded: outcome.excluded.len(),
            active: outcome.state.active.as_ref().map(ActiveSet::len),
            min_vgm_condition: min_cond,
            error: None,
        },
        outcome: Some(outcome),
    }
}

/// Mean and `sd/√len` of `values`; the SE is 0 for a single value.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub rows: Vec<ReplicationRow>,
    pub mean: Option<f64>,
    pub se: Option<f64>,
    pub mean_angle: Option<f64>,
    pub failed: usize,
    pub excluded: usize,
    pub wall_time_secs: f64,
    /// Protocol trace lines, when enabled.
    pub trace: Option<String>,
}

impl RunRecord {
    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.loss).collect()
    }

    pub fn min_vgm_condition(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.min_vgm_condition)
            .fold(None, |m: Option<f64>, c| Some(m.map_or(c, |m| m.min(c))))
    }

    /// `config.toml`, `replications.csv`, `summary.csv`, `meta.json` and the
    /// optional `trace.jsonl`.
    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.toml"), self.config.to_toml())?;
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.replication.to_string(),
                    fmt_opt(r.loss),
                    fmt_opt(r.angle),
                    r.d.map(|d| d.to_string()).unwrap_or_default(),
                    r.excluded.to_string(),
                    r.active.map(|a| a.to_string()).unwrap_or_default(),
                    fmt_opt(r.min_vgm_condition),
                    r.error.clone().unwrap_or_default(),
                ]
            })
            .collect();
        write_rows(
            &dir.join("replications.csv"),
            &["replication", "loss", "angle", "d", "excluded", "active", "min_vgm_condition", "error"],
            &rows,
        )?;
        write_rows(
            &dir.join("summary.csv"),
            &["model", "n", "p", "K", "mechanism", "epsilon", "replications", "failed", "excluded", "mean", "se", "mean_angle", "seed"],
            &[vec![
                self.config.model.to_string(),
                self.config.n.to_string(),
                self.config.p.to_string(),
                self.config.k.to_string(),
                mechanism_name(self.config.mechanism).into(),
                fmt_num(self.config.epsilon),
                self.rows.len().to_string(),
                self.failed.to_string(),
                self.excluded.to_string(),
                fmt_opt(self.mean),
                fmt_opt(self.se),
                fmt_opt(self.mean_angle),
                self.config.seed.to_string(),
            ]],
        )?;
        let meta = serde_json::json!({
            "wall_time_secs": self.wall_time_secs,
            "total_epsilon_per_client": self.config.total_epsilon(),
        });
        std::fs::write(dir.join("meta.json"), format!("{meta:#}\n"))?;
        if let Some(t) = &self.trace {
            std::fs::write(dir.join("trace.jsonl"), t)?;
        }
        Ok(())
    }
}

pub fn mechanism_name(m: Mechanism) -> &'static str {
    match m {
        Mechanism::None => "none",
        Mechanism::Iid => "iid",
        Mechanism::Vgm => "vgm",
    }
}

/// Runs every replication, in parallel, and reduces in replication order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord, RunError> {
    let start = Instant::now();
    let (rows, traces) = run_rows(cfg)?;
    summarize(cfg, rows, traces, start.elapsed().as_secs_f64())
}

/// One row per replication, in replication order, with its trace lines when
/// tracing is on.
pub fn run_rows(cfg: &ExperimentConfig) -> Result<(Vec<ReplicationRow>, Vec<Option<String>>), RunError> {
    let reps: Vec<(ReplicationRow, Option<String>)> = with_pool(cfg.threads, || {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let rep = run_replication(cfg, r);
                let trace = match (&rep.outcome, cfg.trace) {
                    (Some(o), true) => Some(to_json_lines(&format!("seed{}-rep{r}", cfg.seed), &o.events)),
                    _ => None,
                };
                (rep.row, trace)
            })
            .collect()
    })?;
    Ok(reps.into_iter().unzip())
}

/// Aggregates the rows; fails when more than [`MAX_FAILED_SHARE`] of the
/// replications failed.
pub fn summarize(
    cfg: &ExperimentConfig,
    rows: Vec<ReplicationRow>,
    traces: Vec<Option<String>>,
    wall_time_secs: f64,
) -> Result<RunRecord, RunError> {
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed as f64 > MAX_FAILED_SHARE * rows.len() as f64 {
        let first = rows.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(RunError::TooManyFailures {
            failed,
            total: rows.len(),
            first,
        });
    }
    for r in rows.iter().filter(|r| r.error.is_some()) {
        log::warn!("replication {} failed: {}", r.replication, r.error.as_deref().unwrap_or(""));
    }
    let losses: Vec<f64> = rows.iter().filter_map(|r| r.loss).collect();
    let angles: Vec<f64> = rows.iter().filter_map(|r| r.angle).collect();
    let (mean, se) = if losses.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_se(&losses);
        (Some(m), Some(s))
    };
    let trace = cfg.trace.then(|| traces.into_iter().flatten().collect::<String>());
    Ok(RunRecord {
        config: cfg.clone(),
        mean,
        se,
        mean_angle: (!angles.is_empty()).then(|| mean_se(&angles).0),
        failed,
        excluded: rows.iter().map(|r| r.excluded).sum(),
        rows,
        wall_time_secs,
        trace,
    })
}

/// Configuration of one published table cell.
pub fn cell_config(which: u8, cell: &ReferenceCell, replications: usize, seed: u64, threads: Option<usize>) -> ExperimentConfig {
    let (epsilon, varies_n) = crate::reference::table_setting(which).expect("known table");
    ExperimentConfig {
        model: cell.model,
        p: cell.p,
        n: cell.n,
        k: cell.k,
        h: 8,
        epsilon,
        mechanism: cell.mechanism,
        // the high-dimensional tables are the screened ones
        high_dim: if varies_n { HighDimMode::Auto } else { HighDimMode::Always },
        replications,
        seed,
        threads,
        ..ExperimentConfig::default()
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: ReferenceCell,
    pub mean: Option<f64>,
    pub se: Option<f64>,
    pub error: Option<String>,
}

/// Which cells of a table to run.
#[derive(Debug, Clone, Default)]
pub struct CellFilter {
    pub models: Vec<Model>,
    pub sizes: Vec<usize>,
    pub ks: Vec<usize>,
    pub mechanisms: Vec<Mechanism>,
}

impl CellFilter {
    pub fn keeps(&self, which: u8, c: &ReferenceCell) -> bool {
        let size = if crate::reference::table_setting(which).is_some_and(|s| s.1) { c.n } else { c.p };
        (self.models.is_empty() || self.models.contains(&c.model))
            && (self.sizes.is_empty() || self.sizes.contains(&size))
            && (self.ks.is_empty() || self.ks.contains(&c.k))
            && (self.mechanisms.is_empty() || self.mechanisms.contains(&c.mechanism))
    }
}

/// Runs the selected cells of table `which`; failing cells are reported,
/// not fatal.
pub fn reproduce_tables(
    which: u8,
    replications: usize,
    seed: u64,
    threads: Option<usize>,
    filter: &CellFilter,
) -> Result<Vec<CellResult>, RunError> {
    let cells = reference_table(which).ok_or_else(|| RunError::Setup(format!("no table {which}, expected 1 to 4")))?;
    let mut out = Vec::new();
    for cell in cells.into_iter().filter(|c| filter.keeps(which, c)) {
        let cfg = cell_config(which, &cell, replications, seed, threads);
        let res = match run_experiment(&cfg) {
            Ok(rec) => CellResult {
                cell,
                mean: rec.mean,
                se: rec.se,
                error: None,
            },
            Err(e) => CellResult {
                cell,
                mean: None,
                se: None,
                error: Some(e.to_string()),
            },
        };
        log::info!(
            "table {which} model {} n={} p={} K={} {}: {}",
            cell.model,
            cell.n,
            cell.p,
            cell.k,
            mechanism_name(cell.mechanism),
            res.mean.map_or_else(|| "NA".to_string(), |m| format!("{m:.3}"))
        );
        out.push(res);
    }
    Ok(out)
}

/// `model,n,p,K,mechanism,mean,se,paper_mean,paper_se`; missing cells are `NA`.
pub fn write_table_csv(path: &Path, results: &[CellResult]) -> Result<(), RunError> {
    let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), fmt_num);
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                r.cell.model.to_string(),
                r.cell.n.to_string(),
                r.cell.p.to_string(),
                r.cell.k.to_string(),
                mechanism_name(r.cell.mechanism).into(),
                na(r.mean),
                na(r.se),
                fmt_num(r.cell.mean),
                fmt_num(r.cell.se),
            ]
        })
        .collect();
    write_rows(path, &["model", "n", "p", "K", "mechanism", "mean", "se", "paper_mean", "paper_se"], &rows)?;
    Ok(())
}

/// Human-readable side-by-side comparison.
pub fn format_table(results: &[CellResult]) -> String {
    let mut s = format!("{:<5} {:>5} {:>5} {:>4} {:<5} {:>14} {:>14}\n", "model", "n", "p", "K", "mech", "mean (se)", "published");
    for r in results {
        let got = match (r.mean, r.se) {
            (Some(m), Some(e)) => format!("{m:.3} ({e:.3})"),
            _ => "NA".into(),
        };
        s.push_str(&format!(
            "{:<5} {:>5} {:>5} {:>4} {:<5} {:>14} {:>14}\n",
            r.cell.model.to_string(),
            r.cell.n,
            r.cell.p,
            r.cell.k,
            mechanism_name(r.cell.mechanism),
            got,
            format!("{:.3} ({:.2})", r.cell.mean, r.cell.se)
        ));
    }
    s
}

/// Arms of the tracing attack, in report order.
pub const ATTACK_ARMS: [&str; 4] = ["raw", "iid", "vgm", "fixed"];

#[derive(Debug, Clone)]
pub struct AttackReport {
    /// Per replication, AUC of each arm in [`ATTACK_ARMS`] order.
    pub aucs: Vec<[f64; 4]>,
    pub mean: [f64; 4],
    pub se: [f64; 4],
    /// Curves of replication 0.
    pub curves: Vec<RocCurve>,
}

fn attack_data(cfg: &ExperimentConfig, rep: u64) -> Result<LabeledDataset, RunError> {
    if cfg.csv.is_some() {
        let path = cfg.csv.as_ref().expect("checked");
        let (x, y, _) = read_dataset(path, &cfg.response, &[])?;
        if !y.iter().all(|&v| v == 0.0 || v == 1.0) {
            return Err(RunError::Setup("tracing attack needs a 0/1 response".into()));
        }
        return Ok(LabeledDataset::from_binary(whiten(&x)?, y)?);
    }
    let mut rng = SeededRng::new(cfg.seed, stream_id(&[ATTACK_STREAM, 1, rep]));
    match cfg.attack_response {
        AttackResponse::Independent => {
            let x = gaussian_matrix(&mut rng, cfg.n, cfg.p, 0.0, 1.0)?;
            let y = (0..cfg.n).map(|_| f64::from(rng.uniform() < 0.5)).collect();
            Ok(LabeledDataset::from_binary(x, y)?)
        }
        AttackResponse::ModelI => {
            let spec = ModelSpec::new(Model::I, cfg.p, false, &mut SeededRng::new(cfg.seed, stream_id(&[ATTACK_STREAM, 0, rep])))?;
            Ok(spec.generate(cfg.n, 2, &mut rng)?)
        }
    }
}

/// Tracing attack against the released mean-difference direction under the
/// raw, i.i.d., VGM and data-independent arms.
pub fn run_attack_demo(cfg: &ExperimentConfig) -> Result<AttackReport, RunError> {
    let fixed = vec![1.0 / (cfg.p as f64).sqrt(); cfg.p];
    let per_rep: Vec<Result<([f64; 4], Vec<RocCurve>), RunError>> = with_pool(cfg.threads, || {
        (0..cfg.replications as u64)
            .into_par_iter()
            .map(|rep| {
                let d = attack_data(cfg, rep)?;
                let half = (d.n() - 1) / 2;
                let budget = PrivacyBudget::new(cfg.epsilon, cfg.delta.resolve(half.max(1)), cfg.r)?;
                let targets = [
                    AttackTarget::Raw,
                    AttackTarget::Iid,
                    AttackTarget::Vgm,
                    AttackTarget::Fixed(if cfg.csv.is_some() { vec![1.0 / (d.p() as f64).sqrt(); d.p()] } else { fixed.clone() }),
                ];
                let mut aucs = [0.0; 4];
                let mut curves = Vec::with_capacity(4);
                for (a, t) in targets.iter().enumerate() {
                    // each arm sees the same split
                    let mut rng = SeededRng::new(cfg.seed, stream_id(&[ATTACK_STREAM, 2, rep]));
                    let o = tracing_experiment(&d, t, &budget, &mut rng)?;
                    aucs[a] = o.roc.auc;
                    curves.push(o.roc);
                }
                Ok((aucs, curves))
            })
            .collect()
    })?;
    let mut aucs = Vec::with_capacity(per_rep.len());
    let mut curves = Vec::new();
    for (i, r) in per_rep.into_iter().enumerate() {
        let (a, c) = r?;
        if i == 0 {
            curves = c;
        }
        aucs.push(a);
    }
    let mut mean = [0.0; 4];
    let mut se = [0.0; 4];
    for a in 0..4 {
        let col: Vec<f64> = aucs.iter().map(|r| r[a]).collect();
        (mean[a], se[a]) = mean_se(&col);
    }
    Ok(AttackReport { aucs, mean, se, curves })
}

impl AttackReport {
    /// `roc_<arm>.csv` for replication 0 and `auc.csv` per replication.
    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        for (arm, c) in ATTACK_ARMS.iter().zip(&self.curves) {
            write_roc(&dir.join(format!("roc_{arm}.csv")), c)?;
        }
        let rows: Vec<Vec<String>> = self
            .aucs
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let mut r = vec![i.to_string()];
                r.extend(a.iter().map(|&v| fmt_num(v)));
                r
            })
            .collect();
        let mut header = vec!["replication"];
        header.extend(ATTACK_ARMS);
        write_rows(&dir.join("auc.csv"), &header, &rows)?;
        Ok(())
    }

    pub fn summary_line(&self) -> String {
        let parts: Vec<String> = ATTACK_ARMS
            .iter()
            .enumerate()
            .map(|(a, arm)| format!("{arm}={:.4} ({:.4})", self.mean[a], self.se[a]))
            .collect();
        format!("AUC {}", parts.join(" "))
    }
}

/// Datasets for the single-shot subcommands: the CSV clients or replication
/// 0 of the synthetic model.
fn single_shot_clients(cfg: &ExperimentConfig) -> Result<(Vec<LabeledDataset>, Vec<String>, Option<Matrix>), RunError> {
    if cfg.csv.is_some() {
        let (c, names) = csv_clients(cfg)?;
        Ok((c, names, None))
    } else {
        let (spec, c) = synthetic_clients(cfg, 0)?;
        let names = (1..=cfg.p).map(|j| format!("x{j}")).collect();
        Ok((c, names, Some(spec.true_beta)))
    }
}

/// CCMD screening only; returns the active set and covariate names.
pub fn run_screen(cfg: &ExperimentConfig) -> Result<(ActiveSet, Vec<String>), RunError> {
    let (clients, names, _) = single_shot_clients(cfg)?;
    let votes = clients
        .iter()
        .map(|d| ccmd_client(d, cfg.r, cfg.threshold))
        .collect::<Result<Vec<_>, _>>()?;
    let set = ccmd_aggregate(&votes, votes.len(), cfg.vote_unit)?;
    Ok((set, names))
}

pub fn write_active_set(path: &Path, set: &ActiveSet, names: &[String]) -> Result<(), RunError> {
    let rows: Vec<Vec<String>> = set
        .indices()
        .iter()
        .map(|&j| vec![j.to_string(), names.get(j).cloned().unwrap_or_default()])
        .collect();
    write_rows(path, &["index", "name"], &rows)?;
    Ok(())
}

#[derive(Debug)]
pub struct EstimateReport {
    pub outcome: FsirOutcome,
    pub names: Vec<String>,
    /// Loss against the generating coefficients for synthetic data.
    pub loss: Option<f64>,
}

/// One protocol run on the CSV (or synthetic replication 0) data.
pub fn run_estimate(cfg: &ExperimentConfig) -> Result<EstimateReport, RunError> {
    let (clients, names, truth) = single_shot_clients(cfg)?;
    let outcome = run_fsir(&clients, &cfg.fsir(), 0)?;
    let loss = match truth {
        Some(b) => Some(projection_loss(&outcome.estimate.beta, &b)?),
        None => None,
    };
    Ok(EstimateReport { outcome, names, loss })
}

impl EstimateReport {
    pub fn write(&self, dir: &Path) -> Result<PathBuf, RunError> {
        let path = dir.join("beta.csv");
        write_matrix(&path, &self.outcome.estimate.beta, "b")?;
        std::fs::write(
            dir.join("trace.jsonl"),
            to_json_lines("estimate", &self.outcome.events),
        )?;
        Ok(path)
    }
}
