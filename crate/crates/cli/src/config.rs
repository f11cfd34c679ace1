//! Experiment configuration: TOML file, `--set key=value` overrides and
//! named flags, applied in that order over the defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fsir::dp::VgmBound;
use fsir::federation::{DeltaRule, FsirConfig, HighDimMode, Mechanism};
use fsir::screening::{Threshold, VoteUnit};
use fsir::simgen::{Model, Model1Law};
use fsir::Slicing;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid override `{0}`, expected key=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Response law of the synthetic tracing-attack data; covariates are
/// `N(0, I_p)` either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackResponse {
    /// `Y ~ Bernoulli(1/2)` independent of `X`.
    #[default]
    Independent,
    /// Model I's logistic response on a dense index.
    ModelI,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Synthetic model; ignored when `csv` is set.
    pub model: Model,
    /// Data file with a header row; replaces the synthetic generator.
    pub csv: Option<PathBuf>,
    /// Response column of `csv`.
    pub response: String,
    /// Column of `csv` holding client ids; rows are split into `k` contiguous
    /// blocks when absent.
    pub client_column: Option<String>,
    pub p: usize,
    /// Samples per client.
    pub n: usize,
    /// Number of clients.
    pub k: usize,
    /// Slices for a continuous response.
    pub h: usize,
    pub slicing: Slicing,
    /// Budget of the slice-mean release.
    pub epsilon: f64,
    /// Budget of the covariance release; `epsilon` when unset.
    pub epsilon_x: Option<f64>,
    pub delta: DeltaRule,
    /// Truncation level.
    pub r: f64,
    pub sigma0: f64,
    pub mechanism: Mechanism,
    pub vgm_bound: VgmBound,
    /// Structure dimension; the largest-gap rule picks it when unset and
    /// `known_d` is false.
    pub d: Option<usize>,
    /// Use the synthetic model's true structure dimension.
    pub known_d: bool,
    pub high_dim: HighDimMode,
    pub threshold: Threshold,
    pub vote_unit: VoteUnit,
    pub center: bool,
    pub model1: Model1Law,
    /// How the synthetic tracing-attack response relates to the covariates.
    pub attack_response: AttackResponse,
    pub replications: usize,
    pub seed: u64,
    /// Worker threads; all cores when unset.
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    /// Write the protocol trace of every replication.
    pub trace: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: Model::I,
            csv: None,
            response: "y".into(),
            client_column: None,
            p: 10,
            n: 1000,
            k: 10,
            h: 8,
            slicing: Slicing::Local,
            epsilon: 1.0,
            epsilon_x: None,
            delta: DeltaRule::PowerOfN(1.1),
            r: 3.0,
            sigma0: 1.0,
            mechanism: Mechanism::Vgm,
            vgm_bound: VgmBound::Approx,
            d: None,
            known_d: true,
            high_dim: HighDimMode::Auto,
            threshold: Threshold::default(),
            vote_unit: VoteUnit::Client,
            center: false,
            model1: Model1Law::Bernoulli,
            attack_response: AttackResponse::Independent,
            replications: 100,
            seed: 0,
            threads: None,
            out: None,
            trace: false,
        }
    }
}

/// Named command-line overrides; `None` keeps the file or default value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub model: Option<Model>,
    pub csv: Option<PathBuf>,
    pub p: Option<usize>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub h: Option<usize>,
    pub epsilon: Option<f64>,
    pub delta: Option<DeltaRule>,
    pub r: Option<f64>,
    pub mechanism: Option<Mechanism>,
    pub d: Option<usize>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub threshold: Option<Threshold>,
    pub vote_unit: Option<VoteUnit>,
    pub high_dim: Option<HighDimMode>,
}

impl ExperimentConfig {
    /// Defaults, then `file`, then `sets`, then `flags`.
    pub fn load(file: Option<&Path>, sets: &[String], flags: &Overrides) -> Result<Self, ConfigError> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                    path: path.to_path_buf(),
                    source,
                })?;
                text.parse::<toml::Table>().map_err(|e| ConfigError::Parse(e.to_string()))?
            }
            None => toml::Table::new(),
        };
        for s in sets {
            let (key, value) = s.split_once('=').ok_or_else(|| ConfigError::Override(s.clone()))?;
            let key = key.trim();
            let value = value.trim();
            // bare words are strings
            let parsed = format!("v = {value}")
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(value.to_string()));
            table.insert(key.to_string(), parsed);
        }
        let mut cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.apply(flags);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &o.$f { self.$f = v.clone(); } )* };
        }
        set!(model, p, n, k, h, epsilon, delta, r, mechanism, replications, seed, threshold, vote_unit, high_dim);
        if o.csv.is_some() {
            self.csv = o.csv.clone();
        }
        if o.d.is_some() {
            self.d = o.d;
        }
        if o.threads.is_some() {
            self.threads = o.threads;
        }
        if o.out.is_some() {
            self.out = o.out.clone();
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if self.csv.is_none() {
            if self.n == 0 {
                return bad("n must be positive".into());
            }
            if self.p < 2 {
                return bad("p must be at least 2".into());
            }
        }
        if self.h < 2 {
            return bad(format!("h must be at least 2, got {}", self.h));
        }
        for (name, v) in [("epsilon", Some(self.epsilon)), ("epsilon_x", self.epsilon_x)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be positive, got {v}"));
                }
            }
        }
        match self.delta {
            DeltaRule::Fixed(d) if !(d > 0.0 && d < 1.0) => return bad(format!("delta must lie in (0, 1), got {d}")),
            DeltaRule::PowerOfN(a) if !(a > 0.0 && a.is_finite()) => {
                return bad(format!("delta exponent must be positive, got {a}"))
            }
            _ => {}
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return bad(format!("r must be positive, got {}", self.r));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return bad(format!("sigma0 must be positive, got {}", self.sigma0));
        }
        if self.d == Some(0) {
            return bad("d must be positive".into());
        }
        if self.replications == 0 {
            return bad("replications must be positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        match self.threshold {
            Threshold::Fixed(t) if !(t > 0.0) => return bad(format!("threshold must be positive, got {t}")),
            Threshold::Quantile(g) if !(g > 0.0 && g < 1.0) => {
                return bad(format!("quantile level must lie in (0, 1), got {g}"))
            }
            _ => {}
        }
        if let Slicing::FixedBreaks(b) = &self.slicing {
            if b.len() + 1 != self.h {
                return bad(format!("{} breaks for h = {}", b.len(), self.h));
            }
        }
        Ok(())
    }

    /// Structure dimension handed to the estimator.
    pub fn forced_d(&self) -> Option<usize> {
        self.d.or((self.known_d && self.csv.is_none()).then(|| self.model.structure_dim()))
    }

    pub fn fsir(&self) -> FsirConfig {
        FsirConfig {
            mechanism: self.mechanism,
            epsilon_m: self.epsilon,
            delta_m: self.delta,
            epsilon_x: self.epsilon_x.unwrap_or(self.epsilon),
            delta_x: self.delta,
            r: self.r,
            sigma0: self.sigma0,
            vgm_bound: self.vgm_bound,
            forced_d: self.forced_d(),
            high_dim: self.high_dim,
            threshold: self.threshold,
            vote_unit: self.vote_unit,
            center: self.center,
            seed: self.seed,
        }
    }

    /// Total `ε` spent per client by the two releases under basic composition.
    pub fn total_epsilon(&self) -> f64 {
        if self.mechanism == Mechanism::None {
            0.0
        } else {
            self.epsilon + self.epsilon_x.unwrap_or(self.epsilon)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// `0.001` is a fixed `δ`; `n^-1.1` or `1/n^1.1` resolve per client.
pub fn parse_delta(s: &str) -> Result<DeltaRule, String> {
    let t = s.trim().replace(' ', "");
    if let Some(e) = t.strip_prefix("n^-").or_else(|| t.strip_prefix("1/n^")) {
        return e
            .parse::<f64>()
            .map(DeltaRule::PowerOfN)
            .map_err(|_| format!("bad delta exponent in `{s}`"));
    }
    t.parse::<f64>()
        .map(DeltaRule::Fixed)
        .map_err(|_| format!("bad delta `{s}`, expected a number or n^-a"))
}

/// `q:0.05` is a quantile rule, a plain number a fixed threshold.
pub fn parse_threshold(s: &str) -> Result<Threshold, String> {
    let t = s.trim();
    if let Some(g) = t.strip_prefix("q:") {
        return g
            .parse::<f64>()
            .map(Threshold::Quantile)
            .map_err(|_| format!("bad quantile level in `{s}`"));
    }
    t.parse::<f64>()
        .map(Threshold::Fixed)
        .map_err(|_| format!("bad threshold `{s}`, expected a number or q:gamma"))
}

pub fn parse_model(s: &str) -> Result<Model, String> {
    Model::parse(s).ok_or_else(|| format!("unknown model `{s}`, expected I..V"))
}

pub fn parse_mechanism(s: &str) -> Result<Mechanism, String> {
    match s.to_ascii_lowercase().as_str() {
        "none" => Ok(Mechanism::None),
        "iid" => Ok(Mechanism::Iid),
        "vgm" => Ok(Mechanism::Vgm),
        _ => Err(format!("unknown mechanism `{s}`, expected none, iid or vgm")),
    }
}

pub fn parse_vote_unit(s: &str) -> Result<VoteUnit, String> {
    match s.to_ascii_lowercase().as_str() {
        "slice" => Ok(VoteUnit::Slice),
        "client" => Ok(VoteUnit::Client),
        _ => Err(format!("unknown vote unit `{s}`, expected slice or client")),
    }
}

pub fn parse_high_dim(s: &str) -> Result<HighDimMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "auto" => Ok(HighDimMode::Auto),
        "always" => Ok(HighDimMode::Always),
        "never" => Ok(HighDimMode::Never),
        _ => Err(format!("unknown high-dim mode `{s}`, expected auto, always or never")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_cli_over_file_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "n = 500\nk = 20\nmodel = \"III\"\n").unwrap();
        let flags = Overrides {
            k: Some(50),
            ..Default::default()
        };
        let cfg = ExperimentConfig::load(Some(&path), &["epsilon=2".into(), "n=700".into()], &flags).unwrap();
        assert_eq!(cfg.k, 50);
        assert_eq!(cfg.n, 700);
        assert_eq!(cfg.epsilon, 2.0);
        assert_eq!(cfg.model, Model::III);
        assert_eq!(cfg.p, 10);
    }

    #[test]
    fn nested_values_parse() {
        let text = r#"
            mechanism = "iid"
            delta = { kind = "fixed", value = 0.001 }
            threshold = { kind = "quantile", value = 0.1 }
            slicing = { kind = "fixed-breaks", breaks = [0.0] }
            h = 2
        "#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.mechanism, Mechanism::Iid);
        assert_eq!(cfg.delta, DeltaRule::Fixed(0.001));
        assert_eq!(cfg.threshold, Threshold::Quantile(0.1));
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        assert!(toml::from_str::<ExperimentConfig>("bogus = 1").is_err());
        let cfg = ExperimentConfig {
            epsilon: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            delta: DeltaRule::Fixed(1.5),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::load(None, &["nonsense".into()], &Overrides::default()).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig {
            d: Some(2),
            threads: Some(3),
            ..Default::default()
        };
        let back: ExperimentConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn flag_parsers() {
        assert_eq!(parse_delta("n^-1.1").unwrap(), DeltaRule::PowerOfN(1.1));
        assert_eq!(parse_delta("1/n^2").unwrap(), DeltaRule::PowerOfN(2.0));
        assert_eq!(parse_delta("0.01").unwrap(), DeltaRule::Fixed(0.01));
        assert!(parse_delta("x").is_err());
        assert_eq!(parse_threshold("q:0.05").unwrap(), Threshold::Quantile(0.05));
        assert_eq!(parse_threshold("0.3").unwrap(), Threshold::Fixed(0.3));
        assert_eq!(parse_mechanism("VGM").unwrap(), Mechanism::Vgm);
        assert!(parse_model("VI").is_err());
    }

    #[test]
    fn forced_dimension() {
        let cfg = ExperimentConfig {
            model: Model::III,
            ..Default::default()
        };
        assert_eq!(cfg.forced_d(), Some(2));
        let cfg = ExperimentConfig {
            known_d: false,
            ..cfg
        };
        assert_eq!(cfg.forced_d(), None);
    }
}
