use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fsir::federation::{DeltaRule, HighDimMode, Mechanism};
use fsir::screening::{Threshold, VoteUnit};
use fsir::simgen::Model;
use fsir_cli::config::{
    parse_delta, parse_high_dim, parse_mechanism, parse_model, parse_threshold, parse_vote_unit, ConfigError,
    ExperimentConfig, Overrides,
};
use fsir_cli::experiment::{
    format_table, mechanism_name, reproduce_tables, run_attack_demo, run_estimate, run_experiment, run_screen,
    write_active_set, write_table_csv, CellFilter, RunError,
};

#[derive(Parser)]
#[command(name = "fsir", version, about = "Federated sliced inverse regression with differential privacy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration over many replications.
    Simulate(Common),
    /// Reproduce a published loss table.
    Tables {
        #[command(flatten)]
        common: Common,
        /// Table number, 1 to 4.
        #[arg(long, default_value_t = 1)]
        table: u8,
        /// Restrict to these models.
        #[arg(long = "models", value_delimiter = ',', value_parser = parse_model)]
        models: Vec<Model>,
        /// Restrict to these n (tables 1, 2) or p (tables 3, 4).
        #[arg(long = "sizes", value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Restrict to these client counts.
        #[arg(long = "ks", value_delimiter = ',')]
        ks: Vec<usize>,
        /// Restrict to these mechanisms.
        #[arg(long = "mechanisms", value_delimiter = ',', value_parser = parse_mechanism)]
        mechanisms: Vec<Mechanism>,
    },
    /// Tracing attack against raw and privatized mean differences.
    Attack(Common),
    /// Variable screening only; prints the active set.
    Screen(Common),
    /// One protocol run; writes the estimated directions.
    Estimate(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any configuration key, e.g. `--set vgm_bound=exact`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_model)]
    model: Option<Model>,
    /// Data file with a header row.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Number of clients.
    #[arg(long)]
    k: Option<usize>,
    /// Number of slices.
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// A fixed value or `n^-a`.
    #[arg(long, value_parser = parse_delta)]
    delta: Option<DeltaRule>,
    /// Truncation level.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long, value_parser = parse_mechanism)]
    mechanism: Option<Mechanism>,
    /// Structure dimension.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    replications: Option<usize>,
    /// A fixed threshold or `q:gamma`.
    #[arg(long, value_parser = parse_threshold)]
    threshold: Option<Threshold>,
    #[arg(long, value_parser = parse_vote_unit)]
    vote_unit: Option<VoteUnit>,
    #[arg(long, value_parser = parse_high_dim)]
    high_dim: Option<HighDimMode>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            model: self.model,
            csv: self.csv.clone(),
            p: self.p,
            n: self.n,
            k: self.k,
            h: self.h,
            epsilon: self.epsilon,
            delta: self.delta,
            r: self.r,
            mechanism: self.mechanism,
            d: self.d,
            replications: self.replications,
            seed: self.seed,
            threads: self.threads,
            out: self.out.clone(),
            threshold: self.threshold,
            vote_unit: self.vote_unit,
            high_dim: self.high_dim,
        }
    }

    fn load(&self, base: &[String]) -> Result<ExperimentConfig, ConfigError> {
        let mut sets = base.to_vec();
        sets.extend(self.sets.iter().cloned());
        ExperimentConfig::load(self.config.as_deref(), &sets, &self.overrides())
    }
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::Run(e.to_string())
    }
}

fn out_dir(cfg: &ExperimentConfig, default: &str) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| Path::new("runs").join(default))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = c.load(&[])?;
            let rec = run_experiment(&cfg)?;
            let dir = out_dir(&cfg, "simulate");
            rec.write(&dir)?;
            println!(
                "model {} n={} p={} K={} {}: mean loss {} (se {}), {} failed, {} excluded; wrote {}",
                cfg.model,
                cfg.n,
                cfg.p,
                cfg.k,
                mechanism_name(cfg.mechanism),
                rec.mean.map_or("NA".into(), |m| format!("{m:.4}")),
                rec.se.map_or("NA".into(), |s| format!("{s:.4}")),
                rec.failed,
                rec.excluded,
                dir.display()
            );
        }
        Command::Tables {
            common,
            table,
            models,
            sizes,
            ks,
            mechanisms,
        } => {
            let cfg = common.load(&[])?;
            let filter = CellFilter {
                models,
                sizes,
                ks,
                mechanisms,
            };
            let results = reproduce_tables(table, cfg.replications, cfg.seed, cfg.threads, &filter)?;
            let dir = out_dir(&cfg, &format!("table{table}"));
            write_table_csv(&dir.join(format!("table{table}.csv")), &results)?;
            print!("{}", format_table(&results));
        }
        Command::Attack(c) => {
            // synthetic default shape: 13 covariates, 250 samples
            let cfg = c.load(&["p=13".into(), "n=250".into()])?;
            let report = run_attack_demo(&cfg)?;
            let dir = out_dir(&cfg, "attack");
            report.write(&dir)?;
            println!("{}", report.summary_line());
        }
        Command::Screen(c) => {
            let cfg = c.load(&[])?;
            let (set, names) = run_screen(&cfg)?;
            let dir = out_dir(&cfg, "screen");
            write_active_set(&dir.join("active.csv"), &set, &names)?;
            let shown: Vec<&str> = set.indices().iter().map(|&j| names[j].as_str()).collect();
            println!("active set ({}): {}", set.len(), shown.join(" "));
        }
        Command::Estimate(c) => {
            let cfg = c.load(&[])?;
            let report = run_estimate(&cfg)?;
            let dir = out_dir(&cfg, "estimate");
            std::fs::create_dir_all(&dir).map_err(|e| Failure::Run(e.to_string()))?;
            let path = report.write(&dir)?;
            print!(
                "d={} (gap rule {}), {} clients used, {} excluded",
                report.outcome.estimate.d,
                report.outcome.estimate.d_rule,
                report.outcome.uploads.len(),
                report.outcome.excluded.len()
            );
            if let Some(l) = report.loss {
                print!(", projection loss {l:.4}");
            }
            println!("; wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("run error: {m}");
            ExitCode::from(3)
        }
    }
}
