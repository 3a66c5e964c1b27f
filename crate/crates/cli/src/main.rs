use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitCode};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use dilp_core::emit::to_sql;
use dilp_core::facts::{write_atomically, FactTable};
use dilp_core::synth::{abcd_facts, gen_abcd, gen_fraud_chain, gen_fraud_relationship, write_abcd_csv, ScenarioKind};
use dilp_core::{Error, ErrorClass, Result};
use dilp_cli::config::ExperimentConfig;
use dilp_cli::pipeline::{eval_rules, parse_rules_file, prepare, run, write_outcome, write_prepared};
use log::{info, warn};

#[derive(Parser)]
#[command(name = "dilp", version, about = "Differentiable rule induction for fraud detection")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic scenario to disk.
    Synth {
        /// abcd, fraud_relationship or fraud_chain
        kind: ScenarioKind,
        /// Rows of the ABCD table.
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Clean, split, scale, sample and binarize; write fact tables and a manifest.
    Prepare(ExperimentArgs),
    /// Train on prepared data and write rules, metrics and the loss trace.
    Train {
        #[command(flatten)]
        experiment: ExperimentArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the SQL translation of the learned rules.
        #[arg(long)]
        emit_sql: bool,
        /// Concurrent processes when several configs are given.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Crisp metrics of a stored program on a fact table.
    Eval {
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        facts: PathBuf,
        /// Inference steps; defaults to the rules file header, else the fixpoint.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Translate a stored arity-1 program to SQL.
    EmitSql {
        #[arg(long)]
        rules: PathBuf,
        #[arg(long, default_value = "Fraud_Table")]
        table: String,
        /// Write the query here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long = "config", required = true, num_args = 1..)]
    configs: Vec<PathBuf>,
    /// Output directory; with several configs each gets a subdirectory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV to use in place of the config's data.csv.
    #[arg(long)]
    data: Option<PathBuf>,
}

impl ExperimentArgs {
    fn load(&self, path: &Path) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(path)?;
        if let Some(csv) = &self.data {
            if config.data.csv.is_none() {
                return Err(Error::Config("--data needs a config with a csv source".into()));
            }
            config.data.csv = Some(csv.clone());
        }
        if let Some(out) = &self.out {
            config.output.dir = Some(if self.configs.len() > 1 {
                out.join(&config.name)
            } else {
                out.clone()
            });
        }
        Ok(config)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Data => 3,
                ErrorClass::Training => 4,
            })
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<ExitCode> {
    match cmd {
        Cmd::Synth { kind, n, seed, out } => synth(kind, n, seed, &out),
        Cmd::Prepare(args) => {
            for path in &args.configs {
                let config = args.load(path)?;
                let prepared = prepare(&config)?;
                for f in write_prepared(&prepared, &config.output_dir())? {
                    println!("{}", f.display());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Train { experiment, seed, emit_sql, jobs } => {
            if experiment.configs.len() > 1 {
                return train_many(&experiment, seed, emit_sql, jobs.max(1));
            }
            let mut config = experiment.load(&experiment.configs[0])?;
            if let Some(s) = seed {
                config.train.seed = s;
            }
            train(&config, emit_sql || config.output.emit_sql)
        }
        Cmd::Eval { rules, facts, steps } => {
            let (program, header) = parse_rules_file(&read(&rules)?)?;
            let table = FactTable::load(&facts)?;
            let report = eval_rules(&program, &table, steps.or(header))?;
            println!("{report}");
            Ok(ExitCode::SUCCESS)
        }
        Cmd::EmitSql { rules, table, out } => {
            let (program, _) = parse_rules_file(&read(&rules)?)?;
            let query = to_sql(&program, &table)?;
            match out {
                Some(path) => write_atomically(&path, format!("{}\n", query.text).as_bytes())?,
                None => println!("{}", query.text),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn synth(kind: ScenarioKind, n: usize, seed: u64, out: &Path) -> Result<ExitCode> {
    std::fs::create_dir_all(out)?;
    let written = match kind {
        ScenarioKind::Abcd => {
            let table = gen_abcd(n, seed)?;
            let mut csv = Vec::new();
            write_abcd_csv(&table, &mut csv)?;
            let csv_path = out.join("abcd.csv");
            write_atomically(&csv_path, &csv)?;
            let facts_path = out.join("abcd.facts");
            abcd_facts(&table)?.save(&facts_path)?;
            vec![csv_path, facts_path]
        }
        ScenarioKind::FraudRelationship => {
            let path = out.join("fraud_relationship.facts");
            gen_fraud_relationship()?.save(&path)?;
            vec![path]
        }
        ScenarioKind::FraudChain => {
            let path = out.join("fraud_chain.facts");
            gen_fraud_chain()?.save(&path)?;
            vec![path]
        }
    };
    for p in written {
        println!("{}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn train(config: &ExperimentConfig, emit_sql: bool) -> Result<ExitCode> {
    info!("experiment {}", config.name);
    let outcome = run(config)?;
    println!("{}", outcome.rule.trim_end());
    for (split, m) in &outcome.metrics {
        println!(
            "{split}: accuracy={:.3} precision={:.3} recall={:.3} f1={:.3} mcc={:.3}",
            m.accuracy, m.precision, m.recall, m.f1, m.mcc
        );
    }
    let written = write_outcome(&outcome, config, &config.output_dir(), emit_sql)?;
    if let Some(notice) = &written.sql_notice {
        warn!("{notice}");
    }
    for f in &written.files {
        println!("{}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}

/// Runs one child process per config, at most `jobs` at a time.
fn train_many(args: &ExperimentArgs, seed: Option<u64>, emit_sql: bool, jobs: usize) -> Result<ExitCode> {
    let exe = std::env::current_exe()?;
    let mut pending: Vec<&PathBuf> = args.configs.iter().rev().collect();
    let mut running: Vec<(PathBuf, Child)> = Vec::new();
    let mut worst = 0u8;
    while !pending.is_empty() || !running.is_empty() {
        while running.len() < jobs {
            let Some(path) = pending.pop() else { break };
            let config = args.load(path)?;
            let mut cmd = Command::new(&exe);
            cmd.arg("train").arg("--config").arg(path).arg("--out").arg(config.output_dir());
            if let Some(csv) = &args.data {
                cmd.arg("--data").arg(csv);
            }
            if let Some(s) = seed {
                cmd.arg("--seed").arg(s.to_string());
            }
            if emit_sql {
                cmd.arg("--emit-sql");
            }
            running.push((path.clone(), cmd.spawn()?));
        }
        let mut still = Vec::new();
        for (path, mut child) in running {
            match child.try_wait()? {
                Some(status) => {
                    let code = status.code().unwrap_or(1).clamp(0, 255) as u8;
                    if code != 0 {
                        eprintln!("{} failed with exit code {code}", path.display());
                    }
                    worst = worst.max(code);
                }
                None => still.push((path, child)),
            }
        }
        running = still;
        std::thread::sleep(Duration::from_millis(20));
    }
    Ok(ExitCode::from(worst))
}
