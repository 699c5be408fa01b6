use std::fs::File;
use std::io::{BufWriter, Write};

use serde::Serialize;
use serde_json::json;

use super::config::{Command, ExperimentConfig};
use super::report::{write_csv, write_json_lines, ReportRow, TrialRecord};
use super::{exit, CliError};
use crate::markov::{
    absorption_probability, build_snowflake_chain, expected_absorption_time, feasibility_search,
    find_point_of_no_return, phase_shift_index,
};
use crate::sim::{
    mean_stddev, monte_carlo, run_avalanche, run_slush_with, run_snow_with, NetworkConfig,
    RunOutcome, Strategy, TxRecord, Workload,
};

/// What an experiment produced, before it is written anywhere.
#[derive(Debug, Clone, PartialEq)]
pub enum Report {
    Table {
        rows: Vec<ReportRow>,
        records: Vec<TrialRecord>,
        summary: String,
    },
    Avalanche {
        rows: Vec<ReportRow>,
        records: Vec<TxRecord>,
        summary: String,
    },
    Json {
        value: serde_json::Value,
        feasible: bool,
    },
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    match cfg.command {
        Command::SlushTable => slush_table(cfg),
        Command::SnowRun => snow_run(cfg),
        Command::AvalancheRun => avalanche_run(cfg),
        Command::Design => design(cfg),
        Command::AnalyzeChain => analyze_chain(cfg),
    }
}

fn trial_record(trial: u64, c: usize, o: &RunOutcome) -> TrialRecord {
    TrialRecord {
        trial,
        c,
        rounds: o.rounds_used,
        per_node_iters: o.per_node_iterations,
        unanimous_at: o.unanimous_at,
        decided: o.decisions.iter().flatten().count(),
        violation: o.safety_violation,
        messages: o.messages_sent,
        final_reds: o.final_reds,
    }
}

fn aggregate(cfg: &ExperimentConfig, net: &NetworkConfig, beta: Option<u32>, records: &[TrialRecord]) -> ReportRow {
    let mean = |f: &dyn Fn(&TrialRecord) -> f64| {
        mean_stddev(&records.iter().map(f).collect::<Vec<_>>())
    };
    let (per_node_iters, per_node_iters_sd) = mean(&|r| r.per_node_iters);
    ReportRow {
        config_hash: cfg.hash(),
        n: net.n,
        c: net.c,
        b: net.b,
        k: net.params.k,
        a: net.params.a,
        beta,
        adversary: net.adversary.to_string(),
        trials: records.len() as u64,
        rounds: mean(&|r| r.rounds as f64).0,
        per_node_iters,
        per_node_iters_sd,
        violations: records.iter().filter(|r| r.violation).count() as u64,
        messages: mean(&|r| r.messages as f64).0,
    }
}

fn slush_table(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let params = cfg.protocol_params()?;
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut summary = String::from("c\tmean\tstddev\n");
    for &c in &cfg.sizes {
        let net = NetworkConfig::new(c, 0, params, cfg.phi, Strategy::None, cfg.seed)?;
        let mc = monte_carlo(
            cfg.trials,
            cfg.seed,
            |_, rng| run_slush_with(&net, c / 2, rng),
            |o| o.per_node_iterations,
        )?;
        let recs: Vec<TrialRecord> = mc
            .records
            .iter()
            .enumerate()
            .map(|(t, o)| trial_record(t as u64, c, o))
            .collect();
        let row = aggregate(cfg, &net, None, &recs);
        summary.push_str(&format!("{c}\t{:.2}\t{:.2}\n", row.per_node_iters, row.per_node_iters_sd));
        rows.push(row);
        records.extend(recs);
    }
    Ok(Report::Table {
        rows,
        records,
        summary,
    })
}

fn snow_run(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let net = cfg.network_config()?;
    let mc = monte_carlo(
        cfg.trials,
        cfg.seed,
        |_, rng| run_snow_with(&net, cfg.variant, cfg.initial_reds, rng),
        |o| o.per_node_iterations,
    )?;
    let records: Vec<TrialRecord> = mc
        .records
        .iter()
        .enumerate()
        .map(|(t, o)| trial_record(t as u64, net.c, o))
        .collect();
    let row = aggregate(cfg, &net, Some(cfg.beta), &records);
    let summary = format!(
        "{} {} trials: {} violations, mean {:.2} rounds per node\n",
        cfg.variant, row.trials, row.violations, row.per_node_iters
    );
    Ok(Report::Table {
        rows: vec![row],
        records,
        summary,
    })
}

fn avalanche_run(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let av = cfg.avalanche_config()?;
    let workload = Workload {
        transactions: cfg.transactions,
        rogue_fraction: cfg.rogue_fraction,
        interval: cfg.interval,
    };
    let out = run_avalanche(&av, &workload, cfg.window)?;
    let accepted = out
        .transactions
        .iter()
        .filter(|t| t.all_accepted_at.is_some())
        .count();
    let per_tx = out.messages_per_tx_per_node(av.c);
    let row = ReportRow {
        config_hash: cfg.hash(),
        n: av.c + av.b,
        c: av.c,
        b: av.b,
        k: av.params.k,
        a: av.params.a,
        beta: Some(av.params.beta2),
        adversary: av.adversary.name().to_string(),
        trials: 1,
        rounds: out.rounds_used as f64,
        per_node_iters: out.rounds_used as f64 / av.c as f64,
        per_node_iters_sd: 0.0,
        violations: out.conflicting_acceptance as u64,
        messages: out.messages_sent as f64,
    };
    let summary = format!(
        "{accepted}/{} transactions accepted everywhere, {per_tx:.2} messages per transaction per node\n",
        out.transactions.len()
    );
    Ok(Report::Avalanche {
        rows: vec![row],
        records: out.transactions,
        summary,
    })
}

fn design(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let (n, b) = (cfg.n as u64, cfg.b as u64);
    Ok(match feasibility_search(n, b, cfg.eps, cfg.phi, cfg.fixed)? {
        Some(d) => Report::Json {
            value: json!({ "feasible": true, "design": d }),
            feasible: true,
        },
        None => Report::Json {
            value: json!({
                "feasible": false,
                "n": n,
                "b": b,
                "eps": cfg.eps,
                "phi": cfg.phi,
                "fixed": cfg.fixed,
            }),
            feasible: false,
        },
    })
}

fn analyze_chain(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let c = cfg.n - cfg.b;
    let chain = build_snowflake_chain(c as u64, cfg.b as u64, cfg.k as u64, cfg.a as u64, None)?;
    let start = cfg.initial_reds;
    let to_blue = absorption_probability(&chain, start)?;
    let steps = expected_absorption_time(&chain, start)?;
    let value = json!({
        "c": c,
        "b": cfg.b,
        "k": cfg.k,
        "a": cfg.a,
        "start": start,
        "absorb_blue": to_blue,
        "absorb_red": 1.0 - to_blue,
        "expected_steps": steps,
        "expected_per_node_iters": steps / c as f64,
        "phase_shift": phase_shift_index(&chain),
        "point_of_no_return": find_point_of_no_return(&chain, cfg.eps, cfg.phi)?,
        "eps": cfg.eps,
        "phi": cfg.phi,
    });
    Ok(Report::Json {
        value,
        feasible: true,
    })
}

fn create(path: &std::path::Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn write_records<T: Serialize>(cfg: &ExperimentConfig, records: &[T]) -> Result<(), CliError> {
    match &cfg.records {
        Some(path) => write_json_lines(create(path)?, records),
        None => Ok(()),
    }
}

impl Report {
    /// Writes the report to the configured paths, or to `stdout` when no
    /// output path is set. Returns the exit code.
    pub fn emit(&self, cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
        let (rows, summary) = match self {
            Report::Table {
                rows,
                records,
                summary,
            } => {
                write_records(cfg, records)?;
                (rows, summary)
            }
            Report::Avalanche {
                rows,
                records,
                summary,
            } => {
                write_records(cfg, records)?;
                (rows, summary)
            }
            Report::Json { value, feasible } => {
                let text = serde_json::to_string_pretty(value)
                    .map_err(|e| CliError::Internal(e.to_string()))?;
                match &cfg.out {
                    Some(path) => {
                        let mut f = create(path)?;
                        writeln!(f, "{text}").map_err(CliError::io)?;
                        f.flush().map_err(CliError::io)?;
                    }
                    None => writeln!(stdout, "{text}").map_err(CliError::io)?,
                }
                return Ok(if *feasible { exit::OK } else { exit::INFEASIBLE });
            }
        };
        match &cfg.out {
            Some(path) => {
                write_csv(create(path)?, rows)?;
                stdout.write_all(summary.as_bytes()).map_err(CliError::io)?;
            }
            None => write_csv(&mut *stdout, rows)?,
        }
        Ok(exit::OK)
    }
}
