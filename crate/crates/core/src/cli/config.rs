use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;
use crate::dag::AvalancheParams;
use crate::markov::Fixed;
use crate::sim::{AdversaryTiming, AvalancheAdversary, AvalancheConfig, NetworkConfig, Strategy};
use crate::snow::{threshold_from_alpha, ProtocolParams, Variant};

/// Default table sizes for `slush-table`.
pub const TABLE_SIZES: [usize; 5] = [600, 1200, 2400, 4800, 9600];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SlushTable,
    SnowRun,
    AvalancheRun,
    Design,
    AnalyzeChain,
}

/// Experiment settings as they appear in a config file or on the command
/// line. File keys and flags share names; every field is optional and
/// missing ones fall back to defaults when resolved.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// Experiment to run.
    #[arg(long, value_enum)]
    pub command: Option<Command>,
    /// Base seed; falls back to SNOWSIM_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo trials.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Report path (CSV, or JSON for design and analyze-chain).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-trial JSON lines path.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Total nodes.
    #[arg(long)]
    pub n: Option<usize>,
    /// Byzantine nodes.
    #[arg(long)]
    pub b: Option<usize>,
    /// Sample size.
    #[arg(long)]
    pub k: Option<u32>,
    /// Quorum fraction; `a = ceil(alpha * k)` unless `a` is given.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Quorum size.
    #[arg(long)]
    pub a: Option<u32>,
    /// Consecutive successes to decide (Snowflake, Snowball).
    #[arg(long)]
    pub beta: Option<u32>,
    /// Early acceptance threshold for virtuous vertices.
    #[arg(long)]
    pub beta1: Option<u32>,
    /// Acceptance threshold for contested vertices.
    #[arg(long)]
    pub beta2: Option<u32>,
    /// Slush round budget per node.
    #[arg(long)]
    pub m: Option<u32>,
    /// Scheduler round budget.
    #[arg(long)]
    pub phi: Option<u64>,
    /// Byzantine strategy.
    #[arg(long)]
    pub adversary: Option<String>,
    /// Whether Byzantine answers are fixed before or after the sample is drawn.
    #[arg(long, value_enum)]
    pub timing: Option<TimingArg>,
    /// Snow protocol for snow-run.
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Correct nodes starting red; defaults to half.
    #[arg(long)]
    pub initial_reds: Option<usize>,
    /// Correct-node counts for slush-table.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Failure budget for design and analyze-chain.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Hold beta fixed in the design search instead of k.
    #[arg(long)]
    pub fixed_beta: Option<u64>,
    /// Transactions issued in avalanche-run.
    #[arg(long)]
    pub transactions: Option<usize>,
    /// Fraction of issued transactions that are conflicting pairs.
    #[arg(long)]
    pub rogue_fraction: Option<f64>,
    /// Rounds between issued transactions.
    #[arg(long)]
    pub interval: Option<u64>,
    /// Rounds between message checkpoints.
    #[arg(long)]
    pub window: Option<u64>,
    /// Stop a query once a quorum of yes votes is in.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub early_termination: Option<bool>,
    /// Parent fan-in for new vertices.
    #[arg(long)]
    pub parents: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimingArg {
    BeforeSample,
    AfterSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantArg {
    Snowflake,
    Snowball,
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `self` win over those in `base`.
    pub fn over(self, base: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: self.$f.or(base.$f)),* } };
        }
        pick!(
            command, seed, trials, out, records, n, b, k, alpha, a, beta, beta1, beta2, m, phi,
            adversary, timing, variant, initial_reds, sizes, eps, fixed_beta, transactions,
            rogue_fraction, interval, window, early_termination, parents
        )
    }
}

/// A fully resolved and validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: u64,
    pub trials: u64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub records: Option<PathBuf>,
    pub n: usize,
    pub b: usize,
    pub k: u32,
    pub a: u32,
    pub beta: u32,
    pub beta1: u32,
    pub beta2: u32,
    pub m: u32,
    pub phi: u64,
    pub strategy: Strategy,
    pub avalanche_adversary: AvalancheAdversary,
    pub timing: AdversaryTiming,
    pub variant: Variant,
    pub initial_reds: usize,
    pub sizes: Vec<usize>,
    pub eps: f64,
    pub fixed: Fixed,
    pub transactions: usize,
    pub rogue_fraction: f64,
    pub interval: u64,
    pub window: u64,
    pub early_termination: bool,
    pub parents: usize,
}

fn invalid(field: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("field `{field}`: {e}"))
}

impl ExperimentConfig {
    /// Applies defaults and checks every setting against the invariants of
    /// the module it feeds.
    pub fn resolve(s: Settings, env_seed: Option<&str>) -> Result<Self, CliError> {
        let command = s
            .command
            .ok_or_else(|| CliError::Config("no command given".into()))?;
        let seed = match (s.seed, env_seed) {
            (Some(seed), _) => seed,
            (None, Some(v)) => v
                .trim()
                .parse()
                .map_err(|e| invalid("SNOWSIM_SEED", format!("'{v}': {e}")))?,
            (None, None) => 0,
        };
        let n = s.n.unwrap_or(2000);
        let b = s.b.unwrap_or(0);
        let k = s.k.unwrap_or(10);
        let alpha = s.alpha.unwrap_or(0.8);
        if !(alpha > 0.5 && alpha <= 1.0) {
            return Err(invalid("alpha", format!("{alpha} outside (0.5, 1]")));
        }
        let a = s.a.unwrap_or_else(|| threshold_from_alpha(k, alpha));
        let beta1 = s.beta1.unwrap_or(11);
        let beta2 = s.beta2.unwrap_or(150);
        let beta = s.beta.unwrap_or(beta1);
        let trials = s.trials.unwrap_or(100);
        if trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if b >= n {
            return Err(invalid("b", format!("{b} leaves no correct nodes among n = {n}")));
        }
        if k as usize >= n {
            return Err(invalid("k", format!("{k} must be below n = {n}")));
        }
        let c = n - b;
        let strategy = match (&s.adversary, command) {
            (Some(name), c) if c != Command::AvalancheRun => {
                name.parse().map_err(|e| invalid("adversary", e))?
            }
            _ => Strategy::None,
        };
        let avalanche_adversary = match (&s.adversary, command) {
            (Some(name), Command::AvalancheRun) => name.parse().map_err(|e| invalid("adversary", e))?,
            _ => AvalancheAdversary::None,
        };
        let eps = s.eps.unwrap_or(1e-6);
        if !(eps > 0.0 && eps < 1.0) {
            return Err(invalid("eps", format!("{eps} outside (0, 1)")));
        }
        let transactions = s.transactions.unwrap_or(100);
        let interval = s.interval.unwrap_or(150);
        let phi = s.phi.unwrap_or(match command {
            Command::SlushTable => 1000 * s.sizes.as_deref().unwrap_or(&TABLE_SIZES).iter().max().copied().unwrap_or(1) as u64,
            Command::SnowRun => 20 * beta as u64 * c as u64,
            Command::AvalancheRun => (transactions as u64 * interval * 20).max(100_000),
            Command::Design | Command::AnalyzeChain => 100 * n as u64,
        });
        let cfg = Self {
            command,
            seed,
            trials,
            out: s.out,
            records: s.records,
            n,
            b,
            k,
            a,
            beta,
            beta1,
            beta2,
            m: s.m.unwrap_or(1000),
            phi,
            strategy,
            avalanche_adversary,
            timing: match s.timing {
                Some(TimingArg::AfterSample) => AdversaryTiming::AfterSample,
                _ => AdversaryTiming::BeforeSample,
            },
            variant: match s.variant {
                Some(VariantArg::Snowball) => Variant::Snowball,
                _ => Variant::Snowflake,
            },
            initial_reds: s.initial_reds.unwrap_or(c / 2),
            sizes: s.sizes.unwrap_or_else(|| TABLE_SIZES.to_vec()),
            eps,
            fixed: match s.fixed_beta {
                Some(beta) => Fixed::Beta(beta),
                None => Fixed::K(k as u64),
            },
            transactions,
            rogue_fraction: s.rogue_fraction.unwrap_or(0.0),
            interval,
            window: s.window.unwrap_or(10_000),
            early_termination: s.early_termination.unwrap_or(false),
            parents: s.parents.unwrap_or(2),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let params = self.protocol_params().map_err(|e| invalid("a", e))?;
        if self.initial_reds > self.n - self.b {
            return Err(invalid(
                "initial-reds",
                format!("{} exceeds c = {}", self.initial_reds, self.n - self.b),
            ));
        }
        match self.command {
            Command::SlushTable => {
                if self.b != 0 {
                    return Err(invalid("b", "Slush runs without Byzantine nodes"));
                }
                if self.sizes.is_empty() {
                    return Err(invalid("sizes", "empty"));
                }
                for &c in &self.sizes {
                    NetworkConfig::new(c, 0, params, self.phi, Strategy::None, self.seed)
                        .map_err(|e| invalid("sizes", e))?;
                }
            }
            Command::SnowRun => {
                self.network_config().map_err(|e| invalid("n", e))?;
            }
            Command::AvalancheRun => {
                self.avalanche_config().map_err(|e| invalid("n", e))?;
                if !(0.0..=1.0).contains(&self.rogue_fraction) {
                    return Err(invalid("rogue-fraction", "outside [0, 1]"));
                }
                if self.interval == 0 {
                    return Err(invalid("interval", "must be at least 1"));
                }
                if self.window == 0 {
                    return Err(invalid("window", "must be at least 1"));
                }
            }
            Command::Design | Command::AnalyzeChain => {
                if self.phi == 0 {
                    return Err(invalid("phi", "must be at least 1"));
                }
                if let Fixed::Beta(0) = self.fixed {
                    return Err(invalid("fixed-beta", "must be at least 1"));
                }
            }
        }
        Ok(())
    }

    pub fn protocol_params(&self) -> crate::Result<ProtocolParams> {
        ProtocolParams::new(self.k, self.a, self.beta, self.m)
    }

    pub fn network_config(&self) -> crate::Result<NetworkConfig> {
        let cfg = NetworkConfig::new(
            self.n - self.b,
            self.b,
            self.protocol_params()?,
            self.phi,
            self.strategy,
            self.seed,
        )?;
        Ok(cfg.with_timing(self.timing))
    }

    pub fn avalanche_config(&self) -> crate::Result<AvalancheConfig> {
        let mut params = AvalancheParams::new(self.k, self.a, self.beta1, self.beta2)?;
        params.parents = self.parents;
        params.validate()?;
        let mut cfg = AvalancheConfig::new(
            self.n - self.b,
            self.b,
            params,
            self.avalanche_adversary,
            self.phi,
            self.seed,
        )?;
        cfg.early_termination = self.early_termination;
        Ok(cfg)
    }

    /// First 16 hex digits of a SHA-256 over the settings that affect
    /// results (output paths excluded).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}
