use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adversary::{adversary_respond, AdversaryState, AdversaryTiming, NetworkView, Strategy};
use crate::error::{ensure, Error, Result};
use crate::prob::{floyd_into, SimRng};
use crate::snow::{Color, ProtocolParams, SampleCounts, SnowState, Variant};

/// A network of `c` correct and `b` Byzantine nodes under the global
/// scheduler. Correct nodes are `0..c`, Byzantine ones `c..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n: usize,
    pub c: usize,
    pub b: usize,
    pub params: ProtocolParams,
    /// Scheduler round budget.
    pub phi: u64,
    pub adversary: Strategy,
    #[serde(default)]
    pub timing: AdversaryTiming,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn new(
        c: usize,
        b: usize,
        params: ProtocolParams,
        phi: u64,
        adversary: Strategy,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            n: c + b,
            c,
            b,
            params,
            phi,
            adversary,
            timing: AdversaryTiming::default(),
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_timing(mut self, timing: AdversaryTiming) -> Self {
        self.timing = timing;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        ensure!(self.n == self.c + self.b, Config, "n = {} but c + b = {}", self.n, self.c + self.b);
        ensure!(self.c >= 2, Config, "need at least two correct nodes, got {}", self.c);
        ensure!(self.phi >= 1, Config, "phi must be at least 1");
        let k = self.params.k as usize;
        ensure!(k < self.n, Config, "k = {k} must be below n = {}", self.n);
        if self.adversary == Strategy::Refuse {
            ensure!(
                k < self.c,
                Config,
                "with refusing Byzantine nodes k = {k} must be below c = {}",
                self.c
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    /// Scheduler rounds executed (Slush: rounds until unanimity).
    pub rounds_used: u64,
    pub per_node_iterations: f64,
    pub decisions: Vec<Option<Color>>,
    /// Scheduler round at which each node decided.
    pub decided_at: Vec<Option<u64>>,
    /// Samples the node had processed when it decided.
    pub samples_at_decision: Vec<Option<u64>>,
    /// First round at which all correct nodes held one color.
    pub unanimous_at: Option<u64>,
    pub final_reds: usize,
    pub safety_violation: bool,
    /// Query messages sent, refused ones included.
    pub messages_sent: u64,
    /// Times the scheduler picked each correct node.
    pub picks: Vec<u64>,
}

/// True iff two decided nodes disagree.
pub fn conflicting(decisions: &[Option<Color>]) -> bool {
    let mut seen = None;
    for d in decisions.iter().flatten() {
        match seen {
            None => seen = Some(*d),
            Some(s) if s != *d => return true,
            _ => {}
        }
    }
    false
}

/// Slush under the global scheduler, run until unanimity or `phi` rounds.
pub fn run_slush(cfg: &NetworkConfig, initial_reds: usize) -> Result<RunOutcome> {
    run_slush_with(cfg, initial_reds, &mut SimRng::new(cfg.seed, 0))
}

pub fn run_slush_with(cfg: &NetworkConfig, initial_reds: usize, rng: &mut SimRng) -> Result<RunOutcome> {
    ensure!(cfg.b == 0, Config, "Slush tolerates no Byzantine nodes, got b = {}", cfg.b);
    Scheduler::new(cfg, Variant::Slush, initial_reds)?.run(rng, true)
}

/// Snowflake or Snowball under the global scheduler with the configured
/// adversary. Ends after `phi` rounds or once every correct node decided.
pub fn run_snow(cfg: &NetworkConfig, variant: Variant, initial_reds: usize) -> Result<RunOutcome> {
    run_snow_with(cfg, variant, initial_reds, &mut SimRng::new(cfg.seed, 0))
}

pub fn run_snow_with(
    cfg: &NetworkConfig,
    variant: Variant,
    initial_reds: usize,
    rng: &mut SimRng,
) -> Result<RunOutcome> {
    ensure!(
        variant != Variant::Slush,
        Argument,
        "use run_slush for the Slush variant"
    );
    Scheduler::new(cfg, variant, initial_reds)?.run(rng, false)
}

struct Scheduler<'a> {
    cfg: &'a NetworkConfig,
    nodes: Vec<SnowState>,
    reds: usize,
    adv: AdversaryState,
    sample: Vec<usize>,
    asked: Vec<usize>,
}

impl<'a> Scheduler<'a> {
    fn new(cfg: &'a NetworkConfig, variant: Variant, initial_reds: usize) -> Result<Self> {
        cfg.validate()?;
        ensure!(
            initial_reds <= cfg.c,
            Argument,
            "initial_reds = {initial_reds} exceeds c = {}",
            cfg.c
        );
        let nodes: Vec<SnowState> = (0..cfg.c)
            .map(|i| {
                let col = if i < initial_reds { Color::Red } else { Color::Blue };
                SnowState::new(variant, col)
            })
            .collect();
        let view = NetworkView {
            nodes: &nodes,
            reds: initial_reds,
        };
        let adv = AdversaryState::new(cfg.adversary, &view, cfg.b);
        Ok(Self {
            cfg,
            nodes,
            reds: initial_reds,
            adv,
            sample: Vec::with_capacity(cfg.params.k as usize),
            asked: Vec::new(),
        })
    }

    fn unanimous(&self) -> bool {
        self.reds == 0 || self.reds == self.cfg.c
    }

    fn run(mut self, rng: &mut SimRng, stop_at_unanimity: bool) -> Result<RunOutcome> {
        let c = self.cfg.c;
        let mut decided_at = vec![None; c];
        let mut samples_at = vec![None; c];
        let mut picks = vec![0u64; c];
        let mut undecided = c;
        let mut messages = 0u64;
        let mut unanimous_at = self.unanimous().then_some(0);
        let mut round = 0u64;
        while round < self.cfg.phi {
            if undecided == 0 || (stop_at_unanimity && unanimous_at.is_some()) {
                break;
            }
            round += 1;
            let u = rng.random_range(0..c);
            picks[u] += 1;
            if self.nodes[u].decided.is_some() {
                continue;
            }
            let (counts, sent) = self.poll(u, rng)?;
            messages += sent;
            let before = self.nodes[u].col;
            self.nodes[u].on_sample(&self.cfg.params, counts)?;
            let after = self.nodes[u].col;
            if before != after {
                if after == Color::Red {
                    self.reds += 1;
                } else {
                    self.reds -= 1;
                }
            }
            let view = NetworkView {
                nodes: &self.nodes,
                reds: self.reds,
            };
            self.adv.observe(&view, before != after);
            if self.nodes[u].decided.is_some() {
                decided_at[u] = Some(round);
                samples_at[u] = Some(self.nodes[u].rounds);
                undecided -= 1;
            }
            if unanimous_at.is_none() && self.unanimous() {
                unanimous_at = Some(round);
            }
        }
        let decisions: Vec<Option<Color>> = self.nodes.iter().map(|s| s.decided).collect();
        let rounds_used = if stop_at_unanimity {
            unanimous_at.unwrap_or(round)
        } else {
            round
        };
        Ok(RunOutcome {
            rounds_used,
            per_node_iterations: rounds_used as f64 / c as f64,
            safety_violation: conflicting(&decisions),
            decisions,
            decided_at,
            samples_at_decision: samples_at,
            unanimous_at,
            final_reds: self.reds,
            messages_sent: messages,
            picks,
        })
    }

    /// Draws `k` peers from everyone but `u` and collects their colors,
    /// drawing replacements for peers that do not answer.
    fn poll(&mut self, u: usize, rng: &mut SimRng) -> Result<(SampleCounts, u64)> {
        let cfg = self.cfg;
        let k = cfg.params.k as usize;
        // Byzantine answers depend on the querier and the network state,
        // neither of which the draw changes, so both timings give the same
        // answers for the strategies implemented here.
        floyd_into(cfg.n - 1, k, &mut self.sample, rng);
        for s in self.sample.iter_mut() {
            if *s >= u {
                *s += 1;
            }
        }
        let view = NetworkView {
            nodes: &self.nodes,
            reds: self.reds,
        };
        let mut counts = SampleCounts::default();
        let mut sent = k as u64;
        let mut missing = 0usize;
        for &j in &self.sample {
            match self.answer(&view, u, j) {
                Some(col) => counts.add(col),
                None => missing += 1,
            }
        }
        if missing > 0 {
            self.asked.clear();
            self.asked.push(u);
            self.asked.extend_from_slice(&self.sample);
            while missing > 0 {
                let avail = cfg.n - self.asked.len();
                if avail < missing {
                    return Err(Error::Config(format!(
                        "node {u} cannot collect {k} answers from {} reachable peers",
                        cfg.n - 1
                    )));
                }
                let extra = crate::prob::sample_excluding(cfg.n, missing, &self.asked, rng)?;
                sent += missing as u64;
                missing = 0;
                for &j in &extra {
                    match self.answer(&view, u, j) {
                        Some(col) => counts.add(col),
                        None => missing += 1,
                    }
                }
                self.asked.extend_from_slice(&extra);
            }
        }
        Ok((counts, sent))
    }

    fn answer(&self, view: &NetworkView<'_>, u: usize, j: usize) -> Option<Color> {
        if j < self.cfg.c {
            Some(self.nodes[j].col)
        } else {
            adversary_respond(&self.adv, view, u, j - self.cfg.c)
        }
    }
}
