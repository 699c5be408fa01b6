use std::collections::{HashMap, HashSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dag::{AvalancheParams, ConflictKey, DagState, OutPoint, Vertex, VertexId};
use crate::error::{ensure, Error, Result};
use crate::prob::{floyd_into, sample_excluding, SimRng};

/// Behavior of Byzantine nodes when queried about a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AvalancheAdversary {
    /// Vote yes on everything.
    #[default]
    None,
    /// Never answer; the querier draws replacements.
    Refuse,
    /// Vote no on everything.
    Withhold,
}

impl AvalancheAdversary {
    pub fn name(self) -> &'static str {
        match self {
            AvalancheAdversary::None => "none",
            AvalancheAdversary::Refuse => "refuse",
            AvalancheAdversary::Withhold => "withhold",
        }
    }
}

impl std::str::FromStr for AvalancheAdversary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::None, Self::Refuse, Self::Withhold]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::Argument(format!(
                    "unknown Avalanche adversary '{s}' (expected none, refuse or withhold)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvalancheConfig {
    pub c: usize,
    pub b: usize,
    pub params: AvalancheParams,
    pub adversary: AvalancheAdversary,
    /// Scheduler round budget.
    pub phi: u64,
    pub seed: u64,
    /// Stop a query once `a` yes votes are in. Off by default so that
    /// message counts cover the full sample.
    #[serde(default)]
    pub early_termination: bool,
}

impl AvalancheConfig {
    pub fn new(
        c: usize,
        b: usize,
        params: AvalancheParams,
        adversary: AvalancheAdversary,
        phi: u64,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            c,
            b,
            params,
            adversary,
            phi,
            seed,
            early_termination: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        ensure!(self.c >= 2, Config, "need at least two correct nodes, got {}", self.c);
        ensure!(self.phi >= 1, Config, "phi must be at least 1");
        let k = self.params.k as usize;
        let reachable = if self.adversary == AvalancheAdversary::Refuse {
            self.c - 1
        } else {
            self.c + self.b - 1
        };
        ensure!(k <= reachable, Config, "k = {k} exceeds the {reachable} peers that answer");
        Ok(())
    }
}

/// Transactions issued one every `interval` rounds, each spending its own
/// genesis output. A rogue transaction is a pair of spends of one output
/// handed to disjoint halves of the correct nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub transactions: usize,
    pub rogue_fraction: f64,
    pub interval: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxRecord {
    pub vertex: VertexId,
    /// Index of the spent genesis output; rogue pairs share it.
    pub output: u32,
    pub rogue: bool,
    /// Some ancestor at the issuer is a rogue vertex.
    pub rogue_ancestry: bool,
    pub issued_at: u64,
    pub accepted_by: usize,
    pub first_accepted_at: Option<u64>,
    /// Round at which the last correct node accepted it.
    pub all_accepted_at: Option<u64>,
}

/// Cumulative counters sampled every `window` rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub round: u64,
    pub messages: u64,
    pub fully_accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvalancheOutcome {
    pub rounds_used: u64,
    pub transactions: Vec<TxRecord>,
    pub nops: u64,
    /// Query messages, replacements for refused queries included.
    pub queries: u64,
    /// Vertices shipped to peers that lacked a queried vertex's ancestry.
    pub fetched: u64,
    pub messages_sent: u64,
    /// Two correct nodes accepted different spends of one output.
    pub conflicting_acceptance: bool,
    /// Largest conflict set containing a virtuous transaction at any node.
    pub max_virtuous_set: usize,
    pub checkpoints: Vec<Checkpoint>,
}

impl AvalancheOutcome {
    pub fn virtuous_all_accepted(&self) -> bool {
        self.transactions
            .iter()
            .filter(|t| !t.rogue)
            .all(|t| t.all_accepted_at.is_some())
    }

    /// Messages per fully accepted transaction per correct node.
    pub fn messages_per_tx_per_node(&self, c: usize) -> f64 {
        let done = self
            .transactions
            .iter()
            .filter(|t| t.all_accepted_at.is_some())
            .count();
        self.messages_sent as f64 / (done.max(1) * c) as f64
    }
}

struct Node {
    dag: DagState,
    queue: VecDeque<VertexId>,
    /// Issued (non-nop) vertices this node has not accepted yet.
    waiting: Vec<VertexId>,
}

struct Sim<'a> {
    cfg: &'a AvalancheConfig,
    nodes: Vec<Node>,
    tracked: HashMap<VertexId, usize>,
    records: Vec<TxRecord>,
    fetched: u64,
    nops: u64,
    round: u64,
}

/// Runs an Avalanche network under the global scheduler: each round one
/// correct node queries the oldest vertex it has not queried yet, or emits
/// a nop for a stale virtuous vertex when it has nothing to query.
pub fn run_avalanche(cfg: &AvalancheConfig, workload: &Workload, window: u64) -> Result<AvalancheOutcome> {
    cfg.validate()?;
    ensure!(window >= 1, Argument, "checkpoint window must be at least 1");
    ensure!(workload.interval >= 1, Argument, "issue interval must be at least 1");
    ensure!(
        (0.0..=1.0).contains(&workload.rogue_fraction),
        Argument,
        "rogue fraction {} outside [0, 1]",
        workload.rogue_fraction
    );
    let outputs = u32::try_from(workload.transactions.max(1))
        .map_err(|_| Error::Argument("too many transactions".into()))?;
    let mut rng = SimRng::new(cfg.seed, 0);
    let nodes = (0..cfg.c)
        .map(|_| {
            Ok(Node {
                dag: DagState::new(cfg.params.clone(), outputs)?,
                queue: VecDeque::new(),
                waiting: Vec::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let genesis_outputs = nodes[0].dag.genesis_outputs();
    let mut sim = Sim {
        cfg,
        nodes,
        tracked: HashMap::new(),
        records: Vec::new(),
        fetched: 0,
        nops: 0,
        round: 0,
    };
    let mut queries = 0u64;
    let mut issued = 0usize;
    let mut checkpoints = Vec::new();
    let mut sample = Vec::with_capacity(cfg.params.k as usize);
    while sim.round < cfg.phi {
        if issued == workload.transactions && sim.settled() {
            break;
        }
        sim.round += 1;
        if issued < workload.transactions && (sim.round - 1) % workload.interval == 0 {
            let rogue = rng.random_bool(workload.rogue_fraction);
            sim.issue(genesis_outputs[issued], issued as u32, rogue, &mut rng)?;
            issued += 1;
        }
        let u = rng.random_range(0..cfg.c);
        queries += sim.step(u, &mut sample, &mut rng)?;
        if sim.round % window == 0 {
            checkpoints.push(Checkpoint {
                round: sim.round,
                messages: queries + sim.fetched,
                fully_accepted: sim.records.iter().filter(|r| r.all_accepted_at.is_some()).count(),
            });
        }
    }
    let max_virtuous_set = sim.max_virtuous_set()?;
    let conflicting_acceptance = sim.conflicting_acceptance()?;
    Ok(AvalancheOutcome {
        rounds_used: sim.round,
        transactions: sim.records,
        nops: sim.nops,
        queries,
        fetched: sim.fetched,
        messages_sent: queries + sim.fetched,
        conflicting_acceptance,
        max_virtuous_set,
        checkpoints,
    })
}

impl Sim<'_> {
    fn settled(&self) -> bool {
        self.records
            .iter()
            .filter(|r| !r.rogue)
            .all(|r| r.all_accepted_at.is_some())
    }

    fn issue(&mut self, op: OutPoint, output: u32, rogue: bool, rng: &mut SimRng) -> Result<()> {
        let c = self.cfg.c;
        let half = c / 2;
        let groups: Vec<(std::ops::Range<usize>, &[u8])> = if rogue {
            vec![(0..half, b"rogue-a"), (half..c, b"rogue-b")]
        } else {
            vec![(0..c, b"tx")]
        };
        for (group, tag) in groups {
            let u = rng.random_range(group.clone());
            let mut data = tag.to_vec();
            data.extend_from_slice(&output.to_le_bytes());
            let v = self.nodes[u].dag.on_generate_tx(data, vec![op], 1)?.remove(0);
            let rogue_ancestry = self.nodes[u]
                .dag
                .ancestors(&v.id)?
                .iter()
                .any(|a| *a != v.id && self.tracked.get(a).is_some_and(|&r| self.records[r].rogue));
            self.tracked.insert(v.id, self.records.len());
            self.records.push(TxRecord {
                vertex: v.id,
                output,
                rogue,
                rogue_ancestry,
                issued_at: self.round,
                accepted_by: 0,
                first_accepted_at: None,
                all_accepted_at: None,
            });
            self.nodes[u].queue.push_back(v.id);
            self.nodes[u].waiting.push(v.id);
            for j in group.filter(|&j| j != u) {
                self.deliver(u, j, v.id)?;
            }
        }
        Ok(())
    }

    /// Copies `id` and whatever of its ancestry `dst` lacks from `src`,
    /// parents first. Returns the number of vertices shipped.
    fn deliver(&mut self, src: usize, dst: usize, id: VertexId) -> Result<u64> {
        if self.nodes[dst].dag.contains(&id) {
            return Ok(0);
        }
        let missing = missing_ancestry(&self.nodes[src].dag, &self.nodes[dst].dag, id)?;
        let shipped = missing.len() as u64;
        let node = &mut self.nodes[dst];
        for v in missing {
            let vid = v.id;
            node.dag.on_receive_tx(v)?;
            node.queue.push_back(vid);
            if self.tracked.contains_key(&vid) {
                node.waiting.push(vid);
            }
        }
        Ok(shipped)
    }

    /// One scheduler round at node `u`; returns the query messages sent.
    fn step(&mut self, u: usize, sample: &mut Vec<usize>, rng: &mut SimRng) -> Result<u64> {
        self.nodes[u].dag.tick();
        let Some(id) = self.nodes[u].queue.pop_front() else {
            self.maybe_nop(u)?;
            return Ok(0);
        };
        let cfg = self.cfg;
        let n = cfg.c + cfg.b;
        let k = cfg.params.k as usize;
        floyd_into(n - 1, k, sample, rng);
        for s in sample.iter_mut() {
            if *s >= u {
                *s += 1;
            }
        }
        let a = cfg.params.a;
        let mut sent = 0u64;
        let mut yes = 0u32;
        let mut missing = 0usize;
        let mut asked: Vec<usize> = Vec::new();
        let mut batch = sample.clone();
        'query: loop {
            for &j in &batch {
                sent += 1;
                match self.vote(u, j, id)? {
                    Some(true) => yes += 1,
                    Some(false) => {}
                    None => missing += 1,
                }
                if cfg.early_termination && yes >= a {
                    break 'query;
                }
            }
            if missing == 0 {
                break;
            }
            if asked.is_empty() {
                asked.push(u);
            }
            asked.extend_from_slice(&batch);
            batch = sample_excluding(n, missing, &asked, rng)?;
            missing = 0;
        }
        let accepted = self.nodes[u].dag.record_query_result(&id, yes)?;
        for a in accepted {
            self.nodes[u].waiting.retain(|w| *w != a);
            if let Some(&r) = self.tracked.get(&a) {
                let rec = &mut self.records[r];
                rec.accepted_by += 1;
                rec.first_accepted_at.get_or_insert(self.round);
                if rec.accepted_by == cfg.c {
                    rec.all_accepted_at = Some(self.round);
                }
            }
        }
        Ok(sent)
    }

    fn vote(&mut self, u: usize, j: usize, id: VertexId) -> Result<Option<bool>> {
        if j >= self.cfg.c {
            return Ok(match self.cfg.adversary {
                AvalancheAdversary::None => Some(true),
                AvalancheAdversary::Refuse => None,
                AvalancheAdversary::Withhold => Some(false),
            });
        }
        self.fetched += self.deliver(u, j, id)?.saturating_sub(1);
        let v = self.nodes[u].dag.vertex(&id)?.clone();
        Ok(Some(self.nodes[j].dag.on_query(&v)?))
    }

    /// Emits at most one nop: for a stale waiting transaction, or else for
    /// an unaccepted nop in its ancestry that holds it back.
    fn maybe_nop(&mut self, u: usize) -> Result<()> {
        let genesis = self.nodes[u].dag.genesis();
        let waiting = self.nodes[u].waiting.clone();
        for id in waiting {
            let dag = &self.nodes[u].dag;
            // walk up through unaccepted nops only
            let mut candidates = vec![id];
            let mut i = 0;
            while i < candidates.len() {
                for p in &dag.vertex(&candidates[i])?.parents {
                    if *p != genesis
                        && !candidates.contains(p)
                        && matches!(dag.vertex(p)?.conflict_key, ConflictKey::Unique(_))
                        && !dag.is_accepted(p)?
                    {
                        candidates.push(*p);
                    }
                }
                i += 1;
            }
            for cand in candidates {
                if let Some(nop) = self.nodes[u].dag.emit_nop_if_stuck(&cand)? {
                    self.nops += 1;
                    self.nodes[u].queue.push_back(nop.id);
                    for j in (0..self.cfg.c).filter(|&j| j != u) {
                        self.deliver(u, j, nop.id)?;
                    }
                    return Ok(());
                }
            }
        }
        Ok(())
    }

    fn max_virtuous_set(&self) -> Result<usize> {
        let mut worst = 0;
        for node in &self.nodes {
            for r in self.records.iter().filter(|r| !r.rogue) {
                if node.dag.contains(&r.vertex) {
                    worst = worst.max(node.dag.conflict_set(&r.vertex)?.members.len());
                }
            }
        }
        Ok(worst)
    }

    fn conflicting_acceptance(&self) -> Result<bool> {
        let mut winner: HashMap<u32, VertexId> = HashMap::new();
        for node in &self.nodes {
            for r in &self.records {
                if node.dag.contains(&r.vertex) && node.dag.is_accepted(&r.vertex)? {
                    match winner.get(&r.output) {
                        Some(w) if *w != r.vertex => return Ok(true),
                        _ => {
                            winner.insert(r.output, r.vertex);
                        }
                    }
                }
            }
        }
        Ok(false)
    }
}

/// Vertices of `id`'s reflexive ancestry known to `src` but not `dst`, in
/// an order where parents precede children.
fn missing_ancestry(src: &DagState, dst: &DagState, id: VertexId) -> Result<Vec<Vertex>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    // iterative post-order: a vertex is emitted after all its parents
    let mut stack = vec![(id, false)];
    while let Some((v, expanded)) = stack.pop() {
        if expanded {
            out.push(src.vertex(&v)?.clone());
            continue;
        }
        if dst.contains(&v) || !seen.insert(v) {
            continue;
        }
        stack.push((v, true));
        for p in &src.vertex(&v)?.parents {
            stack.push((*p, false));
        }
    }
    Ok(out)
}
