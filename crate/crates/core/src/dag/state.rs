use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::ids::{ConflictKey, OutPoint, Transaction, TxId, Vertex, VertexId};
use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvalancheParams {
    pub k: u32,
    pub a: u32,
    /// Consecutive successes for early acceptance of a virtuous vertex.
    pub beta1: u32,
    /// Consecutive successes for acceptance regardless of conflicts.
    pub beta2: u32,
    /// Parent fan-in for new vertices.
    pub parents: usize,
    /// Clock ticks without progress before a nop is issued.
    pub nop_staleness: u64,
}

impl AvalancheParams {
    pub fn new(k: u32, a: u32, beta1: u32, beta2: u32) -> Result<Self> {
        let p = Self {
            k,
            a,
            beta1,
            beta2,
            parents: 2,
            nop_staleness: beta1 as u64,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.k >= 1 && self.a > self.k / 2 && self.a <= self.k,
            Argument,
            "a = {} outside ({}, {}]",
            self.a,
            self.k / 2,
            self.k
        );
        ensure!(
            self.beta1 >= 1 && self.beta2 >= self.beta1,
            Argument,
            "need 1 <= beta1 <= beta2, got {} and {}",
            self.beta1,
            self.beta2
        );
        ensure!(self.parents >= 1, Argument, "parent fan-in must be positive");
        ensure!(self.nop_staleness >= 1, Argument, "nop staleness must be positive");
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Entry {
    vertex: Vertex,
    chit: bool,
    queried: bool,
    confidence: u64,
    set: usize,
    children: Vec<usize>,
    parents: Vec<usize>,
    accepted: bool,
    last_progress: u64,
    /// Cached strong preference; rebuilt whenever some set's pref moves.
    strong: bool,
}

#[derive(Debug, Clone)]
struct ConflictSet {
    key: ConflictKey,
    members: Vec<usize>,
    pref: usize,
    last: usize,
    cnt: u64,
    accepted: Option<usize>,
}

/// Read-only snapshot of a conflict set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConflictSetView {
    pub key: ConflictKey,
    pub members: Vec<VertexId>,
    pub pref: VertexId,
    pub last: VertexId,
    pub cnt: u64,
    pub accepted: Option<VertexId>,
}

#[derive(Serialize)]
struct ExportRecord {
    id: String,
    parents: Vec<String>,
    conflict_key: String,
    chit: u8,
    confidence: u64,
}

/// One node's view of the DAG.
///
/// Vertices are stored in arrival order, which is always a topological
/// order since a vertex is only admitted once its parents are present.
#[derive(Debug, Clone)]
pub struct DagState {
    params: AvalancheParams,
    entries: Vec<Entry>,
    index: HashMap<VertexId, usize>,
    sets: Vec<ConflictSet>,
    set_index: HashMap<ConflictKey, usize>,
    txs: HashMap<TxId, u32>,
    pending: BTreeSet<usize>,
    clock: u64,
}

impl DagState {
    /// A DAG holding only the genesis vertex, whose transaction creates
    /// `genesis_outputs` spendable outputs.
    pub fn new(params: AvalancheParams, genesis_outputs: u32) -> Result<Self> {
        params.validate()?;
        let genesis = Self::genesis_tx(genesis_outputs).vertices(&[]).remove(0);
        let mut dag = Self {
            params,
            entries: Vec::new(),
            index: HashMap::new(),
            sets: Vec::new(),
            set_index: HashMap::new(),
            txs: HashMap::new(),
            pending: BTreeSet::new(),
            clock: 0,
        };
        dag.insert(genesis);
        let g = &mut dag.entries[0];
        g.chit = true;
        g.queried = true;
        g.confidence = 1;
        g.accepted = true;
        dag.sets[0].accepted = Some(0);
        dag.pending.clear();
        Ok(dag)
    }

    pub fn genesis_tx(outputs: u32) -> Transaction {
        Transaction::new("genesis", vec![], outputs)
    }

    pub fn params(&self) -> &AvalancheParams {
        &self.params
    }

    pub fn genesis(&self) -> VertexId {
        self.entries[0].vertex.id
    }

    pub fn genesis_outputs(&self) -> Vec<OutPoint> {
        let g = &self.entries[0].vertex;
        (0..g.outputs).map(|index| OutPoint { tx: g.tx, index }).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &VertexId) -> bool {
        self.index.contains_key(id)
    }

    /// Vertex ids in arrival order.
    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.entries.iter().map(|e| e.vertex.id)
    }

    /// Ids of vertices this node has not queried yet, in arrival order.
    pub fn unqueried(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.entries
            .iter()
            .filter(|e| !e.queried)
            .map(|e| e.vertex.id)
    }

    fn idx(&self, id: &VertexId) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::Lookup(format!("unknown vertex {id}")))
    }

    pub fn vertex(&self, id: &VertexId) -> Result<&Vertex> {
        Ok(&self.entries[self.idx(id)?].vertex)
    }

    pub fn chit(&self, id: &VertexId) -> Result<bool> {
        Ok(self.entries[self.idx(id)?].chit)
    }

    pub fn is_queried(&self, id: &VertexId) -> Result<bool> {
        Ok(self.entries[self.idx(id)?].queried)
    }

    pub fn children(&self, id: &VertexId) -> Result<Vec<VertexId>> {
        let e = &self.entries[self.idx(id)?];
        Ok(e.children.iter().map(|&c| self.entries[c].vertex.id).collect())
    }

    pub fn utxo_exists(&self, op: &OutPoint) -> bool {
        self.txs.get(&op.tx).is_some_and(|&n| op.index < n)
    }

    /// The currently preferred spender of `op`, if any spend is known.
    pub fn preferred_spender(&self, op: &OutPoint) -> Option<VertexId> {
        let s = self.set_index.get(&ConflictKey::Input(*op))?;
        Some(self.entries[self.sets[*s].pref].vertex.id)
    }

    pub fn conflict_set(&self, id: &VertexId) -> Result<ConflictSetView> {
        let s = &self.sets[self.entries[self.idx(id)?].set];
        let vid = |i: usize| self.entries[i].vertex.id;
        Ok(ConflictSetView {
            key: s.key,
            members: s.members.iter().map(|&m| vid(m)).collect(),
            pref: vid(s.pref),
            last: vid(s.last),
            cnt: s.cnt,
            accepted: s.accepted.map(vid),
        })
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// Advances the local clock used for nop staleness.
    pub fn tick(&mut self) {
        self.clock += 1;
    }

    fn insert(&mut self, v: Vertex) -> usize {
        let i = self.entries.len();
        let parents: Vec<usize> = v.parents.iter().map(|p| self.index[p]).collect();
        for &p in &parents {
            self.entries[p].children.push(i);
        }
        let set = match self.set_index.get(&v.conflict_key) {
            Some(&s) => {
                self.sets[s].members.push(i);
                s
            }
            None => {
                let s = self.sets.len();
                self.sets.push(ConflictSet {
                    key: v.conflict_key,
                    members: vec![i],
                    pref: i,
                    last: i,
                    cnt: 0,
                    accepted: None,
                });
                self.set_index.insert(v.conflict_key, s);
                s
            }
        };
        self.txs.entry(v.tx).or_insert(v.outputs);
        self.index.insert(v.id, i);
        let strong = self.sets[set].pref == i && parents.iter().all(|&p| self.entries[p].strong);
        self.entries.push(Entry {
            vertex: v,
            chit: false,
            queried: false,
            confidence: 0,
            set,
            children: Vec::new(),
            parents,
            accepted: false,
            last_progress: self.clock,
            strong,
        });
        self.pending.insert(i);
        i
    }

    /// Admits a vertex whose parents are already present. Returns `false`
    /// when the vertex was known.
    pub fn on_receive_tx(&mut self, v: Vertex) -> Result<bool> {
        if self.index.contains_key(&v.id) {
            return Ok(false);
        }
        ensure!(v.has_valid_id(), Validation, "vertex id {} does not match content", v.id);
        ensure!(!v.parents.is_empty(), Validation, "vertex {} has no parents", v.id);
        if let Some(p) = v.parents.iter().find(|p| !self.index.contains_key(p)) {
            return Err(Error::Dependency(format!(
                "vertex {} references unknown parent {p}",
                v.id
            )));
        }
        if let ConflictKey::Input(op) = &v.conflict_key {
            ensure!(
                self.utxo_exists(op),
                Validation,
                "vertex {} spends unknown output {}:{}",
                v.id,
                op.tx,
                op.index
            );
        }
        self.insert(v);
        Ok(true)
    }

    /// Issues a transaction spending `inputs`, one vertex per input, all
    /// attached to the parents chosen by [`DagState::parent_selection`].
    pub fn on_generate_tx(
        &mut self,
        data: impl Into<Vec<u8>>,
        inputs: Vec<OutPoint>,
        outputs: u32,
    ) -> Result<Vec<Vertex>> {
        ensure!(!inputs.is_empty(), Argument, "a transaction needs at least one input");
        if let Some(op) = inputs.iter().find(|op| !self.utxo_exists(op)) {
            return Err(Error::Validation(format!(
                "unknown output {}:{}",
                op.tx, op.index
            )));
        }
        let parents = self.parent_selection(self.params.parents);
        let vs = Transaction::new(data, inputs, outputs).vertices(&parents);
        for v in &vs {
            self.on_receive_tx(v.clone())?;
        }
        Ok(vs)
    }

    pub fn confidence(&self, id: &VertexId) -> Result<u64> {
        Ok(self.entries[self.idx(id)?].confidence)
    }

    fn preferred(&self, i: usize) -> bool {
        self.sets[self.entries[i].set].pref == i
    }

    pub fn is_preferred(&self, id: &VertexId) -> Result<bool> {
        Ok(self.preferred(self.idx(id)?))
    }

    pub fn is_strongly_preferred(&self, id: &VertexId) -> Result<bool> {
        Ok(self.entries[self.idx(id)?].strong)
    }

    // arrival order is topological, so one forward pass suffices
    fn rebuild_strong(&mut self) {
        for i in 0..self.entries.len() {
            let strong = self.preferred(i)
                && self.entries[i].parents.iter().all(|&p| self.entries[p].strong);
            self.entries[i].strong = strong;
        }
    }

    /// Reflexive ancestors of `i`, ascending (hence topological).
    fn ancestors_of(&self, i: usize) -> Vec<usize> {
        let mut seen = vec![false; self.entries.len()];
        let mut stack = vec![i];
        let mut out = Vec::new();
        seen[i] = true;
        while let Some(j) = stack.pop() {
            out.push(j);
            for &p in &self.entries[j].parents {
                if !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn ancestors(&self, id: &VertexId) -> Result<Vec<VertexId>> {
        let i = self.idx(id)?;
        Ok(self
            .ancestors_of(i)
            .into_iter()
            .map(|j| self.entries[j].vertex.id)
            .collect())
    }

    /// Answers a query about `v`, admitting it first if new.
    pub fn on_query(&mut self, v: &Vertex) -> Result<bool> {
        if !self.contains(&v.id) {
            self.on_receive_tx(v.clone())?;
        }
        self.is_strongly_preferred(&v.id)
    }

    /// Applies the outcome of this node's single query of `id`. Returns the
    /// vertices that became accepted as a result.
    pub fn record_query_result(&mut self, id: &VertexId, yes_votes: u32) -> Result<Vec<VertexId>> {
        let i = self.idx(id)?;
        if self.entries[i].queried {
            return Err(Error::Protocol(format!("vertex {id} was already queried")));
        }
        self.entries[i].queried = true;
        let anc = self.ancestors_of(i);
        if yes_votes >= self.params.a {
            self.entries[i].chit = true;
            for &j in &anc {
                self.entries[j].confidence += 1;
                self.entries[j].last_progress = self.clock;
            }
            let mut moved = false;
            for &j in &anc {
                let s = self.entries[j].set;
                let pref = self.sets[s].pref;
                if self.entries[j].confidence > self.entries[pref].confidence {
                    self.sets[s].pref = j;
                    moved = true;
                }
                let set = &mut self.sets[s];
                if set.last != j {
                    set.last = j;
                    set.cnt = 1;
                } else {
                    set.cnt += 1;
                }
            }
            if moved {
                self.rebuild_strong();
            }
        } else {
            for &j in &anc {
                let s = self.entries[j].set;
                self.sets[s].cnt = 0;
            }
        }
        Ok(self.refresh_acceptance())
    }

    /// Re-evaluates every unaccepted vertex in topological order so parents
    /// settle before their children.
    fn refresh_acceptance(&mut self) -> Vec<VertexId> {
        let candidates: Vec<usize> = self.pending.iter().copied().collect();
        let mut newly = Vec::new();
        for i in candidates {
            if self.acceptable(i) {
                let s = self.entries[i].set;
                self.sets[s].accepted = Some(i);
                self.entries[i].accepted = true;
                self.pending.remove(&i);
                newly.push(self.entries[i].vertex.id);
            }
        }
        newly
    }

    fn acceptable(&self, i: usize) -> bool {
        let e = &self.entries[i];
        let set = &self.sets[e.set];
        // the counter belongs to `last`; nobody else may ride on it, and a
        // set never accepts a second member
        if set.accepted.is_some() || set.last != i {
            return false;
        }
        let early = set.members.len() == 1
            && set.cnt >= self.params.beta1 as u64
            && e.parents.iter().all(|&p| self.entries[p].accepted);
        early || set.cnt >= self.params.beta2 as u64
    }

    pub fn is_accepted(&self, id: &VertexId) -> Result<bool> {
        Ok(self.entries[self.idx(id)?].accepted)
    }

    pub fn accepted_count(&self) -> usize {
        self.entries.iter().filter(|e| e.accepted).count()
    }

    /// Up to `p` of the most recent vertices that are strongly preferred,
    /// have positive confidence, and have no child with both properties.
    /// The genesis vertex always qualifies, so the result is never empty.
    pub fn parent_selection(&self, p: usize) -> Vec<VertexId> {
        let n = self.entries.len();
        let eligible: Vec<bool> = self
            .entries
            .iter()
            .map(|e| e.strong && e.confidence > 0)
            .collect();
        let mut picked: Vec<usize> = (0..n)
            .rev()
            .filter(|&i| eligible[i] && !self.entries[i].children.iter().any(|&c| eligible[c]))
            .take(p)
            .collect();
        picked.sort_unstable();
        picked.into_iter().map(|i| self.entries[i].vertex.id).collect()
    }

    /// Issues a nop child of `id` when `id` is virtuous, unaccepted, has all
    /// parents accepted, and no chit has landed in its progeny for
    /// `nop_staleness` ticks. The nop is admitted locally and returned, or
    /// `None` if an identical nop was already known.
    pub fn emit_nop_if_stuck(&mut self, id: &VertexId) -> Result<Option<Vertex>> {
        let i = self.idx(id)?;
        let e = &self.entries[i];
        let stuck = !e.accepted
            && self.sets[e.set].members.len() == 1
            && e.parents.iter().all(|&p| self.entries[p].accepted)
            && self.clock.saturating_sub(e.last_progress) >= self.params.nop_staleness;
        if !stuck {
            return Ok(None);
        }
        self.entries[i].last_progress = self.clock;
        let mut data = b"nop".to_vec();
        data.extend_from_slice(&id.0);
        data.extend_from_slice(&self.clock.to_le_bytes());
        let nop = Transaction::new(data, vec![], 0).vertices(&[*id]).remove(0);
        // another node may already have issued the identical nop
        if !self.on_receive_tx(nop.clone())? {
            return Ok(None);
        }
        Ok(Some(nop))
    }

    /// One JSON object per vertex in arrival order.
    pub fn export_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let rec = ExportRecord {
                id: e.vertex.id.to_hex(),
                parents: e.vertex.parents.iter().map(|p| p.to_hex()).collect(),
                conflict_key: e.vertex.conflict_key.to_string(),
                chit: e.chit as u8,
                confidence: e.confidence,
            };
            out.push_str(&serde_json::to_string(&rec).expect("plain record serializes"));
            out.push('\n');
        }
        out
    }
}
