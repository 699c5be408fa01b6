use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

/// A SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Hash32(pub [u8; 32]);

impl Hash32 {
    pub fn of(parts: &[&[u8]]) -> Self {
        let mut h = Sha256::new();
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p);
        }
        Hash32(h.finalize().into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        Some(Hash32(bytes.try_into().ok()?))
    }
}

impl fmt::Display for Hash32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Hash32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", &self.to_hex()[..12])
    }
}

impl Serialize for Hash32 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Hash32 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Hash32::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 64 hex digits"))
    }
}

pub type VertexId = Hash32;
pub type TxId = Hash32;

/// One output of a transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutPoint {
    pub tx: TxId,
    pub index: u32,
}

/// What a vertex conflicts on. Spends conflict when they consume the same
/// output; transactions without inputs (genesis, nops) conflict with nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConflictKey {
    Input(OutPoint),
    Unique(TxId),
}

impl fmt::Display for ConflictKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConflictKey::Input(op) => write!(f, "in:{}:{}", op.tx, op.index),
            ConflictKey::Unique(tx) => write!(f, "tx:{tx}"),
        }
    }
}

impl ConflictKey {
    fn encode(&self) -> Vec<u8> {
        match self {
            ConflictKey::Input(op) => {
                let mut v = vec![0u8];
                v.extend_from_slice(&op.tx.0);
                v.extend_from_slice(&op.index.to_le_bytes());
                v
            }
            ConflictKey::Unique(tx) => {
                let mut v = vec![1u8];
                v.extend_from_slice(&tx.0);
                v
            }
        }
    }
}

/// A transaction before it is split into per-input vertices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub data: Vec<u8>,
    pub inputs: Vec<OutPoint>,
    pub outputs: u32,
}

impl Transaction {
    pub fn new(data: impl Into<Vec<u8>>, inputs: Vec<OutPoint>, outputs: u32) -> Self {
        Self {
            data: data.into(),
            inputs,
            outputs,
        }
    }

    pub fn id(&self) -> TxId {
        let mut ins = Vec::with_capacity(self.inputs.len() * 36);
        for op in &self.inputs {
            ins.extend_from_slice(&op.tx.0);
            ins.extend_from_slice(&op.index.to_le_bytes());
        }
        Hash32::of(&[b"tx", &self.data, &ins, &self.outputs.to_le_bytes()])
    }

    /// One vertex per input, all sharing `parents`; a transaction with no
    /// inputs becomes a single vertex that conflicts with nothing.
    pub fn vertices(&self, parents: &[VertexId]) -> Vec<Vertex> {
        let tx = self.id();
        if self.inputs.is_empty() {
            return vec![Vertex::new(
                tx,
                self.data.clone(),
                self.outputs,
                ConflictKey::Unique(tx),
                parents.to_vec(),
            )];
        }
        self.inputs
            .iter()
            .map(|&op| {
                Vertex::new(
                    tx,
                    self.data.clone(),
                    self.outputs,
                    ConflictKey::Input(op),
                    parents.to_vec(),
                )
            })
            .collect()
    }
}

/// A DAG entry: one transaction-input pair together with its parent edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: VertexId,
    pub tx: TxId,
    pub data: Vec<u8>,
    pub outputs: u32,
    pub conflict_key: ConflictKey,
    pub parents: Vec<VertexId>,
}

impl Vertex {
    pub fn new(
        tx: TxId,
        data: Vec<u8>,
        outputs: u32,
        conflict_key: ConflictKey,
        parents: Vec<VertexId>,
    ) -> Self {
        let id = Self::content_id(&tx, &data, outputs, &conflict_key, &parents);
        Self {
            id,
            tx,
            data,
            outputs,
            conflict_key,
            parents,
        }
    }

    pub fn content_id(
        tx: &TxId,
        data: &[u8],
        outputs: u32,
        key: &ConflictKey,
        parents: &[VertexId],
    ) -> VertexId {
        let mut ps = Vec::with_capacity(parents.len() * 32);
        for p in parents {
            ps.extend_from_slice(&p.0);
        }
        Hash32::of(&[
            b"vertex",
            &tx.0,
            data,
            &outputs.to_le_bytes(),
            &key.encode(),
            &ps,
        ])
    }

    pub fn has_valid_id(&self) -> bool {
        self.id
            == Self::content_id(
                &self.tx,
                &self.data,
                self.outputs,
                &self.conflict_key,
                &self.parents,
            )
    }
}
