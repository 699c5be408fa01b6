//! The Avalanche DAG: vertices are transaction-input pairs, grouped into
//! conflict sets by the output they consume.

mod ids;
mod state;

pub use ids::{ConflictKey, Hash32, OutPoint, Transaction, TxId, Vertex, VertexId};
pub use state::{AvalancheParams, ConflictSetView, DagState};
