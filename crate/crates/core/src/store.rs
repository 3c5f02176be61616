//! Per-node partial match tables.
//!
//! Each tree node owns a multi-valued hash table keyed by the projection of
//! a match onto the parent's cut subgraph. Keys only encode vertex
//! assignments; two matches agree on a key exactly when they assign the same
//! data vertices to the cut's query vertices.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::graph::Timestamp;
use crate::query::{Mapping, MatchSignature, NodeId, QueryError, Subgraph};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialMatch {
    pub node: NodeId,
    pub mapping: Mapping,
    pub t_low: Timestamp,
    pub t_high: Timestamp,
}

impl PartialMatch {
    /// Time between the earliest and latest mapped edge.
    pub fn span(&self) -> Timestamp {
        self.t_high - self.t_low
    }

    pub fn signature(&self) -> MatchSignature {
        self.mapping.signature()
    }
}

/// Opaque join key. The empty key is the universal key shared by every
/// match when the cut is empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JoinKey(Vec<u8>);

impl JoinKey {
    pub const UNIVERSAL: JoinKey = JoinKey(Vec::new());

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

/// Serializes `(query vertex, data vertex)` for each vertex of `cut`, in
/// query-vertex order.
pub fn make_join_key(cut: Subgraph, mapping: &Mapping) -> Result<JoinKey, QueryError> {
    let mut bytes = Vec::with_capacity(cut.vertices.count_ones() as usize * 6);
    for q in cut.vertex_indices() {
        let v = mapping
            .vertices
            .get(q)
            .copied()
            .flatten()
            .ok_or(QueryError::DomainMismatch)?;
        bytes.extend_from_slice(&(q as u16).to_le_bytes());
        bytes.extend_from_slice(&v.0.to_le_bytes());
    }
    Ok(JoinKey(bytes))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("match {signature:?} already stored at node {node}")]
    DuplicateMatch { node: NodeId, signature: MatchSignature },
}

#[derive(Debug, Default, Clone)]
struct NodeTable {
    buckets: HashMap<JoinKey, Vec<PartialMatch>>,
    signatures: HashSet<MatchSignature>,
    len: usize,
}

#[derive(Debug, Clone)]
pub struct MatchStore {
    tables: Vec<NodeTable>,
}

impl MatchStore {
    pub fn new(node_count: usize) -> Self {
        Self {
            tables: vec![NodeTable::default(); node_count],
        }
    }

    pub fn insert_match(&mut self, key: JoinKey, m: PartialMatch) -> Result<(), StoreError> {
        let table = &mut self.tables[m.node.0];
        let signature = m.signature();
        if table.signatures.contains(&signature) {
            return Err(StoreError::DuplicateMatch { node: m.node, signature });
        }
        table.signatures.insert(signature);
        table.buckets.entry(key).or_default().push(m);
        table.len += 1;
        Ok(())
    }

    /// Stored matches at `node` under `key` whose `t_low` is at or after
    /// `not_before`. Older matches are skipped here even if not yet pruned.
    pub fn lookup_matches<'a>(
        &'a self,
        node: NodeId,
        key: &JoinKey,
        not_before: Timestamp,
    ) -> impl Iterator<Item = &'a PartialMatch> + 'a {
        self.tables[node.0]
            .buckets
            .get(key)
            .into_iter()
            .flatten()
            .filter(move |m| m.t_low >= not_before)
    }

    pub fn contains(&self, node: NodeId, signature: &MatchSignature) -> bool {
        self.tables[node.0].signatures.contains(signature)
    }

    /// Removes every match with `t_low < current_time - window`.
    pub fn prune_store(&mut self, current_time: Timestamp, window: Timestamp) -> usize {
        self.prune_before(current_time.saturating_sub(window))
    }

    /// Removes every match with `t_low < cutoff`.
    pub fn prune_before(&mut self, cutoff: Timestamp) -> usize {
        let mut removed = 0;
        for table in &mut self.tables {
            let NodeTable {
                buckets,
                signatures,
                len,
            } = table;
            buckets.retain(|_, bucket| {
                bucket.retain(|m| {
                    let keep = m.t_low >= cutoff;
                    if !keep {
                        signatures.remove(&m.signature());
                        *len -= 1;
                        removed += 1;
                    }
                    keep
                });
                !bucket.is_empty()
            });
        }
        removed
    }

    pub fn len(&self, node: NodeId) -> usize {
        self.tables[node.0].len
    }

    pub fn total(&self) -> usize {
        self.tables.iter().map(|t| t.len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Stored-match count per node, indexed by node id.
    pub fn counts(&self) -> Vec<usize> {
        self.tables.iter().map(|t| t.len).collect()
    }

    /// Every stored match, in no particular order.
    pub fn iter(&self) -> impl Iterator<Item = &PartialMatch> {
        self.tables.iter().flat_map(|t| t.buckets.values().flatten())
    }
}
