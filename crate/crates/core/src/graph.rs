//! Dynamic multi-relational graph.
//!
//! Vertices are partitioned by type and every edge joins two vertices of
//! different types (k-partite). Edges carry an integer timestamp and are kept
//! in per-vertex adjacency lists, grouped by edge type and sorted by time, so
//! that window-restricted neighborhood scans are a binary search followed by a
//! contiguous walk.
//!
//! Edges are stored as incidences on both endpoints; the `(src, dst)`
//! orientation is kept on the edge record but never used for matching.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Time in caller-defined integer units.
pub type Timestamp = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexType(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeType(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub u32);

/// Edge identifiers are dense and assigned in arrival order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("timestamp {timestamp} regresses below {floor} (current time {current}, slack {slack})")]
    TimestampRegression {
        timestamp: Timestamp,
        current: Timestamp,
        slack: Timestamp,
        floor: Timestamp,
    },
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("vertex {key} already has {existing}, got {requested}")]
    VertexConflict {
        key: String,
        existing: String,
        requested: String,
    },
}

/// Registered vertex and edge types.
///
/// Edge types are registered against one or more unordered pairs of vertex
/// types. Ids are dense in registration order.
#[derive(Debug, Clone, Default)]
pub struct Schema {
    vertex_types: Vec<String>,
    edge_types: Vec<String>,
    vertex_index: HashMap<String, VertexType>,
    edge_index: HashMap<String, EdgeType>,
    // per edge type, the unordered endpoint type pairs it may connect
    endpoints: Vec<Vec<(VertexType, VertexType)>>,
}

fn ordered_pair(a: VertexType, b: VertexType) -> (VertexType, VertexType) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a vertex type, returning the existing id if already known.
    pub fn register_vertex_type(&mut self, name: &str) -> VertexType {
        if let Some(&t) = self.vertex_index.get(name) {
            return t;
        }
        let t = VertexType(self.vertex_types.len() as u16);
        self.vertex_types.push(name.to_string());
        self.vertex_index.insert(name.to_string(), t);
        t
    }

    /// Registers `name` as a relation between vertex types `a` and `b`.
    pub fn register_edge_type(&mut self, name: &str, a: &str, b: &str) -> Result<EdgeType, GraphError> {
        if a == b {
            return Err(GraphError::SchemaViolation(format!(
                "edge type {name} would connect {a} to itself"
            )));
        }
        let ta = self.register_vertex_type(a);
        let tb = self.register_vertex_type(b);
        let et = match self.edge_index.get(name) {
            Some(&et) => et,
            None => {
                let et = EdgeType(self.edge_types.len() as u16);
                self.edge_types.push(name.to_string());
                self.edge_index.insert(name.to_string(), et);
                self.endpoints.push(Vec::new());
                et
            }
        };
        let pair = ordered_pair(ta, tb);
        let pairs = &mut self.endpoints[et.0 as usize];
        if !pairs.contains(&pair) {
            pairs.push(pair);
        }
        Ok(et)
    }

    pub fn vertex_type(&self, name: &str) -> Option<VertexType> {
        self.vertex_index.get(name).copied()
    }

    pub fn edge_type(&self, name: &str) -> Option<EdgeType> {
        self.edge_index.get(name).copied()
    }

    pub fn vertex_type_name(&self, t: VertexType) -> &str {
        &self.vertex_types[t.0 as usize]
    }

    pub fn edge_type_name(&self, t: EdgeType) -> &str {
        &self.edge_types[t.0 as usize]
    }

    pub fn vertex_type_count(&self) -> usize {
        self.vertex_types.len()
    }

    pub fn edge_type_count(&self) -> usize {
        self.edge_types.len()
    }

    /// Whether `etype` is registered between the two vertex types, in either order.
    pub fn allows(&self, etype: EdgeType, a: VertexType, b: VertexType) -> bool {
        self.endpoints
            .get(etype.0 as usize)
            .is_some_and(|pairs| pairs.contains(&ordered_pair(a, b)))
    }
}

/// Endpoint description carried by an incoming edge. The vertex is created on
/// first sight; later sightings must agree on type and may only fill in an
/// empty label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VertexSpec {
    pub key: String,
    pub vtype: String,
    pub label: String,
}

impl VertexSpec {
    pub fn new(key: impl Into<String>, vtype: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            vtype: vtype.into(),
            label: label.into(),
        }
    }
}

/// An edge as it arrives on the stream, before vertex resolution.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StreamEdge {
    pub timestamp: Timestamp,
    pub src: VertexSpec,
    pub dst: VertexSpec,
    pub etype: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vertex {
    pub id: VertexId,
    pub key: String,
    pub vtype: VertexType,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TemporalEdge {
    pub id: EdgeId,
    pub src: VertexId,
    pub dst: VertexId,
    pub etype: EdgeType,
    pub timestamp: Timestamp,
}

impl TemporalEdge {
    /// The endpoint opposite `v`.
    pub fn other(&self, v: VertexId) -> VertexId {
        if self.src == v {
            self.dst
        } else {
            self.src
        }
    }
}

/// One adjacency entry seen from a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub neighbor: VertexId,
    pub edge: EdgeId,
    pub timestamp: Timestamp,
}

#[derive(Debug, Default)]
struct Adjacency {
    // few edge types per vertex; a linear probe beats hashing here
    lists: Vec<(EdgeType, VecDeque<Incidence>)>,
}

impl Adjacency {
    fn list(&self, etype: EdgeType) -> Option<&VecDeque<Incidence>> {
        self.lists.iter().find(|(t, _)| *t == etype).map(|(_, l)| l)
    }

    fn list_mut(&mut self, etype: EdgeType) -> &mut VecDeque<Incidence> {
        let pos = match self.lists.iter().position(|(t, _)| *t == etype) {
            Some(p) => p,
            None => {
                self.lists.push((etype, VecDeque::new()));
                self.lists.len() - 1
            }
        };
        &mut self.lists[pos].1
    }

    fn insert(&mut self, etype: EdgeType, inc: Incidence) {
        let list = self.list_mut(etype);
        match list.back() {
            Some(last) if last.timestamp > inc.timestamp => {
                let at = list.partition_point(|x| x.timestamp <= inc.timestamp);
                list.insert(at, inc);
            }
            _ => list.push_back(inc),
        }
    }
}

/// Insert-only timestamped graph with optional window expiry.
///
/// Single writer: mutation requires `&mut self`; concurrent readers are safe
/// between mutations.
/// Append-only storage in fixed-size chunks, so growth never copies or
/// first-touches one large buffer in a single step.
#[derive(Debug, Clone, Default)]
struct ChunkedVec<T> {
    chunks: Vec<Vec<T>>,
    len: usize,
}

impl<T> ChunkedVec<T> {
    const CHUNK: usize = 1 << 12;

    fn len(&self) -> usize {
        self.len
    }

    fn push(&mut self, value: T) {
        if self.len.is_multiple_of(Self::CHUNK) {
            self.chunks.push(Vec::with_capacity(Self::CHUNK));
        }
        self.chunks.last_mut().expect("chunk").push(value);
        self.len += 1;
    }

    fn get(&self, i: usize) -> Option<&T> {
        self.chunks.get(i / Self::CHUNK)?.get(i % Self::CHUNK)
    }

    fn get_mut(&mut self, i: usize) -> Option<&mut T> {
        self.chunks.get_mut(i / Self::CHUNK)?.get_mut(i % Self::CHUNK)
    }

    fn iter_from(&self, start: usize) -> impl Iterator<Item = &T> {
        let skip = start % Self::CHUNK;
        self.chunks[(start / Self::CHUNK).min(self.chunks.len())..]
            .iter()
            .flatten()
            .skip(skip)
    }
}

#[derive(Debug)]
pub struct DynamicGraph {
    schema: Arc<Schema>,
    vertices: Vec<Vertex>,
    adjacency: Vec<Adjacency>,
    by_key: HashMap<String, VertexId>,
    edges: ChunkedVec<Option<TemporalEdge>>,
    // edges below this index are known to be expired
    live_from: usize,
    edge_count: usize,
    current_time: Timestamp,
    disorder_slack: Timestamp,
}

impl DynamicGraph {
    pub fn new(schema: Arc<Schema>) -> Self {
        Self::with_disorder_slack(schema, 0)
    }

    /// A graph that accepts timestamps up to `slack` units below the current time.
    pub fn with_disorder_slack(schema: Arc<Schema>, slack: Timestamp) -> Self {
        Self {
            schema,
            vertices: Vec::new(),
            adjacency: Vec::new(),
            by_key: HashMap::new(),
            edges: ChunkedVec::default(),
            live_from: 0,
            edge_count: 0,
            current_time: 0,
            disorder_slack: slack,
        }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn current_time(&self) -> Timestamp {
        self.current_time
    }

    pub fn disorder_slack(&self) -> Timestamp {
        self.disorder_slack
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, v: VertexId) -> &Vertex {
        &self.vertices[v.0 as usize]
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Vertex> {
        self.vertices.iter()
    }

    pub fn vertex_by_key(&self, key: &str) -> Option<VertexId> {
        self.by_key.get(key).copied()
    }

    pub fn edge(&self, e: EdgeId) -> Option<&TemporalEdge> {
        self.edges.get(e.0 as usize).and_then(Option::as_ref)
    }

    /// All live edges in id (arrival) order.
    pub fn edges(&self) -> impl Iterator<Item = &TemporalEdge> {
        self.edges.iter_from(self.live_from).flatten()
    }

    fn resolve_endpoint(&self, spec: &VertexSpec) -> Result<(Option<VertexId>, VertexType), GraphError> {
        let vtype = self.schema.vertex_type(&spec.vtype).ok_or_else(|| {
            GraphError::SchemaViolation(format!("unregistered vertex type {}", spec.vtype))
        })?;
        match self.by_key.get(&spec.key) {
            Some(&id) => {
                let v = &self.vertices[id.0 as usize];
                if v.vtype != vtype {
                    return Err(GraphError::VertexConflict {
                        key: spec.key.clone(),
                        existing: format!("type {}", self.schema.vertex_type_name(v.vtype)),
                        requested: format!("type {}", spec.vtype),
                    });
                }
                if !spec.label.is_empty() && !v.label.is_empty() && v.label != spec.label {
                    return Err(GraphError::VertexConflict {
                        key: spec.key.clone(),
                        existing: format!("label {:?}", v.label),
                        requested: format!("label {:?}", spec.label),
                    });
                }
                Ok((Some(id), vtype))
            }
            None => Ok((None, vtype)),
        }
    }

    fn materialize(&mut self, spec: &VertexSpec, existing: Option<VertexId>, vtype: VertexType) -> VertexId {
        match existing {
            Some(id) => {
                let v = &mut self.vertices[id.0 as usize];
                if v.label.is_empty() && !spec.label.is_empty() {
                    v.label = spec.label.clone();
                }
                id
            }
            None => {
                let id = VertexId(self.vertices.len() as u32);
                self.vertices.push(Vertex {
                    id,
                    key: spec.key.clone(),
                    vtype,
                    label: spec.label.clone(),
                });
                self.adjacency.push(Adjacency::default());
                self.by_key.insert(spec.key.clone(), id);
                id
            }
        }
    }

    /// Inserts an edge, creating endpoints as needed.
    ///
    /// All checks run before any mutation, so a rejected edge leaves the
    /// graph untouched.
    pub fn update_graph(&mut self, edge: &StreamEdge) -> Result<TemporalEdge, GraphError> {
        let floor = self.current_time.saturating_sub(self.disorder_slack);
        if edge.timestamp < floor {
            return Err(GraphError::TimestampRegression {
                timestamp: edge.timestamp,
                current: self.current_time,
                slack: self.disorder_slack,
                floor,
            });
        }
        if edge.src.key == edge.dst.key {
            return Err(GraphError::SchemaViolation(format!("self loop on {}", edge.src.key)));
        }
        let etype = self
            .schema
            .edge_type(&edge.etype)
            .ok_or_else(|| GraphError::SchemaViolation(format!("unregistered edge type {}", edge.etype)))?;
        let (src_id, src_type) = self.resolve_endpoint(&edge.src)?;
        let (dst_id, dst_type) = self.resolve_endpoint(&edge.dst)?;
        if src_type == dst_type {
            return Err(GraphError::SchemaViolation(format!(
                "edge {} joins two vertices of type {}",
                edge.etype, edge.src.vtype
            )));
        }
        if !self.schema.allows(etype, src_type, dst_type) {
            return Err(GraphError::SchemaViolation(format!(
                "edge type {} not registered between {} and {}",
                edge.etype, edge.src.vtype, edge.dst.vtype
            )));
        }

        let src = self.materialize(&edge.src, src_id, src_type);
        let dst = self.materialize(&edge.dst, dst_id, dst_type);
        let id = EdgeId(self.edges.len() as u32);
        let record = TemporalEdge {
            id,
            src,
            dst,
            etype,
            timestamp: edge.timestamp,
        };
        self.edges.push(Some(record));
        self.edge_count += 1;
        self.adjacency[src.0 as usize].insert(
            etype,
            Incidence {
                neighbor: dst,
                edge: id,
                timestamp: edge.timestamp,
            },
        );
        self.adjacency[dst.0 as usize].insert(
            etype,
            Incidence {
                neighbor: src,
                edge: id,
                timestamp: edge.timestamp,
            },
        );
        self.current_time = self.current_time.max(edge.timestamp);
        Ok(record)
    }

    /// Incident edges of `v` with type `etype` and timestamp `>= min_ts`, in
    /// timestamp order.
    pub fn neighbors(&self, v: VertexId, etype: EdgeType, min_ts: Timestamp) -> Neighbors<'_> {
        let list = self.adjacency.get(v.0 as usize).and_then(|a| a.list(etype));
        match list {
            Some(list) => {
                let start = list.partition_point(|x| x.timestamp < min_ts);
                Neighbors {
                    inner: Some(list.range(start..)),
                }
            }
            None => Neighbors { inner: None },
        }
    }

    /// Like [`neighbors`](Self::neighbors) but looks the vertex up by key.
    pub fn neighbors_by_key(
        &self,
        key: &str,
        etype: EdgeType,
        min_ts: Timestamp,
    ) -> Result<Neighbors<'_>, GraphError> {
        let v = self
            .vertex_by_key(key)
            .ok_or_else(|| GraphError::UnknownVertex(key.to_string()))?;
        Ok(self.neighbors(v, etype, min_ts))
    }

    /// Number of incident edges of type `etype` at or after `min_ts`.
    pub fn degree_since(&self, v: VertexId, etype: EdgeType, min_ts: Timestamp) -> usize {
        self.neighbors(v, etype, min_ts).len()
    }

    /// Every incident edge of `v`, grouped by type, unfiltered.
    pub fn incident(&self, v: VertexId) -> impl Iterator<Item = (EdgeType, &Incidence)> {
        self.adjacency[v.0 as usize]
            .lists
            .iter()
            .flat_map(|(t, l)| l.iter().map(move |inc| (*t, inc)))
    }

    /// Removes every edge with timestamp `< cutoff`. Vertices are retained.
    pub fn expire_edges(&mut self, cutoff: Timestamp) -> usize {
        if cutoff == 0 {
            return 0;
        }
        for adj in &mut self.adjacency {
            for (_, list) in &mut adj.lists {
                let keep_from = list.partition_point(|x| x.timestamp < cutoff);
                list.drain(..keep_from);
            }
        }
        let mut removed = 0;
        let mut all_expired_prefix = true;
        for i in self.live_from..self.edges.len() {
            let slot = self.edges.get_mut(i).expect("in range");
            match *slot {
                Some(e) if e.timestamp < cutoff => {
                    *slot = None;
                    removed += 1;
                    if all_expired_prefix {
                        self.live_from = i + 1;
                    }
                }
                Some(_) => all_expired_prefix = false,
                None => {
                    if all_expired_prefix {
                        self.live_from = i + 1;
                    }
                }
            }
        }
        self.edge_count -= removed;
        removed
    }
}

/// Window-filtered adjacency iterator.
#[derive(Clone)]
pub struct Neighbors<'a> {
    inner: Option<std::collections::vec_deque::Iter<'a, Incidence>>,
}

impl<'a> Iterator for Neighbors<'a> {
    type Item = &'a Incidence;

    fn next(&mut self) -> Option<Self::Item> {
        self.inner.as_mut()?.next()
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        match &self.inner {
            Some(it) => it.size_hint(),
            None => (0, Some(0)),
        }
    }
}

impl ExactSizeIterator for Neighbors<'_> {}
