//! Edge-anchored subgraph isomorphism for search primitives.
//!
//! Every search is seeded by the arriving edge: each type-compatible query
//! edge of the primitive is pinned to it and the rest of the primitive is
//! grown from there using only edges with timestamp `>= min_ts`. Star
//! primitives, the common case for event-centric queries, get a dedicated
//! routine that walks the center's adjacency lists directly.

use std::collections::HashSet;

use thiserror::Error;

use crate::graph::{DynamicGraph, EdgeId, TemporalEdge, Timestamp, VertexId};
use crate::query::{Mapping, MatchSignature, QueryGraph, Subgraph};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SearchError {
    #[error("primitive is not a star")]
    NotAStar,
}

/// A mapping found by local search, with the timestamp range of its edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Embedding {
    pub mapping: Mapping,
    pub t_low: Timestamp,
    pub t_high: Timestamp,
}

impl Embedding {
    fn from_mapping(graph: &DynamicGraph, mapping: Mapping) -> Self {
        let (mut lo, mut hi) = (Timestamp::MAX, 0);
        for e in mapping.edges.iter().flatten() {
            let ts = graph.edge(*e).expect("mapped edge is live").timestamp;
            lo = lo.min(ts);
            hi = hi.max(ts);
        }
        Embedding {
            mapping,
            t_low: lo,
            t_high: hi,
        }
    }

    pub fn span(&self) -> Timestamp {
        self.t_high - self.t_low
    }
}

fn vertex_compatible(graph: &DynamicGraph, query: &QueryGraph, q: usize, v: VertexId) -> bool {
    let qv = &query.vertices[q];
    let dv = graph.vertex(v);
    qv.vtype == dv.vtype && qv.label.as_deref().is_none_or(|l| l == dv.label)
}

/// Every window-valid incidence count covers what the primitive demands of `q`.
fn degree_admits(graph: &DynamicGraph, query: &QueryGraph, primitive: Subgraph, q: usize, v: VertexId, min_ts: Timestamp) -> bool {
    let mut seen = Vec::new();
    for e in query.incident_edges(q, primitive) {
        let t = query.edges[e].etype;
        if seen.contains(&t) {
            continue;
        }
        seen.push(t);
        let need = query.incident_edges(q, primitive).filter(|&x| query.edges[x].etype == t).count();
        if graph.degree_since(v, t, min_ts) < need {
            return false;
        }
    }
    true
}

/// Assignments of the anchor's endpoints to query edge `qe`'s endpoints that
/// respect types and labels.
fn seed(graph: &DynamicGraph, query: &QueryGraph, qe: usize, anchor: &TemporalEdge) -> Option<(usize, VertexId, usize, VertexId)> {
    let edge = &query.edges[qe];
    if edge.etype != anchor.etype {
        return None;
    }
    for (x, y) in [(anchor.src, anchor.dst), (anchor.dst, anchor.src)] {
        if vertex_compatible(graph, query, edge.a, x) && vertex_compatible(graph, query, edge.b, y) {
            return Some((edge.a, x, edge.b, y));
        }
    }
    None
}

/// Star search: the primitive's edges all share one center vertex.
pub fn star_search(
    graph: &DynamicGraph,
    query: &QueryGraph,
    primitive: Subgraph,
    anchor: &TemporalEdge,
    min_ts: Timestamp,
) -> Result<Vec<Embedding>, SearchError> {
    let center = query.star_center(primitive).ok_or(SearchError::NotAStar)?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for qe in primitive.edge_indices() {
        let Some((qa, va, qb, vb)) = seed(graph, query, qe, anchor) else {
            continue;
        };
        let center_data = if qa == center { va } else { vb };
        if !degree_admits(graph, query, primitive, center, center_data, min_ts) {
            continue;
        }
        let mut mapping = Mapping::empty(query);
        mapping.vertices[qa] = Some(va);
        mapping.vertices[qb] = Some(vb);
        mapping.edges[qe] = Some(anchor.id);

        // labeled spokes first: they are the selective ones
        let mut spokes: Vec<usize> = primitive.edge_indices().filter(|&e| e != qe).collect();
        spokes.sort_by_key(|&e| {
            let p = query.edges[e].other(center);
            (query.vertices[p].label.is_none(), e)
        });
        let mut star = StarState {
            graph,
            query,
            center,
            center_data,
            spokes: &spokes,
            min_ts,
            mapping,
        };
        star.extend(0, &mut |m| {
            if seen.insert(m.signature()) {
                out.push(Embedding::from_mapping(graph, m.clone()));
            }
        });
    }
    Ok(out)
}

struct StarState<'a> {
    graph: &'a DynamicGraph,
    query: &'a QueryGraph,
    center: usize,
    center_data: VertexId,
    spokes: &'a [usize],
    min_ts: Timestamp,
    mapping: Mapping,
}

impl StarState<'_> {
    fn extend(&mut self, depth: usize, emit: &mut dyn FnMut(&Mapping)) {
        let Some(&qe) = self.spokes.get(depth) else {
            emit(&self.mapping);
            return;
        };
        let spoke = &self.query.edges[qe];
        let periphery = spoke.other(self.center);
        let fixed = self.mapping.vertices[periphery];
        for inc in self.graph.neighbors(self.center_data, spoke.etype, self.min_ts) {
            if self.mapping.edges.contains(&Some(inc.edge)) {
                continue;
            }
            match fixed {
                Some(w) => {
                    if inc.neighbor != w {
                        continue;
                    }
                }
                None => {
                    if self.mapping.vertices.contains(&Some(inc.neighbor))
                        || !vertex_compatible(self.graph, self.query, periphery, inc.neighbor)
                    {
                        continue;
                    }
                    self.mapping.vertices[periphery] = Some(inc.neighbor);
                }
            }
            self.mapping.edges[qe] = Some(inc.edge);
            self.extend(depth + 1, emit);
            self.mapping.edges[qe] = None;
            if fixed.is_none() {
                self.mapping.vertices[periphery] = None;
            }
        }
    }
}

/// Searches `primitive` around `anchor`, dispatching to [`star_search`]
/// for stars and to [`anchored_search`] otherwise.
pub fn local_search(
    graph: &DynamicGraph,
    query: &QueryGraph,
    primitive: Subgraph,
    anchor: &TemporalEdge,
    min_ts: Timestamp,
) -> Vec<Embedding> {
    if !primitive.edge_indices().any(|e| query.edges[e].etype == anchor.etype) {
        return Vec::new();
    }
    match star_search(graph, query, primitive, anchor, min_ts) {
        Ok(found) => found,
        Err(SearchError::NotAStar) => anchored_search(graph, query, primitive, anchor, min_ts),
    }
}

/// General anchored backtracking matcher for any connected primitive.
///
/// Query vertices are bound one at a time, always next to an already bound
/// vertex, preferring labeled and then high-degree vertices. Candidates come
/// from the bound neighbor's window-valid adjacency and must pass type, label
/// and degree filters. Once all vertices are bound, every combination of
/// parallel data edges is emitted.
pub fn anchored_search(
    graph: &DynamicGraph,
    query: &QueryGraph,
    primitive: Subgraph,
    anchor: &TemporalEdge,
    min_ts: Timestamp,
) -> Vec<Embedding> {
    let mut out = Vec::new();
    let mut seen: HashSet<MatchSignature> = HashSet::new();
    for qe in primitive.edge_indices() {
        let Some((qa, va, qb, vb)) = seed(graph, query, qe, anchor) else {
            continue;
        };
        if !degree_admits(graph, query, primitive, qa, va, min_ts) || !degree_admits(graph, query, primitive, qb, vb, min_ts) {
            continue;
        }
        let mut mapping = Mapping::empty(query);
        mapping.vertices[qa] = Some(va);
        mapping.vertices[qb] = Some(vb);
        mapping.edges[qe] = Some(anchor.id);
        let order = binding_order(query, primitive, (1u64 << qa) | (1u64 << qb));
        let mut state = Backtrack {
            graph,
            query,
            primitive,
            min_ts,
            order: &order,
            mapping,
        };
        state.bind(0, &mut |m| {
            if seen.insert(m.signature()) {
                out.push(Embedding::from_mapping(graph, m.clone()));
            }
        });
    }
    out
}

/// Greedy connected order over the primitive's unbound vertices, each
/// paired with an edge to an earlier vertex.
fn binding_order(query: &QueryGraph, primitive: Subgraph, bound: u64) -> Vec<(usize, usize)> {
    let mut bound = bound;
    let mut order = Vec::new();
    loop {
        let next = primitive
            .vertex_indices()
            .filter(|&v| bound & (1 << v) == 0)
            .filter_map(|v| {
                let via = query.incident_edges(v, primitive).find(|&e| bound & (1 << query.edges[e].other(v)) != 0)?;
                let degree = query.incident_edges(v, primitive).count();
                Some(((query.vertices[v].label.is_some(), degree, std::cmp::Reverse(v)), v, via))
            })
            .max_by_key(|(rank, _, _)| *rank);
        match next {
            Some((_, v, via)) => {
                bound |= 1 << v;
                order.push((v, via));
            }
            None => return order,
        }
    }
}

struct Backtrack<'a> {
    graph: &'a DynamicGraph,
    query: &'a QueryGraph,
    primitive: Subgraph,
    min_ts: Timestamp,
    order: &'a [(usize, usize)],
    mapping: Mapping,
}

impl Backtrack<'_> {
    fn data_edges(&self, qe: usize) -> Vec<EdgeId> {
        let edge = &self.query.edges[qe];
        let (Some(x), Some(y)) = (self.mapping.vertices[edge.a], self.mapping.vertices[edge.b]) else {
            return Vec::new();
        };
        self.graph
            .neighbors(x, edge.etype, self.min_ts)
            .filter(|inc| inc.neighbor == y)
            .map(|inc| inc.edge)
            .collect()
    }

    fn bind(&mut self, depth: usize, emit: &mut dyn FnMut(&Mapping)) {
        let Some(&(q, via)) = self.order.get(depth) else {
            let pending: Vec<usize> = self.primitive.edge_indices().filter(|&e| self.mapping.edges[e].is_none()).collect();
            self.assign_edges(&pending, emit);
            return;
        };
        let via_edge = &self.query.edges[via];
        let from = self.mapping.vertices[via_edge.other(q)].expect("order binds next to a bound vertex");
        let mut candidates: Vec<VertexId> = self
            .graph
            .neighbors(from, via_edge.etype, self.min_ts)
            .map(|inc| inc.neighbor)
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        for v in candidates {
            if self.mapping.vertices.contains(&Some(v))
                || !vertex_compatible(self.graph, self.query, q, v)
                || !degree_admits(self.graph, self.query, self.primitive, q, v, self.min_ts)
            {
                continue;
            }
            self.mapping.vertices[q] = Some(v);
            let adjacent_ok = self
                .query
                .incident_edges(q, self.primitive)
                .filter(|&e| self.mapping.vertices[self.query.edges[e].other(q)].is_some())
                .all(|e| self.mapping.edges[e].is_some() || !self.data_edges(e).is_empty());
            if adjacent_ok {
                self.bind(depth + 1, emit);
            }
            self.mapping.vertices[q] = None;
        }
    }

    fn assign_edges(&mut self, pending: &[usize], emit: &mut dyn FnMut(&Mapping)) {
        let Some((&qe, rest)) = pending.split_first() else {
            emit(&self.mapping);
            return;
        };
        for e in self.data_edges(qe) {
            if self.mapping.edges.contains(&Some(e)) {
                continue;
            }
            self.mapping.edges[qe] = Some(e);
            self.assign_edges(rest, emit);
            self.mapping.edges[qe] = None;
        }
    }
}
