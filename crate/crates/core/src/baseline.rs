//! Baseline that re-searches the neighborhood of every new edge.
//!
//! Around every new edge, the neighborhood within `diameter(query)` hops of
//! its endpoints is extracted and the whole query is matched inside it with a
//! VF2-like filter-and-verify search. Matches that use the new edge are the
//! new ones. The window and the ordering constraints used by the engine are
//! applied afterwards, so both report the same match sets.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use crate::engine::MatchRecord;
use crate::graph::{DynamicGraph, EdgeId, EdgeType, GraphError, StreamEdge, TemporalEdge, Timestamp, VertexId};
use crate::query::{Mapping, MatchSignature, OrderSpec, QueryGraph};
use crate::search::Embedding;

/// Vertex and edge sets of an extracted neighborhood.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubgraphView {
    pub vertices: BTreeSet<VertexId>,
    pub edges: BTreeSet<EdgeId>,
}

/// Subgraph induced on the vertices within `k` hops of either endpoint of
/// `edge`, walking and keeping only edges with timestamp `>= min_ts`.
pub fn khop_subgraph(graph: &DynamicGraph, edge: EdgeId, k: usize, min_ts: Timestamp) -> Result<SubgraphView, GraphError> {
    let e = graph.edge(edge).ok_or(GraphError::UnknownEdge(edge))?;
    let mut dist: HashMap<VertexId, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    for v in [e.src, e.dst] {
        dist.insert(v, 0);
        queue.push_back(v);
    }
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d == k {
            continue;
        }
        for (_, inc) in graph.incident(v) {
            if inc.timestamp < min_ts {
                continue;
            }
            if let std::collections::hash_map::Entry::Vacant(slot) = dist.entry(inc.neighbor) {
                slot.insert(d + 1);
                queue.push_back(inc.neighbor);
            }
        }
    }
    let vertices: BTreeSet<VertexId> = dist.into_keys().collect();
    let mut edges = BTreeSet::new();
    for &v in &vertices {
        for (_, inc) in graph.incident(v) {
            if inc.timestamp >= min_ts && vertices.contains(&inc.neighbor) {
                edges.insert(inc.edge);
            }
        }
    }
    edges.insert(edge);
    Ok(SubgraphView { vertices, edges })
}

/// Local adjacency restricted to a view.
struct ViewGraph {
    adj: HashMap<VertexId, Vec<(EdgeType, VertexId, EdgeId)>>,
}

impl ViewGraph {
    fn new(graph: &DynamicGraph, view: &SubgraphView) -> Self {
        let mut adj: HashMap<VertexId, Vec<(EdgeType, VertexId, EdgeId)>> = HashMap::new();
        for &e in &view.edges {
            let edge = graph.edge(e).expect("view edges are live");
            adj.entry(edge.src).or_default().push((edge.etype, edge.dst, e));
            adj.entry(edge.dst).or_default().push((edge.etype, edge.src, e));
        }
        Self { adj }
    }

    fn incident(&self, v: VertexId) -> &[(EdgeType, VertexId, EdgeId)] {
        self.adj.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    fn edges_between(&self, x: VertexId, y: VertexId, t: EdgeType) -> impl Iterator<Item = EdgeId> + '_ {
        self.incident(x)
            .iter()
            .filter(move |(et, n, _)| *et == t && *n == y)
            .map(|(_, _, e)| *e)
    }
}

/// All matches of `query` in the `diameter`-hop neighborhood of `edge` that
/// use `edge`, span less than `window` and satisfy `order`.
pub fn inc_iso_match(
    graph: &DynamicGraph,
    query: &QueryGraph,
    edge: &TemporalEdge,
    window: Timestamp,
    order: &OrderSpec,
) -> Vec<Embedding> {
    if !query.edges.iter().any(|qe| qe.etype == edge.etype) {
        return Vec::new();
    }
    let min_ts = (edge.timestamp + 1).saturating_sub(window);
    let view = match khop_subgraph(graph, edge.id, query.diameter(), min_ts) {
        Ok(v) => v,
        Err(_) => return Vec::new(),
    };
    let local = ViewGraph::new(graph, &view);

    // filtering: type, label and per-type degree inside the view
    let candidates: Vec<Vec<VertexId>> = (0..query.vertices.len())
        .map(|q| {
            let qv = &query.vertices[q];
            let mut need: Vec<(EdgeType, usize)> = Vec::new();
            for qe in query.edges.iter().filter(|qe| qe.touches(q)) {
                match need.iter_mut().find(|(t, _)| *t == qe.etype) {
                    Some((_, n)) => *n += 1,
                    None => need.push((qe.etype, 1)),
                }
            }
            view.vertices
                .iter()
                .copied()
                .filter(|&v| {
                    let dv = graph.vertex(v);
                    dv.vtype == qv.vtype
                        && qv.label.as_ref().is_none_or(|l| *l == dv.label)
                        && need.iter().all(|&(t, n)| local.incident(v).iter().filter(|(et, _, _)| *et == t).count() >= n)
                })
                .collect()
        })
        .collect();
    if candidates.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    let vertex_order = match_order(query, &candidates);
    let candidate_sets: Vec<HashSet<VertexId>> = candidates.iter().map(|c| c.iter().copied().collect()).collect();

    let mut found = Vec::new();
    let mut seen = HashSet::new();
    let mut state = Vf2State {
        query,
        local: &local,
        candidates: &candidates,
        candidate_sets: &candidate_sets,
        order: &vertex_order,
        vertices: vec![None; query.vertices.len()],
    };
    state.extend(0, &mut |vs| {
        // verification passed; expand parallel edges and keep the new matches
        let mut edges = Vec::with_capacity(query.edges.len());
        expand(query, &local, vs, &mut edges, &mut |es| {
            if !es.contains(&edge.id) {
                return;
            }
            let stamps: Vec<Timestamp> = es.iter().map(|e| graph.edge(*e).expect("live").timestamp).collect();
            let lo = *stamps.iter().min().expect("query has edges");
            let hi = *stamps.iter().max().expect("query has edges");
            if hi - lo >= window || !order.accepts(|i| stamps[i]) {
                return;
            }
            let mapping = Mapping {
                vertices: vs.iter().map(|v| Some(*v)).collect(),
                edges: es.iter().map(|e| Some(*e)).collect(),
            };
            if seen.insert(mapping.signature()) {
                found.push(Embedding { mapping, t_low: lo, t_high: hi });
            }
        });
    });
    found
}

/// Most constrained first, then always adjacent to the matched part.
fn match_order(query: &QueryGraph, candidates: &[Vec<VertexId>]) -> Vec<usize> {
    let n = query.vertices.len();
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    while order.len() < n {
        let next = (0..n)
            .filter(|&v| !placed[v])
            .filter(|&v| order.is_empty() || query.edges.iter().any(|e| e.touches(v) && placed[e.other(v)]))
            .min_by_key(|&v| (candidates[v].len(), v))
            .expect("query is connected");
        placed[next] = true;
        order.push(next);
    }
    order
}

struct Vf2State<'a> {
    query: &'a QueryGraph,
    local: &'a ViewGraph,
    candidates: &'a [Vec<VertexId>],
    candidate_sets: &'a [HashSet<VertexId>],
    order: &'a [usize],
    vertices: Vec<Option<VertexId>>,
}

impl Vf2State<'_> {
    fn extend(&mut self, depth: usize, emit: &mut dyn FnMut(&[VertexId])) {
        let Some(&q) = self.order.get(depth) else {
            let vs: Vec<VertexId> = self.vertices.iter().map(|v| v.expect("complete")).collect();
            emit(&vs);
            return;
        };
        let via = self
            .query
            .edges
            .iter()
            .find(|e| e.touches(q) && self.vertices[e.other(q)].is_some());
        let pool: Vec<VertexId> = match via {
            Some(e) => {
                let from = self.vertices[e.other(q)].expect("bound");
                let mut p: Vec<VertexId> = self
                    .local
                    .incident(from)
                    .iter()
                    .filter(|(t, n, _)| *t == e.etype && self.candidate_sets[q].contains(n))
                    .map(|(_, n, _)| *n)
                    .collect();
                p.sort_unstable();
                p.dedup();
                p
            }
            None => self.candidates[q].clone(),
        };
        for v in pool {
            if self.vertices.contains(&Some(v)) {
                continue;
            }
            let feasible = self.query.edges.iter().filter(|e| e.touches(q)).all(|e| match self.vertices[e.other(q)] {
                Some(w) => self.local.edges_between(v, w, e.etype).next().is_some(),
                None => true,
            });
            if !feasible {
                continue;
            }
            self.vertices[q] = Some(v);
            self.extend(depth + 1, emit);
            self.vertices[q] = None;
        }
    }
}

fn expand(query: &QueryGraph, local: &ViewGraph, vs: &[VertexId], picked: &mut Vec<EdgeId>, emit: &mut dyn FnMut(&[EdgeId])) {
    let i = picked.len();
    if i == query.edges.len() {
        emit(picked);
        return;
    }
    let qe = &query.edges[i];
    let options: Vec<EdgeId> = local.edges_between(vs[qe.a], vs[qe.b], qe.etype).collect();
    for e in options {
        if picked.contains(&e) {
            continue;
        }
        picked.push(e);
        expand(query, local, vs, picked, emit);
        picked.pop();
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BaselineStats {
    pub edges_processed: u64,
    pub searches: u64,
    pub view_edges: u64,
    pub emitted: u64,
}

/// Stream driver for the baseline, mirroring the engine's interface.
#[derive(Debug)]
pub struct Baseline {
    query: Arc<QueryGraph>,
    window: Timestamp,
    order: OrderSpec,
    emitted: HashSet<MatchSignature>,
    stats: BaselineStats,
}

impl Baseline {
    pub fn new(query: Arc<QueryGraph>, window: Timestamp, order: OrderSpec) -> Self {
        Self {
            query,
            window,
            order,
            emitted: HashSet::new(),
            stats: BaselineStats::default(),
        }
    }

    pub fn stats(&self) -> &BaselineStats {
        &self.stats
    }

    pub fn process_edge(
        &mut self,
        graph: &mut DynamicGraph,
        edge: &StreamEdge,
        out: &mut Vec<MatchRecord>,
    ) -> Result<TemporalEdge, GraphError> {
        let inserted = graph.update_graph(edge)?;
        self.on_edge(graph, &inserted, out);
        Ok(inserted)
    }

    pub fn on_edge(&mut self, graph: &DynamicGraph, edge: &TemporalEdge, out: &mut Vec<MatchRecord>) {
        self.stats.edges_processed += 1;
        if self.query.edges.iter().any(|qe| qe.etype == edge.etype) {
            self.stats.searches += 1;
        }
        for m in inc_iso_match(graph, &self.query, edge, self.window, &self.order) {
            let signature = m.mapping.signature();
            if self.emitted.insert(signature.clone()) {
                self.stats.emitted += 1;
                out.push(MatchRecord {
                    mapping: m.mapping,
                    t_low: m.t_low,
                    t_high: m.t_high,
                    emitted_at: graph.current_time(),
                    signature,
                });
            }
        }
    }
}
