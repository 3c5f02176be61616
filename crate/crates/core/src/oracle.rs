//! Exhaustive ground truth for small snapshots.
//!
//! Enumerates every injective, type-, label- and adjacency-preserving
//! assignment of the whole query by plain backtracking, expands parallel data
//! edges, then filters by the window and the ordering constraints. Nothing
//! here is shared with the incremental engine's search or join code.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::{DynamicGraph, EdgeId, Timestamp, VertexId};
use crate::query::{Mapping, MatchSignature, OrderSpec, QueryGraph};

pub const DEFAULT_SIZE_GUARD: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("snapshot has {edges} edges, over the oracle limit of {limit}")]
    SizeGuardExceeded { edges: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleMatch {
    pub mapping: Mapping,
    pub t_low: Timestamp,
    pub t_high: Timestamp,
}

/// Every match in `graph` with span `< window` that satisfies `order`, keyed
/// by signature.
pub fn enumerate_all(
    graph: &DynamicGraph,
    query: &QueryGraph,
    window: Timestamp,
    order: &OrderSpec,
    size_guard: usize,
) -> Result<BTreeMap<MatchSignature, OracleMatch>, OracleError> {
    if graph.edge_count() > size_guard {
        return Err(OracleError::SizeGuardExceeded {
            edges: graph.edge_count(),
            limit: size_guard,
        });
    }
    let mut out = BTreeMap::new();
    let vertex_order = bfs_order(query);
    let mut assignment: Vec<Option<VertexId>> = vec![None; query.vertices.len()];
    assign(graph, query, &vertex_order, 0, &mut assignment, &mut |vs| {
        expand_edges(graph, query, vs, &mut |edges| {
            let stamps: Vec<Timestamp> = edges
                .iter()
                .map(|e| graph.edge(*e).expect("live edge").timestamp)
                .collect();
            let t_low = stamps.iter().copied().min().unwrap_or(0);
            let t_high = stamps.iter().copied().max().unwrap_or(0);
            if t_high - t_low >= window || !order.accepts(|qe| stamps[qe]) {
                return;
            }
            let mapping = Mapping {
                vertices: vs.iter().map(|v| Some(*v)).collect(),
                edges: edges.iter().map(|e| Some(*e)).collect(),
            };
            out.insert(mapping.signature(), OracleMatch { mapping, t_low, t_high });
        });
    });
    Ok(out)
}

fn bfs_order(query: &QueryGraph) -> Vec<usize> {
    let start = query
        .vertices
        .iter()
        .position(|v| v.label.is_some())
        .unwrap_or(0);
    let mut order = vec![start];
    let mut i = 0;
    while i < order.len() {
        let v = order[i];
        for e in &query.edges {
            if e.touches(v) && !order.contains(&e.other(v)) {
                order.push(e.other(v));
            }
        }
        i += 1;
    }
    order
}

fn compatible(graph: &DynamicGraph, query: &QueryGraph, q: usize, v: VertexId) -> bool {
    let qv = &query.vertices[q];
    let dv = graph.vertex(v);
    dv.vtype == qv.vtype && qv.label.as_ref().is_none_or(|l| *l == dv.label)
}

fn edges_between(graph: &DynamicGraph, x: VertexId, y: VertexId, etype: crate::graph::EdgeType) -> Vec<EdgeId> {
    graph
        .incident(x)
        .filter(|(t, inc)| *t == etype && inc.neighbor == y)
        .map(|(_, inc)| inc.edge)
        .collect()
}

fn assign(
    graph: &DynamicGraph,
    query: &QueryGraph,
    order: &[usize],
    depth: usize,
    assignment: &mut Vec<Option<VertexId>>,
    emit: &mut dyn FnMut(&[VertexId]),
) {
    let Some(&q) = order.get(depth) else {
        let full: Vec<VertexId> = assignment.iter().map(|v| v.expect("all bound")).collect();
        emit(&full);
        return;
    };
    // candidates: neighbors of an already bound query neighbor, else everything
    let anchor = query.edges.iter().find_map(|e| {
        if e.touches(q) {
            assignment[e.other(q)]
        } else {
            None
        }
    });
    let candidates: Vec<VertexId> = match anchor {
        Some(v) => {
            let mut c: Vec<VertexId> = graph.incident(v).map(|(_, inc)| inc.neighbor).collect();
            c.sort_unstable();
            c.dedup();
            c
        }
        None => graph.vertices().map(|v| v.id).collect(),
    };
    for v in candidates {
        if assignment.contains(&Some(v)) || !compatible(graph, query, q, v) {
            continue;
        }
        let adjacent = query.edges.iter().all(|e| {
            if !e.touches(q) {
                return true;
            }
            match assignment[e.other(q)] {
                Some(w) => !edges_between(graph, v, w, e.etype).is_empty(),
                None => true,
            }
        });
        if !adjacent {
            continue;
        }
        assignment[q] = Some(v);
        assign(graph, query, order, depth + 1, assignment, emit);
        assignment[q] = None;
    }
}

fn expand_edges(graph: &DynamicGraph, query: &QueryGraph, vs: &[VertexId], emit: &mut dyn FnMut(&[EdgeId])) {
    let choices: Vec<Vec<EdgeId>> = query
        .edges
        .iter()
        .map(|e| edges_between(graph, vs[e.a], vs[e.b], e.etype))
        .collect();
    let mut picked = Vec::with_capacity(choices.len());
    fn rec(choices: &[Vec<EdgeId>], picked: &mut Vec<EdgeId>, emit: &mut dyn FnMut(&[EdgeId])) {
        let i = picked.len();
        if i == choices.len() {
            emit(picked);
            return;
        }
        for &e in &choices[i] {
            if picked.contains(&e) {
                continue;
            }
            picked.push(e);
            rec(choices, picked, emit);
            picked.pop();
        }
    }
    rec(&choices, &mut picked, emit);
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::{Schema, StreamEdge, VertexSpec};
    use crate::query::{NodeDecl, QueryEdge, QueryVertex, SjTree};

    fn setup() -> (Arc<Schema>, Arc<QueryGraph>) {
        let mut s = Schema::new();
        let kw = s.register_edge_type("has_kw", "article", "keyword").unwrap();
        let art = s.vertex_type("article").unwrap();
        let key = s.vertex_type("keyword").unwrap();
        let v = |name: &str, t, label: Option<&str>, ev| QueryVertex {
            name: name.into(),
            vtype: t,
            label: label.map(String::from),
            is_event: ev,
        };
        let q = QueryGraph::new(
            vec![v("e1", art, None, true), v("e2", art, None, true), v("f", key, Some("k"), false)],
            vec![
                QueryEdge { name: "q1".into(), a: 0, b: 2, etype: kw },
                QueryEdge { name: "q2".into(), a: 1, b: 2, etype: kw },
            ],
        )
        .unwrap();
        (Arc::new(s), Arc::new(q))
    }

    fn three_articles(schema: Arc<Schema>) -> DynamicGraph {
        let mut g = DynamicGraph::new(schema);
        for (t, a) in [(1, "a1"), (3, "a2"), (5, "a3")] {
            g.update_graph(&StreamEdge {
                timestamp: t,
                src: VertexSpec::new(a, "article", ""),
                dst: VertexSpec::new("k", "keyword", "k"),
                etype: "has_kw".into(),
            })
            .unwrap();
        }
        g
    }

    #[test]
    fn hand_enumerated_counts() {
        let (s, q) = setup();
        let g = three_articles(s);
        let tree = SjTree::new(
            q.clone(),
            vec![NodeDecl::leaf("L1", &[0]), NodeDecl::leaf("L2", &[1]), NodeDecl::join("r", 0, 1)],
            10,
        )
        .unwrap();
        // ordered: C(3,2) = 3 pairs in time order
        let ordered = enumerate_all(&g, &q, 10, &tree.order_spec(), DEFAULT_SIZE_GUARD).unwrap();
        assert_eq!(ordered.len(), 3);
        // unordered: 3 * 2 assignments, twice the ordered count (automorphism factor 2)
        let unordered = enumerate_all(&g, &q, 10, &OrderSpec::unordered(), DEFAULT_SIZE_GUARD).unwrap();
        assert_eq!(unordered.len(), 6);
        assert_eq!(unordered.len(), 2 * ordered.len());
        // gaps are all 2, never < 2
        assert!(enumerate_all(&g, &q, 2, &tree.order_spec(), DEFAULT_SIZE_GUARD).unwrap().is_empty());
        assert_eq!(enumerate_all(&g, &q, 3, &tree.order_spec(), DEFAULT_SIZE_GUARD).unwrap().len(), 2);
    }

    #[test]
    fn size_guard() {
        let (s, q) = setup();
        let g = three_articles(s);
        assert_eq!(
            enumerate_all(&g, &q, 10, &OrderSpec::unordered(), 2),
            Err(OracleError::SizeGuardExceeded { edges: 3, limit: 2 })
        );
    }

    #[test]
    fn deterministic() {
        let (s, q) = setup();
        let g = three_articles(s);
        let a = enumerate_all(&g, &q, 10, &OrderSpec::unordered(), 100).unwrap();
        let b = enumerate_all(&g, &q, 10, &OrderSpec::unordered(), 100).unwrap();
        assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    }
}
