//! Continuous query processing over an edge stream.
//!
//! For every arriving edge the graph is updated, each leaf primitive of the
//! join tree is searched around the edge, and every leaf match is pushed up
//! the tree: it is joined with the compatible matches stored at its sibling,
//! successful joins continue at the parent, and joins completing the root are
//! emitted. The new match is stored only after its own join attempts, so it
//! never meets itself.
//!
//! The window is enforced three times: the local search ignores edges that
//! are too old to share a match with the new edge, joins reject results
//! spanning `window` or more, and the stored tables are pruned periodically.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::graph::{DynamicGraph, GraphError, StreamEdge, TemporalEdge, Timestamp};
use crate::query::{Mapping, MatchSignature, NodeId, QueryGraph, SjTree};
use crate::search::local_search;
use crate::store::{make_join_key, MatchStore, PartialMatch};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid engine configuration: {0}")]
    Config(String),
    #[error("edge {index} rejected: {source}")]
    Graph {
        index: usize,
        #[source]
        source: GraphError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    /// Matches must span strictly less than this.
    pub window: Timestamp,
    /// Prune stored matches after this many edges; `None` never prunes.
    pub prune_interval: Option<u64>,
    /// Arrival disorder tolerated by the graph, in time units.
    pub disorder_slack: Timestamp,
    /// Also drop graph edges that can no longer join any match when pruning.
    pub expire_graph: bool,
}

impl EngineConfig {
    pub const DEFAULT_PRUNE_INTERVAL: u64 = 10_000;

    pub fn new(window: Timestamp) -> Self {
        Self {
            window,
            prune_interval: Some(Self::DEFAULT_PRUNE_INTERVAL),
            disorder_slack: 0,
            expire_graph: false,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.window == 0 {
            return Err(EngineError::Config("window must be positive".into()));
        }
        if self.prune_interval == Some(0) {
            return Err(EngineError::Config("prune interval must be positive".into()));
        }
        Ok(())
    }
}

/// A complete match of the query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchRecord {
    pub mapping: Mapping,
    pub t_low: Timestamp,
    pub t_high: Timestamp,
    /// Graph time when the match was reported.
    pub emitted_at: Timestamp,
    pub signature: MatchSignature,
}

impl MatchRecord {
    /// One-line form: `signature|q=vertex;...|t_low|t_high`, with vertices
    /// written by their external key.
    pub fn to_line(&self, query: &QueryGraph, graph: &DynamicGraph) -> String {
        let pairs: Vec<String> = query
            .vertices
            .iter()
            .zip(&self.mapping.vertices)
            .map(|(qv, v)| match v {
                Some(v) => format!("{}={}", qv.name, graph.vertex(*v).key),
                None => format!("{}=_", qv.name),
            })
            .collect();
        format!("{}|{}|{}|{}", self.signature, pairs.join(";"), self.t_low, self.t_high)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub edges_processed: u64,
    pub leaf_matches: u64,
    pub join_attempts: u64,
    pub joins: u64,
    pub duplicates_skipped: u64,
    pub emitted: u64,
    pub pruned: u64,
    pub peak_stored: usize,
}

/// One registered continuous query and its match tables.
#[derive(Debug)]
pub struct Engine {
    tree: Arc<SjTree>,
    config: EngineConfig,
    store: MatchStore,
    // emitted signatures by t_low, forgotten once they fall behind the prune horizon
    emitted: HashMap<MatchSignature, Timestamp>,
    stats: EngineStats,
    since_prune: u64,
}

impl Engine {
    pub fn new(tree: Arc<SjTree>, config: EngineConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let store = MatchStore::new(tree.nodes().len());
        Ok(Self {
            tree,
            config,
            store,
            emitted: HashMap::new(),
            stats: EngineStats::default(),
            since_prune: 0,
        })
    }

    pub fn tree(&self) -> &Arc<SjTree> {
        &self.tree
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn store(&self) -> &MatchStore {
        &self.store
    }

    /// Signatures currently held for duplicate suppression.
    pub fn remembered(&self) -> usize {
        self.emitted.len()
    }

    pub fn stats(&self) -> &EngineStats {
        &self.stats
    }

    /// Runs a batch of edges. Each edge is applied whole or not at all; on
    /// the first rejected edge the error is returned and later edges are not
    /// processed.
    pub fn process_cont_query(
        &mut self,
        graph: &mut DynamicGraph,
        edges: &[StreamEdge],
    ) -> Result<Vec<MatchRecord>, EngineError> {
        let mut out = Vec::new();
        for (index, edge) in edges.iter().enumerate() {
            self.process_edge(graph, edge, &mut out)
                .map_err(|source| EngineError::Graph { index, source })?;
        }
        Ok(out)
    }

    /// Inserts one edge into `graph` and processes it.
    pub fn process_edge(
        &mut self,
        graph: &mut DynamicGraph,
        edge: &StreamEdge,
        out: &mut Vec<MatchRecord>,
    ) -> Result<TemporalEdge, GraphError> {
        let inserted = graph.update_graph(edge)?;
        self.search_and_update(graph, &inserted, out);
        if self.prune_due() {
            let horizon = graph.current_time().saturating_sub(graph.disorder_slack());
            self.prune_window(horizon);
            if self.config.expire_graph {
                graph.expire_edges((horizon + 1).saturating_sub(self.config.window));
            }
        }
        Ok(inserted)
    }

    /// Processes an edge already inserted into a graph shared with other
    /// engines. The caller owns graph expiry.
    pub fn on_edge(&mut self, graph: &DynamicGraph, edge: &TemporalEdge, out: &mut Vec<MatchRecord>) {
        self.search_and_update(graph, edge, out);
        if self.prune_due() {
            self.prune_window(graph.current_time().saturating_sub(graph.disorder_slack()));
        }
    }

    fn prune_due(&mut self) -> bool {
        self.stats.edges_processed += 1;
        match self.config.prune_interval {
            Some(n) => {
                self.since_prune += 1;
                if self.since_prune >= n {
                    self.since_prune = 0;
                    true
                } else {
                    false
                }
            }
            None => false,
        }
    }

    fn search_and_update(&mut self, graph: &DynamicGraph, edge: &TemporalEdge, out: &mut Vec<MatchRecord>) {
        let window = self.config.window;
        // anything older spans at least `window` together with `edge`
        let min_ts = (edge.timestamp + 1).saturating_sub(window);
        let tree = Arc::clone(&self.tree);
        for &leaf in tree.leaves() {
            let primitive = tree.node(leaf).subgraph;
            for found in local_search(graph, tree.query(), primitive, edge, min_ts) {
                if found.span() >= window {
                    continue;
                }
                self.stats.leaf_matches += 1;
                let m = PartialMatch {
                    node: leaf,
                    mapping: found.mapping,
                    t_low: found.t_low,
                    t_high: found.t_high,
                };
                self.update_sjtree(m, graph.current_time(), out);
            }
        }
    }

    /// Adds a match at its node: joins it with the sibling's compatible
    /// matches, recurses on the results, then stores it.
    pub fn update_sjtree(&mut self, m: PartialMatch, now: Timestamp, out: &mut Vec<MatchRecord>) {
        let tree = Arc::clone(&self.tree);
        let node = tree.node(m.node);
        let Some(parent_id) = node.parent else {
            // single-node tree: a leaf match is already complete
            self.emit(m, now, out);
            return;
        };
        if self.store.contains(m.node, &m.signature()) {
            self.stats.duplicates_skipped += 1;
            return;
        }
        let parent = tree.node(parent_id);
        let cut = parent.cut.expect("internal node has a cut");
        let key = make_join_key(cut, &m.mapping).expect("cut is within the child's subgraph");
        let sibling = node.sibling.expect("internal node has two children");
        let is_left = parent.left == Some(m.node);
        let not_before = (m.t_high + 1).saturating_sub(self.config.window);

        let mut joined = Vec::new();
        for other in self.store.lookup_matches(sibling, &key, not_before) {
            self.stats.join_attempts += 1;
            let (l, r) = if is_left { (&m, other) } else { (other, &m) };
            if let Some(j) = join_matches(&tree, parent_id, l, r, self.config.window) {
                joined.push(j);
            }
        }
        self.stats.joins += joined.len() as u64;
        for j in joined {
            if parent.parent.is_none() {
                self.emit(j, now, out);
            } else {
                self.update_sjtree(j, now, out);
            }
        }

        if self.store.insert_match(key, m).is_err() {
            self.stats.duplicates_skipped += 1;
        }
        self.stats.peak_stored = self.stats.peak_stored.max(self.store.total());
    }

    fn emit(&mut self, m: PartialMatch, now: Timestamp, out: &mut Vec<MatchRecord>) {
        let signature = m.signature();
        if self.emitted.insert(signature.clone(), m.t_low).is_some() {
            self.stats.duplicates_skipped += 1;
            return;
        }
        self.stats.emitted += 1;
        out.push(MatchRecord {
            mapping: m.mapping,
            t_low: m.t_low,
            t_high: m.t_high,
            emitted_at: now,
            signature,
        });
    }

    /// Drops stored matches with `t_low < current_time - window`.
    pub fn prune_window(&mut self, current_time: Timestamp) -> usize {
        let removed = self.store.prune_store(current_time, self.config.window);
        let cutoff = current_time.saturating_sub(self.config.window);
        self.emitted.retain(|_, t_low| *t_low >= cutoff);
        self.stats.pruned += removed as u64;
        removed
    }
}

/// Joins a match of `parent`'s left child with one of its right child.
///
/// Rejects when the merged vertex or edge assignment is not injective, when
/// the two disagree on a shared query vertex, when `parent` is ordered and
/// the left match does not end strictly before the right one starts, or when
/// the result spans `window` or more.
pub fn join_matches(
    tree: &SjTree,
    parent: NodeId,
    left: &PartialMatch,
    right: &PartialMatch,
    window: Timestamp,
) -> Option<PartialMatch> {
    let node = tree.node(parent);
    if node.ordered_join && left.t_high >= right.t_low {
        return None;
    }
    let t_low = left.t_low.min(right.t_low);
    let t_high = left.t_high.max(right.t_high);
    if t_high - t_low >= window {
        return None;
    }
    let mut mapping = left.mapping.clone();
    for (slot, theirs) in mapping.vertices.iter_mut().zip(&right.mapping.vertices) {
        match (*slot, *theirs) {
            (Some(a), Some(b)) if a != b => return None,
            (None, Some(b)) => *slot = Some(b),
            _ => {}
        }
    }
    for (slot, theirs) in mapping.edges.iter_mut().zip(&right.mapping.edges) {
        match (*slot, *theirs) {
            (Some(a), Some(b)) if a != b => return None,
            (None, Some(b)) => *slot = Some(b),
            _ => {}
        }
    }
    if !mapping.is_injective() {
        return None;
    }
    Some(PartialMatch {
        node: parent,
        mapping,
        t_low,
        t_high,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeId, Schema, VertexId, VertexSpec};
    use crate::query::{NodeDecl, QueryEdge, QueryVertex};

    fn schema() -> Arc<Schema> {
        let mut s = Schema::new();
        s.register_edge_type("has_kw", "article", "keyword").unwrap();
        Arc::new(s)
    }

    fn two_event_tree(s: &Schema, window: Timestamp) -> Arc<SjTree> {
        let art = s.vertex_type("article").unwrap();
        let key = s.vertex_type("keyword").unwrap();
        let kw = s.edge_type("has_kw").unwrap();
        let v = |name: &str, t, label: Option<&str>, ev| QueryVertex {
            name: name.into(),
            vtype: t,
            label: label.map(String::from),
            is_event: ev,
        };
        let q = QueryGraph::new(
            vec![v("e1", art, None, true), v("e2", art, None, true), v("f", key, Some("fire"), false)],
            vec![
                QueryEdge { name: "q1".into(), a: 0, b: 2, etype: kw },
                QueryEdge { name: "q2".into(), a: 1, b: 2, etype: kw },
            ],
        )
        .unwrap();
        Arc::new(
            SjTree::new(
                Arc::new(q),
                vec![NodeDecl::leaf("L1", &[0]), NodeDecl::leaf("L2", &[1]), NodeDecl::join("root", 0, 1)],
                window,
            )
            .unwrap(),
        )
    }

    fn fire(t: Timestamp, article: &str) -> StreamEdge {
        StreamEdge {
            timestamp: t,
            src: VertexSpec::new(article, "article", ""),
            dst: VertexSpec::new("k_fire", "keyword", "fire"),
            etype: "has_kw".into(),
        }
    }

    fn leaf(node: usize, event: usize, article: u32, edge: u32, t: Timestamp) -> PartialMatch {
        let mut mapping = Mapping {
            vertices: vec![None; 3],
            edges: vec![None; 2],
        };
        mapping.vertices[event] = Some(VertexId(article));
        mapping.vertices[2] = Some(VertexId(7));
        mapping.edges[event] = Some(EdgeId(edge));
        PartialMatch {
            node: NodeId(node),
            mapping,
            t_low: t,
            t_high: t,
        }
    }

    #[test]
    fn two_event_stream() {
        let s = schema();
        let tree = two_event_tree(&s, 10);
        let mut g = DynamicGraph::new(s.clone());
        let mut engine = Engine::new(tree.clone(), EngineConfig::new(10)).unwrap();
        let first = engine.process_cont_query(&mut g, &[fire(1, "a1")]).unwrap();
        assert!(first.is_empty());
        let second = engine.process_cont_query(&mut g, &[fire(3, "a2")]).unwrap();
        assert_eq!(second.len(), 1);
        let rec = &second[0];
        assert_eq!(rec.mapping.vertices[0], g.vertex_by_key("a1"));
        assert_eq!(rec.mapping.vertices[1], g.vertex_by_key("a2"));
        assert_eq!((rec.t_low, rec.t_high, rec.emitted_at), (1, 3, 3));
        assert_eq!(rec.to_line(tree.query(), &g), "0-1|e1=a1;e2=a2;f=k_fire|1|3");
    }

    #[test]
    fn window_too_small() {
        let s = schema();
        let tree = two_event_tree(&s, 1);
        let mut g = DynamicGraph::new(s);
        let mut engine = Engine::new(tree, EngineConfig::new(1)).unwrap();
        let out = engine.process_cont_query(&mut g, &[fire(1, "a1"), fire(3, "a2")]).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn single_article_never_matches() {
        let s = schema();
        let tree = two_event_tree(&s, 10);
        let mut g = DynamicGraph::new(s);
        let mut engine = Engine::new(tree, EngineConfig::new(10)).unwrap();
        let out = engine.process_cont_query(&mut g, &[fire(1, "a1"), fire(3, "a1")]).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn ordered_update_emits_once() {
        let s = schema();
        let tree = two_event_tree(&s, 10);
        let mut engine = Engine::new(tree.clone(), EngineConfig::new(10)).unwrap();
        let mut out = Vec::new();
        engine.update_sjtree(leaf(0, 0, 1, 10, 1), 1, &mut out);
        engine.update_sjtree(leaf(1, 1, 2, 11, 3), 3, &mut out);
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].t_low, out[0].t_high), (1, 3));

        let mut engine = Engine::new(tree, EngineConfig::new(10)).unwrap();
        let mut out = Vec::new();
        engine.update_sjtree(leaf(0, 0, 1, 10, 5), 5, &mut out);
        engine.update_sjtree(leaf(1, 1, 2, 11, 3), 5, &mut out);
        assert!(out.is_empty());
    }

    #[test]
    fn fan_out_against_brute_force_join() {
        let s = schema();
        let tree = two_event_tree(&s, 10);
        let mut engine = Engine::new(tree.clone(), EngineConfig::new(10)).unwrap();
        let mut out = Vec::new();
        let lefts = [leaf(0, 0, 1, 10, 1), leaf(0, 0, 2, 11, 2), leaf(0, 0, 3, 12, 4), leaf(0, 0, 4, 13, 6)];
        for l in &lefts {
            engine.update_sjtree(l.clone(), 6, &mut out);
        }
        assert!(out.is_empty());
        let right = leaf(1, 1, 9, 20, 5);
        // reference: pair the new match with every stored left match directly
        let expected = lefts
            .iter()
            .filter(|l| l.t_high < right.t_low && right.t_high - l.t_low < 10)
            .count();
        assert_eq!(expected, 3);
        engine.update_sjtree(right, 6, &mut out);
        assert_eq!(out.len(), expected);
        assert_eq!(engine.stats().join_attempts, 4);
    }

    #[test]
    fn join_rules() {
        let s = schema();
        let tree = two_event_tree(&s, 10);
        let root = tree.root();
        let j = join_matches(&tree, root, &leaf(0, 0, 1, 10, 1), &leaf(1, 1, 2, 11, 3), 10).unwrap();
        assert_eq!(j.mapping.vertices, vec![Some(VertexId(1)), Some(VertexId(2)), Some(VertexId(7))]);
        assert_eq!((j.t_low, j.t_high), (1, 3));
        // same article twice
        assert!(join_matches(&tree, root, &leaf(0, 0, 1, 10, 1), &leaf(1, 1, 1, 11, 3), 10).is_none());
        // equal timestamps never satisfy the strict order
        assert!(join_matches(&tree, root, &leaf(0, 0, 1, 10, 3), &leaf(1, 1, 2, 11, 3), 10).is_none());
        // span 3 is not below a window of 3
        assert!(join_matches(&tree, root, &leaf(0, 0, 1, 10, 1), &leaf(1, 1, 2, 11, 4), 3).is_none());
    }

    #[test]
    fn periodic_prune() {
        let s = schema();
        let tree = two_event_tree(&s, 3);
        let mut cfg = EngineConfig::new(3);
        cfg.prune_interval = Some(2);
        let mut engine = Engine::new(tree, cfg).unwrap();
        let mut g = DynamicGraph::new(s);
        let edges: Vec<_> = (0..10).map(|i| fire(i * 2 + 1, &format!("a{i}"))).collect();
        engine.process_cont_query(&mut g, &edges).unwrap();
        let now = g.current_time();
        assert!(engine.store().iter().all(|m| m.t_low >= now - 3));
        assert!(engine.stats().pruned > 0);
    }

    #[test]
    fn emitted_signatures_are_forgotten() {
        let s = schema();
        let tree = two_event_tree(&s, 4);
        let mut cfg = EngineConfig::new(4);
        cfg.prune_interval = Some(5);
        let mut engine = Engine::new(tree, cfg).unwrap();
        let mut g = DynamicGraph::new(s);
        let edges: Vec<_> = (0..400).map(|i| fire(i + 1, &format!("a{i}"))).collect();
        let out = engine.process_cont_query(&mut g, &edges).unwrap();
        // each article pairs with the three before it
        assert_eq!(out.len(), 3 * 397 + 3);
        assert!(engine.remembered() < 40, "{} signatures kept", engine.remembered());
    }

    #[test]
    fn config_checks() {
        let s = schema();
        let tree = two_event_tree(&s, 3);
        assert!(Engine::new(tree.clone(), EngineConfig::new(0)).is_err());
        let mut cfg = EngineConfig::new(3);
        cfg.prune_interval = Some(0);
        assert!(Engine::new(tree, cfg).is_err());
    }

    #[test]
    fn rejected_edge_leaves_state_untouched() {
        let s = schema();
        let tree = two_event_tree(&s, 10);
        let mut g = DynamicGraph::new(s);
        let mut engine = Engine::new(tree, EngineConfig::new(10)).unwrap();
        let err = engine.process_cont_query(&mut g, &[fire(5, "a1"), fire(4, "a2")]).unwrap_err();
        assert!(matches!(err, EngineError::Graph { index: 1, .. }));
        assert_eq!(g.edge_count(), 1);
        assert_eq!(engine.stats().edges_processed, 1);
    }
}
