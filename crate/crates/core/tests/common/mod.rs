#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sjstream::harness::{self, label_degrees};
use sjstream::streamio::{infer_schema, CompiledQuery, GeneratorConfig, QuerySpec, Relation};
use sjstream::{
    enumerate_all, Baseline, DynamicGraph, Engine, EngineConfig, MatchRecord, MatchSignature, NodeDecl, QueryEdge,
    QueryGraph, QueryVertex, Schema, SjTree, StreamEdge, Timestamp, VertexSpec,
};

pub fn asset(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

pub fn template(name: &str) -> String {
    std::fs::read_to_string(asset(&format!("queries/{name}"))).unwrap()
}

/// Small article/keyword/location workload; the seed also varies size, tie
/// density and whether events repeat.
pub fn workload(seed: u64, max_edges: usize) -> GeneratorConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    GeneratorConfig {
        seed,
        total_edges: rng.gen_range(max_edges / 4..=max_edges),
        event_type: "article".into(),
        event_population: if rng.gen_bool(0.25) { rng.gen_range(100..400) } else { 0 },
        features: vec![("keyword".into(), rng.gen_range(8..40)), ("location".into(), rng.gen_range(40..120))],
        relations: vec![
            Relation {
                edge_type: "has_kw".into(),
                feature_type: "keyword".into(),
                per_event: rng.gen_range(1..=3),
            },
            Relation {
                edge_type: "in_loc".into(),
                feature_type: "location".into(),
                per_event: 1,
            },
        ],
        zipf_exponent: rng.gen_range(0.0..1.2),
        events_per_tick: rng.gen_range(1..=3),
        timestamp_step: rng.gen_range(1..=2),
        ..GeneratorConfig::default()
    }
}

/// The label of `vtype` whose degree is closest to `target`, ties by name.
pub fn label_near_degree(edges: &[StreamEdge], vtype: &str, target: usize) -> String {
    let deg = label_degrees(edges, vtype);
    let mut all: Vec<(usize, String)> = deg.into_iter().map(|(l, d)| (d.abs_diff(target), l)).collect();
    all.sort();
    all.into_iter().next().expect("stream has labeled vertices").1
}

pub fn compile(template_text: &str, label: &str, edges: &[StreamEdge]) -> (Arc<Schema>, CompiledQuery) {
    let spec: QuerySpec = harness::instantiate(template_text, Some(label)).unwrap();
    let schema = Arc::new(infer_schema(edges, [&spec]));
    let compiled = spec.compile(&schema).unwrap();
    (schema, compiled)
}

pub fn signatures(records: &[MatchRecord]) -> BTreeSet<MatchSignature> {
    records.iter().map(|m| m.signature.clone()).collect()
}

/// Runs the tree engine; panics if a signature is emitted twice.
pub fn engine_run(schema: &Arc<Schema>, compiled: &CompiledQuery, edges: &[StreamEdge]) -> (DynamicGraph, Vec<MatchRecord>) {
    let mut graph = DynamicGraph::new(schema.clone());
    let mut engine = Engine::new(compiled.tree.clone(), compiled.config.clone()).unwrap();
    let out = engine.process_cont_query(&mut graph, edges).unwrap();
    assert_eq!(signatures(&out).len(), out.len(), "a match was emitted twice");
    (graph, out)
}

pub fn baseline_run(schema: &Arc<Schema>, compiled: &CompiledQuery, edges: &[StreamEdge]) -> Vec<MatchRecord> {
    let mut graph = DynamicGraph::new(schema.clone());
    let mut base = Baseline::new(compiled.query.clone(), compiled.config.window, compiled.tree.order_spec());
    let mut out = Vec::new();
    for e in edges {
        base.process_edge(&mut graph, e, &mut out).unwrap();
    }
    out
}

pub fn oracle_set(graph: &DynamicGraph, compiled: &CompiledQuery) -> BTreeSet<MatchSignature> {
    enumerate_all(
        graph,
        &compiled.query,
        compiled.config.window,
        &compiled.tree.order_spec(),
        10_000,
    )
    .unwrap()
    .into_keys()
    .collect()
}

// Random queries and streams over three vertex types. Type 0 vertices are
// events; each vertex of the data graph carries label "x" or "y".

pub const TYPES: [&str; 3] = ["t0", "t1", "t2"];
pub const RELATIONS: [(&str, usize, usize); 4] = [("r01", 0, 1), ("s01", 0, 1), ("r02", 0, 2), ("r12", 1, 2)];

pub fn random_schema() -> Arc<Schema> {
    let mut s = Schema::new();
    for t in TYPES {
        s.register_vertex_type(t);
    }
    for (name, a, b) in RELATIONS {
        s.register_edge_type(name, TYPES[a], TYPES[b]).unwrap();
    }
    Arc::new(s)
}

fn relations_between(a: usize, b: usize) -> Vec<&'static str> {
    RELATIONS
        .iter()
        .filter(|(_, x, y)| (*x == a && *y == b) || (*x == b && *y == a))
        .map(|(n, _, _)| *n)
        .collect()
}

pub fn random_query(rng: &mut ChaCha8Rng, schema: &Schema, max_vertices: usize) -> QueryGraph {
    let n = rng.gen_range(2..=max_vertices);
    let mut types: Vec<usize> = Vec::with_capacity(n);
    let mut pairs: Vec<(usize, usize, &str)> = Vec::new();
    for i in 0..n {
        // events are the most common type
        let mut t = if rng.gen_bool(0.5) { 0 } else { rng.gen_range(1..3) };
        if i > 0 && types.iter().all(|&x| x == t) {
            t = (t + 1 + rng.gen_range(0..2)) % 3;
        }
        types.push(t);
        if i > 0 {
            let parents: Vec<usize> = (0..i).filter(|&j| types[j] != t).collect();
            let j = *parents.choose(rng).unwrap();
            let rel = *relations_between(types[j], t).choose(rng).unwrap();
            pairs.push((j, i, rel));
        }
    }
    for _ in 0..rng.gen_range(0..=2) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if types[a] == types[b] {
            continue;
        }
        let rel = *relations_between(types[a], types[b]).choose(rng).unwrap();
        if pairs.iter().any(|&(x, y, r)| r == rel && ((x, y) == (a, b) || (x, y) == (b, a))) {
            continue;
        }
        pairs.push((a, b, rel));
    }
    let vertices = (0..n)
        .map(|i| QueryVertex {
            name: format!("v{i}"),
            vtype: schema.vertex_type(TYPES[types[i]]).unwrap(),
            label: match rng.gen_range(0..8) {
                0 => Some("x".into()),
                1 => Some("y".into()),
                _ => None,
            },
            is_event: types[i] == 0,
        })
        .collect();
    let edges = pairs
        .iter()
        .enumerate()
        .map(|(k, &(a, b, rel))| QueryEdge {
            name: format!("q{k}"),
            a,
            b,
            etype: schema.edge_type(rel).unwrap(),
        })
        .collect();
    QueryGraph::new(vertices, edges).unwrap()
}

/// Connected leaves of up to three edges, merged pairwise at random.
pub fn random_decls(rng: &mut ChaCha8Rng, query: &QueryGraph) -> Vec<NodeDecl> {
    let mut order: Vec<usize> = (0..query.edges.len()).collect();
    order.shuffle(rng);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for e in order {
        let touching: Vec<usize> = (0..groups.len())
            .filter(|&g| {
                groups[g].len() < 3
                    && groups[g].iter().any(|&f| {
                        let (x, y) = (&query.edges[e], &query.edges[f]);
                        x.touches(y.a) || x.touches(y.b)
                    })
            })
            .collect();
        if !touching.is_empty() && rng.gen_bool(0.5) {
            let g = *touching.choose(rng).unwrap();
            groups[g].push(e);
        } else {
            groups.push(vec![e]);
        }
    }
    let mut decls: Vec<NodeDecl> = groups
        .iter()
        .enumerate()
        .map(|(i, g)| NodeDecl::leaf(&format!("L{i}"), g))
        .collect();
    let mut open: Vec<usize> = (0..decls.len()).collect();
    while open.len() > 1 {
        open.shuffle(rng);
        let (l, r) = (open.pop().unwrap(), open.pop().unwrap());
        let id = decls.len();
        decls.push(NodeDecl::Join {
            name: format!("J{id}"),
            left: l,
            right: r,
            ordered: match rng.gen_range(0..3) {
                0 => Some(false),
                1 => Some(true),
                _ => None,
            },
            subgraph: None,
            cut: None,
        });
        open.push(id);
    }
    decls
}

pub fn random_stream(rng: &mut ChaCha8Rng, len: usize, per_type: usize) -> Vec<StreamEdge> {
    let mut t: Timestamp = rng.gen_range(0..3);
    let vertex = |rng: &mut ChaCha8Rng, ty: usize| {
        let i = rng.gen_range(0..per_type);
        VertexSpec::new(format!("{}_{i}", TYPES[ty]), TYPES[ty], if i % 2 == 0 { "x" } else { "y" })
    };
    (0..len)
        .map(|_| {
            t += rng.gen_range(0..=2);
            let (rel, a, b) = *RELATIONS.choose(rng).unwrap();
            let (src, dst) = (vertex(rng, a), vertex(rng, b));
            if rng.gen_bool(0.5) {
                StreamEdge { timestamp: t, src, dst, etype: rel.into() }
            } else {
                StreamEdge { timestamp: t, src: dst, dst: src, etype: rel.into() }
            }
        })
        .collect()
}

pub struct RandomCase {
    pub schema: Arc<Schema>,
    pub tree: Arc<SjTree>,
    pub config: EngineConfig,
    pub edges: Vec<StreamEdge>,
}

pub fn random_case(seed: u64) -> RandomCase {
    random_case_with(seed, None)
}

/// `ordered` forces every join to that ordering.
pub fn random_case_with(seed: u64, ordered: Option<bool>) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = random_schema();
    let query = Arc::new(random_query(&mut rng, &schema, 5));
    let mut decls = random_decls(&mut rng, &query);
    if ordered.is_some() {
        for d in &mut decls {
            if let NodeDecl::Join { ordered: o, .. } = d {
                *o = ordered;
            }
        }
    }
    let window = rng.gen_range(1..=30);
    let tree = Arc::new(SjTree::new(query, decls, window).unwrap());
    let mut config = EngineConfig::new(window);
    config.prune_interval = if rng.gen_bool(0.3) { None } else { Some(rng.gen_range(1..=8)) };
    let len = rng.gen_range(5..=80);
    let per_type = rng.gen_range(2..=3);
    let edges = random_stream(&mut rng, len, per_type);
    RandomCase {
        schema,
        tree,
        config,
        edges,
    }
}
