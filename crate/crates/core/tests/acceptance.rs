//! Acceptance checks. Each test prints one `criterion N: PASS|FAIL ...` line.
//! All of them share one lock: on a small machine a correctness run next to a
//! timed run would skew the timings.

mod common;

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::{Arc, Mutex};

use proptest::test_runner::{Config, TestCaseError, TestError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use sjstream::harness::{bench_degree_sweep, label_degrees, run_stream, EngineKind, RunOptions, RunReport, SweepOptions};
use sjstream::streamio::{generate_stream, CompiledQuery, GeneratorConfig};
use sjstream::{
    make_join_key, DynamicGraph, Engine, Mapping, NodeDecl, NodeId, Schema, SjTree, StreamEdge, Subgraph, VertexId,
};
use sjstream::query::Violation;

static SERIAL: Mutex<()> = Mutex::new(());

// Written straight to stderr so the line shows up even when output is captured.
fn line(text: &str) {
    let _ = writeln!(std::io::stderr(), "{text}");
}

fn report(criterion: u32, pass: bool, detail: &str) {
    line(&format!("criterion {criterion}: {} {detail}", if pass { "PASS" } else { "FAIL" }));
}

// 1. Engine emissions equal the oracle on 200 generator streams.
#[test]
fn criterion_1_oracle_exactness() {
    let _lock = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let two = template("template_2event.q");
    let four = template("template_4event.q");
    let mut failures = Vec::new();
    let mut total = 0usize;
    let mut nonempty = 0usize;
    for seed in 1..=200u64 {
        let config = workload(seed, 5_000);
        let edges = generate_stream(&config).unwrap();
        assert!(edges.len() <= 5_000);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (text, vtype, target, window) = if seed % 2 == 1 {
            let text = if seed % 4 == 1 { two.replace(" ordered", " unordered") } else { two.clone() };
            (text, "keyword", rng.gen_range(10..60), rng.gen_range(2..60))
        } else {
            (four.clone(), "location", rng.gen_range(8..30), rng.gen_range(10..400))
        };
        let label = label_near_degree(&edges, vtype, target);
        let (schema, mut compiled) = compile(&text, &label, &edges);
        compiled.config.window = window;
        compiled.tree = Arc::new((*compiled.tree).clone().with_window(window));
        let (graph, out) = engine_run(&schema, &compiled, &edges);
        let got = signatures(&out);
        let want = oracle_set(&graph, &compiled);
        total += want.len();
        nonempty += usize::from(!want.is_empty());
        if got != want {
            failures.push((seed, got.len(), want.len()));
        }
    }
    let pass = failures.is_empty() && nonempty >= 100;
    report(
        1,
        pass,
        &format!("200 streams, {total} oracle matches, {nonempty} streams with matches, mismatches {failures:?}"),
    );
    assert!(pass);
}

// 2. Engine, baseline and oracle agree on 50 streams of at most 2,000 edges.
#[test]
fn criterion_2_baseline_equivalence() {
    let _lock = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let two = template("template_2event.q");
    let four = template("template_4event.q");
    let mut failures = Vec::new();
    let mut total = 0usize;
    for seed in 1001..=1050u64 {
        let edges = generate_stream(&workload(seed, 2_000)).unwrap();
        assert!(edges.len() <= 2_000);
        let (text, vtype, target) = if seed % 2 == 1 {
            (two.clone(), "keyword", 30)
        } else {
            (four.clone(), "location", 15)
        };
        let label = label_near_degree(&edges, vtype, target);
        let (schema, compiled) = compile(&text, &label, &edges);
        let (graph, out) = engine_run(&schema, &compiled, &edges);
        let engine = signatures(&out);
        let base_out = baseline_run(&schema, &compiled, &edges);
        let baseline = signatures(&base_out);
        let oracle = oracle_set(&graph, &compiled);
        total += oracle.len();
        if engine != oracle || baseline != oracle || base_out.len() != baseline.len() {
            failures.push((seed, engine.len(), baseline.len(), oracle.len()));
        }
    }
    let pass = failures.is_empty() && total > 0;
    report(2, pass, &format!("50 streams, {total} matches, mismatches {failures:?}"));
    assert!(pass);
}

// Timed runs. Each one is preceded by an untimed run of the same kind so
// the allocator already holds the memory the timed run touches.

fn stream(config: &str) -> Vec<StreamEdge> {
    generate_stream(&GeneratorConfig::from_file(asset(&format!("configs/{config}"))).unwrap()).unwrap()
}

fn timed(schema: &Arc<Schema>, compiled: &CompiledQuery, edges: &[StreamEdge], engine: EngineKind) -> RunReport {
    let opts = RunOptions {
        engine,
        batch_size: 1_000,
        keep_matches: false,
    };
    run_stream(schema.clone(), compiled, edges, &opts).unwrap()
}

/// Highest-degree label of the top equal-width degree bin.
fn top_bin_label(edges: &[StreamEdge], vtype: &str) -> (String, usize) {
    let degrees = label_degrees(edges, vtype);
    let lo = *degrees.values().min().unwrap();
    let hi = *degrees.values().max().unwrap();
    let floor = lo as f64 + 0.9 * (hi - lo) as f64;
    degrees
        .into_iter()
        .filter(|(_, d)| *d as f64 >= floor)
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .unwrap()
}

fn speedup_setup() -> (Vec<StreamEdge>, Arc<Schema>, CompiledQuery, usize) {
    let edges = stream("speedup.conf");
    let (label, degree) = top_bin_label(&edges, "location");
    let (schema, compiled) = compile(&template("template_4event.q"), &label, &edges);
    (edges, schema, compiled, degree)
}

// 3. Join tree at least 10x faster than the baseline on 100k edges.
#[test]
fn criterion_3_speedup() {
    let _lock = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (edges, schema, compiled, degree) = speedup_setup();
    assert_eq!(edges.len(), 100_000);
    timed(&schema, &compiled, &edges, EngineKind::SjTree);
    let tree = timed(&schema, &compiled, &edges, EngineKind::SjTree);
    let base = timed(&schema, &compiled, &edges, EngineKind::Baseline);
    let ratio = base.processing_seconds() / tree.processing_seconds();
    let pass = ratio >= 10.0 && tree.match_count == base.match_count && tree.match_count > 0;
    report(
        3,
        pass,
        &format!(
            "label degree {degree}, join tree {:.3}s, baseline {:.3}s, ratio {ratio:.1}, matches {} / {}",
            tree.processing_seconds(),
            base.processing_seconds(),
            tree.match_count,
            base.match_count
        ),
    );
    assert!(pass);
}

// 4. Pruning lowers peak batch time and peak stored matches at least 2x.
#[test]
fn criterion_4_pruning() {
    let _lock = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let edges = stream("accumulate.conf");
    let (label, degree) = top_bin_label(&edges, "keyword");
    let (schema, mut compiled) = compile(&template("template_2event.q"), &label, &edges);
    compiled.config.prune_interval = None;
    timed(&schema, &compiled, &edges, EngineKind::SjTree);
    let unpruned = timed(&schema, &compiled, &edges, EngineKind::SjTree);
    compiled.config.prune_interval = Some(1_000);
    let pruned = timed(&schema, &compiled, &edges, EngineKind::SjTree);
    let time_ratio = unpruned.peak_batch_seconds() / pruned.peak_batch_seconds();
    let store_ratio = unpruned.peak_stored_matches() as f64 / pruned.peak_stored_matches().max(1) as f64;
    let pass = time_ratio >= 2.0 && store_ratio >= 2.0 && pruned.match_count == unpruned.match_count;
    report(
        4,
        pass,
        &format!(
            "{} edges, label degree {degree}, peak batch {:.4}s -> {:.4}s ({time_ratio:.1}x), peak stored {} -> {} ({store_ratio:.1}x)",
            edges.len(),
            unpruned.peak_batch_seconds(),
            pruned.peak_batch_seconds(),
            unpruned.peak_stored_matches(),
            pruned.peak_stored_matches()
        ),
    );
    assert!(pass);
}

// 5. Median per-edge time rises with label degree.
#[test]
fn criterion_5_degree_trend() {
    let _lock = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let edges = stream("degree_sweep.conf");
    let tpl = template("template_2event.q");
    let opts = SweepOptions {
        bins: 10,
        per_bin: 5,
        batch_size: 1_000,
        seed: 0,
    };
    let warm = SweepOptions {
        bins: 1,
        per_bin: 1,
        ..opts.clone()
    };
    bench_degree_sweep(&tpl, &edges, &warm).unwrap();
    let sweep = bench_degree_sweep(&tpl, &edges, &opts).unwrap();
    let rho = sweep.spearman();
    let medians: Vec<String> = sweep.bin_medians().iter().map(|m| format!("{:.2}", m * 1e6)).collect();
    let pass = rho >= 0.5;
    report(
        5,
        pass,
        &format!("{} labels, spearman {rho:.3}, bin medians (us/edge) [{}]", sweep.rows.len(), medians.join(", ")),
    );
    assert!(pass);
}

// 7. Throughput on the 100k-edge run, informational.
#[test]
fn criterion_7_throughput() {
    let _lock = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (edges, schema, compiled, _) = speedup_setup();
    timed(&schema, &compiled, &edges, EngineKind::SjTree);
    let run = timed(&schema, &compiled, &edges, EngineKind::SjTree);
    let rate = run.edges_per_second();
    line(&format!(
        "criterion 7: INFO {} edges in {:.3}s, {rate:.0} edges/s, {:.0} million edges/day",
        run.edges(),
        run.processing_seconds(),
        rate * 86_400.0 / 1e6
    ));
}

// 6. Invariant suite, 1,000 generated cases per property.

fn run_property(name: &str, test: impl Fn(u64) -> Result<(), TestCaseError>) -> Result<u32, String> {
    let mut runner = TestRunner::new(Config {
        cases: 1_000,
        failure_persistence: None,
        ..Config::default()
    });
    match runner.run(&proptest::num::u64::ANY, test) {
        Ok(()) => Ok(1_000),
        Err(TestError::Fail(reason, seed)) => Err(format!("{name}: seed {seed}: {reason}")),
        Err(e) => Err(format!("{name}: {e}")),
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn tree_properties(seed: u64) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = random_schema();
    let query = Arc::new(random_query(&mut rng, &schema, 6));
    let decls = random_decls(&mut rng, &query);
    let tree = SjTree::new(query.clone(), decls.clone(), 10);
    check(tree.is_ok(), || format!("valid tree rejected: {:?}", tree.as_ref().err()))?;
    let tree = tree.unwrap();
    check(tree.node(tree.root()).subgraph == query.full(), || "root is not the query".into())?;

    // break one property and expect the matching violation
    let joins: Vec<usize> = (0..decls.len()).filter(|&i| matches!(decls[i], NodeDecl::Join { .. })).collect();
    let mut broken = decls.clone();
    let expect: (usize, Violation) = match rng.gen_range(0..4) {
        0 if !joins.is_empty() => {
            let j = joins[rng.gen_range(0..joins.len())];
            let sub = tree.node(NodeId(j)).subgraph;
            let drop = sub.edge_indices().next().unwrap();
            let kept: Vec<usize> = sub.edge_indices().filter(|&e| e != drop).collect();
            if let NodeDecl::Join { subgraph, .. } = &mut broken[j] {
                *subgraph = Some(Subgraph::from_edges(&query, &kept));
            }
            (j, Violation::NotJoinOfChildren)
        }
        1 if !joins.is_empty() => {
            let j = joins[rng.gen_range(0..joins.len())];
            let node = tree.node(NodeId(j));
            let right = tree.node(node.right.unwrap()).subgraph;
            if let NodeDecl::Join { cut, .. } = &mut broken[j] {
                *cut = Some(right);
            }
            (j, Violation::CutNotIntersection)
        }
        2 if tree.leaves().len() > 1 => {
            let a = tree.leaves()[0].0;
            let b = tree.leaves()[1].0;
            let stolen = tree.node(NodeId(b)).subgraph.edge_indices().next().unwrap();
            if let NodeDecl::Leaf { edges, .. } = &mut broken[a] {
                edges.push(stolen);
            }
            (a, Violation::EdgeInSeveralLeaves(stolen))
        }
        _ => {
            let Some(&leaf) = tree.leaves().iter().find(|l| tree.node(**l).subgraph.edge_count() > 1) else {
                return Ok(());
            };
            let dropped = if let NodeDecl::Leaf { edges, .. } = &mut broken[leaf.0] {
                edges.pop().unwrap()
            } else {
                unreachable!()
            };
            (tree.root().0, Violation::EdgeUncovered(dropped))
        }
    };
    let assembled = SjTree::assemble(query, broken, 10).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let report = assembled.validate();
    let found = report.at(NodeId(expect.0)).any(|v| *v == expect.1);
    check(found, || {
        format!("expected {:?} at node {}, got {report}", expect.1, expect.0)
    })
}

fn key_soundness(seed: u64) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = random_schema();
    let query = random_query(&mut rng, &schema, 6);
    let n = query.vertices.len();
    let cut_edges: Vec<usize> = (0..query.edges.len()).filter(|_| rng.gen_bool(0.4)).collect();
    let cut = Subgraph::from_edges(&query, &cut_edges);
    let mapping = |rng: &mut ChaCha8Rng| {
        let mut m = Mapping::empty(&query);
        for q in 0..n {
            if cut.has_vertex(q) || rng.gen_bool(0.5) {
                m.vertices[q] = Some(VertexId(rng.gen_range(0..3)));
            }
        }
        m
    };
    let (a, b) = (mapping(&mut rng), mapping(&mut rng));
    let agree = cut.vertex_indices().all(|q| a.vertices[q] == b.vertices[q]);
    let (ka, kb) = (make_join_key(cut, &a).unwrap(), make_join_key(cut, &b).unwrap());
    check((ka == kb) == agree, || format!("keys equal {} but mappings agree {agree}", ka == kb))?;
    // keys ignore everything outside the cut
    let mut c = a.clone();
    for q in 0..n {
        if !cut.has_vertex(q) {
            c.vertices[q] = Some(VertexId(99));
        }
    }
    check(make_join_key(cut, &c).unwrap() == ka, || "key depends on non-cut vertices".into())
}

enum Prop {
    Window,
    EmitOnce,
    Injective,
    Ordering,
}

fn engine_property(prop: Prop, seed: u64) -> Result<(), TestCaseError> {
    let case = match prop {
        Prop::Ordering => random_case_with(seed, Some(true)),
        _ => random_case(seed),
    };
    let window = case.config.window;
    let mut graph = DynamicGraph::new(case.schema.clone());
    let mut engine = Engine::new(case.tree.clone(), case.config.clone()).unwrap();
    let order = case.tree.order_spec();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for e in &case.edges {
        out.clear();
        engine.process_edge(&mut graph, e, &mut out).unwrap();
        match prop {
            Prop::Window => {
                for m in engine.store().iter() {
                    check(m.t_high - m.t_low < window, || format!("stored span {} >= {window}", m.t_high - m.t_low))?;
                }
                for m in &out {
                    check(m.t_high - m.t_low < window, || format!("emitted span {} >= {window}", m.t_high - m.t_low))?;
                }
            }
            Prop::EmitOnce => {
                for m in &out {
                    check(seen.insert(m.signature.clone()), || format!("{} emitted twice", m.signature))?;
                }
            }
            Prop::Injective => {
                for m in &out {
                    check(m.mapping.is_injective(), || format!("{} is not injective", m.signature))?;
                    check(m.mapping.domain() == case.tree.query().full(), || "incomplete match".into())?;
                }
            }
            Prop::Ordering => {
                for m in &out {
                    let ts = |q: usize| graph.edge(m.mapping.edges[q].unwrap()).unwrap().timestamp;
                    check(order.accepts(ts), || format!("{} breaks the join order", m.signature))?;
                }
            }
        }
    }
    Ok(())
}

#[test]
fn criterion_6_invariant_suite() {
    let _lock = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let results = [
        run_property("tree properties", tree_properties),
        run_property("join key soundness and completeness", key_soundness),
        run_property("window discipline", |s| engine_property(Prop::Window, s)),
        run_property("emit once", |s| engine_property(Prop::EmitOnce, s)),
        run_property("injectivity", |s| engine_property(Prop::Injective, s)),
        run_property("strict ordering", |s| engine_property(Prop::Ordering, s)),
    ];
    let failures: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    let cases: u32 = results.iter().filter_map(|r| r.as_ref().ok()).sum();
    report(6, failures.is_empty(), &format!("6 properties, {cases} passing cases, failures {failures:?}"));
    assert!(failures.is_empty());
}
