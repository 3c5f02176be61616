//! Two articles tagged `fire` within ten time units, the first strictly
//! before the second.
//!
//! cargo run --example quickstart

use std::sync::Arc;

use sjstream::harness::instantiate;
use sjstream::{infer_schema, read_edge_file, DynamicGraph, Engine};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = env!("CARGO_MANIFEST_DIR");
    let edges = read_edge_file(format!("{root}/fixtures/tiny.edges"))?;
    let template = std::fs::read_to_string(format!("{root}/queries/template_2event.q"))?;
    let spec = instantiate(&template, Some("fire"))?;

    let schema = Arc::new(infer_schema(&edges, [&spec]));
    let compiled = spec.compile(&schema)?;
    let mut graph = DynamicGraph::new(schema);
    let mut engine = Engine::new(compiled.tree.clone(), compiled.config.clone())?;

    let mut out = Vec::new();
    for e in &edges {
        out.clear();
        engine.process_edge(&mut graph, e, &mut out)?;
        for m in &out {
            println!("t={:<3} {}", e.timestamp, m.to_line(&compiled.query, &graph));
        }
    }
    let stats = engine.stats();
    println!(
        "{} edges, {} leaf matches, {} join attempts, {} emitted",
        stats.edges_processed, stats.leaf_matches, stats.join_attempts, stats.emitted
    );
    Ok(())
}
