//! Checking the engine against exhaustive enumeration on small streams.
//!
//! cargo run --release --example oracle_check -- [streams]

use std::collections::BTreeSet;
use std::sync::Arc;

use sjstream::harness::{instantiate, label_degrees};
use sjstream::streamio::{generate_stream, infer_schema, GeneratorConfig, Relation};
use sjstream::{enumerate_all, DynamicGraph, Engine};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let streams: u64 = std::env::args().nth(1).map_or(Ok(20), |s| s.parse())?;
    let template = std::fs::read_to_string(format!("{}/queries/template_4event.q", env!("CARGO_MANIFEST_DIR")))?;
    for seed in 1..=streams {
        let config = GeneratorConfig {
            seed,
            total_edges: 2_000,
            features: vec![("keyword".into(), 30), ("location".into(), 60)],
            relations: vec![
                Relation { edge_type: "has_kw".into(), feature_type: "keyword".into(), per_event: 2 },
                Relation { edge_type: "in_loc".into(), feature_type: "location".into(), per_event: 1 },
            ],
            ..GeneratorConfig::default()
        };
        let edges = generate_stream(&config)?;
        // exhaustive enumeration is exponential in the label's degree
        let (label, degree) = label_degrees(&edges, "location")
            .into_iter()
            .min_by_key(|(l, d)| (d.abs_diff(20), l.clone()))
            .unwrap();
        let spec = instantiate(&template, Some(&label))?;
        let schema = Arc::new(infer_schema(&edges, [&spec]));
        let compiled = spec.compile(&schema)?;

        let mut graph = DynamicGraph::new(schema);
        let mut engine = Engine::new(compiled.tree.clone(), compiled.config.clone())?;
        let emitted: BTreeSet<_> =
            engine.process_cont_query(&mut graph, &edges)?.into_iter().map(|m| m.signature).collect();
        let expected: BTreeSet<_> = enumerate_all(
            &graph,
            &compiled.query,
            compiled.config.window,
            &compiled.tree.order_spec(),
            10_000,
        )?
        .into_keys()
        .collect();
        let verdict = if emitted == expected { "ok" } else { "MISMATCH" };
        println!("seed {seed:>3}: label {label} (degree {degree}), {} matches, {verdict}", emitted.len());
        if emitted != expected {
            std::process::exit(1);
        }
    }
    Ok(())
}
