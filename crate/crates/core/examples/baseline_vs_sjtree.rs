//! The join tree against re-searching the neighborhood of every new edge,
//! on the busiest location of a generated stream.
//!
//! cargo run --release --example baseline_vs_sjtree -- [edges]

use std::sync::Arc;

use sjstream::harness::{instantiate, label_degrees, run_stream, EngineKind, RunOptions};
use sjstream::streamio::{generate_stream, infer_schema, GeneratorConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = env!("CARGO_MANIFEST_DIR");
    let mut config = GeneratorConfig::from_file(format!("{root}/configs/speedup.conf"))?;
    if let Some(n) = std::env::args().nth(1) {
        config.total_edges = n.parse()?;
    } else {
        config.total_edges = 30_000;
    }
    let edges = generate_stream(&config)?;
    let (label, degree) = label_degrees(&edges, "location").into_iter().max_by_key(|(_, d)| *d).unwrap();

    let template = std::fs::read_to_string(format!("{root}/queries/template_4event.q"))?;
    let spec = instantiate(&template, Some(&label))?;
    let schema = Arc::new(infer_schema(&edges, [&spec]));
    let compiled = spec.compile(&schema)?;
    println!("{} edges, location {label} with degree {degree}, window {}", edges.len(), compiled.config.window);

    for engine in [EngineKind::SjTree, EngineKind::Baseline] {
        let opts = RunOptions { engine, batch_size: 1_000, keep_matches: false };
        let report = run_stream(schema.clone(), &compiled, &edges, &opts)?;
        println!(
            "{engine:?}: {:.3}s, {:.0} edges/s, {} matches",
            report.processing_seconds(),
            report.edges_per_second(),
            report.match_count
        );
    }
    Ok(())
}
