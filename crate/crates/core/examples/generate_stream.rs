//! Generating a synthetic news-like stream and looking at its degree spread.
//!
//! cargo run --release --example generate_stream -- [config] [out.edges]

use std::fs::File;
use std::io::BufWriter;

use sjstream::harness::label_degrees;
use sjstream::streamio::{generate_stream, write_edge_stream, GeneratorConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let config_path = args
        .next()
        .unwrap_or_else(|| format!("{}/configs/nyt_like.conf", env!("CARGO_MANIFEST_DIR")));
    let config = GeneratorConfig::from_file(&config_path)?;
    let edges = generate_stream(&config)?;
    let first = edges.first().map_or(0, |e| e.timestamp);
    let last = edges.last().map_or(0, |e| e.timestamp);
    println!("{} edges over t = {first}..{last}", edges.len());

    for (feature, population) in &config.features {
        let degrees = label_degrees(&edges, feature);
        let mut sorted: Vec<usize> = degrees.values().copied().collect();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let top: Vec<usize> = sorted.iter().take(5).copied().collect();
        println!(
            "{feature:<13} {:>6} of {population:>6} used, top degrees {top:?}, median {}",
            sorted.len(),
            sorted.get(sorted.len() / 2).copied().unwrap_or(0)
        );
    }

    if let Some(out) = args.next() {
        write_edge_stream(BufWriter::new(File::create(&out)?), &edges)?;
        println!("wrote {out}");
    }
    Ok(())
}
