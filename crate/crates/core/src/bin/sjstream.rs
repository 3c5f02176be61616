use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sjstream::harness::{self, EngineKind, HarnessError, RunOptions, SweepOptions};
use sjstream::streamio::{generate_stream, read_edge_file, write_edge_stream, GeneratorConfig};

#[derive(Parser)]
#[command(version, about = "Continuous subgraph queries over edge streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a query spec over an edge stream.
    Run {
        spec: PathBuf,
        stream: PathBuf,
        #[arg(long, default_value = "sjtree")]
        engine: EngineKind,
        #[arg(long, default_value_t = 1000)]
        batch_size: usize,
        /// Edges between prunes; 0 disables pruning.
        #[arg(long)]
        prune_interval: Option<u64>,
        /// Overrides the window in the query file.
        #[arg(long)]
        window: Option<u64>,
        /// Fills the {label} slot of a template spec.
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Defaults to stdout.
        #[arg(long)]
        matches: Option<PathBuf>,
    },
    /// Time a query template across labels of increasing degree.
    Bench {
        template: PathBuf,
        stream: PathBuf,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        #[arg(long, default_value_t = 5)]
        per_bin: usize,
        #[arg(long, default_value_t = 1000)]
        batch_size: usize,
        /// Tie-break seed for label selection.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV output; defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic stream from a generator config.
    Generate {
        config: PathBuf,
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn sink(path: Option<&PathBuf>) -> std::io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run {
            spec,
            stream,
            engine,
            batch_size,
            prune_interval,
            window,
            label,
            metrics,
            matches,
        } => {
            let mut spec = harness::instantiate(&std::fs::read_to_string(spec)?, label.as_deref())?;
            if window.is_some() {
                spec.window = window;
            }
            if let Some(n) = prune_interval {
                spec.prune_interval = Some((n > 0).then_some(n));
            }
            let edges = read_edge_file(&stream)?;
            let opts = RunOptions {
                engine,
                batch_size,
                keep_matches: true,
            };
            let (compiled, report) = harness::run_spec(&spec, &edges, &opts)?;
            log::info!(
                "{} edges, {} matches, {:.3}s processing, {:.0} edges/s",
                report.edges(),
                report.match_count,
                report.processing_seconds(),
                report.edges_per_second()
            );
            let mut out = sink(matches.as_ref())?;
            report.write_matches(&compiled.query, &mut out)?;
            out.flush()?;
            if let Some(path) = metrics {
                let mut out = BufWriter::new(File::create(path)?);
                report.write_metrics_csv(&mut out)?;
                out.flush()?;
            }
        }
        Command::Bench {
            template,
            stream,
            bins,
            per_bin,
            batch_size,
            seed,
            out,
        } => {
            let template = std::fs::read_to_string(template)?;
            let edges = read_edge_file(&stream)?;
            let opts = SweepOptions {
                bins,
                per_bin,
                batch_size,
                seed,
            };
            let report = harness::bench_degree_sweep(&template, &edges, &opts)?;
            let mut w = sink(out.as_ref())?;
            report.write_csv(&mut w)?;
            w.flush()?;
            log::info!("spearman(bin, median per-edge time) = {:.3}", report.spearman());
        }
        Command::Generate { config, out, seed } => {
            let mut config = GeneratorConfig::from_file(config)?;
            if let Some(s) = seed {
                config.seed = s;
            }
            let edges = generate_stream(&config)?;
            let mut w = BufWriter::new(File::create(out)?);
            write_edge_stream(&mut w, &edges)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SJSTREAM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
