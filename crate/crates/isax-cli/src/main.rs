//! Command-line driver: dataset generation, index building, and query
//! benchmarking over raw binary series files.
//!
//! Exit codes: 0 success, 2 usage errors, 3 file/format errors,
//! 4 verification failures.

mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use isax::query::search_scan;
use isax::{dataset, Error, Index, IndexConfig, QueryOpts};

use report::{ms, summary_line, QueryRow};

const EXIT_USAGE: u8 = 2;
const EXIT_FORMAT: u8 = 3;
const EXIT_VERIFY: u8 = 4;

/// Engines must agree with the scan oracle to this relative tolerance.
const VERIFY_RELATIVE_TOLERANCE: f64 = 1e-4;

#[derive(Parser)]
#[command(
    name = "isax",
    version,
    about = "iSAX data-series index: generate datasets, build indexes, answer exact 1-NN queries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a z-normalized random-walk dataset file.
    Generate {
        /// Number of series.
        #[arg(long)]
        count: usize,
        /// Points per series.
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build an index file from a raw dataset.
    Build {
        #[arg(long)]
        dataset: PathBuf,
        /// Number of series in the dataset file.
        #[arg(long)]
        count: usize,
        /// Points per series.
        #[arg(long)]
        length: usize,
        /// iSAX segments per series.
        #[arg(long, default_value_t = isax::index::DEFAULT_SEGMENTS)]
        segments: usize,
        #[arg(long, default_value_t = isax::index::DEFAULT_LEAF_CAPACITY)]
        leaf_capacity: usize,
        #[arg(long, default_value_t = isax::index::DEFAULT_MAX_BITS)]
        max_bits: u8,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Series per stage-1 work unit.
        #[arg(long, default_value_t = isax::index::DEFAULT_CHUNK_SIZE)]
        chunk_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer 1-NN queries against a built index.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Query series, same raw format and length as the dataset.
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, value_enum, default_value_t = EngineArg::Tree)]
        engine: EngineArg,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Priority queues for the tree engine (0 = one per thread).
        #[arg(long, default_value_t = 0)]
        queues: usize,
        /// Cross-check every answer against the sequential-scan oracle.
        #[arg(long)]
        verify: bool,
        /// Write the report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    Tree,
    Flat,
    Scan,
}

impl EngineArg {
    fn name(self) -> &'static str {
        match self {
            EngineArg::Tree => "tree",
            EngineArg::Flat => "flat",
            EngineArg::Scan => "scan",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) => ExitCode::from(EXIT_USAGE),
                Error::Format(_) | Error::Io(_) => ExitCode::from(EXIT_FORMAT),
            }
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Generate { count, length, seed, out } => {
            if count == 0 || length == 0 {
                return Err(Error::Config("count and length must be positive".into()));
            }
            let start = Instant::now();
            let collection = dataset::random_walk(count, length, seed);
            dataset::save_raw(&out, &collection)?;
            println!(
                "record=generate count={count} length={length} seed={seed} bytes={} \
                 elapsed_ms={:.3} out={}",
                count * length * 4,
                ms(start.elapsed()),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Build {
            dataset: dataset_path,
            count,
            length,
            segments,
            leaf_capacity,
            max_bits,
            threads,
            chunk_size,
            out,
        } => {
            if count == 0 {
                return Err(Error::Format("dataset has no series (count = 0)".into()));
            }
            let raw = dataset::read_raw(&dataset_path, count, length)?;
            let threads = resolve_threads(threads);
            let config = IndexConfig {
                series_len: length,
                segments,
                leaf_capacity,
                max_bits,
                num_workers: threads,
                chunk_size,
            };
            let (index, timings) = Index::build(&raw, config)?;
            index.save(&out)?;
            println!(
                "record=build dataset={} count={count} length={length} segments={segments} \
                 leaf_capacity={leaf_capacity} max_bits={max_bits} threads={threads} \
                 chunk_size={chunk_size} leaves={} stage1_ms={:.3} stage2_ms={:.3} \
                 total_ms={:.3} out={}",
                dataset_path.display(),
                index.num_leaves(),
                ms(timings.summarize),
                ms(timings.construct),
                ms(timings.total()),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Query {
            index: index_path,
            dataset: dataset_path,
            queries: queries_path,
            engine,
            threads,
            queues,
            verify,
            report: report_path,
        } => {
            let index = Index::load(&index_path)?;
            let n = index.config().series_len;
            let raw = dataset::read_raw(&dataset_path, index.series_count(), n)?;
            let queries = dataset::read_raw_unsized(&queries_path, n)?;
            let threads = resolve_threads(threads);
            let opts = QueryOpts {
                num_workers: threads,
                num_queues: if queues == 0 { threads } else { queues },
            };

            let mut rows = Vec::with_capacity(queries.len());
            for (qid, query) in queries.iter().enumerate() {
                let start = Instant::now();
                let (id, distance, stats) = match engine {
                    EngineArg::Tree => {
                        let answer = index
                            .search_tree(&raw, query, &opts)
                            .expect("index files always hold at least one series");
                        (answer.id, answer.distance, Some(answer.stats))
                    }
                    EngineArg::Flat => {
                        let answer = index
                            .search_flat(&raw, query, &opts)
                            .expect("index files always hold at least one series");
                        (answer.id, answer.distance, Some(answer.stats))
                    }
                    EngineArg::Scan => {
                        let (id, distance) =
                            search_scan(&raw, query).expect("dataset is not empty");
                        (id, distance, None)
                    }
                };
                let total = start.elapsed();
                let verified = verify.then(|| {
                    let (_, scan_distance) =
                        search_scan(&raw, query).expect("dataset is not empty");
                    (scan_distance, relatively_close(distance, scan_distance))
                });
                rows.push(QueryRow {
                    qid,
                    engine: engine.name(),
                    id,
                    distance,
                    total,
                    stats,
                    verified,
                });
            }

            let mut lines: Vec<String> = rows.iter().map(QueryRow::render).collect();
            lines.push(summary_line(engine.name(), &rows));
            write_report(report_path.as_deref(), &lines)?;

            let failures =
                rows.iter().filter(|r| matches!(r.verified, Some((_, false)))).count();
            if failures > 0 {
                eprintln!("error: {failures}/{} answers failed verification", rows.len());
                return Ok(ExitCode::from(EXIT_VERIFY));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn resolve_threads(threads: usize) -> usize {
    if threads == 0 {
        isax::index::default_workers()
    } else {
        threads
    }
}

fn relatively_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= VERIFY_RELATIVE_TOLERANCE * a.abs().max(b.abs()).max(1e-12)
}

fn write_report(path: Option<&std::path::Path>, lines: &[String]) -> Result<(), Error> {
    match path {
        None => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for line in lines {
                writeln!(out, "{line}")?;
            }
        }
        Some(path) => {
            let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
            for line in lines {
                writeln!(out, "{line}")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}
