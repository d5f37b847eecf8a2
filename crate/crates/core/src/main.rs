use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vsr_harness::datasets::{self, DatasetKind, LoadOptions};
use vsr_harness::evaluation::{build_matrix, published};
use vsr_harness::runner::{self, DatasetEntry, RunConfig, RunError, Runner};
use vsr_harness::synth::cache::ViewCache;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUN: u8 = 2;

#[derive(Parser)]
#[command(name = "vsr-harness", version, about = "Spatial-reasoning evaluation with synthesized views")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load datasets and print split statistics.
    ValidateData {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset to check, as KIND=ROOT. Repeatable; overrides the config's list.
        #[arg(long = "dataset", value_name = "KIND=ROOT")]
        datasets: Vec<String>,
        /// Fail unless counts match the published release sizes.
        #[arg(long = "expect-paper-counts")]
        expect_published_counts: bool,
    },
    /// Execute the experiment matrix.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Model back-end to query, overriding the config.
        #[arg(long)]
        backend: Option<String>,
        /// Validate and print the plan without querying anything.
        #[arg(long)]
        dry_run: bool,
        /// Run id to create or resume.
        #[arg(long)]
        run_id: Option<String>,
    },
    /// Re-render cells.md and figure5.svg from a run's cells.csv.
    Report {
        /// Results directory of a run.
        run_dir: PathBuf,
        /// Series label for the chart.
        #[arg(long, default_value = "model")]
        backend: String,
        /// Print a comparison against the published reference cells.
        #[arg(long)]
        compare_published: bool,
    },
    /// Inspect or clean the view cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Args)]
struct CacheTarget {
    #[arg(long, conflicts_with = "cache_root")]
    config: Option<PathBuf>,
    #[arg(long)]
    cache_root: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CacheAction {
    Stats(CacheTarget),
    Gc(CacheTarget),
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure { code: EXIT_VALIDATION, message: message.into() }
    }

    fn run(message: impl Into<String>) -> Self {
        Failure { code: EXIT_RUN, message: message.into() }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ValidateData { config, datasets, expect_published_counts } => {
            validate_data(config.as_deref(), &datasets, expect_published_counts)
        }
        Command::Run { config, backend, dry_run, run_id } => run(&config, backend, dry_run, run_id),
        Command::Report { run_dir, backend, compare_published } => report(&run_dir, &backend, compare_published),
        Command::Cache { action } => cache(action),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(path: &Path) -> Result<(RunConfig, String), Failure> {
    let (mut config, text) = RunConfig::load(path).map_err(|e| Failure::validation(e.to_string()))?;
    config.apply_env();
    Ok((config, text))
}

fn validate_data(config: Option<&Path>, pairs: &[String], expect_published_counts: bool) -> Result<(), Failure> {
    let mut entries = Vec::new();
    for pair in pairs {
        let (kind, root) = pair.split_once('=').ok_or_else(|| Failure::validation(format!("expected KIND=ROOT, got {pair:?}")))?;
        let kind: DatasetKind = kind.parse().map_err(Failure::validation)?;
        entries.push(DatasetEntry { kind, root: PathBuf::from(root), split: None, fields: None });
    }
    if entries.is_empty() {
        let path = config.ok_or_else(|| Failure::validation("pass --config or --dataset"))?;
        entries = load_config(path)?.0.datasets;
    }
    if entries.is_empty() {
        return Err(Failure::validation("no datasets to validate"));
    }
    let mut problems = Vec::new();
    println!("{:<14} {:>7} {:>7} {:>7} {:>7}", "dataset", "train", "dev", "test", "total");
    for entry in &entries {
        let options = LoadOptions { fields: entry.fields.clone().unwrap_or_default(), strict: true };
        match datasets::load(entry.kind, &entry.root, &options) {
            Ok(loaded) => {
                let s = loaded.stats;
                println!("{:<14} {:>7} {:>7} {:>7} {:>7}", entry.kind.name(), s.train, s.development, s.test, s.total);
                let expected = entry.kind.published_counts();
                if expect_published_counts && s != expected {
                    problems.push(format!(
                        "{}: counts {}/{}/{}/{} differ from published {}/{}/{}/{}",
                        entry.kind, s.train, s.development, s.test, s.total,
                        expected.train, expected.development, expected.test, expected.total
                    ));
                }
            }
            Err(e) => problems.push(format!("{}: {e}", entry.kind)),
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure::validation(problems.join("\n")))
    }
}

fn run(path: &Path, backend: Option<String>, dry_run: bool, run_id: Option<String>) -> Result<(), Failure> {
    let (mut config, text) = load_config(path)?;
    if let Some(b) = backend {
        config.backend = b;
        config.apply_env();
    }
    if run_id.is_some() {
        config.run_id = run_id;
    }
    let runner = Runner::new(config).with_config_text(text);
    let classify = |e: RunError| match e {
        RunError::Invalid(v) => Failure::validation(
            v.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n").trim_start().to_string(),
        ),
        RunError::Dataset { .. } => Failure::validation(e.to_string()),
        other => Failure::run(other.to_string()),
    };
    if dry_run {
        let plan = runner.plan().map_err(classify)?;
        println!("run id: {}", plan.run_id);
        for d in &plan.datasets {
            println!("{}: {} records ({} perturbed), {} images", d.kind, d.evaluated, d.perturbed, d.images);
        }
        println!("matrix rows: {}", plan.rows.len());
        for r in &plan.rows {
            println!("  {} prompt={}", r.configuration.display(), if r.prompt { "on" } else { "off" });
        }
        println!("queries: {} ({} pending)", plan.queries, plan.pending);
        return Ok(());
    }
    let result = runner.run().map_err(classify)?;
    let c = &result.manifest.counters;
    println!("run id: {}", result.run_id);
    println!("results: {}", result.results_dir.display());
    println!(
        "synthesis calls: {}, model calls: {}, new predictions: {}, reused: {}, failures: {}",
        c.synthesis_calls, c.vlm_calls, c.predictions_new, c.predictions_reused, c.failures
    );
    Ok(())
}

fn report(run_dir: &Path, backend: &str, compare_published: bool) -> Result<(), Failure> {
    let cells = runner::rerender(run_dir, backend).map_err(|e| match e {
        RunError::Report(_) => Failure::validation(e.to_string()),
        other => Failure::run(other.to_string()),
    })?;
    let tables = build_matrix(&cells).map_err(|e| Failure::validation(e.to_string()))?;
    print!("{}", tables.to_markdown());
    if compare_published {
        let reference = published::combinations_l().and_then(|c| build_matrix(&c)).map_err(|e| Failure::run(e.to_string()))?;
        println!();
        print!("{}", tables.comparison_markdown(&reference));
    }
    Ok(())
}

fn cache(action: CacheAction) -> Result<(), Failure> {
    let (target, gc) = match action {
        CacheAction::Stats(t) => (t, false),
        CacheAction::Gc(t) => (t, true),
    };
    let root = match (target.cache_root, target.config) {
        (Some(root), _) => root,
        (None, Some(config)) => load_config(&config)?.0.cache_root,
        (None, None) => return Err(Failure::validation("pass --cache-root or --config")),
    };
    if !root.is_dir() {
        return Err(Failure::validation(format!("cache root {} does not exist", root.display())));
    }
    let cache = ViewCache::open(&root).map_err(|e| Failure::run(e.to_string()))?;
    if gc {
        let r = cache.gc().map_err(|e| Failure::run(e.to_string()))?;
        println!("removed: {} temporary, {} orphaned, {} corrupt", r.removed_temp, r.removed_orphans, r.removed_corrupt);
    } else {
        let s = cache.stats().map_err(|e| Failure::run(e.to_string()))?;
        println!("entries: {} ({} bytes)", s.entries, s.entry_bytes);
        println!("stitched: {} ({} bytes)", s.stitched, s.stitched_bytes);
        println!("incomplete: {}", s.incomplete);
    }
    Ok(())
}
