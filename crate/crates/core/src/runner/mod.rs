//! Experiment orchestration: load, perturb, synthesize, stitch, prompt,
//! infer and score every cell of the run matrix.
//!
//! Synthesis and inference run in two bounded worker pools joined by a
//! bounded queue. Workers return outcomes over a channel; only the
//! orchestrating thread touches the prediction log.

pub mod config;
pub mod log;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, unbounded, Sender};
use serde::{Deserialize, Serialize};

use crate::datasets::{self, DatasetError, DatasetKind, DatasetStats, Example, LoadOptions, LoadedDataset, PerturbationMode};
use crate::evaluation::chart::{render_svg, Series};
use crate::evaluation::report::ReportError;
use crate::evaluation::{build_matrix, score, CellResult, ScoreError};
use crate::geometry::ViewGeometry;
use crate::image::Image;
use crate::prompt::{render, TemplateSet};
use crate::stitch::{BundleBuilder, StitchLayout};
use crate::synth::cache::{write_atomic, ViewCache};
use crate::synth::mock::MockSynthesizer;
use crate::synth::remote::{RemoteSynthesizer, ServiceEndpoint};
use crate::synth::{SynthError, SynthesisBackend, SynthesizerId, ViewSynthesizer};
use crate::vlm::{self, parse_answer, ModelBackend, Prediction, VlmClient};

pub use config::{default_matrix, validate, DatasetEntry, FailurePolicy, MatrixRow, RunConfig, Seeds, Violation};
pub use log::{idempotency_key, FailureEntry, LogEntry, PredictionLog};

pub const VIEW_REUSE_NOTE: &str = "synthesized views are cached by (image, view spec, synthesizer) and shared by every configuration that contains them";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid run config: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("dataset {kind}: {source}")]
    Dataset {
        kind: DatasetKind,
        #[source]
        source: DatasetError,
    },
    #[error("setup: {0}")]
    Setup(String),
    #[error("run {run_id} aborted at example {}: {}", .failure.example_id, .failure.message)]
    Aborted { run_id: String, failure: FailureEntry },
    #[error("scoring {cell}: {source}")]
    Score {
        cell: String,
        #[source]
        source: ScoreError,
    },
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub kind: DatasetKind,
    pub root: PathBuf,
    pub stats: DatasetStats,
    /// Records evaluated, perturbed ones included.
    pub evaluated: usize,
    pub perturbed: usize,
    pub perturbation_skipped: usize,
    pub images: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub synthesis_calls: u64,
    pub vlm_calls: u64,
    pub predictions_new: u64,
    pub predictions_reused: u64,
    pub failures: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub config_hash: String,
    pub template_hash: String,
    pub backend: ModelBackend,
    pub synthesizer: SynthesizerId,
    pub seeds: Seeds,
    pub geometry: ViewGeometry,
    pub stitch: StitchLayout,
    pub perturbation_mode: PerturbationMode,
    pub matrix: Vec<MatrixRow>,
    pub datasets: Vec<DatasetSummary>,
    pub view_reuse: String,
    pub counters: Counters,
    pub failures: Vec<FailureEntry>,
    pub config: RunConfig,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub run_id: String,
    pub backend: String,
    pub cells: Vec<CellResult>,
    pub manifest: Manifest,
    pub results_dir: PathBuf,
}

/// What a run would do, without doing it.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub run_id: String,
    pub rows: Vec<MatrixRow>,
    pub datasets: Vec<DatasetSummary>,
    pub queries: usize,
    pub pending: usize,
}

struct Prepared {
    run_id: String,
    config_hash: String,
    rows: Vec<MatrixRow>,
    templates: TemplateSet,
    datasets: Vec<PreparedDataset>,
}

struct PreparedDataset {
    summary: DatasetSummary,
    examples: Vec<Example>,
    /// Image path to the indices of the examples that use it, in first-seen order.
    images: Vec<(PathBuf, Vec<usize>)>,
}

struct ImageJob {
    dataset: usize,
    image: usize,
    /// Work per example index: the matrix rows still to query.
    pending: Vec<(usize, Vec<MatrixRow>)>,
}

struct InferJob {
    key: String,
    dataset: DatasetKind,
    example_id: String,
    row: MatrixRow,
    image: Arc<Image>,
    prompt: crate::prompt::PromptInstance,
}

enum Outcome {
    Done(LogEntry),
    Failed(FailureEntry),
}

pub struct Runner {
    config: RunConfig,
    config_text: Option<String>,
    synthesis: Option<Arc<dyn SynthesisBackend>>,
    vlm: Option<Arc<dyn VlmClient>>,
}

impl Runner {
    pub fn new(config: RunConfig) -> Self {
        Runner { config, config_text: None, synthesis: None, vlm: None }
    }

    /// Original config text, copied verbatim into the results directory.
    pub fn with_config_text(mut self, text: impl Into<String>) -> Self {
        self.config_text = Some(text.into());
        self
    }

    /// Replaces the synthesizer built from the config.
    pub fn with_synthesis_backend(mut self, backend: Arc<dyn SynthesisBackend>) -> Self {
        self.synthesis = Some(backend);
        self
    }

    /// Replaces the model client built from the config.
    pub fn with_vlm(mut self, client: Arc<dyn VlmClient>) -> Self {
        self.vlm = Some(client);
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    fn prepare(&self) -> Result<Prepared, RunError> {
        let violations = validate(&self.config);
        if !violations.is_empty() {
            return Err(RunError::Invalid(violations));
        }
        let config_hash = self.config.hash();
        let run_id = match &self.config.run_id {
            Some(id) => id.clone(),
            None => format!("{}-{}", chrono::Utc::now().format("%Y%m%dT%H%M%SZ"), &config_hash[..8]),
        };
        if run_id.is_empty() || !run_id.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c)) || run_id.starts_with('.') {
            return Err(RunError::Invalid(vec![Violation {
                field: "run_id".into(),
                message: format!("{run_id:?} must be non-empty and use only [A-Za-z0-9._-]"),
            }]));
        }
        let templates = self.config.template_set().map_err(RunError::Setup)?;
        let mut prepared = Vec::new();
        for entry in &self.config.datasets {
            prepared.push(self.prepare_dataset(entry)?);
        }
        Ok(Prepared { run_id, config_hash, rows: self.config.rows(), templates, datasets: prepared })
    }

    fn prepare_dataset(&self, entry: &DatasetEntry) -> Result<PreparedDataset, RunError> {
        let options = LoadOptions { fields: entry.fields.clone().unwrap_or_default(), strict: true };
        let loaded: LoadedDataset =
            datasets::load(entry.kind, &entry.root, &options).map_err(|source| RunError::Dataset { kind: entry.kind, source })?;
        let mut examples: Vec<Example> = match entry.split {
            Some(split) => loaded.split(split).cloned().collect(),
            None => loaded.examples.clone(),
        };
        let (perturbed, perturbation_skipped) = match self.config.perturbation_mode {
            PerturbationMode::None => (0, 0),
            mode => {
                let seed = self.config.seeds.perturbation.expect("validated");
                let batch = datasets::perturb_batch(&loaded, &examples, mode, seed);
                for skipped in &batch.skipped {
                    ::log::info!("{}: perturbation skipped: {skipped}", entry.kind);
                }
                let n = batch.examples.len();
                examples.extend(batch.examples);
                (n, batch.skipped.len())
            }
        };
        let mut seen = HashSet::new();
        for e in &examples {
            if !seen.insert(e.example_id.as_str()) {
                return Err(RunError::Setup(format!("{}: duplicate example id {}", entry.kind, e.example_id)));
            }
        }
        let mut by_image: Vec<(PathBuf, Vec<usize>)> = Vec::new();
        let mut index: HashMap<PathBuf, usize> = HashMap::new();
        for (i, e) in examples.iter().enumerate() {
            let slot = *index.entry(e.image_ref.clone()).or_insert_with(|| {
                by_image.push((e.image_ref.clone(), Vec::new()));
                by_image.len() - 1
            });
            by_image[slot].1.push(i);
        }
        let summary = DatasetSummary {
            kind: entry.kind,
            root: entry.root.clone(),
            stats: loaded.stats,
            evaluated: examples.len(),
            perturbed,
            perturbation_skipped,
            images: by_image.len(),
        };
        Ok(PreparedDataset { summary, examples, images: by_image })
    }

    fn staging_dir(&self, run_id: &str) -> PathBuf {
        self.config.cache_root.join("runs").join(run_id)
    }

    /// Validates, loads the datasets and counts the queries a run would make.
    pub fn plan(&self) -> Result<RunPlan, RunError> {
        let p = self.prepare()?;
        let log_path = self.staging_dir(&p.run_id).join("predictions.jsonl");
        let done: BTreeSet<String> = if log_path.exists() {
            PredictionLog::open(&log_path).map_err(io_err(&log_path))?.entries().map(|e| e.key.clone()).collect()
        } else {
            BTreeSet::new()
        };
        let mut queries = 0;
        let mut pending = 0;
        for d in &p.datasets {
            for e in &d.examples {
                for r in &p.rows {
                    queries += 1;
                    if !done.contains(&idempotency_key(d.summary.kind, r.configuration, r.prompt, &e.example_id)) {
                        pending += 1;
                    }
                }
            }
        }
        Ok(RunPlan {
            run_id: p.run_id,
            rows: p.rows,
            datasets: p.datasets.into_iter().map(|d| d.summary).collect(),
            queries,
            pending,
        })
    }

    fn synthesis_backend(&self) -> Result<Arc<dyn SynthesisBackend>, RunError> {
        if let Some(b) = &self.synthesis {
            return Ok(b.clone());
        }
        let s = &self.config.synthesizer;
        if s.is_mock() {
            return Ok(Arc::new(MockSynthesizer::new()));
        }
        let url = s.endpoint.clone().ok_or_else(|| RunError::Setup(format!("synthesizer {} has no endpoint", s.id())))?;
        let mut endpoint = ServiceEndpoint::new(url);
        endpoint.token = std::env::var("SYNTH_TOKEN").ok().filter(|t| !t.is_empty());
        endpoint.timeout = Duration::from_secs_f64(s.timeout_secs);
        Ok(Arc::new(RemoteSynthesizer::new(s.id(), endpoint)))
    }

    pub fn run(&self) -> Result<RunResult, RunError> {
        let p = self.prepare()?;
        let backend = self.config.selected_backend().expect("validated");
        let client = self.vlm.clone().unwrap_or_else(|| vlm::connect(&backend));
        let synth_backend = self.synthesis_backend()?;
        let synth_id = synth_backend.id().clone();
        let cache = ViewCache::open(&self.config.cache_root).map_err(|e| RunError::Setup(e.to_string()))?;
        let mut synthesizer = ViewSynthesizer::new(Some(cache.clone()));
        synthesizer.register(synth_backend).map_err(|e| RunError::Setup(e.to_string()))?;

        let staging = self.staging_dir(&p.run_id);
        std::fs::create_dir_all(&staging).map_err(io_err(&staging))?;
        let log_path = staging.join("predictions.jsonl");
        let mut plog = PredictionLog::open(&log_path).map_err(io_err(&log_path))?;
        let reused_before = plog.len() as u64;

        let mut jobs = Vec::new();
        for (di, d) in p.datasets.iter().enumerate() {
            for (ii, (_, members)) in d.images.iter().enumerate() {
                let pending: Vec<(usize, Vec<MatrixRow>)> = members
                    .iter()
                    .filter_map(|&ei| {
                        let id = &d.examples[ei].example_id;
                        let rows: Vec<MatrixRow> = p
                            .rows
                            .iter()
                            .copied()
                            .filter(|r| !plog.contains(&idempotency_key(d.summary.kind, r.configuration, r.prompt, id)))
                            .collect();
                        (!rows.is_empty()).then_some((ei, rows))
                    })
                    .collect();
                if !pending.is_empty() {
                    jobs.push(ImageJob { dataset: di, image: ii, pending });
                }
            }
        }

        let synth_calls_before = synthesizer.backend_calls();
        let vlm_calls_before = client.calls();
        let builder = BundleBuilder {
            synthesizer: &synthesizer,
            synthesizer_id: synth_id.clone(),
            geometry: self.config.geometry,
            layout: self.config.stitch,
            random_seed: self.config.seeds.random_view,
        };
        let abort = AtomicBool::new(false);
        let policy = self.config.failure_policy;
        let mut failures: Vec<FailureEntry> = Vec::new();
        let mut new_predictions = 0u64;
        let mut io_failure: Option<RunError> = None;

        std::thread::scope(|scope| {
            let synth_workers = self.config.synthesis_parallelism.max(1);
            let infer_workers = self.config.parallelism.max(1);
            let (job_tx, job_rx) = bounded::<ImageJob>(synth_workers * 2);
            let (infer_tx, infer_rx) = bounded::<InferJob>(infer_workers * 2);
            let (out_tx, out_rx) = unbounded::<Outcome>();

            let abort_ref = &abort;
            scope.spawn(move || {
                for job in jobs {
                    if abort_ref.load(Ordering::SeqCst) || job_tx.send(job).is_err() {
                        break;
                    }
                }
            });
            for _ in 0..synth_workers {
                let job_rx = job_rx.clone();
                let infer_tx = infer_tx.clone();
                let out_tx = out_tx.clone();
                let (builder, prepared, cache) = (&builder, &p, &cache);
                scope.spawn(move || {
                    for job in job_rx {
                        if abort_ref.load(Ordering::SeqCst) {
                            continue;
                        }
                        synthesize_job(prepared, builder, cache, &job, &infer_tx, &out_tx, abort_ref);
                    }
                });
            }
            drop(infer_tx);
            for _ in 0..infer_workers {
                let infer_rx = infer_rx.clone();
                let out_tx = out_tx.clone();
                let client = client.clone();
                scope.spawn(move || {
                    for job in infer_rx {
                        if abort_ref.load(Ordering::SeqCst) {
                            continue;
                        }
                        let _ = out_tx.send(infer_job(client.as_ref(), job));
                    }
                });
            }
            drop(out_tx);
            drop(job_rx);
            drop(infer_rx);

            let failures_path = staging.join("failures.jsonl");
            for outcome in out_rx {
                match outcome {
                    Outcome::Done(entry) => match plog.append(entry) {
                        Ok(written) => new_predictions += u64::from(written),
                        Err(e) => {
                            abort.store(true, Ordering::SeqCst);
                            io_failure.get_or_insert(RunError::Io { path: log_path.display().to_string(), source: e });
                        }
                    },
                    Outcome::Failed(f) => {
                        ::log::warn!("{} ({}): {}", f.example_id, f.stage, f.message);
                        append_jsonl(&failures_path, &f);
                        if policy == FailurePolicy::Abort {
                            abort.store(true, Ordering::SeqCst);
                        }
                        failures.push(f);
                    }
                }
            }
        });

        if let Some(e) = io_failure {
            return Err(e);
        }
        if policy == FailurePolicy::Abort && !failures.is_empty() {
            return Err(RunError::Aborted { run_id: p.run_id, failure: failures.swap_remove(0) });
        }
        failures.sort_by(|a, b| a.key.cmp(&b.key));

        let counters = Counters {
            synthesis_calls: synthesizer.backend_calls() - synth_calls_before,
            vlm_calls: client.calls() - vlm_calls_before,
            predictions_new: new_predictions,
            predictions_reused: reused_before,
            failures: failures.len() as u64,
        };
        let cells = score_cells(&p, &plog)?;
        let manifest = Manifest {
            run_id: p.run_id.clone(),
            config_hash: p.config_hash.clone(),
            template_hash: p.templates.hash(),
            backend: backend.clone(),
            synthesizer: synth_id,
            seeds: self.config.seeds,
            geometry: self.config.geometry,
            stitch: self.config.stitch,
            perturbation_mode: self.config.perturbation_mode,
            matrix: p.rows.clone(),
            datasets: p.datasets.iter().map(|d| d.summary.clone()).collect(),
            view_reuse: VIEW_REUSE_NOTE.to_string(),
            counters,
            failures,
            config: self.config.clone(),
        };
        let results_dir = self.write_results(&p.run_id, &backend.name, &cells, &manifest)?;
        ::log::info!(
            "run {}: {} cells, {} synthesis calls, {} model calls",
            p.run_id,
            cells.len(),
            manifest.counters.synthesis_calls,
            manifest.counters.vlm_calls
        );
        Ok(RunResult { run_id: p.run_id, backend: backend.name, cells, manifest, results_dir })
    }

    /// Writes the report files into a staging directory beside the final
    /// one and renames it into place.
    fn write_results(
        &self,
        run_id: &str,
        backend: &str,
        cells: &[CellResult],
        manifest: &Manifest,
    ) -> Result<PathBuf, RunError> {
        let root = &self.config.results_root;
        std::fs::create_dir_all(root).map_err(io_err(root))?;
        let tmp = tempfile::Builder::new().prefix(".staging-").tempdir_in(root).map_err(io_err(root))?;
        let files = render_reports(cells, backend, run_id)?;
        for (name, body) in files {
            let path = tmp.path().join(name);
            std::fs::write(&path, body).map_err(io_err(&path))?;
        }
        let manifest_json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
        let path = tmp.path().join("manifest.json");
        std::fs::write(&path, manifest_json + "\n").map_err(io_err(&path))?;
        let config_text = self.config_text.clone().unwrap_or_else(|| self.config.to_toml());
        let path = tmp.path().join("config.toml");
        std::fs::write(&path, config_text).map_err(io_err(&path))?;

        let dest = root.join(run_id);
        if dest.exists() {
            std::fs::remove_dir_all(&dest).map_err(io_err(&dest))?;
        }
        let kept = tmp.keep();
        std::fs::rename(&kept, &dest).map_err(io_err(&dest))?;
        Ok(dest)
    }
}

/// Renders `cells.csv`, `cells.md` and `figure5.svg`.
pub fn render_reports(cells: &[CellResult], backend: &str, run_id: &str) -> Result<Vec<(&'static str, String)>, RunError> {
    let tables = build_matrix(cells)?;
    let md = format!("# Run {run_id}\n\nBackend: {backend}\n\n{}", tables.to_markdown());
    let svg = render_svg(&[Series { name: backend.to_string(), cells }]);
    Ok(vec![("cells.csv", tables.to_csv()), ("cells.md", md), ("figure5.svg", svg)])
}

fn append_jsonl<T: Serialize>(path: &Path, value: &T) {
    use std::io::Write;
    let line = serde_json::to_string(value).expect("serializes") + "\n";
    let res = std::fs::OpenOptions::new().create(true).append(true).open(path).and_then(|mut f| f.write_all(line.as_bytes()));
    if let Err(e) = res {
        ::log::warn!("cannot append to {}: {e}", path.display());
    }
}

fn source_id_for(root: &Path, image: &Path) -> String {
    let rel = image.strip_prefix(root).unwrap_or(image);
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

fn synthesize_job(
    p: &Prepared,
    builder: &BundleBuilder<'_>,
    cache: &ViewCache,
    job: &ImageJob,
    infer_tx: &Sender<InferJob>,
    out_tx: &Sender<Outcome>,
    abort: &AtomicBool,
) {
    let d = &p.datasets[job.dataset];
    let kind = d.summary.kind;
    let (path, _) = &d.images[job.image];
    let fail = |ei: usize, row: Option<MatrixRow>, stage: &str, message: String| {
        let e = &d.examples[ei];
        let key = match row {
            Some(r) => idempotency_key(kind, r.configuration, r.prompt, &e.example_id),
            None => format!("{}|*|*|{}", kind.name(), e.example_id),
        };
        let _ = out_tx.send(Outcome::Failed(FailureEntry { key, example_id: e.example_id.clone(), stage: stage.into(), message }));
    };
    let original = match Image::open(path, source_id_for(&d.summary.root, path)) {
        Ok(img) => img,
        Err(e) => {
            for (ei, _) in &job.pending {
                fail(*ei, None, "load", e.to_string());
            }
            return;
        }
    };
    let rows: BTreeSet<MatrixRow> = job.pending.iter().flat_map(|(_, r)| r.iter().copied()).collect();
    let mut bundles: BTreeMap<crate::stitch::ViewConfiguration, Result<Arc<Image>, String>> = BTreeMap::new();
    for row in rows {
        if abort.load(Ordering::SeqCst) {
            return;
        }
        let first = job.pending.iter().find(|(_, r)| r.contains(&row)).map(|(ei, _)| *ei).expect("row has an example");
        let built = bundles
            .entry(row.configuration)
            .or_insert_with(|| {
                builder
                    .build(&d.examples[first].example_id, &original, row.configuration)
                    .map(|b| Arc::new(b.stitched))
                    .map_err(|e| e.to_string())
            })
            .clone();
        for (ei, wanted) in &job.pending {
            if !wanted.contains(&row) {
                continue;
            }
            let e = &d.examples[*ei];
            let image = match &built {
                Ok(img) => img.clone(),
                Err(message) => {
                    fail(*ei, Some(row), "synthesis", format!("example {}: {message}", e.example_id));
                    continue;
                }
            };
            if row.configuration.is_multi_view() {
                let stitched_path = cache.stitched_path(&e.example_id, row.configuration.name());
                if !stitched_path.exists() {
                    if let Err(err) = cache.put_stitched(&e.example_id, row.configuration.name(), &image) {
                        ::log::warn!("{err}");
                    }
                }
            }
            let prompt = match render(&e.question, row.configuration, &p.templates, row.prompt) {
                Ok(prompt) => prompt,
                Err(err) => {
                    fail(*ei, Some(row), "prompt", err.to_string());
                    continue;
                }
            };
            let job = InferJob {
                key: idempotency_key(kind, row.configuration, row.prompt, &e.example_id),
                dataset: kind,
                example_id: e.example_id.clone(),
                row,
                image,
                prompt,
            };
            if infer_tx.send(job).is_err() {
                return;
            }
        }
    }
}

fn infer_job(client: &dyn VlmClient, job: InferJob) -> Outcome {
    let started = Instant::now();
    match client.infer(&job.example_id, &job.image, &job.prompt) {
        Ok(raw_text) => Outcome::Done(LogEntry {
            key: job.key,
            dataset: job.dataset,
            prediction: Prediction {
                example_id: job.example_id,
                parsed: parse_answer(&raw_text),
                raw_text,
                configuration: job.row.configuration,
                prompt_on: job.row.prompt,
                latency_secs: started.elapsed().as_secs_f64(),
            },
        }),
        Err(e) => Outcome::Failed(FailureEntry {
            key: job.key,
            example_id: job.example_id,
            stage: "inference".into(),
            message: e.to_string(),
        }),
    }
}

fn score_cells(p: &Prepared, plog: &PredictionLog) -> Result<Vec<CellResult>, RunError> {
    let mut cells = Vec::new();
    for d in &p.datasets {
        let kind = d.summary.kind;
        let gold: HashMap<String, bool> = d.examples.iter().map(|e| (e.example_id.clone(), e.gold)).collect();
        let mut by_row: BTreeMap<MatrixRow, Vec<Prediction>> = BTreeMap::new();
        for entry in plog.entries().filter(|e| e.dataset == kind && gold.contains_key(&e.prediction.example_id)) {
            let row = MatrixRow { configuration: entry.prediction.configuration, prompt: entry.prediction.prompt_on };
            by_row.entry(row).or_default().push(entry.prediction.clone());
        }
        for row in &p.rows {
            let preds = by_row.remove(row).unwrap_or_default();
            let cell = score(kind, &preds, &gold).map_err(|source| RunError::Score {
                cell: format!("{kind}/{}/prompt={}", row.configuration, row.prompt),
                source,
            })?;
            cells.push(cell);
        }
    }
    Ok(cells)
}

/// Re-renders the reports of a finished run from its `cells.csv`.
pub fn rerender(results_dir: &Path, backend: &str) -> Result<Vec<CellResult>, RunError> {
    let csv_path = results_dir.join("cells.csv");
    let text = std::fs::read_to_string(&csv_path).map_err(io_err(&csv_path))?;
    let cells = crate::evaluation::report::parse_cells_csv(&text)?;
    let run_id = results_dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    for (name, body) in render_reports(&cells, backend, &run_id)? {
        if name == "cells.csv" {
            continue;
        }
        let path = results_dir.join(name);
        write_atomic(&path, body.as_bytes()).map_err(|e: SynthError| RunError::Setup(e.to_string()))?;
    }
    Ok(cells)
}
