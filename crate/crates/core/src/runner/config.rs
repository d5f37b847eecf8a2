//! Run configuration: parsing, defaults and validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::{self, DatasetKind, FieldMap, PerturbationMode, Split};
use crate::geometry::ViewGeometry;
use crate::prompt::{CoverageViolation, TemplateSet};
use crate::stitch::{StitchLayout, ViewConfiguration};
use crate::synth::SynthesizerId;
use crate::vlm::ModelBackend;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing run config: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    #[default]
    SkipLog,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub kind: DatasetKind,
    pub root: PathBuf,
    /// Split to evaluate; every split when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<FieldMap>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixRow {
    pub configuration: ViewConfiguration,
    pub prompt: bool,
}

/// The seven single-view and four multi-view rows of the reference table.
pub fn default_matrix() -> Vec<MatrixRow> {
    use ViewConfiguration::*;
    let row = |configuration, prompt| MatrixRow { configuration, prompt };
    vec![
        row(Origin, false),
        row(LeftView, false),
        row(RightView, false),
        row(RandomView, false),
        row(LeftView, true),
        row(RightView, true),
        row(RandomView, true),
        row(MultiView, false),
        row(OriginLeft, true),
        row(OriginLeftRight, true),
        row(OriginMulti, true),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesizerConfig {
    pub name: String,
    pub version: String,
    /// Service URL for non-mock synthesizers; `SYNTH_ENDPOINT` fills it in when empty.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub timeout_secs: f64,
}

impl Default for SynthesizerConfig {
    fn default() -> Self {
        let id = SynthesizerId::mock();
        SynthesizerConfig { name: id.name, version: id.version, endpoint: None, timeout_secs: 120.0 }
    }
}

impl SynthesizerConfig {
    pub fn id(&self) -> SynthesizerId {
        SynthesizerId::new(self.name.clone(), self.version.clone())
    }

    pub fn is_mock(&self) -> bool {
        self.id() == SynthesizerId::mock()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random_view: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    pub datasets: Vec<DatasetEntry>,
    /// Explicit matrix rows. Mutually exclusive with `configurations`/`prompt_flags`.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub matrix: Vec<MatrixRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub configurations: Vec<ViewConfiguration>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub prompt_flags: Vec<bool>,
    /// Name of the entry in `backends` to query.
    pub backend: String,
    pub backends: BTreeMap<String, ModelBackend>,
    pub synthesizer: SynthesizerConfig,
    pub seeds: Seeds,
    pub geometry: ViewGeometry,
    pub stitch: StitchLayout,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    /// Append the yes/no instruction to default templates.
    pub answer_instruction: bool,
    pub cache_root: PathBuf,
    pub results_root: PathBuf,
    /// Inference workers.
    pub parallelism: usize,
    /// Synthesis workers.
    pub synthesis_parallelism: usize,
    pub failure_policy: FailurePolicy,
    pub perturbation_mode: PerturbationMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            run_id: None,
            datasets: Vec::new(),
            matrix: Vec::new(),
            configurations: Vec::new(),
            prompt_flags: Vec::new(),
            backend: "mock".into(),
            backends: BTreeMap::new(),
            synthesizer: SynthesizerConfig::default(),
            seeds: Seeds::default(),
            geometry: ViewGeometry::default(),
            stitch: StitchLayout::default(),
            templates: None,
            answer_instruction: true,
            cache_root: PathBuf::from("cache"),
            results_root: PathBuf::from("results"),
            parallelism: 4,
            synthesis_parallelism: 2,
            failure_policy: FailurePolicy::SkipLog,
            perturbation_mode: PerturbationMode::None,
        }
    }
}

/// One problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut config = RunConfig::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok((config, text))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut self.datasets {
            fix(&mut d.root);
        }
        if let Some(t) = &mut self.templates {
            fix(t);
        }
        fix(&mut self.cache_root);
        fix(&mut self.results_root);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Fills endpoints and tokens that the config leaves empty from
    /// `SYNTH_ENDPOINT`, `SYNTH_TOKEN`, `VLM_ENDPOINT` and `VLM_TOKEN`.
    pub fn apply_env(&mut self) {
        let env = |k: &str| std::env::var(k).ok().filter(|s| !s.is_empty());
        if !self.synthesizer.is_mock() && self.synthesizer.endpoint.is_none() {
            self.synthesizer.endpoint = env("SYNTH_ENDPOINT");
        }
        if let Some(b) = self.backends.get_mut(&self.backend) {
            if b.endpoint.trim().is_empty() {
                if let Some(url) = env("VLM_ENDPOINT") {
                    b.endpoint = url;
                }
            }
            if !b.is_mock() && b.token.is_none() {
                b.token = env("VLM_TOKEN");
            }
        }
    }

    /// The selected back-end. `mock` resolves to the built-in mock when not declared.
    pub fn selected_backend(&self) -> Option<ModelBackend> {
        match self.backends.get(&self.backend) {
            Some(b) => Some(b.clone()),
            None if self.backend == "mock" => Some(ModelBackend::mock()),
            None => None,
        }
    }

    /// Matrix rows in evaluation order, duplicates removed.
    pub fn rows(&self) -> Vec<MatrixRow> {
        let rows = if !self.matrix.is_empty() {
            self.matrix.clone()
        } else if self.configurations.is_empty() && self.prompt_flags.is_empty() {
            default_matrix()
        } else {
            let configs: Vec<ViewConfiguration> =
                if self.configurations.is_empty() { ViewConfiguration::ALL.to_vec() } else { self.configurations.clone() };
            let flags = if self.prompt_flags.is_empty() { vec![false, true] } else { self.prompt_flags.clone() };
            configs
                .iter()
                .flat_map(|&configuration| flags.iter().map(move |&prompt| MatrixRow { configuration, prompt }))
                .collect()
        };
        let mut seen = BTreeSet::new();
        rows.into_iter().filter(|r| seen.insert(*r)).collect()
    }

    pub fn template_set(&self) -> Result<TemplateSet, String> {
        match &self.templates {
            Some(path) => TemplateSet::load(path).map_err(|e| e.to_string()),
            None => Ok(TemplateSet::defaults(self.answer_instruction)),
        }
    }

    /// SHA-256 of the canonical serialized config, excluding `run_id` and secrets.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.run_id = None;
        let bytes = serde_json::to_vec(&c).expect("run config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Checks everything that can be checked before running and returns every
/// violation found.
pub fn validate(config: &RunConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field: &str, message: String| out.push(Violation { field: field.to_string(), message });

    if config.datasets.is_empty() {
        push("datasets", "no datasets configured".into());
    }
    let mut kinds = BTreeSet::new();
    for (i, d) in config.datasets.iter().enumerate() {
        let field = format!("datasets[{i}]");
        if !kinds.insert(d.kind) {
            push(&field, format!("dataset {} listed twice", d.kind));
        }
        if !d.root.is_dir() {
            push(&field, format!("root {} is not a directory", d.root.display()));
        } else if !datasets::has_annotations(&d.root) {
            push(&field, format!("no annotation files under {}", d.root.display()));
        }
    }

    if !config.matrix.is_empty() && !(config.configurations.is_empty() && config.prompt_flags.is_empty()) {
        push("matrix", "set either matrix rows or configurations/prompt_flags, not both".into());
    }
    let rows = config.rows();
    if rows.is_empty() {
        push("matrix", "no matrix rows".into());
    }

    match config.template_set() {
        Ok(templates) => {
            for v in templates.validate() {
                match v {
                    CoverageViolation::Uncovered(c) if rows.iter().any(|r| r.prompt && r.configuration == c) => {
                        push("templates", format!("no template covers {c}"));
                    }
                    CoverageViolation::Overlap(c, ids) => {
                        push("templates", format!("{c} is covered by several templates: {}", ids.join(", ")));
                    }
                    CoverageViolation::Uncovered(_) => {}
                }
            }
        }
        Err(e) => push("templates", e),
    }

    if rows.iter().any(|r| r.configuration.uses_random_view()) && config.seeds.random_view.is_none() {
        push("seeds.random_view", "random views are enabled but no seed is set".into());
    }
    if config.perturbation_mode != PerturbationMode::None && config.seeds.perturbation.is_none() {
        push("seeds.perturbation", "perturbations are enabled but no seed is set".into());
    }

    if config.parallelism == 0 {
        push("parallelism", "must be at least 1".into());
    }
    if config.synthesis_parallelism == 0 {
        push("synthesis_parallelism", "must be at least 1".into());
    }

    match config.selected_backend() {
        Some(b) => {
            for m in b.validate() {
                push("backend", m);
            }
        }
        None => push("backend", format!("backend {:?} is not declared under [backends]", config.backend)),
    }

    let synth = &config.synthesizer;
    if !synth.id().is_valid() {
        push("synthesizer", "name and version must be non-empty".into());
    } else if !synth.is_mock() && synth.endpoint.as_deref().is_none_or(|e| e.trim().is_empty()) {
        push("synthesizer.endpoint", format!("synthesizer {} needs an endpoint or SYNTH_ENDPOINT", synth.id()));
    }
    if !(synth.timeout_secs.is_finite() && synth.timeout_secs > 0.0) {
        push("synthesizer.timeout_secs", "must be positive".into());
    }
    if config.stitch.target_height == 0 {
        push("stitch.target_height", "must be at least 1".into());
    }
    let g = &config.geometry;
    if !(g.canonical_angle_deg.is_finite() && g.translation_magnitude.is_finite()) {
        push("geometry", "angle and translation must be finite".into());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_matrix_shape() {
        let rows = default_matrix();
        assert_eq!(rows.len(), 11);
        assert_eq!(rows.iter().filter(|r| !r.configuration.is_multi_view()).count(), 7);
        assert_eq!(RunConfig::default().rows(), rows);
    }

    #[test]
    fn cartesian_rows() {
        let c = RunConfig {
            configurations: vec![ViewConfiguration::LeftView, ViewConfiguration::MultiView],
            ..RunConfig::default()
        };
        assert_eq!(c.rows().len(), 4);
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
backend = "mock"
parallelism = 2
[[datasets]]
kind = "VSR_RANDOM"
root = "data/vsr"
split = "test"
[seeds]
random_view = 7
[[matrix]]
configuration = "L_V"
prompt = true
"#;
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.datasets[0].split, Some(Split::Test));
        assert_eq!(c.rows(), vec![MatrixRow { configuration: ViewConfiguration::LeftView, prompt: true }]);
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
        assert!(RunConfig::parse("bogus = 1").is_err());
    }

    #[test]
    fn hash_ignores_run_id() {
        let a = RunConfig::default();
        let b = RunConfig { run_id: Some("x".into()), ..RunConfig::default() };
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig { parallelism: 9, ..RunConfig::default() };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn reports_every_violation() {
        let c = RunConfig { parallelism: 0, backend: "missing".into(), ..RunConfig::default() };
        let v = validate(&c);
        let fields: BTreeSet<&str> = v.iter().map(|v| v.field.as_str()).collect();
        for f in ["datasets", "seeds.random_view", "parallelism", "backend"] {
            assert!(fields.contains(f), "{f} missing from {v:?}");
        }
    }
}
