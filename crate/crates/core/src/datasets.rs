//! Benchmark records: JSON-lines loading, split statistics and the two
//! question perturbations (relation swap, absent-object substitution).
//!
//! A dataset root holds either one `annotations.jsonl` whose records carry a
//! `split` field, or per-split files `train.jsonl`, `dev.jsonl`, `test.jsonl`.
//! Images live under `<root>/images/`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::derive_seed;

pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const IMAGES_DIR: &str = "images";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DatasetKind {
    #[serde(rename = "VSR_RANDOM")]
    VsrRandom,
    #[serde(rename = "VSR_ZEROSHOT")]
    VsrZeroShot,
    #[serde(rename = "WHATSUP_A")]
    WhatsUpA,
    #[serde(rename = "WHATSUP_B")]
    WhatsUpB,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 4] =
        [DatasetKind::VsrRandom, DatasetKind::VsrZeroShot, DatasetKind::WhatsUpA, DatasetKind::WhatsUpB];

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::VsrRandom => "VSR_RANDOM",
            DatasetKind::VsrZeroShot => "VSR_ZEROSHOT",
            DatasetKind::WhatsUpA => "WHATSUP_A",
            DatasetKind::WhatsUpB => "WHATSUP_B",
        }
    }

    /// Column header used in reports.
    pub fn display(self) -> &'static str {
        match self {
            DatasetKind::VsrRandom => "VSR (Random Split)",
            DatasetKind::VsrZeroShot => "VSR (Zero Shot)",
            DatasetKind::WhatsUpA => "What'sUp (A)",
            DatasetKind::WhatsUpB => "What'sUp (B)",
        }
    }

    /// Record counts of the full public releases.
    pub fn published_counts(self) -> DatasetStats {
        let (train, development, test) = match self {
            DatasetKind::VsrRandom => (7680, 1097, 2195),
            DatasetKind::VsrZeroShot => (4713, 231, 616),
            DatasetKind::WhatsUpA => (200, 110, 111),
            DatasetKind::WhatsUpB => (200, 108, 100),
        };
        DatasetStats::new(train, development, test)
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DatasetKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown dataset {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" | "development" | "val" | "validation" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub example_id: String,
    /// Resolved image location (file path, or URL as given).
    pub image_ref: PathBuf,
    pub question: String,
    pub relation: String,
    pub subject: String,
    pub object: String,
    pub gold: bool,
    pub dataset: DatasetKind,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetStats {
    pub train: u64,
    pub development: u64,
    pub test: u64,
    pub total: u64,
}

impl DatasetStats {
    pub fn new(train: u64, development: u64, test: u64) -> Self {
        DatasetStats { train, development, test, total: train + development + test }
    }

    pub fn from_examples<'a>(examples: impl IntoIterator<Item = &'a Example>) -> Self {
        let (mut train, mut dev, mut test) = (0, 0, 0);
        for e in examples {
            match e.split {
                Split::Train => train += 1,
                Split::Dev => dev += 1,
                Split::Test => test += 1,
            }
        }
        DatasetStats::new(train, dev, test)
    }
}

/// Accepted source keys for each field, tried in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldMap {
    pub id: Vec<String>,
    pub image: Vec<String>,
    pub question: Vec<String>,
    pub relation: Vec<String>,
    pub subject: Vec<String>,
    pub object: Vec<String>,
    pub label: Vec<String>,
    pub split: Vec<String>,
}

impl Default for FieldMap {
    fn default() -> Self {
        let v = |keys: &[&str]| keys.iter().map(|s| s.to_string()).collect();
        FieldMap {
            id: v(&["id", "example_id"]),
            image: v(&["image"]),
            question: v(&["caption", "question"]),
            relation: v(&["relation"]),
            subject: v(&["subject", "subj"]),
            object: v(&["object", "obj"]),
            label: v(&["label"]),
            split: v(&["split"]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordError {
    pub file: String,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.file, self.line, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("no annotation file under {0} (expected annotations.jsonl or train/dev/test.jsonl)")]
    MissingAnnotations(String),
    #[error("read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{} invalid record(s); first: {}", .0.len(), .0[0])]
    Validation(Vec<RecordError>),
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub fields: FieldMap,
    /// Fail the load when any record is invalid.
    pub strict: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { fields: FieldMap::default(), strict: true }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub kind: DatasetKind,
    pub root: PathBuf,
    pub examples: Vec<Example>,
    pub stats: DatasetStats,
    /// Records rejected during a non-strict load.
    pub rejected: Vec<RecordError>,
}

impl LoadedDataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Example> {
        self.examples.iter().filter(move |e| e.split == split)
    }

    pub fn relation_vocab(&self) -> BTreeSet<String> {
        self.examples.iter().map(|e| e.relation.clone()).collect()
    }

    pub fn object_vocab(&self) -> BTreeSet<String> {
        self.examples
            .iter()
            .flat_map(|e| [e.subject.clone(), e.object.clone()])
            .collect()
    }

    /// Nouns appearing in any annotation of each image. This is only an
    /// approximation of what the image actually contains.
    pub fn present_objects(&self) -> BTreeMap<PathBuf, BTreeSet<String>> {
        let mut out: BTreeMap<PathBuf, BTreeSet<String>> = BTreeMap::new();
        for e in &self.examples {
            let set = out.entry(e.image_ref.clone()).or_default();
            set.insert(e.subject.clone());
            set.insert(e.object.clone());
        }
        out
    }
}

fn annotation_files(root: &Path) -> Vec<(PathBuf, Option<Split>)> {
    let single = root.join(ANNOTATIONS_FILE);
    if single.is_file() {
        return vec![(single, None)];
    }
    Split::ALL
        .into_iter()
        .map(|s| (root.join(format!("{s}.jsonl")), Some(s)))
        .filter(|(p, _)| p.is_file())
        .collect()
}

pub fn has_annotations(root: &Path) -> bool {
    !annotation_files(root).is_empty()
}

pub fn load(kind: DatasetKind, root: &Path, options: &LoadOptions) -> Result<LoadedDataset, DatasetError> {
    let files = annotation_files(root);
    if files.is_empty() {
        return Err(DatasetError::MissingAnnotations(root.display().to_string()));
    }
    let images = root.join(IMAGES_DIR);
    let mut examples = Vec::new();
    let mut rejected = Vec::new();
    let mut seen: HashSet<(Split, String)> = HashSet::new();
    for (path, file_split) in files {
        let text = std::fs::read_to_string(&path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let reject = |message: String| RecordError { file: file_name.clone(), line: lineno, message };
            match parse_record(line, &options.fields, kind, file_split, &images) {
                Ok(mut example) => {
                    if example.example_id.is_empty() {
                        example.example_id = format!("{}-{lineno}", file_stem(&file_name));
                    }
                    if !seen.insert((example.split, example.example_id.clone())) {
                        rejected.push(reject(format!(
                            "duplicate id {:?} in split {}",
                            example.example_id, example.split
                        )));
                        continue;
                    }
                    examples.push(example);
                }
                Err(message) => rejected.push(reject(message)),
            }
        }
    }
    if options.strict && !rejected.is_empty() {
        return Err(DatasetError::Validation(rejected));
    }
    let stats = DatasetStats::from_examples(&examples);
    Ok(LoadedDataset { kind, root: root.to_path_buf(), examples, stats, rejected })
}

fn file_stem(name: &str) -> &str {
    name.strip_suffix(".jsonl").unwrap_or(name)
}

fn lookup<'a>(obj: &'a Map<String, Value>, keys: &[String]) -> Option<&'a Value> {
    keys.iter().find_map(|k| obj.get(k)).filter(|v| !v.is_null())
}

fn text_field(obj: &Map<String, Value>, keys: &[String], name: &str) -> Result<String, String> {
    match lookup(obj, keys) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.clone()),
        Some(Value::String(_)) => Err(format!("field {name} is empty")),
        Some(other) => Err(format!("field {name} must be a string, got {other}")),
        None => Err(format!("missing field {name} (tried {})", keys.join(", "))),
    }
}

fn parse_label(v: &Value) -> Result<bool, String> {
    match v {
        Value::Bool(b) => Ok(*b),
        Value::Number(n) if n.as_u64() == Some(1) => Ok(true),
        Value::Number(n) if n.as_u64() == Some(0) => Ok(false),
        Value::String(s) => match s.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(format!("label {s:?} is not binary")),
        },
        other => Err(format!("label {other} is not binary")),
    }
}

/// Parses one annotation line. An empty `example_id` means the record had
/// no id field; the loader assigns one from the file position.
pub fn parse_record(
    line: &str,
    fields: &FieldMap,
    kind: DatasetKind,
    file_split: Option<Split>,
    images: &Path,
) -> Result<Example, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let Value::Object(obj) = value else {
        return Err("record is not a JSON object".into());
    };
    let example_id = match lookup(&obj, &fields.id) {
        None => String::new(),
        Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(other) => return Err(format!("id {other} is not a string or number")),
    };
    let image = text_field(&obj, &fields.image, "image")?;
    let question = text_field(&obj, &fields.question, "question")?;
    let relation = text_field(&obj, &fields.relation, "relation")?;
    let subject = text_field(&obj, &fields.subject, "subject")?;
    let object = text_field(&obj, &fields.object, "object")?;
    let gold = parse_label(lookup(&obj, &fields.label).ok_or("missing field label")?)?;
    let split = match (lookup(&obj, &fields.split), file_split) {
        (Some(Value::String(s)), file) => {
            let s: Split = s.parse()?;
            if file.is_some_and(|f| f != s) {
                return Err(format!("record split {s} disagrees with its file"));
            }
            s
        }
        (Some(other), _) => return Err(format!("split {other} is not a string")),
        (None, Some(f)) => f,
        (None, None) => return Err("missing field split".into()),
    };
    let image_ref = if image.contains("://") { PathBuf::from(&image) } else { images.join(&image) };
    Ok(Example { example_id, image_ref, question, relation, subject, object, gold, dataset: kind, split })
}

/// Writes examples back in the single-file annotation format.
pub fn to_annotations(examples: &[Example], images: &Path) -> String {
    let mut out = String::new();
    for e in examples {
        let image = e
            .image_ref
            .strip_prefix(images)
            .unwrap_or(&e.image_ref)
            .to_string_lossy()
            .into_owned();
        let record = serde_json::json!({
            "id": e.example_id,
            "image": image,
            "caption": e.question,
            "relation": e.relation,
            "subject": e.subject,
            "object": e.object,
            "label": e.gold,
            "split": e.split.as_str(),
        });
        out.push_str(&record.to_string());
        out.push('\n');
    }
    out
}

#[derive(Debug, thiserror::Error, PartialEq, Eq, Clone)]
pub enum PerturbError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{example_id} cannot be perturbed: {reason}")]
    Unperturbable { example_id: String, reason: String },
}

/// Byte offset of `phrase` in `text` at word boundaries.
fn find_phrase(text: &str, phrase: &str) -> Option<usize> {
    if phrase.is_empty() {
        return None;
    }
    let is_word = |c: char| c.is_alphanumeric() || c == '_';
    text.match_indices(phrase).map(|(i, _)| i).find(|&i| {
        let before = text[..i].chars().next_back();
        let after = text[i + phrase.len()..].chars().next();
        !before.is_some_and(is_word) && !after.is_some_and(is_word)
    })
}

fn replace_phrase(text: &str, at: usize, len: usize, with: &str) -> String {
    let mut out = String::with_capacity(text.len() + with.len());
    out.push_str(&text[..at]);
    out.push_str(with);
    out.push_str(&text[at + len..]);
    out
}

fn pick<'a>(candidates: &[&'a String], seed: u64) -> &'a String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    candidates[rng.random_range(0..candidates.len())]
}

/// Swaps the relation for a different one from `vocab` and marks the
/// record false.
pub fn perturb_relation(example: &Example, vocab: &BTreeSet<String>, seed: u64) -> Result<Example, PerturbError> {
    if vocab.len() < 2 || !vocab.contains(&example.relation) {
        return Err(PerturbError::InvalidArgument(format!(
            "relation vocabulary must hold at least two relations including {:?}",
            example.relation
        )));
    }
    let unperturbable = |reason: &str| PerturbError::Unperturbable {
        example_id: example.example_id.clone(),
        reason: reason.to_string(),
    };
    if !example.gold {
        return Err(unperturbable("only true statements can be turned false"));
    }
    let at = find_phrase(&example.question, &example.relation)
        .ok_or_else(|| unperturbable("relation phrase not found in the question"))?;
    let candidates: Vec<&String> = vocab.iter().filter(|r| **r != example.relation).collect();
    let relation = pick(&candidates, seed).clone();
    Ok(Example {
        example_id: format!("{}.rel", example.example_id),
        question: replace_phrase(&example.question, at, example.relation.len(), &relation),
        relation,
        gold: false,
        ..example.clone()
    })
}

/// Replaces the subject with a noun believed absent from the image.
pub fn perturb_object(
    example: &Example,
    object_vocab: &BTreeSet<String>,
    present_objects: &BTreeSet<String>,
    seed: u64,
) -> Result<Example, PerturbError> {
    let unperturbable = |reason: &str| PerturbError::Unperturbable {
        example_id: example.example_id.clone(),
        reason: reason.to_string(),
    };
    let candidates: Vec<&String> = object_vocab
        .iter()
        .filter(|o| !present_objects.contains(*o) && **o != example.subject)
        .collect();
    if candidates.is_empty() {
        return Err(unperturbable("every vocabulary noun is present in the image"));
    }
    let at = find_phrase(&example.question, &example.subject)
        .ok_or_else(|| unperturbable("subject not found in the question"))?;
    let subject = pick(&candidates, seed).clone();
    Ok(Example {
        example_id: format!("{}.obj", example.example_id),
        question: replace_phrase(&example.question, at, example.subject.len(), &subject),
        subject,
        gold: false,
        ..example.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationMode {
    #[default]
    None,
    Relation,
    Object,
    Both,
}

impl PerturbationMode {
    pub fn relation(self) -> bool {
        matches!(self, PerturbationMode::Relation | PerturbationMode::Both)
    }

    pub fn object(self) -> bool {
        matches!(self, PerturbationMode::Object | PerturbationMode::Both)
    }
}

#[derive(Debug, Clone, Default)]
pub struct PerturbationBatch {
    pub examples: Vec<Example>,
    pub skipped: Vec<PerturbError>,
}

/// Perturbs each of `examples` under `mode`. Per-example seeds derive from
/// `seed` and the example id, so the batch is reproducible regardless of
/// order. Vocabularies come from the whole of `dataset`.
pub fn perturb_batch(
    dataset: &LoadedDataset,
    examples: &[Example],
    mode: PerturbationMode,
    seed: u64,
) -> PerturbationBatch {
    let mut batch = PerturbationBatch::default();
    if mode == PerturbationMode::None {
        return batch;
    }
    let relations = dataset.relation_vocab();
    let objects = dataset.object_vocab();
    let present = dataset.present_objects();
    let empty = BTreeSet::new();
    for e in examples {
        if mode.relation() {
            match perturb_relation(e, &relations, derive_seed(seed, &format!("{}.rel", e.example_id))) {
                Ok(p) => batch.examples.push(p),
                Err(err) => batch.skipped.push(err),
            }
        }
        if mode.object() {
            let here = present.get(&e.image_ref).unwrap_or(&empty);
            match perturb_object(e, &objects, here, derive_seed(seed, &format!("{}.obj", e.example_id))) {
                Ok(p) => batch.examples.push(p),
                Err(err) => batch.skipped.push(err),
            }
        }
    }
    batch
}
