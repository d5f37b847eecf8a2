//! Novel-view synthesis behind a pluggable backend, fronted by a
//! content-addressed cache.

pub mod cache;
pub mod mock;
pub mod remote;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::ViewSpec;
use crate::image::Image;

pub use cache::{cache_key, ViewCache};
pub use mock::{mock_synthesize, MockSynthesizer};
pub use remote::{RemoteSynthesizer, ServiceEndpoint};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SynthesizerId {
    pub name: String,
    pub version: String,
}

impl SynthesizerId {
    pub fn new(name: impl Into<String>, version: impl Into<String>) -> Self {
        SynthesizerId { name: name.into(), version: version.into() }
    }

    pub fn mock() -> Self {
        SynthesizerId::new("mock", "1")
    }

    pub fn is_valid(&self) -> bool {
        !self.name.trim().is_empty() && !self.version.trim().is_empty()
    }
}

impl fmt::Display for SynthesizerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.name, self.version)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("synthesis backend failed for {source_id}: {message}")]
    Backend { source_id: String, message: String },
    #[error("synthesis protocol error for {source_id}: {message}")]
    Protocol { source_id: String, message: String },
    #[error("synthesizer configuration: {0}")]
    Config(String),
    #[error("view cache {path}: {message}")]
    Cache { path: String, message: String },
}

impl SynthError {
    pub(crate) fn cache(path: &Path, err: impl fmt::Display) -> Self {
        SynthError::Cache { path: path.display().to_string(), message: err.to_string() }
    }
}

/// One implementation of the view function `(image, rotation, translation) -> image`.
pub trait SynthesisBackend: Send + Sync {
    fn id(&self) -> &SynthesizerId;

    fn synthesize(&self, image: &Image, spec: &ViewSpec) -> Result<Image, SynthError>;

    /// Number of backend invocations so far.
    fn calls(&self) -> u64;
}

/// Registry of backends plus an optional cache shared between them.
#[derive(Clone, Default)]
pub struct ViewSynthesizer {
    backends: BTreeMap<SynthesizerId, Arc<dyn SynthesisBackend>>,
    cache: Option<ViewCache>,
}

impl ViewSynthesizer {
    pub fn new(cache: Option<ViewCache>) -> Self {
        ViewSynthesizer { backends: BTreeMap::new(), cache }
    }

    pub fn register(&mut self, backend: Arc<dyn SynthesisBackend>) -> Result<(), SynthError> {
        let id = backend.id().clone();
        if !id.is_valid() {
            return Err(SynthError::Config(format!("synthesizer id {id:?} has an empty field")));
        }
        self.backends.insert(id, backend);
        Ok(())
    }

    pub fn backend(&self, id: &SynthesizerId) -> Result<&Arc<dyn SynthesisBackend>, SynthError> {
        self.backends
            .get(id)
            .ok_or_else(|| SynthError::Config(format!("synthesizer {id} is not registered")))
    }

    pub fn cache(&self) -> Option<&ViewCache> {
        self.cache.as_ref()
    }

    /// Total backend invocations across every registered backend.
    pub fn backend_calls(&self) -> u64 {
        self.backends.values().map(|b| b.calls()).sum()
    }

    /// Returns the view of `image` under `spec`. Origin specs return the
    /// input unchanged; everything else is served from the cache when
    /// possible and deposited there after a successful backend call.
    pub fn synthesize(&self, image: &Image, spec: &ViewSpec, id: &SynthesizerId) -> Result<Image, SynthError> {
        let backend = self.backend(id)?;
        spec.validate().map_err(|e| SynthError::Config(e.to_string()))?;
        if spec.is_origin() {
            return Ok(image.clone());
        }
        let view_id = format!("{}#{}", image.source_id(), spec.label());
        let Some(cache) = &self.cache else {
            return backend.synthesize(image, spec);
        };
        let key = cache_key(image, spec, id);
        if let Some(hit) = cache.get(&key, &view_id)? {
            return Ok(hit);
        }
        let out = backend.synthesize(image, spec)?;
        let manifest = cache::EntryManifest {
            key: key.clone(),
            source_id: image.source_id().to_string(),
            view: spec.to_record(),
            synthesizer: id.clone(),
            width: out.width(),
            height: out.height(),
        };
        cache.put(&key, &out, &manifest)?;
        Ok(out.with_source_id(view_id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ViewGeometry, ViewLabel};

    struct Failing;

    impl SynthesisBackend for Failing {
        fn id(&self) -> &SynthesizerId {
            static ID: std::sync::OnceLock<SynthesizerId> = std::sync::OnceLock::new();
            ID.get_or_init(|| SynthesizerId::new("failing", "0"))
        }

        fn synthesize(&self, image: &Image, _spec: &ViewSpec) -> Result<Image, SynthError> {
            Err(SynthError::Backend { source_id: image.source_id().into(), message: "boom".into() })
        }

        fn calls(&self) -> u64 {
            0
        }
    }

    fn setup(dir: &Path) -> (ViewSynthesizer, Arc<MockSynthesizer>) {
        let mock = Arc::new(MockSynthesizer::new());
        let mut s = ViewSynthesizer::new(Some(ViewCache::open(dir).unwrap()));
        s.register(mock.clone()).unwrap();
        s.register(Arc::new(Failing)).unwrap();
        (s, mock)
    }

    #[test]
    fn origin_passes_through() {
        let dir = tempfile::tempdir().unwrap();
        let (s, mock) = setup(dir.path());
        let img = Image::filled(5, 5, [3, 3, 3], "e1").unwrap();
        let out = s.synthesize(&img, &ViewSpec::origin(), &SynthesizerId::mock()).unwrap();
        assert_eq!(out, img);
        assert_eq!(mock.calls(), 0);
    }

    #[test]
    fn second_call_hits_cache() {
        let dir = tempfile::tempdir().unwrap();
        let (s, mock) = setup(dir.path());
        let img = Image::filled(64, 64, [100, 50, 25], "e1").unwrap();
        let left = ViewSpec::canonical(ViewLabel::Left, &ViewGeometry::default()).unwrap();
        let a = s.synthesize(&img, &left, &SynthesizerId::mock()).unwrap();
        let b = s.synthesize(&img, &left, &SynthesizerId::mock()).unwrap();
        assert_eq!(mock.calls(), 1);
        assert_eq!(a, b);
        assert!(a.same_pixels(&mock_synthesize(&img, &left)));
    }

    #[test]
    fn unregistered_synthesizer_is_config_error() {
        let s = ViewSynthesizer::new(None);
        let img = Image::filled(2, 2, [0, 0, 0], "e").unwrap();
        let err = s.synthesize(&img, &ViewSpec::random(1), &SynthesizerId::mock()).unwrap_err();
        assert!(matches!(err, SynthError::Config(_)));
    }

    #[test]
    fn failure_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let (s, _) = setup(dir.path());
        let img = Image::filled(4, 4, [1, 1, 1], "e9").unwrap();
        let err = s.synthesize(&img, &ViewSpec::random(3), &SynthesizerId::new("failing", "0")).unwrap_err();
        match err {
            SynthError::Backend { source_id, .. } => assert_eq!(source_id, "e9"),
            other => panic!("unexpected {other}"),
        }
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn concurrent_writers_of_the_same_key() {
        let dir = tempfile::tempdir().unwrap();
        let (s, _) = setup(dir.path());
        let img = Image::filled(32, 32, [7, 8, 9], "c").unwrap();
        let spec = ViewSpec::random(11);
        let outs: Vec<Image> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..8)
                .map(|_| scope.spawn(|| s.synthesize(&img, &spec, &SynthesizerId::mock()).unwrap()))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert!(outs.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(s.cache().unwrap().stats().unwrap().entries, 1);
    }
}
