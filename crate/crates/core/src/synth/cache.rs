//! Content-addressed store for synthesized views.
//!
//! Layout under the cache root:
//!
//! ```text
//! <root>/<key[0..2]>/<key>.json   manifest (view record, synthesizer id)
//! <root>/<key[0..2]>/<key>.png    lossless pixels; written last, marks the entry committed
//! <root>/stitched/<example>.<configuration>.png
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place, so a
//! reader never observes a partial file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{SynthError, SynthesizerId};
use crate::geometry::{ViewRecord, ViewSpec};
use crate::image::Image;

const STITCHED_DIR: &str = "stitched";
const TEMP_PREFIX: &str = ".tmp-";

/// SHA-256 over image bytes, canonical spec text and synthesizer identity.
/// Each field is length-prefixed so concatenations cannot collide.
pub fn cache_key(image: &Image, spec: &ViewSpec, synthesizer: &SynthesizerId) -> String {
    let mut h = Sha256::new();
    for part in [
        image.raw_bytes().as_slice(),
        spec.canonical_string().as_bytes(),
        synthesizer.name.as_bytes(),
        synthesizer.version.as_bytes(),
    ] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryManifest {
    pub key: String,
    pub source_id: String,
    pub view: ViewRecord,
    pub synthesizer: SynthesizerId,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub entries: u64,
    pub entry_bytes: u64,
    pub stitched: u64,
    pub stitched_bytes: u64,
    pub incomplete: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GcReport {
    pub removed_temp: u64,
    pub removed_orphans: u64,
    pub removed_corrupt: u64,
}

#[derive(Debug, Clone)]
pub struct ViewCache {
    root: PathBuf,
}

impl ViewCache {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, SynthError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| SynthError::cache(&root, e))?;
        Ok(ViewCache { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn entry_dir(&self, key: &str) -> PathBuf {
        self.root.join(&key[..2])
    }

    pub fn png_path(&self, key: &str) -> PathBuf {
        self.entry_dir(key).join(format!("{key}.png"))
    }

    pub fn manifest_path(&self, key: &str) -> PathBuf {
        self.entry_dir(key).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str, source_id: &str) -> Result<Option<Image>, SynthError> {
        let path = self.png_path(key);
        match fs::read(&path) {
            Ok(bytes) => {
                let img = Image::decode(&bytes, source_id).map_err(|e| SynthError::Cache {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                Ok(Some(img))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(SynthError::cache(&path, e)),
        }
    }

    pub fn put(&self, key: &str, image: &Image, manifest: &EntryManifest) -> Result<(), SynthError> {
        let dir = self.entry_dir(key);
        fs::create_dir_all(&dir).map_err(|e| SynthError::cache(&dir, e))?;
        let json = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
        let png = image.to_png().map_err(|e| SynthError::Cache {
            path: self.png_path(key).display().to_string(),
            message: e.to_string(),
        })?;
        write_atomic(&self.manifest_path(key), &json)?;
        write_atomic(&self.png_path(key), &png)
    }

    pub fn read_manifest(&self, key: &str) -> Result<EntryManifest, SynthError> {
        let path = self.manifest_path(key);
        let bytes = fs::read(&path).map_err(|e| SynthError::cache(&path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| SynthError::Cache {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn stitched_path(&self, example_id: &str, configuration: &str) -> PathBuf {
        self.root
            .join(STITCHED_DIR)
            .join(format!("{}.{}.png", sanitize(example_id), configuration))
    }

    pub fn put_stitched(&self, example_id: &str, configuration: &str, image: &Image) -> Result<PathBuf, SynthError> {
        let path = self.stitched_path(example_id, configuration);
        let dir = path.parent().expect("stitched dir");
        fs::create_dir_all(dir).map_err(|e| SynthError::cache(dir, e))?;
        let png = image.to_png().map_err(|e| SynthError::Cache {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        write_atomic(&path, &png)?;
        Ok(path)
    }

    /// Walks the cache and counts committed entries and stitched images.
    pub fn stats(&self) -> Result<CacheStats, SynthError> {
        let mut stats = CacheStats::default();
        for file in self.files()? {
            let size = file.metadata().map(|m| m.len()).unwrap_or(0);
            let path = file.path();
            let in_stitched = path.parent().and_then(|p| p.file_name()) == Some(STITCHED_DIR.as_ref());
            let name = file.file_name().to_string_lossy().into_owned();
            if in_stitched {
                if name.ends_with(".png") && !name.starts_with(TEMP_PREFIX) {
                    stats.stitched += 1;
                    stats.stitched_bytes += size;
                }
                continue;
            }
            if name.starts_with(TEMP_PREFIX) {
                stats.incomplete += 1;
            } else if let Some(key) = name.strip_suffix(".png") {
                if self.manifest_path(key).exists() {
                    stats.entries += 1;
                    stats.entry_bytes += size;
                } else {
                    stats.incomplete += 1;
                }
            } else if let Some(key) = name.strip_suffix(".json") {
                stats.entry_bytes += size;
                if !self.png_path(key).exists() {
                    stats.incomplete += 1;
                }
            }
        }
        Ok(stats)
    }

    /// Removes leftover temporaries, half-written pairs and unreadable manifests.
    pub fn gc(&self) -> Result<GcReport, SynthError> {
        let mut report = GcReport::default();
        for file in self.files()? {
            let path = file.path();
            let name = file.file_name().to_string_lossy().into_owned();
            if name.starts_with(TEMP_PREFIX) {
                remove(&path)?;
                report.removed_temp += 1;
                continue;
            }
            let in_stitched = path.parent().and_then(|p| p.file_name()) == Some(STITCHED_DIR.as_ref());
            if in_stitched {
                continue;
            }
            if let Some(key) = name.strip_suffix(".png") {
                if !self.manifest_path(key).exists() {
                    remove(&path)?;
                    report.removed_orphans += 1;
                }
            } else if let Some(key) = name.strip_suffix(".json") {
                if !self.png_path(key).exists() {
                    remove(&path)?;
                    report.removed_orphans += 1;
                } else if self.read_manifest(key).map(|m| m.key != key).unwrap_or(true) {
                    remove(&path)?;
                    remove(&self.png_path(key))?;
                    report.removed_corrupt += 1;
                }
            }
        }
        Ok(report)
    }

    fn files(&self) -> Result<Vec<fs::DirEntry>, SynthError> {
        let mut out = Vec::new();
        let top = fs::read_dir(&self.root).map_err(|e| SynthError::cache(&self.root, e))?;
        for dir in top {
            let dir = dir.map_err(|e| SynthError::cache(&self.root, e))?;
            if !dir.file_type().map(|t| t.is_dir()).unwrap_or(false) {
                continue;
            }
            let name = dir.file_name();
            let name = name.to_string_lossy();
            if name != STITCHED_DIR && !(name.len() == 2 && name.chars().all(|c| c.is_ascii_hexdigit())) {
                continue;
            }
            let inner = fs::read_dir(dir.path()).map_err(|e| SynthError::cache(&dir.path(), e))?;
            for file in inner {
                let file = file.map_err(|e| SynthError::cache(&dir.path(), e))?;
                if file.file_type().map(|t| t.is_file()).unwrap_or(false) {
                    out.push(file);
                }
            }
        }
        out.sort_by_key(|f| f.path());
        Ok(out)
    }
}

/// Writes via a uniquely named temporary sibling, then renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), SynthError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::Builder::new()
        .prefix(TEMP_PREFIX)
        .tempfile_in(dir)
        .map_err(|e| SynthError::cache(dir, e))?;
    tmp.write_all(bytes).map_err(|e| SynthError::cache(path, e))?;
    tmp.as_file().sync_all().map_err(|e| SynthError::cache(path, e))?;
    tmp.persist(path).map_err(|e| SynthError::cache(path, e.error))?;
    Ok(())
}

fn remove(path: &Path) -> Result<(), SynthError> {
    match fs::remove_file(path) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(SynthError::cache(path, e)),
    }
}

/// Maps an example id onto a single safe file-name component.
pub fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ViewGeometry, ViewLabel};

    fn manifest(key: &str, img: &Image, spec: &ViewSpec) -> EntryManifest {
        EntryManifest {
            key: key.to_string(),
            source_id: img.source_id().to_string(),
            view: spec.to_record(),
            synthesizer: SynthesizerId::mock(),
            width: img.width(),
            height: img.height(),
        }
    }

    #[test]
    fn key_changes_with_every_input() {
        let img = Image::filled(4, 4, [1, 2, 3], "a").unwrap();
        let other = Image::filled(4, 4, [1, 2, 4], "a").unwrap();
        let left = ViewSpec::canonical(ViewLabel::Left, &ViewGeometry::default()).unwrap();
        let right = ViewSpec::canonical(ViewLabel::Right, &ViewGeometry::default()).unwrap();
        let mock = SynthesizerId::mock();
        let v2 = SynthesizerId::new("mock", "2");
        let base = cache_key(&img, &left, &mock);
        assert_eq!(base, cache_key(&img, &left, &mock));
        assert_ne!(base, cache_key(&other, &left, &mock));
        assert_ne!(base, cache_key(&img, &right, &mock));
        assert_ne!(base, cache_key(&img, &left, &v2));
        // renaming the source does not move the entry
        assert_eq!(base, cache_key(&img.clone().with_source_id("b"), &left, &mock));
    }

    #[test]
    fn put_get_and_stats() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ViewCache::open(dir.path()).unwrap();
        let img = Image::filled(6, 5, [10, 20, 30], "s").unwrap();
        let spec = ViewSpec::random(1);
        let key = cache_key(&img, &spec, &SynthesizerId::mock());
        assert!(cache.get(&key, "s").unwrap().is_none());
        cache.put(&key, &img, &manifest(&key, &img, &spec)).unwrap();
        assert!(cache.png_path(&key).starts_with(dir.path().join(&key[..2])));
        let back = cache.get(&key, "s").unwrap().unwrap();
        assert_eq!(back, img);
        assert_eq!(cache.read_manifest(&key).unwrap().view, spec.to_record());
        cache.put_stitched("vsr/1", "L_V", &img).unwrap();
        let stats = cache.stats().unwrap();
        assert_eq!(stats.entries, 1);
        assert_eq!(stats.stitched, 1);
        assert_eq!(stats.incomplete, 0);
        assert!(dir.path().join("stitched/vsr_1.L_V.png").exists());
    }

    #[test]
    fn gc_removes_leftovers() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ViewCache::open(dir.path()).unwrap();
        let img = Image::filled(2, 2, [0, 0, 0], "s").unwrap();
        let spec = ViewSpec::random(5);
        let key = cache_key(&img, &spec, &SynthesizerId::mock());
        cache.put(&key, &img, &manifest(&key, &img, &spec)).unwrap();
        let sub = dir.path().join("ab");
        fs::create_dir_all(&sub).unwrap();
        fs::write(sub.join(".tmp-xyz"), b"partial").unwrap();
        fs::write(sub.join(format!("{}.json", "ab".repeat(32))), b"{}").unwrap();
        let report = cache.gc().unwrap();
        assert_eq!(report.removed_temp, 1);
        assert_eq!(report.removed_orphans, 1);
        assert!(cache.get(&key, "s").unwrap().is_some());
        assert_eq!(cache.stats().unwrap().incomplete, 0);
    }
}
