//! Evaluation harness for visual spatial reasoning with synthesized novel views.
//!
//! The pipeline loads benchmark records, synthesizes left/right/random views
//! of each image, stitches them into composites, wraps the question in a
//! view prompt, queries a vision-language model and scores the answers into
//! an accuracy matrix keyed by dataset, view configuration and prompt flag.

pub mod geometry;
mod http;
pub mod image;
pub mod prompt;
pub mod runner;
pub mod stitch;
pub mod synth;
pub mod datasets;
pub mod evaluation;
pub mod vlm;

use sha2::{Digest, Sha256};

/// Derives a 63-bit per-item seed from a run-level seed and a key.
pub fn derive_seed(base: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(key.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes) >> 1
}
