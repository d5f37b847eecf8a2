use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{SynthError, SynthesisBackend, SynthesizerId};
use crate::geometry::ViewSpec;
use crate::http::{self, HttpFailure};
use crate::image::Image;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceEndpoint {
    pub url: String,
    pub token: Option<String>,
    pub timeout: Duration,
}

impl ServiceEndpoint {
    pub fn new(url: impl Into<String>) -> Self {
        ServiceEndpoint { url: url.into(), token: None, timeout: DEFAULT_TIMEOUT }
    }

    /// Reads `SYNTH_ENDPOINT` and `SYNTH_TOKEN`.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var("SYNTH_ENDPOINT").ok().filter(|s| !s.is_empty())?;
        let mut ep = ServiceEndpoint::new(url);
        ep.token = std::env::var("SYNTH_TOKEN").ok().filter(|s| !s.is_empty());
        Some(ep)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SynthRequest {
    pub image: String,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub translation: [f64; 3],
}

impl SynthRequest {
    pub fn new(image: &Image, spec: &ViewSpec) -> Result<Self, SynthError> {
        let png = image.to_png().map_err(|e| SynthError::Protocol {
            source_id: image.source_id().to_string(),
            message: e.to_string(),
        })?;
        Ok(SynthRequest {
            image: STANDARD.encode(png),
            azimuth_deg: spec.azimuth_deg(),
            elevation_deg: spec.elevation_deg(),
            translation: *spec.translation(),
        })
    }
}

#[derive(Debug, Deserialize)]
struct SynthResponse {
    image: String,
}

/// Decodes a success body `{"image": base64}` into an image.
pub fn decode_response(body: &[u8], source_id: &str) -> Result<Image, SynthError> {
    let protocol = |message: String| SynthError::Protocol { source_id: source_id.to_string(), message };
    let resp: SynthResponse =
        serde_json::from_slice(body).map_err(|e| protocol(format!("response JSON: {e}")))?;
    let bytes = STANDARD
        .decode(resp.image.trim())
        .map_err(|e| protocol(format!("response base64: {e}")))?;
    Image::decode(&bytes, source_id).map_err(|e| protocol(e.to_string()))
}

/// Client for a hosted novel-view model.
pub struct RemoteSynthesizer {
    id: SynthesizerId,
    endpoint: ServiceEndpoint,
    agent: ureq::Agent,
    calls: AtomicU64,
}

impl RemoteSynthesizer {
    pub fn new(id: SynthesizerId, endpoint: ServiceEndpoint) -> Self {
        let agent = http::agent(endpoint.timeout);
        RemoteSynthesizer { id, endpoint, agent, calls: AtomicU64::new(0) }
    }

    pub fn endpoint(&self) -> &ServiceEndpoint {
        &self.endpoint
    }
}

impl SynthesisBackend for RemoteSynthesizer {
    fn id(&self) -> &SynthesizerId {
        &self.id
    }

    fn synthesize(&self, image: &Image, spec: &ViewSpec) -> Result<Image, SynthError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let request = SynthRequest::new(image, spec)?;
        let source_id = image.source_id();
        let body = http::post_json(&self.agent, &self.endpoint.url, self.endpoint.token.as_deref(), &request)
            .map_err(|failure| match failure {
                HttpFailure::Body(message) => SynthError::Protocol { source_id: source_id.to_string(), message },
                other => SynthError::Backend { source_id: source_id.to_string(), message: other.to_string() },
            })?;
        let out = decode_response(&body, source_id)?;
        Ok(out.with_source_id(format!("{source_id}#{}", spec.label())))
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}
