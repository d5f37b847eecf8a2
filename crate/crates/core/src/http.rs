//! Minimal blocking JSON-over-HTTP transport shared by the remote adapters.

use std::time::Duration;

use serde::Serialize;

/// Upper bound on a response body; base64 images can be large.
const MAX_BODY_BYTES: u64 = 256 * 1024 * 1024;

#[derive(Debug)]
pub(crate) enum HttpFailure {
    /// The request never produced a response (connect, timeout, reset).
    Transport(String),
    /// The server answered with a non-success status.
    Status(u16, String),
    /// A success status whose body could not be read in full.
    Body(String),
}

impl std::fmt::Display for HttpFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HttpFailure::Transport(m) => write!(f, "transport failure: {m}"),
            HttpFailure::Body(m) => write!(f, "incomplete response body: {m}"),
            HttpFailure::Status(code, body) => {
                let snippet: String = body.chars().take(200).collect();
                write!(f, "HTTP status {code}: {snippet}")
            }
        }
    }
}

pub(crate) fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

/// POSTs `body` as JSON and returns the raw success body.
pub(crate) fn post_json<T: Serialize>(
    agent: &ureq::Agent,
    url: &str,
    token: Option<&str>,
    body: &T,
) -> Result<Vec<u8>, HttpFailure> {
    let mut req = agent.post(url);
    if let Some(token) = token {
        req = req.header("Authorization", &format!("Bearer {token}"));
    }
    let mut resp = req
        .send_json(body)
        .map_err(|e| HttpFailure::Transport(e.to_string()))?;
    let status = resp.status().as_u16();
    let bytes = resp.body_mut().with_config().limit(MAX_BODY_BYTES).read_to_vec();
    if !(200..300).contains(&status) {
        let text = bytes.map(|b| String::from_utf8_lossy(&b).into_owned()).unwrap_or_default();
        return Err(HttpFailure::Status(status, text));
    }
    bytes.map_err(|e| HttpFailure::Body(e.to_string()))
}
