#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use image::{Rgb, RgbImage};
use vsr_harness::datasets::{DatasetKind, ANNOTATIONS_FILE, IMAGES_DIR};
use vsr_harness::runner::{DatasetEntry, RunConfig, Seeds};

pub fn fixture_root(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/datasets").join(name)
}

/// A deterministic patterned image that differs per `seed`.
pub fn pattern(w: u32, h: u32, seed: u32) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| {
        let v = x.wrapping_mul(31).wrapping_add(y.wrapping_mul(17)).wrapping_add(seed.wrapping_mul(101));
        Rgb([(v % 251) as u8, ((v / 3 + seed * 7) % 253) as u8, ((x ^ y ^ seed) % 255) as u8])
    })
}

const CAPTIONS: [(&str, &str, &str, &str); 6] = [
    ("The cat is on the left of the dog.", "on the left of", "cat", "dog"),
    ("The cup is on top of the table.", "on top of", "cup", "table"),
    ("The bicycle is in front of the bench.", "in front of", "bicycle", "bench"),
    ("The umbrella is above the person.", "above", "umbrella", "person"),
    ("The laptop is beside the keyboard.", "beside", "laptop", "keyboard"),
    ("The bird is below the clock.", "below", "bird", "clock"),
];

/// Writes an `n`-record test-split dataset with one image per record.
pub fn write_dataset(root: &Path, n: usize, size: (u32, u32)) -> PathBuf {
    let images = root.join(IMAGES_DIR);
    std::fs::create_dir_all(&images).unwrap();
    let mut lines = String::new();
    for i in 0..n {
        let name = format!("img_{i:03}.png");
        pattern(size.0, size.1, i as u32).save(images.join(&name)).unwrap();
        let (q, rel, s, o) = CAPTIONS[i % CAPTIONS.len()];
        let record = serde_json::json!({
            "id": format!("ex-{i:03}"),
            "image": name,
            "caption": q,
            "relation": rel,
            "subject": s,
            "object": o,
            "label": i % 3 != 2,
            "split": "test",
        });
        lines.push_str(&record.to_string());
        lines.push('\n');
    }
    std::fs::write(root.join(ANNOTATIONS_FILE), lines).unwrap();
    root.to_path_buf()
}

/// Mock-backed config over one dataset, with caches and results under `work`.
pub fn mock_config(kind: DatasetKind, dataset_root: &Path, work: &Path) -> RunConfig {
    RunConfig {
        datasets: vec![DatasetEntry { kind, root: dataset_root.to_path_buf(), split: None, fields: None }],
        seeds: Seeds { random_view: Some(7), perturbation: Some(11) },
        cache_root: work.join("cache"),
        results_root: work.join("results"),
        parallelism: 3,
        synthesis_parallelism: 2,
        ..RunConfig::default()
    }
}

pub struct StubReply {
    pub status: u16,
    pub body: Vec<u8>,
}

impl StubReply {
    pub fn json(status: u16, body: impl Into<Vec<u8>>) -> Self {
        StubReply { status, body: body.into() }
    }
}

#[derive(Debug, Clone)]
pub struct StubRequest {
    pub authorization: Option<String>,
    pub body: Vec<u8>,
}

type Handler = dyn Fn(usize, &StubRequest) -> StubReply + Send + Sync;

/// Minimal HTTP/1.1 server on a loopback port; one request per connection.
pub struct StubServer {
    pub url: String,
    requests: Arc<Mutex<Vec<StubRequest>>>,
    hits: Arc<AtomicUsize>,
}

impl StubServer {
    pub fn start(handler: impl Fn(usize, &StubRequest) -> StubReply + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let hits = Arc::new(AtomicUsize::new(0));
        let handler: Arc<Handler> = Arc::new(handler);
        let (reqs, count) = (requests.clone(), hits.clone());
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let (handler, reqs, count) = (handler.clone(), reqs.clone(), count.clone());
                std::thread::spawn(move || serve(stream, handler.as_ref(), &reqs, &count));
            }
        });
        StubServer { url, requests, hits }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<StubRequest> {
        self.requests.lock().unwrap().clone()
    }
}

fn serve(stream: TcpStream, handler: &Handler, reqs: &Mutex<Vec<StubRequest>>, hits: &AtomicUsize) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut length = 0usize;
    let mut authorization = None;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            break;
        }
        if let Some((name, value)) = trimmed.split_once(':') {
            match name.to_ascii_lowercase().as_str() {
                "content-length" => length = value.trim().parse().unwrap_or(0),
                "authorization" => authorization = Some(value.trim().to_string()),
                _ => {}
            }
        }
    }
    let mut body = vec![0u8; length];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    let request = StubRequest { authorization, body };
    let n = hits.fetch_add(1, Ordering::SeqCst);
    reqs.lock().unwrap().push(request.clone());
    let reply = handler(n, &request);
    let mut stream = stream;
    let head = format!(
        "HTTP/1.1 {} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        reply.status,
        reply.body.len()
    );
    let _ = stream.write_all(head.as_bytes());
    let _ = stream.write_all(&reply.body);
    let _ = stream.flush();
}
