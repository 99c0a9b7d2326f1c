#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Arc, Mutex};
use std::thread;

pub fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/demo")
}

pub fn demo(name: &str) -> PathBuf {
    demo_dir().join(name)
}

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = Command::new(env!("CARGO_BIN_EXE_groundcheck"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env_remove("GROUNDCHECK_DATASET")
        .env_remove("GROUNDCHECK_FIXTURES")
        .env_remove("GROUNDCHECK_EMBEDDINGS")
        .env_remove("GROUNDCHECK_JOBS")
        .output()
        .expect("spawn groundcheck");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

/// Arguments for a judge/sweep over the demo bundle, with the dataset,
/// fixtures and embeddings overridable.
pub fn bundle_args(dataset: &Path, fixtures: &Path, embeddings: &Path) -> Vec<String> {
    vec![
        "--dataset".into(),
        dataset.display().to_string(),
        "--fixtures".into(),
        fixtures.display().to_string(),
        "--embeddings".into(),
        embeddings.display().to_string(),
    ]
}

pub fn demo_args() -> Vec<String> {
    bundle_args(
        &demo("dataset.jsonl"),
        &demo("fixtures.jsonl"),
        &demo("embeddings.jsonl"),
    )
}

pub fn read_json_lines(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Rewrite a JSONL file line by line.
pub fn rewrite_lines(
    src: &Path,
    dst: &Path,
    mut f: impl FnMut(usize, serde_json::Value) -> Option<serde_json::Value>,
) {
    let mut out = String::new();
    for (i, v) in read_json_lines(src).into_iter().enumerate() {
        if let Some(v) = f(i, v) {
            out.push_str(&serde_json::to_string(&v).unwrap());
            out.push('\n');
        }
    }
    std::fs::write(dst, out).unwrap();
}

pub struct Request {
    pub path: String,
    pub body: serde_json::Value,
}

/// Minimal HTTP/1.1 server answering POSTs with `handler(path, body)` as
/// `(status, body)`. Requests are recorded in arrival order.
pub struct MockServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<Request>>>,
}

impl MockServer {
    pub fn start<F>(handler: F) -> Self
    where
        F: Fn(&str, &serde_json::Value) -> (u16, String) + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&requests);
        let handler = Arc::new(handler);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let log = Arc::clone(&log);
                let handler = Arc::clone(&handler);
                thread::spawn(move || serve(stream, &*handler, &log));
            }
        });
        Self { url, requests }
    }

    pub fn paths(&self) -> Vec<String> {
        self.requests
            .lock()
            .unwrap()
            .iter()
            .map(|r| r.path.clone())
            .collect()
    }
}

fn serve(
    stream: std::net::TcpStream,
    handler: &(dyn Fn(&str, &serde_json::Value) -> (u16, String) + Send + Sync),
    log: &Mutex<Vec<Request>>,
) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut writer = stream;
    let mut line = String::new();
    if reader.read_line(&mut line).unwrap_or(0) == 0 {
        return;
    }
    let path = line.split_whitespace().nth(1).unwrap_or("").to_string();
    let mut len = 0usize;
    loop {
        let mut h = String::new();
        if reader.read_line(&mut h).unwrap_or(0) == 0 {
            return;
        }
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; len];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    let body: serde_json::Value = serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
    let (status, reply) = handler(&path, &body);
    log.lock().unwrap().push(Request { path, body });
    let resp = format!(
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
        reply.len()
    );
    let _ = writer.write_all(resp.as_bytes());
    let _ = writer.flush();
}
