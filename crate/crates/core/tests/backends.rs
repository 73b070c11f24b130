use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::process::Command;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use faithnli::data_io::FaithfulnessInstance;
use faithnli::nli_scoring::{
    score_dataset, BackendHandle, LocalModelBackend, MetricConfig, RemoteBackend, WireRequest,
};
use faithnli::Error;

/// What the test server answers for one request.
#[derive(Clone, Copy)]
enum Reply {
    Ok,
    Status(u16),
    Garbage,
}

struct TestServer {
    url: String,
    requests: Arc<Mutex<Vec<WireRequest>>>,
}

fn read_request(stream: &mut TcpStream) -> Option<WireRequest> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).ok()?;
    serde_json::from_slice(&body).ok()
}

fn respond(stream: &mut TcpStream, status: u16, body: &str) {
    let text = format!(
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.write_all(text.as_bytes());
}

/// Answers requests with `script` in order, then `Reply::Ok` forever. Every
/// successful answer gives each pair the distribution (0.7, 0.2, 0.1).
fn serve(script: Vec<Reply>) -> TestServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/classify", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let seen = Arc::clone(&requests);
    thread::spawn(move || {
        let mut script = script.into_iter();
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let Some(req) = read_request(&mut stream) else { continue };
            let n = req.pairs.len();
            seen.lock().unwrap().push(req);
            match script.next().unwrap_or(Reply::Ok) {
                Reply::Ok => {
                    let probs = vec![[0.7, 0.2, 0.1]; n];
                    respond(&mut stream, 200, &serde_json::json!({ "probs": probs }).to_string());
                }
                Reply::Status(code) => respond(&mut stream, code, r#"{"error":"scripted"}"#),
                Reply::Garbage => respond(&mut stream, 200, r#"{"nope":1}"#),
            }
        }
    });
    TestServer { url, requests }
}

fn remote(url: &str) -> BackendHandle {
    BackendHandle::new(RemoteBackend::new(url).with_retries(2, Duration::from_millis(1)))
}

#[test]
fn remote_sends_one_seed_per_pair() {
    let server = serve(vec![]);
    let handle = remote(&server.url);
    let probs = handle.classify(&[("p1", "h1"), ("p2", "h2")], true, 9).unwrap();
    assert_eq!(probs.len(), 2);
    assert!((probs[0].as_array()[0] - 0.7).abs() < 1e-12);
    let reqs = server.requests.lock().unwrap();
    assert_eq!(reqs.len(), 1);
    assert_eq!(
        reqs[0].pairs,
        vec![["p1".to_string(), "h1".to_string()], ["p2".into(), "h2".into()]]
    );
    assert_eq!(reqs[0].seeds, vec![9, 9]);
    assert!(reqs[0].dropout);
}

#[test]
fn remote_retries_server_errors() {
    let server = serve(vec![Reply::Status(503), Reply::Status(500)]);
    let handle = remote(&server.url);
    assert!(handle.classify(&[("p", "h")], false, 0).is_ok());
    assert_eq!(server.requests.lock().unwrap().len(), 3);
}

#[test]
fn remote_gives_up_after_retries() {
    let server = serve(vec![Reply::Status(500); 10]);
    let handle = remote(&server.url);
    let err = handle.classify(&[("p", "h")], false, 0).unwrap_err();
    assert!(matches!(err, Error::Transport { retries: 2, .. }), "{err}");
    assert_eq!(server.requests.lock().unwrap().len(), 3);
}

#[test]
fn remote_client_errors_are_not_retried() {
    let server = serve(vec![Reply::Status(400)]);
    let handle = remote(&server.url);
    let err = handle.classify(&[("p", "h")], false, 0).unwrap_err();
    assert!(matches!(err, Error::Transport { retries: 0, .. }), "{err}");
    assert_eq!(server.requests.lock().unwrap().len(), 1);
}

#[test]
fn remote_rejects_malformed_body() {
    let server = serve(vec![Reply::Garbage]);
    let err = remote(&server.url).classify(&[("p", "h")], false, 0).unwrap_err();
    assert!(matches!(err, Error::Validation(_)), "{err}");
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = remote(&format!("http://127.0.0.1:{port}/"))
        .classify(&[("p", "h")], false, 0)
        .unwrap_err();
    assert!(matches!(err, Error::Transport { .. }), "{err}");
}

#[test]
fn remote_scoring_uses_mc_seeds() {
    let server = serve(vec![]);
    let handle = remote(&server.url);
    let data = vec![FaithfulnessInstance {
        uid: "u0".into(),
        corpus_id: "c".into(),
        grounding: "g".into(),
        generation: "x".into(),
        gold_label: 1,
        generator_model: None,
    }];
    let res = score_dataset(&data, &MetricConfig::default(), &handle).unwrap();
    let rec = res.into_iter().next().unwrap().unwrap();
    assert!((rec.score - 0.6).abs() < 1e-12);
    assert_eq!(handle.call_count(), 15);
    let reqs = server.requests.lock().unwrap();
    let mut seeds: Vec<u64> = reqs.iter().flat_map(|r| r.seeds.clone()).collect();
    seeds.sort_unstable();
    seeds.dedup();
    assert_eq!(seeds.len(), 15);
}

fn worker_script() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scripts/nli_worker.py")
}

fn python_available() -> bool {
    Command::new("python3")
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success())
}

#[test]
fn local_worker_roundtrip() {
    if !python_available() {
        eprintln!("python3 not found, skipping");
        return;
    }
    let handle = BackendHandle::new(LocalModelBackend::new("fake", worker_script()));
    let pairs = [("premise one", "hypothesis one"), ("premise two", "hypothesis two")];
    let plain = handle.classify(&pairs, false, 0).unwrap();
    let reseeded = handle.classify(&pairs, false, 5).unwrap();
    assert_eq!(plain, reseeded);
    let a = handle.classify(&pairs, true, 1).unwrap();
    let b = handle.classify(&pairs, true, 2).unwrap();
    assert_ne!(a, b);
    assert_eq!(a, handle.classify(&pairs, true, 1).unwrap());
    // Batch composition does not change a pair's output.
    assert_eq!(a[1], handle.classify(&pairs[1..], true, 1).unwrap()[0]);
    for p in plain.iter().chain(&a) {
        let sum: f64 = p.as_array().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
}

#[test]
fn local_worker_missing_interpreter() {
    let handle = BackendHandle::new(LocalModelBackend::new("fake", worker_script()).with_python("no-such-python-3"));
    let err = handle.classify(&[("p", "h")], false, 0).unwrap_err();
    assert!(matches!(err, Error::Transport { .. }), "{err}");
}
