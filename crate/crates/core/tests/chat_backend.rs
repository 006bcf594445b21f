//! The chat backend against a throwaway local HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use absurd_world::harness::chat::ChatBackend;
use absurd_world::harness::{BackendConfig, BackendError, Category, ModelSpec};
use serde_json::{json, Value};

struct Captured {
    head: String,
    body: Value,
}

/// Serves one request with `status` and `body`, after `delay`.
fn serve_once(status: u16, body: String, delay: Duration) -> (String, mpsc::Receiver<Captured>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut head = String::new();
        let mut len = 0usize;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                len = v.trim().parse().unwrap();
            }
            if line == "\r\n" || line.is_empty() {
                break;
            }
            head.push_str(&line);
        }
        let mut buf = vec![0; len];
        reader.read_exact(&mut buf).unwrap();
        let _ = tx.send(Captured {
            head,
            body: serde_json::from_slice(&buf).unwrap_or(Value::Null),
        });
        thread::sleep(delay);
        let mut stream = stream;
        let _ = write!(
            stream,
            "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len()
        );
    });
    (url, rx)
}

fn model(url: &str, logprobs: bool) -> ModelSpec {
    let mut m = ModelSpec::new("vendor/model-x", Category::Cheap);
    m.endpoint_url = url.to_string();
    m.request_options.logprobs = logprobs;
    m.request_options.top_logprobs = 3;
    m
}

fn backend(timeout_ms: u64) -> ChatBackend {
    let cfg = BackendConfig {
        timeout_ms,
        ..BackendConfig::default()
    };
    ChatBackend::with_key("sk-test".into(), &cfg).unwrap()
}

#[test]
fn request_and_response_round_trip() {
    let reply = json!({
        "choices": [{
            "message": {"role": "assistant", "content": "so {Team B}"},
            "logprobs": {"content": [
                {"token": "so", "logprob": -0.5, "top_logprobs": [
                    {"token": "so", "logprob": -0.5}, {"token": "thus", "logprob": -1.2}
                ]}
            ]}
        }]
    });
    let (url, rx) = serve_once(200, reply.to_string(), Duration::ZERO);
    let c = backend(5_000)
        .complete_text(&model(&url, true), "Who wins?")
        .unwrap();
    assert_eq!(c.text, "so {Team B}");
    assert_eq!(c.token_logprobs.unwrap()[0].len(), 2);

    let req = rx.recv().unwrap();
    assert!(req.head.starts_with("POST /v1/chat/completions"));
    assert!(req
        .head
        .lines()
        .any(|l| l.eq_ignore_ascii_case("authorization: Bearer sk-test")));
    assert_eq!(req.body["model"], "vendor/model-x");
    assert_eq!(
        req.body["messages"],
        json!([{"role": "user", "content": "Who wins?"}])
    );
    assert_eq!(req.body["logprobs"], true);
    assert_eq!(req.body["top_logprobs"], 3);
    assert_eq!(req.body["temperature"], 0.0);
}

#[test]
fn status_codes_map_to_errors() {
    let cases = [
        (401, "auth"),
        (403, "auth"),
        (429, "rate"),
        (500, "http5"),
        (404, "http4"),
    ];
    for (status, kind) in cases {
        let (url, _rx) = serve_once(status, "{\"error\": \"x\"}".into(), Duration::ZERO);
        let err = backend(5_000)
            .complete_text(&model(&url, false), "q")
            .unwrap_err();
        let ok = match (kind, &err) {
            ("auth", BackendError::Auth(_)) => true,
            ("rate", BackendError::RateLimited(_)) => err.is_retryable(),
            ("http5", BackendError::Http { status: 500, .. }) => err.is_retryable(),
            ("http4", BackendError::Http { status: 404, .. }) => !err.is_retryable(),
            _ => false,
        };
        assert!(ok, "{status}: {err:?}");
    }
}

#[test]
fn garbage_body_is_malformed() {
    let (url, _rx) = serve_once(200, "not json".into(), Duration::ZERO);
    let err = backend(5_000)
        .complete_text(&model(&url, false), "q")
        .unwrap_err();
    assert!(matches!(err, BackendError::Malformed(_)));
}

#[test]
fn slow_server_times_out() {
    let (url, _rx) = serve_once(200, "{}".into(), Duration::from_millis(1_500));
    let err = backend(200)
        .complete_text(&model(&url, false), "q")
        .unwrap_err();
    assert!(matches!(err, BackendError::Timeout(_)), "{err:?}");
    assert!(err.is_retryable());
}

#[test]
fn unreachable_endpoint_is_transport() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let err = backend(2_000)
        .complete_text(&model(&format!("http://127.0.0.1:{port}/x"), false), "q")
        .unwrap_err();
    assert!(matches!(err, BackendError::Transport(_)), "{err:?}");
}
