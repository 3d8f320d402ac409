//! The live LLM path against a scripted local HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use synspace::llm::{DecodingParams, LlmClient};
use synspace::Error;

struct Stub {
    url: String,
    hits: Arc<AtomicUsize>,
}

/// Serves `responses` in order (the last one repeats) as `(status, extra
/// header, body)`.
fn stub(responses: Vec<(u16, &'static str, &'static str)>) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/complete", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap_or(0);
                }
            }
            let mut body = vec![0; length];
            let _ = reader.read_exact(&mut body);
            let i = counter.fetch_add(1, Ordering::SeqCst);
            let (status, header, text) = responses[i.min(responses.len() - 1)];
            let reply = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\n{header}content-length: {}\r\nconnection: close\r\n\r\n{text}",
                text.len()
            );
            let _ = stream.write_all(reply.as_bytes());
        }
    });
    Stub { url, hits }
}

#[test]
fn fresh_prompt_is_cached_and_replayed() {
    let server = stub(vec![(
        200,
        "",
        r#"{"text": "helianthus, common sunflower, sunflower plant"}"#,
    )]);
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.json");
    let params = DecodingParams::default();

    let client = LlmClient::new(Some(server.url.clone()), Some(cache.clone())).unwrap();
    let first = client.query("prompt one", &params).unwrap();
    assert_eq!(
        first,
        vec!["helianthus", "common sunflower", "sunflower plant"]
    );
    assert_eq!(client.network_calls(), 1);
    let second = client.query("prompt one", &params).unwrap();
    assert_eq!(second, first);
    assert_eq!(client.network_calls(), 1);
    assert_eq!(server.hits.load(Ordering::SeqCst), 1);

    // A new client with no endpoint replays from the persisted file.
    let offline = LlmClient::new(None, Some(cache)).unwrap();
    assert_eq!(offline.query("prompt one", &params).unwrap(), first);
    assert!(matches!(
        offline.query("prompt two", &params),
        Err(Error::CacheMiss(_))
    ));
    assert_eq!(offline.network_calls(), 0);
}

#[test]
fn unparseable_body_is_reported_with_raw_text() {
    let server = stub(vec![(200, "", r#"{"unexpected": 1}"#)]);
    let client = LlmClient::new(Some(server.url.clone()), None).unwrap();
    match client.query("p", &DecodingParams::default()) {
        Err(Error::Parse { raw_body, .. }) => assert_eq!(raw_body, r#"{"unexpected": 1}"#),
        other => panic!("{other:?}"),
    }
}

#[test]
fn rate_limit_is_retried_then_surfaced() {
    let server = stub(vec![
        (429, "retry-after: 0\r\n", "{}"),
        (
            200,
            "",
            r#"{"choices": [{"message": {"content": "- a\n- b"}}]}"#,
        ),
    ]);
    let client = LlmClient::new(Some(server.url.clone()), None).unwrap();
    assert_eq!(
        client.query("p", &DecodingParams::default()).unwrap(),
        vec!["a", "b"]
    );
    assert_eq!(client.network_calls(), 2);

    let server = stub(vec![(429, "retry-after: 0\r\n", "{}")]);
    let client = LlmClient::new(Some(server.url.clone()), None)
        .unwrap()
        .with_max_retries(1);
    assert!(matches!(
        client.query("p", &DecodingParams::default()),
        Err(Error::RateLimited {
            retry_after_secs: 0,
            ..
        })
    ));
    assert_eq!(server.hits.load(Ordering::SeqCst), 2);
}

#[test]
fn server_error_is_a_network_error() {
    let server = stub(vec![(500, "", "boom")]);
    let client = LlmClient::new(Some(server.url.clone()), None).unwrap();
    assert!(matches!(
        client.query("p", &DecodingParams::default()),
        Err(Error::Network { .. })
    ));
}
