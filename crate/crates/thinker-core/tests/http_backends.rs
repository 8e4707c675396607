//! Wire-level tests for the HTTP chat backend and HTTP retriever against a
//! local single-request server: request shape, bearer auth, reply decoding,
//! and the mapping from transport or protocol failures to error variants.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Mutex;
use std::thread;
use thinker_core::llm::TOKEN_ENV;
use thinker_core::retrieval::RetrievalError;
use thinker_core::{
    ChatBackend, ChatMessage, GatewayError, GenParams, HttpBackend, HttpRetriever, RetrievalQuery,
    Retriever,
};

/// `HttpBackend::new` reads the token variable, so every test serializes
/// its environment access through this lock.
static ENV_LOCK: Mutex<()> = Mutex::new(());

fn lock_env() -> std::sync::MutexGuard<'static, ()> {
    ENV_LOCK.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

struct Captured {
    head: String,
    body: String,
}

fn http_response(status: &str, body: &str) -> String {
    format!(
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|window| window == needle)
}

fn read_request(stream: &mut TcpStream) -> Captured {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    loop {
        let n = stream.read(&mut chunk).expect("request read");
        assert!(n > 0, "connection closed before a full request arrived");
        buf.extend_from_slice(&chunk[..n]);
        if let Some(split) = find(&buf, b"\r\n\r\n") {
            let head = String::from_utf8_lossy(&buf[..split]).into_owned();
            let content_length = head
                .lines()
                .find_map(|line| {
                    let (key, value) = line.split_once(':')?;
                    key.eq_ignore_ascii_case("content-length")
                        .then(|| value.trim().parse::<usize>().ok())
                        .flatten()
                })
                .unwrap_or(0);
            let mut body = buf[split + 4..].to_vec();
            while body.len() < content_length {
                let n = stream.read(&mut chunk).expect("body read");
                assert!(n > 0, "connection closed mid-body");
                body.extend_from_slice(&chunk[..n]);
            }
            return Captured { head, body: String::from_utf8_lossy(&body).into_owned() };
        }
    }
}

/// Serves exactly one request on an ephemeral port, replying with `response`,
/// and hands the captured request back through the join handle.
fn serve_once(response: String) -> (String, thread::JoinHandle<Captured>) {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind ephemeral port");
    let addr = listener.local_addr().expect("local addr");
    let handle = thread::spawn(move || {
        let (mut stream, _) = listener.accept().expect("accept");
        let captured = read_request(&mut stream);
        stream.write_all(response.as_bytes()).expect("write response");
        captured
    });
    (format!("http://{addr}"), handle)
}

/// An address that refuses connections: bind an ephemeral port, then drop it.
fn refused_url() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind ephemeral port");
    let addr = listener.local_addr().expect("local addr");
    drop(listener);
    format!("http://{addr}")
}

#[test]
fn chat_round_trip_sends_payload_and_bearer_token() {
    let _guard = lock_env();
    std::env::set_var(TOKEN_ENV, "test-bearer-1");
    let reply = r#"{"text": "<answer>\\boxed{ok}</answer>", "tokens": [{"text": "ok", "prob": 0.9}]}"#;
    let (url, server) = serve_once(http_response("200 OK", reply));

    let backend = HttpBackend::new(&url, "engine-small").expect("client builds");
    std::env::remove_var(TOKEN_ENV);
    let messages = vec![ChatMessage::system("preamble"), ChatMessage::user("Question: probe")];
    let params = GenParams { max_tokens: 64, temperature: 0.25, stop: Vec::new(), logprobs: true };
    let completion = backend.complete(&messages, &params).expect("round trip");

    assert_eq!(completion.text, r"<answer>\boxed{ok}</answer>");
    let probs = completion.token_probs.expect("tokens decoded");
    assert_eq!(probs.len(), 1);
    assert_eq!((probs[0].text.as_str(), probs[0].prob), ("ok", 0.9));

    let captured = server.join().expect("server thread");
    let head = captured.head.to_lowercase();
    assert!(head.starts_with("post / http/1.1"), "unexpected request line: {}", captured.head);
    assert!(head.contains("authorization: bearer test-bearer-1"), "missing auth: {head}");

    let body: serde_json::Value = serde_json::from_str(&captured.body).expect("json body");
    assert_eq!(body["model"], "engine-small");
    assert_eq!(body["max_tokens"], 64);
    assert_eq!(body["temperature"], 0.25);
    assert_eq!(body["logprobs"], true);
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][1]["content"], "Question: probe");
}

#[test]
fn chat_without_token_sends_no_auth_header() {
    let _guard = lock_env();
    std::env::remove_var(TOKEN_ENV);
    let (url, server) = serve_once(http_response("200 OK", r#"{"text": "plain"}"#));

    let backend = HttpBackend::new(&url, "engine-small").expect("client builds");
    let completion = backend
        .complete(&[ChatMessage::user("hi")], &GenParams::default())
        .expect("round trip");
    assert_eq!(completion.text, "plain");
    assert!(completion.token_probs.is_none());

    let captured = server.join().expect("server thread");
    assert!(
        !captured.head.to_lowercase().contains("authorization:"),
        "unexpected auth header: {}",
        captured.head
    );
}

#[test]
fn chat_protocol_failures_are_protocol_errors() {
    let _guard = lock_env();
    std::env::remove_var(TOKEN_ENV);

    // Undecodable 200 body.
    let (url, server) = serve_once(http_response("200 OK", "not json at all"));
    let backend = HttpBackend::new(&url, "m").expect("client builds");
    let err = backend.complete(&[ChatMessage::user("q")], &GenParams::default()).unwrap_err();
    assert!(matches!(err, GatewayError::Protocol(_)), "got {err:?}");
    server.join().expect("server thread");

    // Error status.
    let (url, server) = serve_once(http_response("500 Internal Server Error", "boom"));
    let backend = HttpBackend::new(&url, "m").expect("client builds");
    let err = backend.complete(&[ChatMessage::user("q")], &GenParams::default()).unwrap_err();
    match err {
        GatewayError::Protocol(detail) => assert!(detail.contains("500"), "detail: {detail}"),
        other => panic!("expected a protocol error, got {other:?}"),
    }
    server.join().expect("server thread");

    // Probability outside [0, 1].
    let bad = r#"{"text": "x", "tokens": [{"text": "x", "prob": 1.5}]}"#;
    let (url, server) = serve_once(http_response("200 OK", bad));
    let backend = HttpBackend::new(&url, "m").expect("client builds");
    let err = backend.complete(&[ChatMessage::user("q")], &GenParams::default()).unwrap_err();
    match err {
        GatewayError::Protocol(detail) => assert!(detail.contains("1.5"), "detail: {detail}"),
        other => panic!("expected a protocol error, got {other:?}"),
    }
    server.join().expect("server thread");
}

#[test]
fn chat_refused_connection_is_unavailable() {
    let _guard = lock_env();
    std::env::remove_var(TOKEN_ENV);
    let backend = HttpBackend::new(refused_url(), "m").expect("client builds");
    let err = backend.complete(&[ChatMessage::user("q")], &GenParams::default()).unwrap_err();
    assert!(matches!(err, GatewayError::Unavailable(_)), "got {err:?}");
}

#[test]
fn retriever_round_trip_posts_query_and_truncates() {
    let _guard = lock_env();
    let reply = r#"[
        {"id": "d1", "title": "first", "text": "first body", "score": 3.5},
        {"id": "d2", "title": "second", "text": "second body"},
        {"id": "d3", "title": "third", "text": "surplus beyond top_k"}
    ]"#;
    let (url, server) = serve_once(http_response("200 OK", reply));

    let retriever = HttpRetriever::new(&url).expect("client builds");
    let docs = retriever
        .retrieve(&RetrievalQuery::text("who directed the film", 2))
        .expect("round trip");
    assert_eq!(docs.len(), 2, "client enforces top_k on over-long replies");
    assert_eq!((docs[0].id.as_str(), docs[0].score), ("d1", 3.5));
    assert_eq!((docs[1].body.as_str(), docs[1].score), ("second body", 0.0));

    let captured = server.join().expect("server thread");
    assert!(
        captured.head.to_lowercase().starts_with("post /retrieve http/1.1"),
        "unexpected request line: {}",
        captured.head
    );
    let body: serde_json::Value = serde_json::from_str(&captured.body).expect("json body");
    assert_eq!(body["query"], "who directed the film");
    assert_eq!(body["top_k"], 2);
    assert!(body.get("spo").is_none(), "empty hints must be omitted: {body}");
}

#[test]
fn retriever_failures_map_to_error_variants() {
    let _guard = lock_env();

    let retriever = HttpRetriever::new(refused_url()).expect("client builds");
    let err = retriever.retrieve(&RetrievalQuery::text("q", 1)).unwrap_err();
    assert!(matches!(err, RetrievalError::Unavailable(_)), "got {err:?}");

    let (url, server) = serve_once(http_response("200 OK", "{\"not\": \"an array\"}"));
    let retriever = HttpRetriever::new(&url).expect("client builds");
    let err = retriever.retrieve(&RetrievalQuery::text("q", 1)).unwrap_err();
    assert!(matches!(err, RetrievalError::Protocol(_)), "got {err:?}");
    server.join().expect("server thread");

    let (url, server) = serve_once(http_response("404 Not Found", "missing"));
    let retriever = HttpRetriever::new(&url).expect("client builds");
    let err = retriever.retrieve(&RetrievalQuery::text("q", 1)).unwrap_err();
    match err {
        RetrievalError::Protocol(detail) => assert!(detail.contains("404"), "detail: {detail}"),
        other => panic!("expected a protocol error, got {other:?}"),
    }
    server.join().expect("server thread");
}
