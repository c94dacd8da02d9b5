//! Tests for the two HTTP backends against a real local socket: a minimal
//! HTTP/1.1 server on `std::net::TcpListener` serves scripted responses and
//! captures every request, so auth headers, request bodies, retry counts and
//! status handling are all observable.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use scr_triage::corpus::ScrRecord;
use scr_triage::embeddings::{EmbeddingError, EmbeddingProvider, RemoteEmbeddingProvider};
use scr_triage::prompts::{get_template, render, PromptId};
use scr_triage::retry::RetryPolicy;
use scr_triage::runner::{classify_record, format_response, ChatClient, Flag, RemoteChatClient};

/// One captured request: the raw header block (lowercased) and the body.
#[derive(Debug, Clone)]
struct CapturedRequest {
    head: String,
    body: String,
}

impl CapturedRequest {
    fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.body).expect("request body is JSON")
    }
}

struct MiniServer {
    endpoint: String,
    requests: Arc<Mutex<Vec<CapturedRequest>>>,
    handle: Option<JoinHandle<()>>,
}

impl MiniServer {
    /// Serves the scripted `(status, body)` responses in order, one request
    /// per connection, then stops listening.
    fn serve(responses: Vec<(u16, String)>) -> MiniServer {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind test listener");
        let endpoint = format!("http://{}/v1/test", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let captured = Arc::clone(&requests);
        let handle = std::thread::spawn(move || {
            for (status, body) in responses {
                let (mut stream, _) = match listener.accept() {
                    Ok(pair) => pair,
                    Err(_) => return,
                };
                let request = read_http_request(&mut stream);
                captured.lock().unwrap().push(request);
                let reason = match status {
                    200 => "OK",
                    400 => "Bad Request",
                    429 => "Too Many Requests",
                    500 => "Internal Server Error",
                    _ => "Status",
                };
                let response = format!(
                    "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\n\
                     content-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(response.as_bytes());
                let _ = stream.flush();
            }
        });
        MiniServer {
            endpoint,
            requests,
            handle: Some(handle),
        }
    }

    fn requests(&self) -> Vec<CapturedRequest> {
        self.requests.lock().unwrap().clone()
    }

    /// Waits for the server thread to finish serving its script.
    fn finish(mut self) -> Vec<CapturedRequest> {
        self.handle.take().unwrap().join().expect("server thread");
        self.requests()
    }
}

fn read_http_request(stream: &mut std::net::TcpStream) -> CapturedRequest {
    let mut buffer = Vec::new();
    let mut chunk = [0u8; 1024];
    let header_end = loop {
        if let Some(pos) = buffer.windows(4).position(|w| w == b"\r\n\r\n") {
            break pos + 4;
        }
        let n = stream.read(&mut chunk).expect("read request");
        assert!(n > 0, "client closed mid-request");
        buffer.extend_from_slice(&chunk[..n]);
    };
    let head = String::from_utf8_lossy(&buffer[..header_end]).to_lowercase();
    let content_length: usize = head
        .lines()
        .find_map(|line| line.strip_prefix("content-length:"))
        .map(|v| v.trim().parse().expect("numeric content-length"))
        .unwrap_or(0);
    while buffer.len() < header_end + content_length {
        let n = stream.read(&mut chunk).expect("read body");
        assert!(n > 0, "client closed mid-body");
        buffer.extend_from_slice(&chunk[..n]);
    }
    let body =
        String::from_utf8_lossy(&buffer[header_end..header_end + content_length]).into_owned();
    CapturedRequest { head, body }
}

fn embedding_body(vectors: &[Vec<f64>]) -> String {
    let data: Vec<serde_json::Value> = vectors
        .iter()
        .map(|v| serde_json::json!({ "embedding": v }))
        .collect();
    serde_json::json!({ "data": data }).to_string()
}

fn chat_body(content: &str) -> String {
    serde_json::json!({ "choices": [ { "message": { "content": content } } ] }).to_string()
}

// --- embedding provider ---

#[test]
fn embedding_provider_sends_bearer_auth_and_parses_vectors() {
    let server = MiniServer::serve(vec![(
        200,
        embedding_body(&[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]]),
    )]);
    let provider = RemoteEmbeddingProvider::new(&server.endpoint, "test-embedder", "secret-123", 4)
        .with_retry(RetryPolicy::immediate(1));
    let vectors = provider.embed_batch(&["alpha", "beta"]).unwrap();
    assert_eq!(vectors.len(), 2);
    assert_eq!(vectors[0].values(), &[1.0, 0.0, 0.0, 0.0]);

    let requests = server.finish();
    assert_eq!(requests.len(), 1);
    assert!(
        requests[0]
            .head
            .contains("authorization: bearer secret-123"),
        "missing bearer header in: {}",
        requests[0].head
    );
    let body = requests[0].json();
    assert_eq!(body["input"], serde_json::json!(["alpha", "beta"]));
    assert_eq!(body["model"], "test-embedder");
}

#[test]
fn embedding_provider_retries_429_then_succeeds() {
    let server = MiniServer::serve(vec![
        (429, "{}".to_string()),
        (200, embedding_body(&[vec![0.5, 0.5]])),
    ]);
    let provider = RemoteEmbeddingProvider::new(&server.endpoint, "m", "k", 2)
        .with_retry(RetryPolicy::immediate(3));
    let vectors = provider.embed_batch(&["only"]).unwrap();
    assert_eq!(vectors.len(), 1);
    assert_eq!(
        server.finish().len(),
        2,
        "one throttled attempt plus one success"
    );
}

#[test]
fn embedding_provider_does_not_retry_client_errors() {
    let server = MiniServer::serve(vec![(400, "{\"error\": \"bad request\"}".to_string())]);
    let provider = RemoteEmbeddingProvider::new(&server.endpoint, "m", "k", 2)
        .with_retry(RetryPolicy::immediate(5));
    let error = provider.embed_batch(&["only"]).unwrap_err();
    match error {
        EmbeddingError::Transport { attempts, message } => {
            assert_eq!(attempts, 1, "4xx must not be retried");
            assert!(
                message.contains("400"),
                "message should cite the status: {message}"
            );
        }
        other => panic!("expected Transport error, got {other:?}"),
    }
    assert_eq!(server.finish().len(), 1);
}

#[test]
fn embedding_provider_retries_5xx_until_attempts_run_out() {
    let server = MiniServer::serve(vec![
        (500, "{}".to_string()),
        (500, "{}".to_string()),
        (500, "{}".to_string()),
    ]);
    let provider = RemoteEmbeddingProvider::new(&server.endpoint, "m", "k", 2)
        .with_retry(RetryPolicy::immediate(3));
    let error = provider.embed_batch(&["only"]).unwrap_err();
    assert!(
        matches!(error, EmbeddingError::Transport { attempts: 3, .. }),
        "expected exhaustion after 3 attempts, got {error:?}"
    );
    assert_eq!(server.finish().len(), 3);
}

#[test]
fn embedding_provider_rejects_wrong_dimension() {
    let server = MiniServer::serve(vec![(200, embedding_body(&[vec![1.0, 2.0, 3.0]]))]);
    let provider = RemoteEmbeddingProvider::new(&server.endpoint, "m", "k", 4)
        .with_retry(RetryPolicy::immediate(1));
    let error = provider.embed_batch(&["only"]).unwrap_err();
    assert!(
        matches!(
            error,
            EmbeddingError::DimensionMismatch {
                expected: 4,
                actual: 3
            }
        ),
        "got {error:?}"
    );
    server.finish();
}

#[test]
fn embedding_provider_rejects_wrong_vector_count() {
    let server = MiniServer::serve(vec![(200, embedding_body(&[vec![1.0, 2.0]]))]);
    let provider = RemoteEmbeddingProvider::new(&server.endpoint, "m", "k", 2)
        .with_retry(RetryPolicy::immediate(1));
    let error = provider.embed_batch(&["alpha", "beta"]).unwrap_err();
    assert!(
        matches!(
            error,
            EmbeddingError::CountMismatch {
                expected: 2,
                got: 1
            }
        ),
        "got {error:?}"
    );
    server.finish();
}

// --- chat client ---

#[test]
fn chat_client_sends_zero_temperature_messages_and_returns_first_choice() {
    let server = MiniServer::serve(vec![(200, chat_body("{\"safety\": \"Y\"}"))]);
    let client = RemoteChatClient::new(&server.endpoint, "chat-model", "chat-key").unwrap();
    let template = get_template(PromptId::P1);
    let record = ScrRecord::new("SCR-1", "A worker reported an injury near the pump.", None);
    let reply = client.complete(&render(template, &record)).unwrap();
    assert_eq!(reply, "{\"safety\": \"Y\"}");

    let requests = server.finish();
    assert_eq!(requests.len(), 1);
    assert!(requests[0].head.contains("authorization: bearer chat-key"));
    let body = requests[0].json();
    assert_eq!(body["model"], "chat-model");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][1]["role"], "user");
    assert!(
        body["messages"][1]["content"]
            .as_str()
            .unwrap()
            .contains("injury near the pump"),
        "user message should carry the record text"
    );
}

#[test]
fn chat_client_classifies_statuses_by_retryability() {
    for (status, retryable) in [(429u16, true), (500, true), (400, false)] {
        let server = MiniServer::serve(vec![(status, "{}".to_string())]);
        let client = RemoteChatClient::new(&server.endpoint, "m", "k").unwrap();
        let record = ScrRecord::new("SCR-1", "text", None);
        let error = client
            .complete(&render(get_template(PromptId::P1), &record))
            .unwrap_err();
        assert_eq!(
            error.retryable, retryable,
            "status {status} retryability: {}",
            error.message
        );
        assert!(
            error.message.contains(&status.to_string()),
            "message: {}",
            error.message
        );
        server.finish();
    }
}

#[test]
fn chat_client_treats_empty_choices_as_permanent() {
    let server = MiniServer::serve(vec![(200, "{\"choices\": []}".to_string())]);
    let client = RemoteChatClient::new(&server.endpoint, "m", "k").unwrap();
    let record = ScrRecord::new("SCR-1", "text", None);
    let error = client
        .complete(&render(get_template(PromptId::P1), &record))
        .unwrap_err();
    assert!(
        !error.retryable,
        "missing choices cannot be fixed by retrying"
    );
    assert!(
        error.message.contains("no choices"),
        "message: {}",
        error.message
    );
    server.finish();
}

#[test]
fn classify_record_retries_through_a_transient_5xx() {
    let template = get_template(PromptId::P5);
    let server = MiniServer::serve(vec![
        (500, "{}".to_string()),
        (200, chat_body(&format_response(Flag::Yes, Some(70.0)))),
    ]);
    let client = RemoteChatClient::new(&server.endpoint, "m", "k").unwrap();
    let record = ScrRecord::new("SCR-9", "Hydraulic fluid seepage observed.", None);
    let verdict = classify_record(&record, template, &client, &RetryPolicy::immediate(3)).unwrap();
    assert_eq!(verdict.attempts, 2, "one failed attempt plus one success");
    assert_eq!(verdict.flag, Flag::Yes);
    assert_eq!(verdict.score, Some(70.0));
    assert_eq!(server.finish().len(), 2);
}
