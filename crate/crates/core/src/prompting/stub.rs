//! Loopback chat-completions server for tests and fixture generation.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde_json::{json, Value};

use crate::votes::Vote;

#[derive(Debug, Clone, PartialEq)]
pub struct StubRequest {
    pub model: String,
    pub temperature: f64,
    pub prompt: String,
    /// Zero-based count of requests seen before this one.
    pub call_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StubReply {
    Ok(String),
    Status(u16),
}

type Responder = dyn Fn(&StubRequest) -> StubReply + Send + Sync;

/// Serves `POST /v1/chat/completions` on 127.0.0.1 until dropped.
pub struct StubServer {
    addr: SocketAddr,
    calls: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start(responder: impl Fn(&StubRequest) -> StubReply + Send + Sync + 'static) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let calls = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let responder: Arc<Responder> = Arc::new(responder);
        let (c, s) = (calls.clone(), stop.clone());
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if s.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let (responder, c) = (responder.clone(), c.clone());
                std::thread::spawn(move || {
                    let _ = serve(stream, &*responder, &c);
                });
            }
        });
        Ok(Self { addr, calls, stop, handle: Some(handle) })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Requests received so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the accept loop
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, responder: &Responder, calls: &AtomicUsize) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    if request_line.is_empty() {
        return Ok(());
    }
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line.trim().is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.trim().eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; content_length];
    reader.read_exact(&mut body)?;

    let call_index = calls.fetch_add(1, Ordering::SeqCst);
    let reply = match serde_json::from_slice::<Value>(&body) {
        Ok(v) if request_line.contains("/v1/chat/completions") => {
            let req = StubRequest {
                model: v["model"].as_str().unwrap_or_default().to_string(),
                temperature: v["temperature"].as_f64().unwrap_or(f64::NAN),
                prompt: v["messages"][0]["content"].as_str().unwrap_or_default().to_string(),
                call_index,
            };
            responder(&req)
        }
        Ok(_) => StubReply::Status(404),
        Err(_) => StubReply::Status(400),
    };
    let (status, payload) = match reply {
        StubReply::Ok(content) => (
            200,
            json!({
                "id": format!("stub-{call_index}"),
                "object": "chat.completion",
                "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
            })
            .to_string(),
        ),
        StubReply::Status(code) => (code, json!({"error": {"message": "stub error"}}).to_string()),
    };
    let mut out = stream;
    write!(
        out,
        "HTTP/1.1 {status} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    )?;
    out.flush()
}

/// A reason-then-answer transcript ending in the given verdict.
pub fn reasoning_transcript(vote: Vote, detail: &str) -> String {
    let answer = match vote {
        Vote::Positive => "Yes",
        Vote::Negative => "No",
        Vote::Abstain => return format!("Step-by-step reasoning:\n1. {detail}\n2. The articles do not settle the question."),
    };
    format!(
        "Step-by-step reasoning:\n1. {detail}\n2. Comparing the query with the related articles.\n\nAnswer: {answer}"
    )
}

#[cfg(all(test, feature = "http"))]
mod tests {
    use super::*;
    use crate::prompting::{ChatTransport, HttpTransport, Temperature, TransportFailure};

    #[test]
    fn round_trip_and_status_codes() {
        let server = StubServer::start(|r| match r.prompt.as_str() {
            "busy" => StubReply::Status(429),
            "bad" => StubReply::Status(401),
            _ => StubReply::Ok(format!("{} at {}", r.model, r.temperature)),
        })
        .unwrap();
        let t = HttpTransport::new(&server.base_url(), Some("k".into())).unwrap();
        let temp = Temperature::new(0.3).unwrap();
        assert_eq!(t.chat("m", temp, "hello").unwrap(), "m at 0.3");
        assert!(matches!(t.chat("m", temp, "busy"), Err(TransportFailure::Transient(_))));
        assert!(matches!(t.chat("m", temp, "bad"), Err(TransportFailure::Fatal(_))));
        assert_eq!(server.calls(), 3);
    }

    #[test]
    fn transcript_parses_back() {
        use crate::prompting::{parse_answer, PromptType};
        for v in [Vote::Positive, Vote::Negative, Vote::Abstain] {
            assert_eq!(parse_answer(&reasoning_transcript(v, "Article 1 applies."), PromptType::ReasonThenAnswer), v);
        }
    }
}
