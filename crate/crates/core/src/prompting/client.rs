use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use chrono::Utc;

use super::{parse_answer, PromptingError, RetryPolicy, RunRecord, RunRequest, RunStore, Temperature};

#[derive(Debug, Clone, PartialEq)]
pub enum TransportFailure {
    /// Worth retrying: connection errors, 429, 5xx.
    Transient(String),
    Fatal(String),
}

/// One chat-completion round trip.
pub trait ChatTransport: Send + Sync {
    fn chat(&self, model: &str, temperature: Temperature, prompt: &str) -> Result<String, TransportFailure>;
}

#[cfg(feature = "http")]
pub use http::HttpTransport;

#[cfg(feature = "http")]
mod http {
    use std::time::Duration;

    use serde::{Deserialize, Serialize};

    use super::{ChatTransport, Temperature, TransportFailure};

    #[derive(Serialize)]
    struct Message<'a> {
        role: &'a str,
        content: &'a str,
    }

    #[derive(Serialize)]
    struct ChatBody<'a> {
        model: &'a str,
        temperature: f64,
        messages: [Message<'a>; 1],
    }

    #[derive(Deserialize)]
    struct ChatResponse {
        choices: Vec<Choice>,
    }

    #[derive(Deserialize)]
    struct Choice {
        message: ResponseMessage,
    }

    #[derive(Deserialize)]
    struct ResponseMessage {
        #[serde(default)]
        content: Option<String>,
    }

    /// `POST {base_url}/v1/chat/completions` over blocking HTTP.
    pub struct HttpTransport {
        endpoint: String,
        api_key: Option<String>,
        client: reqwest::blocking::Client,
    }

    impl HttpTransport {
        pub fn new(base_url: &str, api_key: Option<String>) -> Result<Self, TransportFailure> {
            let client = reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(300))
                .build()
                .map_err(|e| TransportFailure::Fatal(e.to_string()))?;
            Ok(Self {
                endpoint: format!("{}/v1/chat/completions", base_url.trim_end_matches('/')),
                api_key,
                client,
            })
        }
    }

    impl ChatTransport for HttpTransport {
        fn chat(&self, model: &str, temperature: Temperature, prompt: &str) -> Result<String, TransportFailure> {
            let body = ChatBody {
                model,
                temperature: temperature.value(),
                messages: [Message { role: "user", content: prompt }],
            };
            let mut req = self.client.post(&self.endpoint).json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let resp = req.send().map_err(|e| TransportFailure::Transient(e.to_string()))?;
            let status = resp.status();
            if status.as_u16() == 429 || status.is_server_error() {
                return Err(TransportFailure::Transient(format!("HTTP {status}")));
            }
            if !status.is_success() {
                let text = resp.text().unwrap_or_default();
                return Err(TransportFailure::Fatal(format!("HTTP {status}: {text}")));
            }
            let parsed: ChatResponse = resp.json().map_err(|e| TransportFailure::Fatal(e.to_string()))?;
            parsed
                .choices
                .into_iter()
                .next()
                .and_then(|c| c.message.content)
                .ok_or_else(|| TransportFailure::Fatal("response has no message content".into()))
        }
    }
}

enum Mode {
    Live(Box<dyn ChatTransport>),
    ReplayOnly,
}

/// Cache-first completion: stored responses are returned without touching
/// the transport; new responses are persisted before being returned.
pub struct Completer {
    store: Arc<RunStore>,
    mode: Mode,
    retry: RetryPolicy,
    attempts: AtomicUsize,
}

impl Completer {
    pub fn live(store: Arc<RunStore>, transport: Box<dyn ChatTransport>, retry: RetryPolicy) -> Self {
        Self { store, mode: Mode::Live(transport), retry, attempts: AtomicUsize::new(0) }
    }

    /// Serves only stored responses; anything else is a [`PromptingError::CacheMiss`].
    pub fn replay(store: Arc<RunStore>) -> Self {
        Self { store, mode: Mode::ReplayOnly, retry: RetryPolicy::default(), attempts: AtomicUsize::new(0) }
    }

    pub fn store(&self) -> &Arc<RunStore> {
        &self.store
    }

    pub fn is_replay(&self) -> bool {
        matches!(self.mode, Mode::ReplayOnly)
    }

    /// Transport attempts made so far, retries included.
    pub fn transport_attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }

    pub fn complete(&self, request: &RunRequest) -> Result<RunRecord, PromptingError> {
        let key = request.run_key();
        if let Some(hit) = self.store.get(&key) {
            return Ok(hit);
        }
        let transport = match &self.mode {
            Mode::ReplayOnly => return Err(PromptingError::CacheMiss(key)),
            Mode::Live(t) => t,
        };
        let mut attempt = 0;
        let raw = loop {
            attempt += 1;
            self.attempts.fetch_add(1, Ordering::SeqCst);
            match transport.chat(&request.model_name, request.temperature, &request.prompt) {
                Ok(text) => break text,
                Err(TransportFailure::Transient(msg)) if attempt < self.retry.max_attempts => {
                    let _ = msg;
                    std::thread::sleep(self.retry.backoff(attempt));
                }
                Err(TransportFailure::Transient(message)) | Err(TransportFailure::Fatal(message)) => {
                    return Err(PromptingError::Transport { key, attempts: attempt, message });
                }
            }
        };
        let record = RunRecord {
            run_key: key,
            example_id: request.example_id.clone(),
            prompt_type: request.prompt_type,
            temperature: request.temperature,
            run_index: request.run_index,
            model_name: request.model_name.clone(),
            parsed_vote: parse_answer(&raw, request.prompt_type),
            raw_response: raw,
            created_at: Utc::now(),
        };
        self.store.put(record.clone())?;
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Mutex;

    use super::*;
    use crate::prompting::PromptType;
    use crate::votes::Vote;

    struct Scripted {
        replies: Mutex<Vec<Result<String, TransportFailure>>>,
        calls: AtomicUsize,
    }

    impl Scripted {
        fn new(mut replies: Vec<Result<String, TransportFailure>>) -> Self {
            replies.reverse();
            Self { replies: Mutex::new(replies), calls: AtomicUsize::new(0) }
        }
    }

    impl ChatTransport for Arc<Scripted> {
        fn chat(&self, _: &str, _: Temperature, _: &str) -> Result<String, TransportFailure> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.replies.lock().unwrap().pop().expect("scripted reply")
        }
    }

    fn request() -> RunRequest {
        RunRequest {
            example_id: "q1".into(),
            prompt_type: PromptType::ReasonThenAnswer,
            temperature: Temperature::new(0.5).unwrap(),
            run_index: 0,
            model_name: "m".into(),
            prompt: "prompt".into(),
        }
    }

    #[test]
    fn stored_key_makes_no_call() {
        let store = Arc::new(RunStore::in_memory());
        let t = Arc::new(Scripted::new(vec![Ok("Answer: Yes".into())]));
        let c = Completer::live(store, Box::new(t.clone()), RetryPolicy::immediate(3));
        let first = c.complete(&request()).unwrap();
        assert_eq!(first.parsed_vote, Vote::Positive);
        let second = c.complete(&request()).unwrap();
        assert_eq!(first, second);
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn replay_miss_names_key() {
        let c = Completer::replay(Arc::new(RunStore::in_memory()));
        match c.complete(&request()) {
            Err(PromptingError::CacheMiss(k)) => assert_eq!(k, request().run_key()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn retries_transient_then_succeeds() {
        let t = Arc::new(Scripted::new(vec![
            Err(TransportFailure::Transient("503".into())),
            Err(TransportFailure::Transient("503".into())),
            Ok("Answer: No".into()),
        ]));
        let c = Completer::live(Arc::new(RunStore::in_memory()), Box::new(t.clone()), RetryPolicy::immediate(5));
        assert_eq!(c.complete(&request()).unwrap().parsed_vote, Vote::Negative);
        assert_eq!(c.transport_attempts(), 3);
    }

    #[test]
    fn exhausted_retries_and_fatal_errors() {
        let t = Arc::new(Scripted::new(vec![Err(TransportFailure::Transient("503".into())); 2]));
        let c = Completer::live(Arc::new(RunStore::in_memory()), Box::new(t), RetryPolicy::immediate(2));
        assert!(matches!(c.complete(&request()), Err(PromptingError::Transport { attempts: 2, .. })));

        let t = Arc::new(Scripted::new(vec![Err(TransportFailure::Fatal("401".into()))]));
        let store = Arc::new(RunStore::in_memory());
        let c = Completer::live(store.clone(), Box::new(t), RetryPolicy::immediate(5));
        assert!(matches!(c.complete(&request()), Err(PromptingError::Transport { attempts: 1, .. })));
        assert!(store.is_empty());
    }
}
