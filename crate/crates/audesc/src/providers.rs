//! Provider implementations: a deterministic mock, an HTTP chat endpoint, and
//! a concurrency cap that wraps either.

use std::collections::{BTreeMap, VecDeque};
use std::io::Cursor;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use audesc_core::gateway::{fingerprint, ChatRequest, Provider, ProviderError, ProviderReply};
use audesc_core::media::GrayFrame;
use audesc_core::prompt::PromptKind;
use base64::Engine;

use crate::config::{ProviderConfig, ProviderKind};
use serde::{Deserialize, Serialize};

/// One canned reply: raw text, or a simulated failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CannedReply {
    Text(String),
    Failure {
        error: FailureKind,
        #[serde(default)]
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Transport,
    Auth,
    Timeout,
}

/// Mock manifest.
///
/// Lookup order for a call: `responses[fingerprint]` (consumed in order, the
/// last entry repeats), then for answers `answers[fingerprint(question)]`,
/// then the `generation` or `vqa` queue (consumed in order), then the echo
/// behaviour when `echo` is on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockManifest {
    pub responses: BTreeMap<String, Vec<CannedReply>>,
    pub answers: BTreeMap<String, CannedReply>,
    pub generation: Vec<CannedReply>,
    pub vqa: Vec<CannedReply>,
    #[serde(default = "default_echo")]
    pub echo: bool,
}

fn default_echo() -> bool {
    true
}

impl MockManifest {
    pub fn echo_only() -> Self {
        Self { echo: true, ..Self::default() }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Default)]
struct MockState {
    served: BTreeMap<String, usize>,
    generation: VecDeque<CannedReply>,
    vqa: VecDeque<CannedReply>,
    log: Vec<(PromptKind, String)>,
}

/// Deterministic provider driven by a [`MockManifest`].
#[derive(Debug)]
pub struct MockProvider {
    manifest: MockManifest,
    state: Mutex<MockState>,
}

const LOREM: [&str; 16] = [
    "figure", "crosses", "the", "bright", "room", "while", "light", "falls", "across", "a", "wooden", "table", "near",
    "an", "open", "window",
];

/// `n` deterministic words seeded by the planned time.
pub fn lorem_words(t_s: f64, n: usize) -> String {
    let ms = (t_s * 1000.0).round() as u64;
    let offset = (ms.wrapping_mul(2_654_435_761) >> 7) as usize;
    (0..n).map(|i| LOREM[(offset + i) % LOREM.len()]).collect::<Vec<_>>().join(" ")
}

/// Planned times from the rendered timestamp line.
pub fn prompt_timestamps(prompt: &str) -> Vec<f64> {
    let mut lines = prompt.lines().skip_while(|l| l.trim() != "TIMESTAMPS:");
    lines.next();
    lines
        .find(|l| !l.trim().is_empty())
        .map(|l| l.split(',').filter_map(|x| x.trim().parse().ok()).collect())
        .unwrap_or_default()
}

/// Target word count from the rendered custom guidelines.
pub fn prompt_target_length(prompt: &str) -> Option<usize> {
    let rest = prompt.split("Target approximately ").nth(1)?;
    rest.split_whitespace().next()?.parse().ok()
}

fn mean_level(frame: &GrayFrame) -> f64 {
    if frame.data.is_empty() {
        return 0.0;
    }
    frame.data.iter().map(|&v| v as f64).sum::<f64>() / frame.data.len() as f64
}

impl MockProvider {
    pub fn new(manifest: MockManifest) -> Self {
        let state = MockState {
            generation: manifest.generation.iter().cloned().collect(),
            vqa: manifest.vqa.iter().cloned().collect(),
            ..MockState::default()
        };
        Self { manifest, state: Mutex::new(state) }
    }

    pub fn echo() -> Self {
        Self::new(MockManifest::echo_only())
    }

    /// Prompt fingerprints seen so far, in call order.
    pub fn seen(&self) -> Vec<(PromptKind, String)> {
        self.state.lock().expect("mock state").log.clone()
    }

    fn echo_reply(&self, req: &ChatRequest<'_>) -> Option<String> {
        if !self.manifest.echo {
            return None;
        }
        match req.kind {
            PromptKind::AdGeneration => {
                let n = prompt_target_length(&req.text).unwrap_or(50);
                let descriptions: Vec<serde_json::Value> = prompt_timestamps(&req.text)
                    .into_iter()
                    .map(|t| serde_json::json!({ "start_s": t, "text": lorem_words(t, n) }))
                    .collect();
                Some(serde_json::json!({ "descriptions": descriptions }).to_string())
            }
            PromptKind::Vqa => {
                let main = req.media.first().and_then(|m| req.frame_for(m).map(|f| (m, f)));
                Some(match main {
                    Some((m, f)) => format!(
                        "At {:.1} seconds the frame has mean brightness {:.0} of 255.",
                        m.t_s,
                        mean_level(&f.pixels)
                    ),
                    None => "The current frame is not available.".to_string(),
                })
            }
        }
    }
}

fn deliver(reply: CannedReply, id: &str, timeout_ms: u64) -> Result<ProviderReply, ProviderError> {
    match reply {
        CannedReply::Text(raw_text) => Ok(ProviderReply { raw_text, latency_ms: 0, provider_id: id.to_string() }),
        CannedReply::Failure { error, message } => Err(match error {
            FailureKind::Transport => ProviderError::Transport(message),
            FailureKind::Auth => ProviderError::Auth(message),
            FailureKind::Timeout => ProviderError::Timeout(timeout_ms),
        }),
    }
}

impl Provider for MockProvider {
    fn id(&self) -> &str {
        "mock"
    }

    fn chat(&self, req: &ChatRequest<'_>) -> Result<ProviderReply, ProviderError> {
        let fp = req.fingerprint();
        let mut st = self.state.lock().expect("mock state");
        st.log.push((req.kind, fp.clone()));
        if let Some(seq) = self.manifest.responses.get(&fp).filter(|s| !s.is_empty()) {
            let i = st.served.entry(fp.clone()).or_insert(0);
            let reply = seq[(*i).min(seq.len() - 1)].clone();
            *i += 1;
            return deliver(reply, self.id(), req.timeout_ms);
        }
        if req.kind == PromptKind::Vqa {
            if let Some(a) = req.question.and_then(|q| self.manifest.answers.get(&fingerprint(q.trim()))) {
                return deliver(a.clone(), self.id(), req.timeout_ms);
            }
        }
        let queue = match req.kind {
            PromptKind::AdGeneration => &mut st.generation,
            PromptKind::Vqa => &mut st.vqa,
        };
        if let Some(reply) = queue.pop_front() {
            return deliver(reply, self.id(), req.timeout_ms);
        }
        drop(st);
        match self.echo_reply(req) {
            Some(text) => deliver(CannedReply::Text(text), self.id(), req.timeout_ms),
            None => Err(ProviderError::NoResponse(fp)),
        }
    }
}

/// An OpenAI-style chat-completions endpoint. Frames go inline as base64 PNG.
pub struct HttpProvider {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(endpoint: String, model: String, api_key: Option<String>) -> Result<Self, String> {
        let client = reqwest::blocking::Client::builder().build().map_err(|e| e.to_string())?;
        Ok(Self { endpoint, model, api_key, client })
    }

    pub fn request_body(&self, req: &ChatRequest<'_>) -> Result<serde_json::Value, ProviderError> {
        let mut content = vec![serde_json::json!({ "type": "text", "text": req.text })];
        for m in req.media {
            let Some(frame) = req.frame_for(m) else { continue };
            let url = format!("data:image/png;base64,{}", png_base64(&frame.pixels)?);
            content.push(serde_json::json!({ "type": "text", "text": m.reference }));
            content.push(serde_json::json!({ "type": "image_url", "image_url": { "url": url } }));
        }
        Ok(serde_json::json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": content }],
        }))
    }
}

fn png_base64(frame: &GrayFrame) -> Result<String, ProviderError> {
    let img = image::GrayImage::from_raw(frame.width, frame.height, frame.data.clone())
        .ok_or_else(|| ProviderError::Transport("frame buffer size mismatch".into()))?;
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png).map_err(|e| ProviderError::Transport(e.to_string()))?;
    Ok(base64::engine::general_purpose::STANDARD.encode(buf.into_inner()))
}

impl Provider for HttpProvider {
    fn id(&self) -> &str {
        &self.model
    }

    fn chat(&self, req: &ChatRequest<'_>) -> Result<ProviderReply, ProviderError> {
        let body = self.request_body(req)?;
        let mut call = self.client.post(&self.endpoint).timeout(Duration::from_millis(req.timeout_ms)).json(&body);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let started = Instant::now();
        let resp = call.send().map_err(|e| {
            if e.is_timeout() {
                ProviderError::Timeout(req.timeout_ms)
            } else {
                ProviderError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(ProviderError::Auth(status.to_string()));
        }
        if !status.is_success() {
            return Err(ProviderError::Transport(format!("HTTP {status}")));
        }
        let value: serde_json::Value = resp.json().map_err(|e| {
            if e.is_timeout() {
                ProviderError::Timeout(req.timeout_ms)
            } else {
                ProviderError::Transport(e.to_string())
            }
        })?;
        let raw_text = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| ProviderError::Transport("response has no choices[0].message.content".into()))?
            .to_string();
        Ok(ProviderReply {
            raw_text,
            latency_ms: started.elapsed().as_millis() as u64,
            provider_id: self.model.clone(),
        })
    }
}

/// Caps in-flight calls and counts them.
pub struct Limited<P> {
    inner: P,
    cap: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
    calls: AtomicU64,
    peak: AtomicU64,
}

impl<P: Provider> Limited<P> {
    pub fn new(inner: P, cap: usize) -> Self {
        Self {
            inner,
            cap: cap.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
            calls: AtomicU64::new(0),
            peak: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    /// Highest number of simultaneous calls observed.
    pub fn peak(&self) -> u64 {
        self.peak.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: Provider> Provider for Limited<P> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn chat(&self, req: &ChatRequest<'_>) -> Result<ProviderReply, ProviderError> {
        {
            let mut n = self.in_flight.lock().expect("limiter");
            while *n >= self.cap {
                n = self.freed.wait(n).expect("limiter");
            }
            *n += 1;
            self.peak.fetch_max(*n as u64, Ordering::SeqCst);
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        let out = self.inner.chat(req);
        *self.in_flight.lock().expect("limiter") -= 1;
        self.freed.notify_one();
        out
    }
}

/// The configured provider behind the concurrency cap.
pub fn from_config(cfg: &ProviderConfig) -> Result<std::sync::Arc<Limited<Box<dyn Provider>>>, String> {
    let inner: Box<dyn Provider> = match cfg.kind {
        ProviderKind::Mock => {
            let manifest = match &cfg.mock_manifest {
                Some(p) => MockManifest::load(p)?,
                None => MockManifest::echo_only(),
            };
            Box::new(MockProvider::new(manifest))
        }
        ProviderKind::Http => {
            let endpoint = cfg.endpoint.clone().ok_or("provider.endpoint is required for the http provider")?;
            let key = match &cfg.credential_env {
                Some(var) => Some(std::env::var(var).map_err(|_| format!("environment variable {var} is not set"))?),
                None => None,
            };
            Box::new(HttpProvider::new(endpoint, cfg.model.clone(), key)?)
        }
    };
    Ok(std::sync::Arc::new(Limited::new(inner, cfg.max_concurrency)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use audesc_core::gateway::CallPurpose;
    use std::sync::Arc;

    fn req<'a>(kind: PromptKind, text: &str, question: Option<&'a str>) -> ChatRequest<'a> {
        ChatRequest {
            kind,
            purpose: CallPurpose::Initial,
            text: text.to_string(),
            media: &[],
            frames: &[],
            question,
            timeout_ms: 10,
        }
    }

    #[test]
    fn prompt_scraping() {
        let p = "x\nTarget approximately 20 words per description segment\nTIMESTAMPS:\n\n    0.000, 6.500\n\nIf";
        assert_eq!(prompt_timestamps(p), vec![0.0, 6.5]);
        assert_eq!(prompt_target_length(p), Some(20));
        assert_eq!(lorem_words(1.0, 20).split_whitespace().count(), 20);
    }

    #[test]
    fn lookup_order() {
        let mut m = MockManifest::default();
        m.responses.insert(fingerprint("a"), vec![CannedReply::Text("1".into()), CannedReply::Text("2".into())]);
        m.answers.insert(fingerprint("why?"), CannedReply::Text("because".into()));
        m.vqa.push(CannedReply::Failure { error: FailureKind::Timeout, message: String::new() });
        m.echo = false;
        let mock = MockProvider::new(m);
        let text = |r: Result<ProviderReply, ProviderError>| r.unwrap().raw_text;
        assert_eq!(text(mock.chat(&req(PromptKind::AdGeneration, "a", None))), "1");
        assert_eq!(text(mock.chat(&req(PromptKind::AdGeneration, "a", None))), "2");
        assert_eq!(text(mock.chat(&req(PromptKind::AdGeneration, "a", None))), "2");
        assert_eq!(text(mock.chat(&req(PromptKind::Vqa, "b", Some(" why? ")))), "because");
        assert_eq!(mock.chat(&req(PromptKind::Vqa, "b", Some("x"))), Err(ProviderError::Timeout(10)));
        assert!(matches!(mock.chat(&req(PromptKind::Vqa, "b", Some("x"))), Err(ProviderError::NoResponse(_))));
    }

    #[test]
    fn manifest_json_shape() {
        let m: MockManifest = serde_json::from_str(
            r#"{"generation": ["not json", {"error": "transport", "message": "down"}], "answers": {}}"#,
        )
        .unwrap();
        assert!(m.echo);
        assert_eq!(m.generation.len(), 2);
    }

    struct Slow;
    impl Provider for Slow {
        fn id(&self) -> &str {
            "slow"
        }
        fn chat(&self, _: &ChatRequest<'_>) -> Result<ProviderReply, ProviderError> {
            std::thread::sleep(Duration::from_millis(20));
            Ok(ProviderReply { raw_text: String::new(), latency_ms: 20, provider_id: "slow".into() })
        }
    }

    #[test]
    fn limiter_caps_concurrency() {
        let p = Arc::new(Limited::new(Slow, 2));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let p = p.clone();
                std::thread::spawn(move || p.chat(&req(PromptKind::Vqa, "q", None)).unwrap())
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(p.calls(), 8);
        assert!(p.peak() <= 2);
    }

    #[test]
    fn http_body_inlines_png_frames() {
        use audesc_core::media::FrameSample;
        use audesc_core::prompt::{MediaRef, MediaRole};
        let frame = FrameSample { t_s: 1.0, pixels: GrayFrame::solid(4, 2, 9), source_index: 1 };
        let media = [MediaRef { reference: frame.reference(), source_index: 1, t_s: 1.0, role: MediaRole::Main }];
        let frames = [frame];
        let r = ChatRequest { media: &media, frames: &frames, ..req(PromptKind::Vqa, "q", None) };
        let p = HttpProvider::new("http://127.0.0.1:9".into(), "m".into(), None).unwrap();
        let body = p.request_body(&r).unwrap();
        let url = body["messages"][0]["content"][2]["image_url"]["url"].as_str().unwrap();
        let png = base64::engine::general_purpose::STANDARD
            .decode(url.strip_prefix("data:image/png;base64,").unwrap())
            .unwrap();
        let img = image::load_from_memory(&png).unwrap().to_luma8();
        assert_eq!(img.dimensions(), (4, 2));
        assert!(img.pixels().all(|p| p.0 == [9]));
    }
}
