//! Provider-agnostic model calls: structured AD generation with snap and
//! repair, and VQA answers.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::customization::CustomizationSettings;
use crate::media::FrameSample;
use crate::prompt::{MediaRef, PromptBundle, PromptKind};
use crate::text::{fmt_seconds, word_count};
use crate::timing::TimestampPlan;
use crate::track::CueFlag;

pub const DEFAULT_GENERATION_TIMEOUT_MS: u64 = 120_000;
pub const DEFAULT_VQA_TIMEOUT_MS: u64 = 30_000;
pub const MAX_ANSWER_WORDS: usize = 120;
pub const TRUNCATION_MARKER: &str = "…";
/// Initial call, one retry after an unparseable reply, one repair call.
pub const MAX_GENERATION_CALLS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub start_s: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMetadata {
    pub video_id: String,
    pub descriptions: Vec<Description>,
}

impl VideoMetadata {
    /// Starts strictly increasing, each on a planned point, no empty text.
    pub fn is_valid_for(&self, plan: &TimestampPlan) -> bool {
        self.descriptions.windows(2).all(|w| w[0].start_s < w[1].start_s)
            && self.descriptions.iter().all(|d| {
                !d.text.trim().is_empty() && plan.points.iter().any(|p| libm::fabs(p.t_s - d.start_s) <= SNAP_WINDOW_S)
            })
    }
}

/// Descriptions this close to a planned point are on-plan.
pub const SNAP_WINDOW_S: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallPurpose {
    Initial,
    Retry,
    Repair,
    Answer,
}

/// One chat-with-media call. Pixel data for `media` is looked up in `frames`
/// by source index; wire encoding is the provider's business.
#[derive(Debug, Clone)]
pub struct ChatRequest<'a> {
    pub kind: PromptKind,
    pub purpose: CallPurpose,
    pub text: String,
    pub media: &'a [MediaRef],
    pub frames: &'a [FrameSample],
    pub question: Option<&'a str>,
    pub timeout_ms: u64,
}

impl ChatRequest<'_> {
    pub fn fingerprint(&self) -> String {
        fingerprint(&self.text)
    }

    pub fn frame_for(&self, media: &MediaRef) -> Option<&FrameSample> {
        self.frames.iter().find(|f| f.source_index == media.source_index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderReply {
    pub raw_text: String,
    pub latency_ms: u64,
    pub provider_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("authentication failure: {0}")]
    Auth(String),
    #[error("provider timed out after {0} ms")]
    Timeout(u64),
    #[error("no canned response for fingerprint {0}")]
    NoResponse(String),
}

/// A multimodal chat endpoint. Implementations must be shareable across threads.
pub trait Provider: Send + Sync {
    fn id(&self) -> &str;
    fn chat(&self, req: &ChatRequest<'_>) -> Result<ProviderReply, ProviderError>;
}

impl<P: Provider + ?Sized> Provider for &P {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn chat(&self, req: &ChatRequest<'_>) -> Result<ProviderReply, ProviderError> {
        (**self).chat(req)
    }
}

impl<P: Provider + ?Sized> Provider for alloc::boxed::Box<P> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn chat(&self, req: &ChatRequest<'_>) -> Result<ProviderReply, ProviderError> {
        (**self).chat(req)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub generation_timeout_ms: u64,
    pub vqa_timeout_ms: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self { generation_timeout_ms: DEFAULT_GENERATION_TIMEOUT_MS, vqa_timeout_ms: DEFAULT_VQA_TIMEOUT_MS }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("model output could not be parsed: {0}")]
    MalformedOutput(String),
    #[error("no description timestamp maps onto the plan")]
    PlanMismatch,
    #[error("model returned an empty answer")]
    EmptyAnswer,
    #[error("bundle kind does not match the call")]
    WrongBundleKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Parsed {
    Metadata(VideoMetadata),
    Answer(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub raw_text: String,
    pub parsed: Option<Parsed>,
    pub latency_ms: u64,
    pub provider_id: String,
    pub purpose: CallPurpose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationOutcome {
    pub metadata: VideoMetadata,
    /// Parallel to `metadata.descriptions`: snapped / repaired markers.
    pub flags: Vec<Vec<CueFlag>>,
    /// Entries dropped because they mapped to no unique planned point.
    pub rejected: Vec<Description>,
    pub responses: Vec<ModelResponse>,
}

impl GenerationOutcome {
    pub fn calls(&self) -> u32 {
        self.responses.len() as u32
    }

    /// Calls beyond the first.
    pub fn retries(&self) -> u32 {
        self.calls().saturating_sub(1)
    }
}

/// Lowercase hex SHA-256 of `text`.
pub fn fingerprint(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&alloc::format!("{b:02x}"));
    }
    out
}

fn strip_code_fence(raw: &str) -> &str {
    let t = raw.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let body = rest.split_once('\n').map(|(_, b)| b).unwrap_or("");
        return body.trim_end().strip_suffix("```").unwrap_or(body).trim();
    }
    t
}

fn number_of(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().trim_end_matches('s').parse().ok(),
        _ => None,
    }
    .filter(|x: &f64| x.is_finite())
}

fn description_of(v: &Value) -> Option<Description> {
    let o = v.as_object()?;
    let start_s = ["start_s", "timestamp", "start", "time"].iter().find_map(|k| o.get(*k).and_then(number_of))?;
    let text = ["text", "description"].iter().find_map(|k| o.get(*k).and_then(Value::as_str))?;
    Some(Description { start_s, text: text.split_whitespace().collect::<Vec<_>>().join(" ") })
}

/// Reads a VideoMetadata-shaped reply, tolerating a code fence, prose around
/// the JSON, a bare array, and common key spellings. Entries without usable
/// time or text are dropped.
pub fn parse_descriptions(raw: &str) -> Option<Vec<Description>> {
    let body = strip_code_fence(raw);
    let value: Value = serde_json::from_str(body).ok().or_else(|| {
        let (open, close) = match (body.find('{'), body.find('[')) {
            (Some(o), Some(a)) if a < o => ('[', ']'),
            (Some(_), _) => ('{', '}'),
            (None, Some(_)) => ('[', ']'),
            (None, None) => return None,
        };
        let s = body.find(open)?;
        let e = body.rfind(close)?;
        (e > s).then(|| serde_json::from_str(&body[s..=e]).ok()).flatten()
    })?;
    let list = match &value {
        Value::Array(a) => a,
        Value::Object(o) => o.get("descriptions")?.as_array()?,
        _ => return None,
    };
    Some(list.iter().filter_map(description_of).filter(|d| !d.text.is_empty()).collect())
}

struct Snapped {
    /// planned index -> (description, distance to planned point)
    by_point: BTreeMap<usize, (Description, f64)>,
    rejected: Vec<Description>,
}

/// Maps each description to its nearest planned point. Equidistant ties and
/// losers of a contested point are rejected.
fn snap(descs: Vec<Description>, plan: &[f64]) -> Snapped {
    let mut by_point: BTreeMap<usize, (Description, f64)> = BTreeMap::new();
    let mut rejected = Vec::new();
    for d in descs {
        let mut best: Option<(usize, f64)> = None;
        let mut tie = false;
        for (i, &p) in plan.iter().enumerate() {
            let dist = libm::fabs(p - d.start_s);
            match best {
                Some((_, bd)) if dist == bd => tie = true,
                Some((_, bd)) if dist > bd => {}
                _ => {
                    best = Some((i, dist));
                    tie = false;
                }
            }
        }
        let Some((idx, dist)) = best.filter(|_| !tie) else {
            rejected.push(d);
            continue;
        };
        match by_point.get(&idx) {
            Some((_, held)) if *held <= dist => rejected.push(d),
            _ => {
                if let Some((old, _)) = by_point.insert(idx, (d, dist)) {
                    rejected.push(old);
                }
            }
        }
    }
    Snapped { by_point, rejected }
}

fn in_band(text: &str, band: (f64, f64)) -> bool {
    let wc = word_count(text) as f64;
    wc >= band.0 && wc <= band.1
}

/// Appended to the original prompt for the single repair round-trip.
pub fn repair_request(violating: &[f64], missing: &[f64], band: (f64, f64)) -> String {
    let list = |ts: &[f64]| ts.iter().map(|&t| fmt_seconds(t)).collect::<Vec<_>>().join(", ");
    let mut out = String::from("\n\nREVISION REQUEST: return the complete VideoMetadata JSON again.");
    if !violating.is_empty() {
        out.push_str(&alloc::format!(
            "\nRewrite the descriptions at these timestamps to between {} and {} words: {}",
            libm::ceil(band.0),
            libm::floor(band.1),
            list(violating)
        ));
    }
    if !missing.is_empty() {
        out.push_str(&alloc::format!("\nAdd descriptions for these timestamps, which had none: {}", list(missing)));
    }
    out.push('\n');
    out
}

fn call<P: Provider + ?Sized>(
    provider: &P,
    bundle: &PromptBundle,
    text: String,
    frames: &[FrameSample],
    purpose: CallPurpose,
    timeout_ms: u64,
) -> Result<ProviderReply, ProviderError> {
    provider.chat(&ChatRequest {
        kind: bundle.kind,
        purpose,
        text,
        media: &bundle.media_refs,
        frames,
        question: bundle.question.as_deref(),
        timeout_ms,
    })
}

fn record(reply: ProviderReply, parsed: Option<&[Description]>, video_id: &str, purpose: CallPurpose) -> ModelResponse {
    ModelResponse {
        parsed: parsed
            .map(|d| Parsed::Metadata(VideoMetadata { video_id: video_id.to_string(), descriptions: d.to_vec() })),
        raw_text: reply.raw_text,
        latency_ms: reply.latency_ms,
        provider_id: reply.provider_id,
        purpose,
    }
}

/// Generates descriptions for `plan`, within at most [`MAX_GENERATION_CALLS`]
/// provider calls.
pub fn generate_descriptions<P: Provider + ?Sized>(
    video_id: &str,
    bundle: &PromptBundle,
    frames: &[FrameSample],
    plan: &TimestampPlan,
    settings: &CustomizationSettings,
    provider: &P,
    cfg: &GatewayConfig,
) -> Result<GenerationOutcome, GatewayError> {
    if bundle.kind != PromptKind::AdGeneration {
        return Err(GatewayError::WrongBundleKind);
    }
    let timeout = cfg.generation_timeout_ms;
    let mut responses = Vec::new();

    let mut parsed = None;
    for purpose in [CallPurpose::Initial, CallPurpose::Retry] {
        let reply = call(provider, bundle, bundle.text.clone(), frames, purpose, timeout)?;
        let p = parse_descriptions(&reply.raw_text);
        responses.push(record(reply, p.as_deref(), video_id, purpose));
        if p.is_some() {
            parsed = p;
            break;
        }
    }
    let Some(descs) = parsed else {
        let raw = responses.last().map(|r| r.raw_text.clone()).unwrap_or_default();
        return Err(GatewayError::MalformedOutput(raw.chars().take(200).collect()));
    };
    let had_any = !descs.is_empty();

    let times = plan.times();
    let band = settings.length_band();
    let Snapped { mut by_point, mut rejected } = snap(descs, &times);
    if had_any && by_point.is_empty() {
        return Err(GatewayError::PlanMismatch);
    }
    let mut repaired: BTreeMap<usize, bool> = BTreeMap::new();

    let violating: Vec<f64> =
        by_point.iter().filter(|(_, (d, _))| !in_band(&d.text, band)).map(|(&i, _)| times[i]).collect();
    let missing: Vec<f64> = (0..times.len()).filter(|i| !by_point.contains_key(i)).map(|i| times[i]).collect();

    if (!violating.is_empty() || !missing.is_empty()) && (responses.len() as u32) < MAX_GENERATION_CALLS {
        let text = alloc::format!("{}{}", bundle.text, repair_request(&violating, &missing, band));
        let reply = call(provider, bundle, text, frames, CallPurpose::Repair, timeout)?;
        let p = parse_descriptions(&reply.raw_text);
        responses.push(record(reply, p.as_deref(), video_id, CallPurpose::Repair));
        if let Some(fixes) = p {
            let fixed = snap(fixes, &times);
            for (idx, (d, dist)) in fixed.by_point {
                let take = match by_point.get(&idx) {
                    None => true,
                    Some((old, _)) => !in_band(&old.text, band) && in_band(&d.text, band),
                };
                if take {
                    by_point.insert(idx, (d, dist));
                    repaired.insert(idx, true);
                }
            }
        }
    }

    let mut descriptions = Vec::with_capacity(by_point.len());
    let mut flags = Vec::with_capacity(by_point.len());
    for (idx, (d, _)) in by_point {
        let mut f = Vec::new();
        if libm::fabs(d.start_s - times[idx]) > 1e-9 {
            f.push(CueFlag::Snapped);
        }
        if repaired.contains_key(&idx) {
            f.push(CueFlag::Repaired);
        }
        descriptions.push(Description { start_s: times[idx], text: d.text });
        flags.push(f);
    }
    rejected.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    Ok(GenerationOutcome {
        metadata: VideoMetadata { video_id: video_id.to_string(), descriptions },
        flags,
        rejected,
        responses,
    })
}

/// Caps `text` at `max_words`, cutting back to the last sentence end inside the
/// limit when there is one, and appends the truncation marker.
pub fn cap_answer(text: &str, max_words: usize) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.len() <= max_words {
        return text.to_string();
    }
    let kept = &words[..max_words];
    let cut = kept.iter().rposition(|w| w.ends_with(['.', '!', '?'])).map(|i| i + 1).unwrap_or(max_words);
    let mut out = kept[..cut].join(" ");
    out.push_str(TRUNCATION_MARKER);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerOutcome {
    pub answer: String,
    pub truncated: bool,
    pub response: ModelResponse,
}

pub fn answer_question<P: Provider + ?Sized>(
    bundle: &PromptBundle,
    frames: &[FrameSample],
    provider: &P,
    cfg: &GatewayConfig,
) -> Result<AnswerOutcome, GatewayError> {
    if bundle.kind != PromptKind::Vqa {
        return Err(GatewayError::WrongBundleKind);
    }
    let reply = call(provider, bundle, bundle.text.clone(), frames, CallPurpose::Answer, cfg.vqa_timeout_ms)?;
    let trimmed = reply.raw_text.trim();
    if trimmed.is_empty() {
        return Err(GatewayError::EmptyAnswer);
    }
    let answer = cap_answer(trimmed, MAX_ANSWER_WORDS);
    let truncated = answer != trimmed;
    Ok(AnswerOutcome {
        truncated,
        response: ModelResponse {
            parsed: Some(Parsed::Answer(answer.clone())),
            raw_text: reply.raw_text,
            latency_ms: reply.latency_ms,
            provider_id: reply.provider_id,
            purpose: CallPurpose::Answer,
        },
        answer,
    })
}
