//! Question context selection, codebook classification, and exchange records.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::media::{FrameSample, MediaAsset};
use crate::templates;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VqaError {
    #[error("no sampled frames available")]
    NoFrames,
    #[error("question is empty")]
    EmptyQuestion,
    #[error("time {t_s} s outside [0, {duration_s}]")]
    TimeOutOfRange { t_s: String, duration_s: String },
    #[error("rules file line {line}: {reason}")]
    BadRules { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    DescribeScene,
    IdentifyColor,
    IdentifyPresence,
    IdentifySubject,
    IdentifyFeature,
    DescribeCharacter,
    InferFromVideo,
    Unclassified,
}

impl QuestionType {
    pub const ALL: [QuestionType; 8] = [
        QuestionType::DescribeScene,
        QuestionType::IdentifyColor,
        QuestionType::IdentifyPresence,
        QuestionType::IdentifySubject,
        QuestionType::IdentifyFeature,
        QuestionType::DescribeCharacter,
        QuestionType::InferFromVideo,
        QuestionType::Unclassified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::DescribeScene => "describe_scene",
            QuestionType::IdentifyColor => "identify_color",
            QuestionType::IdentifyPresence => "identify_presence",
            QuestionType::IdentifySubject => "identify_subject",
            QuestionType::IdentifyFeature => "identify_feature",
            QuestionType::DescribeCharacter => "describe_character",
            QuestionType::InferFromVideo => "infer_from_video",
            QuestionType::Unclassified => "unclassified",
        }
    }
}

impl FromStr for QuestionType {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        QuestionType::ALL.into_iter().find(|q| q.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accuracy {
    Accurate,
    PartiallyAccurate,
    Incorrect,
}

impl Accuracy {
    pub const ALL: [Accuracy; 3] = [Accuracy::Accurate, Accuracy::PartiallyAccurate, Accuracy::Incorrect];

    pub fn as_str(self) -> &'static str {
        match self {
            Accuracy::Accurate => "accurate",
            Accuracy::PartiallyAccurate => "partially_accurate",
            Accuracy::Incorrect => "incorrect",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    Typed,
    Spoken,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaRequest {
    pub video_id: String,
    pub t_s: f64,
    pub question: String,
    pub input_mode: InputMode,
}

impl VqaRequest {
    pub fn validate(&self, duration_s: f64) -> Result<(), VqaError> {
        if self.question.trim().is_empty() {
            return Err(VqaError::EmptyQuestion);
        }
        if !(self.t_s >= 0.0 && self.t_s <= duration_s) {
            return Err(VqaError::TimeOutOfRange { t_s: self.t_s.to_string(), duration_s: duration_s.to_string() });
        }
        Ok(())
    }
}

/// Attached to `infer_from_video` answers: context only covers frames near the asked time.
pub const INFER_FROM_VIDEO_HINT: &str =
    "This question may concern another moment of the video; the answer only sees frames near the current time.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaExchange {
    pub request: VqaRequest,
    pub answer: String,
    pub question_type: QuestionType,
    #[serde(default)]
    pub accuracy_rating: Option<Accuracy>,
    /// Unix milliseconds.
    pub asked_at_ms: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
    /// Set when the provider call failed; `answer` is empty then.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VqaConfig {
    pub n_before: usize,
    pub n_after: usize,
    pub spacing_s: f64,
}

impl Default for VqaConfig {
    fn default() -> Self {
        Self { n_before: 2, n_after: 2, spacing_s: 1.0 }
    }
}

fn nearest<'a>(frames: &[&'a FrameSample], t: f64) -> Option<&'a FrameSample> {
    let mut best: Option<&FrameSample> = None;
    for f in frames {
        if best.is_none_or(|b| libm::fabs(f.t_s - t) < libm::fabs(b.t_s - t)) {
            best = Some(f);
        }
    }
    best
}

/// Main frame nearest `t_s` plus neighbours at `spacing_s` steps on either
/// side, all inside `[0, duration]`, without repeats. Adjacent frames come
/// back in time order.
pub fn assemble_context(
    asset: &MediaAsset,
    frames: &[FrameSample],
    t_s: f64,
    cfg: &VqaConfig,
) -> Result<(FrameSample, Vec<FrameSample>), VqaError> {
    let mut usable: Vec<&FrameSample> = frames.iter().filter(|f| f.t_s >= 0.0 && f.t_s <= asset.duration_s).collect();
    usable.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
    let main = nearest(&usable, t_s).ok_or(VqaError::NoFrames)?;

    let targets = (1..=cfg.n_before)
        .map(|k| main.t_s - k as f64 * cfg.spacing_s)
        .chain((1..=cfg.n_after).map(|k| main.t_s + k as f64 * cfg.spacing_s))
        .filter(|&t| t >= 0.0 && t <= asset.duration_s);
    let mut adjacent: Vec<&FrameSample> = Vec::new();
    for target in targets {
        if let Some(f) = nearest(&usable, target) {
            let dup = f.source_index == main.source_index || adjacent.iter().any(|a| a.source_index == f.source_index);
            if !dup {
                adjacent.push(f);
            }
        }
    }
    adjacent.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
    Ok((main.clone(), adjacent.into_iter().cloned().collect()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodebookRow {
    pub label: QuestionType,
    pub code_name: String,
    pub definition: String,
    pub exemplar: String,
}

fn fields(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l.split('|').collect()))
}

fn label_at(line: usize, s: &str) -> Result<QuestionType, VqaError> {
    s.parse().map_err(|_| VqaError::BadRules { line, reason: alloc::format!("unknown label {s:?}") })
}

pub fn parse_codebook(text: &str) -> Result<Vec<CodebookRow>, VqaError> {
    fields(text)
        .map(|(line, f)| match f.as_slice() {
            [label, name, def, ex] => Ok(CodebookRow {
                label: label_at(line, label)?,
                code_name: name.to_string(),
                definition: def.to_string(),
                exemplar: ex.to_string(),
            }),
            _ => Err(VqaError::BadRules { line, reason: "expected 4 fields".into() }),
        })
        .collect()
}

/// The seven codebook rows shipped with the crate.
pub fn codebook() -> Vec<CodebookRow> {
    parse_codebook(templates::CODEBOOK).expect("bundled codebook parses")
}

/// Ordered phrase rules; the first rule whose phrase occurs as whole words wins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionRules {
    rules: Vec<(QuestionType, String)>,
}

/// Lowercase, punctuation to spaces, single-spaced, padded with one space each side.
fn normalize(text: &str) -> String {
    let mapped: String = text.chars().map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { ' ' }).collect();
    let mut out = String::from(" ");
    for w in mapped.split_whitespace() {
        out.push_str(w);
        out.push(' ');
    }
    out
}

impl QuestionRules {
    pub fn parse(text: &str) -> Result<Self, VqaError> {
        let rules = fields(text)
            .map(|(line, f)| match f.as_slice() {
                [label, phrase] if !phrase.trim().is_empty() => Ok((label_at(line, label)?, normalize(phrase))),
                _ => Err(VqaError::BadRules { line, reason: "expected label|phrase".into() }),
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { rules })
    }

    pub fn standard() -> Self {
        Self::parse(templates::QUESTION_RULES).expect("bundled rules parse")
    }

    pub fn classify(&self, question: &str) -> QuestionType {
        let q = normalize(question);
        self.rules
            .iter()
            .find(|(_, phrase)| q.contains(phrase.as_str()))
            .map(|(label, _)| *label)
            .unwrap_or(QuestionType::Unclassified)
    }
}

pub fn classify_question(question: &str) -> QuestionType {
    QuestionRules::standard().classify(question)
}
