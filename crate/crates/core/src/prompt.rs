//! Rendering of the AD-generation and VQA prompt templates.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::customization::PromptParams;
use crate::media::FrameSample;
use crate::templates::{self, GuidelineSet};
use crate::text::fmt_seconds;
use crate::timing::TimestampPlan;
use crate::track::AdTrack;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("template placeholder {{{0}}} has no value")]
    UnresolvedPlaceholder(String),
    #[error("timestamp plan is empty")]
    EmptyPlan,
    #[error("question is empty")]
    EmptyQuestion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    AdGeneration,
    Vqa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaRole {
    Frame,
    Main,
    Adjacent,
}

/// Points at a sampled frame; pixel data stays with the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediaRef {
    pub reference: String,
    pub source_index: usize,
    pub t_s: f64,
    pub role: MediaRole,
}

impl MediaRef {
    fn of(frame: &FrameSample, role: MediaRole) -> Self {
        Self { reference: frame.reference(), source_index: frame.source_index, t_s: frame.t_s, role }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub text: String,
    pub media_refs: Vec<MediaRef>,
    pub kind: PromptKind,
    /// The question for VQA bundles; lets providers key on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
}

fn is_name_byte(b: u8) -> bool {
    b.is_ascii_uppercase() || b == b'_'
}

/// Single-pass `{NAME}` substitution. Substituted values are never rescanned.
pub fn render(template: &str, values: &BTreeMap<&str, String>) -> Result<String, PromptError> {
    let bytes = template.as_bytes();
    let mut out = String::with_capacity(template.len());
    let mut last = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let mut j = i + 1;
            while j < bytes.len() && is_name_byte(bytes[j]) {
                j += 1;
            }
            if j > i + 1 && j < bytes.len() && bytes[j] == b'}' {
                let name = &template[i + 1..j];
                let value = values.get(name).ok_or_else(|| PromptError::UnresolvedPlaceholder(name.to_string()))?;
                out.push_str(&template[last..i]);
                out.push_str(value);
                i = j + 1;
                last = i;
                continue;
            }
        }
        i += 1;
    }
    out.push_str(&template[last..]);
    Ok(out)
}

/// Placeholder names appearing in a template, in order of appearance.
pub fn placeholders(template: &str) -> Vec<String> {
    let mut names = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let len = after.bytes().take_while(|&b| is_name_byte(b)).count();
        if len > 0 && after.as_bytes().get(len) == Some(&b'}') {
            names.push(after[..len].to_string());
        }
        rest = after;
    }
    names
}

/// Planned times as `0.000, 6.000, 12.000`.
pub fn format_timestamps(plan: &TimestampPlan) -> String {
    plan.points.iter().map(|p| fmt_seconds(p.t_s)).collect::<Vec<_>>().join(", ")
}

pub fn build_ad_prompt(
    params: &PromptParams,
    plan: &TimestampPlan,
    guidelines: &GuidelineSet,
    frames: &[FrameSample],
) -> Result<PromptBundle, PromptError> {
    if plan.is_empty() {
        return Err(PromptError::EmptyPlan);
    }
    let media_refs: Vec<MediaRef> = frames.iter().map(|f| MediaRef::of(f, MediaRole::Frame)).collect();
    let frame_list = media_refs.iter().map(|m| m.reference.as_str()).collect::<Vec<_>>().join("\n");
    let mut values = BTreeMap::new();
    values.insert("GENERAL_GUIDELINES", guidelines.block());
    values.insert("TARGET_LENGTH", params.target_length.clone());
    values.insert("EMPHASIS_PROMPT", params.emphasis.clone());
    values.insert("SUBJECTIVITY_PROMPT", params.subjectivity.clone());
    values.insert("COLOR_PREFERENCES_PROMPT", params.color_preferences.clone());
    values.insert("FREE_FORM_GUIDELINES", params.free_form.clone());
    values.insert("TIMESTAMPS", format_timestamps(plan));
    values.insert("VIDEO_FRAMES", frame_list);
    Ok(PromptBundle {
        text: render(templates::AD_PROMPT, &values)?,
        media_refs,
        kind: PromptKind::AdGeneration,
        question: None,
    })
}

pub fn build_vqa_prompt(
    question: &str,
    main_frame: &FrameSample,
    adjacent: &[FrameSample],
    track: &AdTrack,
) -> Result<PromptBundle, PromptError> {
    let question = question.trim();
    if question.is_empty() {
        return Err(PromptError::EmptyQuestion);
    }
    let mut adjacent: Vec<&FrameSample> = adjacent.iter().collect();
    adjacent.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
    let mut media_refs = alloc::vec![MediaRef::of(main_frame, MediaRole::Main)];
    media_refs.extend(adjacent.iter().map(|f| MediaRef::of(f, MediaRole::Adjacent)));

    let adjacent_list = media_refs[1..].iter().map(|m| m.reference.as_str()).collect::<Vec<_>>().join("\n");
    let mut values = BTreeMap::new();
    values.insert("QUESTION", question.to_string());
    values.insert("MAIN_VIDEO_FRAME", media_refs[0].reference.clone());
    values.insert("ADJACENT_FRAMES", adjacent_list);
    values.insert("VIDEO_AUDIO_DESCRIPTIONS", track.transcript());
    Ok(PromptBundle {
        text: render(templates::VQA_PROMPT, &values)?,
        media_refs,
        kind: PromptKind::Vqa,
        question: Some(question.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::customization::{to_prompt_params, Colors, CustomizationSettings, Frequency};
    use crate::media::GrayFrame;
    use crate::timing::PlanPoint;

    fn plan(times: &[f64]) -> TimestampPlan {
        TimestampPlan {
            points: times.iter().map(|&t| PlanPoint { t_s: t, score: 0.0, provenance: Default::default() }).collect(),
            frequency_s: Frequency::Frequent,
            duration_s: 20.0,
        }
    }

    fn frame(i: usize) -> FrameSample {
        FrameSample { t_s: i as f64, pixels: GrayFrame::solid(2, 2, 0), source_index: i }
    }

    fn empty_track() -> AdTrack {
        AdTrack {
            video_id: "v".into(),
            cues: Vec::new(),
            settings_snapshot: CustomizationSettings::default(),
            plan_snapshot: plan(&[]),
            flags: Vec::new(),
        }
    }

    #[test]
    fn render_is_single_pass_and_strict() {
        let mut v = BTreeMap::new();
        v.insert("A", String::from("{B}"));
        assert_eq!(render("x {A} y {lower} {}", &v).unwrap(), "x {B} y {lower} {}");
        assert_eq!(render("{B}", &v), Err(PromptError::UnresolvedPlaceholder("B".into())));
    }

    #[test]
    fn ad_prompt_examples() {
        let params = to_prompt_params(&CustomizationSettings::default());
        let b = build_ad_prompt(&params, &plan(&[0.0, 6.0, 12.0]), &GuidelineSet::standard(), &[]).unwrap();
        assert!(b.text.contains("Target approximately 50 words"));
        assert!(b.text.contains("\n    0.000, 6.000, 12.000\n"));
        assert!(placeholders(&b.text).is_empty());
        assert_eq!(b.kind, PromptKind::AdGeneration);

        let s = CustomizationSettings { colors: Colors::Exclude, ..Default::default() };
        let b = build_ad_prompt(&to_prompt_params(&s), &plan(&[1.0]), &GuidelineSet::standard(), &[frame(0)]).unwrap();
        assert!(b.text.contains("Omit ALL color information"));
        assert_eq!(b.media_refs.len(), 1);
        assert!(b.text.ends_with("frame:0@0.000\n"));

        assert_eq!(build_ad_prompt(&params, &plan(&[]), &GuidelineSet::standard(), &[]), Err(PromptError::EmptyPlan));
    }

    #[test]
    fn vqa_prompt_examples() {
        let adj = [frame(7), frame(3), frame(4), frame(6)];
        let b = build_vqa_prompt("What color is the thread?", &frame(5), &adj, &empty_track()).unwrap();
        assert_eq!(b.media_refs.len(), 5);
        assert_eq!(b.media_refs[0].role, MediaRole::Main);
        assert_eq!(b.media_refs.iter().map(|m| m.source_index).collect::<Vec<_>>(), [5, 3, 4, 6, 7]);
        assert!(b.text.contains("only answer related to the main frame"));
        assert!(b.text.contains("What color is the thread?"));

        assert_eq!(build_vqa_prompt("  \n", &frame(0), &[], &empty_track()), Err(PromptError::EmptyQuestion));
        let b = build_vqa_prompt("What is this?", &frame(0), &[], &empty_track()).unwrap();
        assert_eq!(b.media_refs.len(), 1);
    }
}
