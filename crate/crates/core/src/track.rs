//! The validated AD document, its playback schedule, and its file formats.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::customization::CustomizationSettings;
use crate::gateway::{GenerationOutcome, VideoMetadata};
use crate::text::word_count;
use crate::timing::TimestampPlan;

/// Spoken-rate estimate at a UI rate multiplier of 1.0.
pub const DEFAULT_TTS_RATE_WPS: f64 = 2.5;
pub const MIN_TTS_RATE_WPS: f64 = 1.0;
pub const MAX_TTS_RATE_WPS: f64 = 6.0;

pub const STRUCTURED_FORMAT_NAME: &str = "audesc.adtrack";
pub const STRUCTURED_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackError {
    #[error("unsupported track format {0:?}")]
    UnsupportedFormat(String),
    #[error("tts rate {0} words/s outside [1, 6]")]
    RateOutOfRange(f64),
    #[error("malformed track document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CueFlag {
    /// Word count outside half to one and a half times the target length.
    LengthViolation,
    /// Start time was moved onto the planned point.
    Snapped,
    /// Text came from a repair round-trip.
    Repaired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackFlag {
    NoDescriptions,
    /// Speech covers the whole video, so nothing was planned.
    NoLegalPoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cue {
    pub start_s: f64,
    pub text: String,
    pub word_count: usize,
    #[serde(default)]
    pub flags: Vec<CueFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdTrack {
    pub video_id: String,
    pub cues: Vec<Cue>,
    pub settings_snapshot: CustomizationSettings,
    pub plan_snapshot: TimestampPlan,
    #[serde(default)]
    pub flags: Vec<TrackFlag>,
}

impl AdTrack {
    /// One cue per description, flagging word counts outside the length band.
    pub fn from_metadata(meta: &VideoMetadata, settings: &CustomizationSettings, plan: &TimestampPlan) -> Self {
        let (lo, hi) = settings.length_band();
        let mut cues: Vec<Cue> = meta
            .descriptions
            .iter()
            .map(|d| {
                let wc = word_count(&d.text);
                let mut flags = Vec::new();
                if (wc as f64) < lo || (wc as f64) > hi {
                    flags.push(CueFlag::LengthViolation);
                }
                Cue { start_s: d.start_s, text: d.text.clone(), word_count: wc, flags }
            })
            .collect();
        cues.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        let flags = if cues.is_empty() { alloc::vec![TrackFlag::NoDescriptions] } else { Vec::new() };
        Self {
            video_id: meta.video_id.clone(),
            cues,
            settings_snapshot: settings.clone(),
            plan_snapshot: plan.clone(),
            flags,
        }
    }

    /// Like [`from_metadata`](Self::from_metadata), also carrying the
    /// gateway's snapped and repaired markers.
    pub fn from_generation(
        outcome: &GenerationOutcome,
        settings: &CustomizationSettings,
        plan: &TimestampPlan,
    ) -> Self {
        let mut track = Self::from_metadata(&outcome.metadata, settings, plan);
        for (cue, extra) in track.cues.iter_mut().zip(&outcome.flags) {
            cue.flags.extend(extra.iter().copied());
            cue.flags.sort();
            cue.flags.dedup();
        }
        track
    }

    pub fn is_empty(&self) -> bool {
        self.cues.is_empty()
    }

    /// Cues strictly increasing and word counts consistent with the text.
    pub fn is_valid(&self) -> bool {
        self.cues.windows(2).all(|w| w[0].start_s < w[1].start_s)
            && self.cues.iter().all(|c| c.word_count == word_count(&c.text))
    }

    /// `[start] text` lines, as handed to the VQA prompt.
    pub fn transcript(&self) -> String {
        self.cues.iter().map(|c| alloc::format!("[{:.3}s] {}", c.start_s, c.text)).collect::<Vec<_>>().join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleItem {
    pub start_s: f64,
    pub est_end_s: f64,
    pub cue_index: usize,
    /// Estimated speech runs past the next cue's start. Advisory only.
    pub overlap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaybackSchedule {
    pub items: Vec<ScheduleItem>,
    pub tts_rate_wps: f64,
}

/// Words per second for a UI speech-rate multiplier.
pub fn tts_rate_for_multiplier(multiplier: f64) -> f64 {
    DEFAULT_TTS_RATE_WPS * multiplier
}

pub fn schedule(track: &AdTrack, tts_rate_wps: f64) -> Result<PlaybackSchedule, TrackError> {
    if !(MIN_TTS_RATE_WPS..=MAX_TTS_RATE_WPS).contains(&tts_rate_wps) {
        return Err(TrackError::RateOutOfRange(tts_rate_wps));
    }
    let mut items: Vec<ScheduleItem> = track
        .cues
        .iter()
        .enumerate()
        .map(|(i, c)| ScheduleItem {
            start_s: c.start_s,
            est_end_s: c.start_s + c.word_count as f64 / tts_rate_wps,
            cue_index: i,
            overlap: false,
        })
        .collect();
    for i in 1..items.len() {
        let next_start = items[i].start_s;
        items[i - 1].overlap = items[i - 1].est_end_s > next_start;
    }
    Ok(PlaybackSchedule { items, tts_rate_wps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackFormat {
    Structured,
    Vtt,
}

impl FromStr for TrackFormat {
    type Err = TrackError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "structured" | "json" => Ok(TrackFormat::Structured),
            "vtt" | "webvtt" => Ok(TrackFormat::Vtt),
            other => Err(TrackError::UnsupportedFormat(other.to_string())),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct StructuredDoc {
    format: String,
    version: u32,
    #[serde(flatten)]
    track: AdTrack,
}

#[derive(Serialize)]
struct StructuredDocRef<'a> {
    format: &'a str,
    version: u32,
    #[serde(flatten)]
    track: &'a AdTrack,
}

pub fn serialize(track: &AdTrack, format: TrackFormat) -> Result<Vec<u8>, TrackError> {
    match format {
        TrackFormat::Structured => {
            let doc = StructuredDocRef { format: STRUCTURED_FORMAT_NAME, version: STRUCTURED_FORMAT_VERSION, track };
            serde_json::to_vec_pretty(&doc).map_err(|e| TrackError::Malformed(e.to_string()))
        }
        TrackFormat::Vtt => Ok(to_vtt(track).into_bytes()),
    }
}

pub fn parse_structured(bytes: &[u8]) -> Result<AdTrack, TrackError> {
    let doc: StructuredDoc = serde_json::from_slice(bytes).map_err(|e| TrackError::Malformed(e.to_string()))?;
    if doc.format != STRUCTURED_FORMAT_NAME {
        return Err(TrackError::UnsupportedFormat(doc.format));
    }
    if doc.version != STRUCTURED_FORMAT_VERSION {
        return Err(TrackError::Malformed(alloc::format!("unknown version {}", doc.version)));
    }
    Ok(doc.track)
}

/// `HH:MM:SS.mmm`
pub fn vtt_timestamp(t_s: f64) -> String {
    let total_ms = libm::round(t_s.max(0.0) * 1000.0) as u64;
    let (h, rem) = (total_ms / 3_600_000, total_ms % 3_600_000);
    let (m, rem) = (rem / 60_000, rem % 60_000);
    let (s, ms) = (rem / 1000, rem % 1000);
    alloc::format!("{h:02}:{m:02}:{s:02}.{ms:03}")
}

fn vtt_escape(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// One cue per description; each ends at its spoken-duration estimate at the
/// default rate.
pub fn to_vtt(track: &AdTrack) -> String {
    let sched = schedule(track, DEFAULT_TTS_RATE_WPS).expect("default rate is in range");
    let mut out = String::from("WEBVTT\n");
    for (item, cue) in sched.items.iter().zip(&track.cues) {
        out.push_str(&alloc::format!(
            "\n{}\n{} --> {}\n{}\n",
            item.cue_index + 1,
            vtt_timestamp(item.start_s),
            vtt_timestamp(item.est_end_s),
            vtt_escape(&cue.text)
        ));
    }
    out
}
