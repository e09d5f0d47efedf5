//! Timing engine: silence, no-speech and scene-change signals, their fusion
//! into scored candidate points, and timestamp planning.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::customization::Frequency;
use crate::interval::IntervalSet;

mod fuse;
mod plan;
mod scene;
mod silence;
mod speech;

pub use fuse::{fuse_signals, FuseConfig};
pub use plan::{adjust_to_nonspeech, plan_timestamps, plan_timestamps_with, PlanConfig, ADJUST_EPSILON_S};
pub use scene::{detect_scene_changes, histogram_distance, luma_histogram, SceneConfig, HISTOGRAM_BINS};
pub use silence::{detect_silence, window_rms_dbfs, SilenceConfig};
pub use speech::{detect_speech, EnergyModulationDetector, ReplayDetector, SpeechDetector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimingError {
    #[error("audio track has no samples")]
    EmptyAudio,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("speech detector failed: {0}")]
    DetectorFailure(String),
    #[error("need at least two frames, got {0}")]
    TooFewFrames(usize),
    #[error("speech covers the whole video; no legal insertion point")]
    NoLegalPoints,
    #[error("duration must be positive and finite")]
    InvalidDuration,
}

/// Which signals support a candidate point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    Silence,
    NoSpeech,
    SceneChange,
}

pub type Provenance = BTreeSet<Signal>;

/// Detected shot cuts; each score is the histogram distance at that cut.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneChangeList {
    pub timestamps: Vec<f64>,
    pub scores: Vec<f64>,
}

impl SceneChangeList {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.timestamps.iter().copied().zip(self.scores.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePoint {
    pub t_s: f64,
    pub score: f64,
    pub provenance: Provenance,
}

/// One planned insertion point. Synthetic points carry score 0 and no provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanPoint {
    pub t_s: f64,
    pub score: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestampPlan {
    pub points: Vec<PlanPoint>,
    pub frequency_s: Frequency,
    pub duration_s: f64,
}

impl TimestampPlan {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t_s).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Strictly increasing, inside `[0, duration]`, and outside every speech interval.
    pub fn satisfies_invariants(&self, speech: &IntervalSet) -> bool {
        self.points.windows(2).all(|w| w[0].t_s < w[1].t_s)
            && self.points.iter().all(|p| p.t_s >= 0.0 && p.t_s <= self.duration_s && !speech.contains(p.t_s))
    }

    /// Cue-slot layout compatible with WebVTT: one empty cue per planned point,
    /// one second long.
    pub fn to_vtt_slots(&self) -> String {
        let mut out = String::from("WEBVTT\n");
        for (i, p) in self.points.iter().enumerate() {
            out.push_str(&alloc::format!(
                "\nslot-{}\n{} --> {}\n\n",
                i + 1,
                crate::track::vtt_timestamp(p.t_s),
                crate::track::vtt_timestamp(p.t_s + 1.0)
            ));
        }
        out
    }
}
