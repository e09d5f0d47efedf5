//! Core of the audio-description service.
//!
//! Everything in this crate is a pure function of its inputs and needs only
//! an allocator: timing-signal extraction and fusion over decoded samples,
//! timestamp planning, customization settings, prompt rendering, validation of
//! model output, AD track scheduling, VQA context selection and question
//! classification, and interaction-log analytics.
//!
//! IO (decoder invocation, providers, storage, HTTP) lives in the `audesc`
//! companion crate.
//!
//! # Feature flags
//! - **`std`**: implements `std`-only conveniences. The crate is `no_std` otherwise.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod analytics;
pub mod customization;
pub mod gateway;
pub mod interval;
pub mod media;
pub mod prompt;
pub mod templates;
pub mod timing;
pub mod track;
pub mod vqa;

mod text;

pub use customization::{Colors, CustomizationSettings, Emphasis, Frequency, Subjectivity};
pub use interval::{Interval, IntervalSet};
pub use media::{AudioTrack, FrameSample, GrayFrame, MediaAsset};
pub use timing::{CandidatePoint, SceneChangeList, TimestampPlan};
pub use track::AdTrack;
