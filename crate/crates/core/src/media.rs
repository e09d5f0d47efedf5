//! Decoded media handed over by the ingest layer.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// A video accepted into the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediaAsset {
    pub asset_id: String,
    pub duration_s: f64,
    pub container_path: String,
    pub width_px: u32,
    pub height_px: u32,
}

/// Mono audio, samples normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioTrack {
    pub sample_rate_hz: u32,
    pub samples: Vec<f32>,
    pub duration_s: f64,
    /// Set when the source had no audio stream and this track is a silent stand-in.
    pub synthesized_silence: bool,
}

impl AudioTrack {
    pub fn new(sample_rate_hz: u32, samples: Vec<f32>) -> Self {
        let duration_s = samples.len() as f64 / sample_rate_hz as f64;
        Self { sample_rate_hz, samples, duration_s, synthesized_silence: false }
    }

    /// All-zero track standing in for a missing audio stream.
    pub fn silent(sample_rate_hz: u32, duration_s: f64) -> Self {
        let n = libm::round(duration_s * sample_rate_hz as f64) as usize;
        Self { sample_rate_hz, samples: alloc::vec![0.0; n], duration_s, synthesized_silence: true }
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Row-major 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl GrayFrame {
    pub fn solid(width: u32, height: u32, value: u8) -> Self {
        Self { width, height, data: alloc::vec![value; (width * height) as usize] }
    }
}

/// One frame of the uniformly sampled frame sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSample {
    pub t_s: f64,
    pub pixels: GrayFrame,
    pub source_index: usize,
}

impl FrameSample {
    /// Reference string used in prompts and on the provider wire.
    pub fn reference(&self) -> String {
        alloc::format!("frame:{}@{:.3}", self.source_index, self.t_s)
    }
}
