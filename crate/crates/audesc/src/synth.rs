//! Synthetic pre-decoded fixtures with known ground truth.
//!
//! Output layout (also what the ingest layer expects from a decoder):
//!
//! ```text
//! probe.json            duration and frame size
//! audio.wav             16-bit mono PCM, omitted when has_audio is false
//! frames/manifest.json  {"frames": [{"t_s": .., "file": ..}]}
//! frames/NNNNN.pgm      grayscale frames
//! manifest.json         ground truth: speech, noise, silence, cuts
//! ```
//!
//! Speech segments are a 220 Hz carrier under a 4 Hz raised-cosine envelope,
//! noise segments are steady uniform noise at -20 dBFS RMS, everything else is
//! digital silence. Each scene is a solid frame; brightness cycles through
//! [`SCENE_LEVELS`] so every cut is a full histogram swap.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const SCENE_LEVELS: [u8; 4] = [0, 255, 64, 192];
pub const MAX_FIXTURE_DURATION_S: f64 = 3600.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureSpec {
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    pub frame_period_s: f64,
    pub width_px: u32,
    pub height_px: u32,
    pub speech: Vec<[f64; 2]>,
    pub noise: Vec<[f64; 2]>,
    pub cuts: Vec<f64>,
    pub has_audio: bool,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            duration_s: 10.0,
            sample_rate_hz: 16_000,
            frame_period_s: 1.0,
            width_px: 32,
            height_px: 24,
            speech: Vec::new(),
            noise: Vec::new(),
            cuts: Vec::new(),
            has_audio: true,
            seed: 0,
        }
    }
}

/// Written next to the media as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    pub frame_period_s: f64,
    pub speech: Vec<[f64; 2]>,
    pub noise: Vec<[f64; 2]>,
    /// Stretches with neither speech nor noise.
    pub silence: Vec<[f64; 2]>,
    pub cuts: Vec<f64>,
    pub has_audio: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("inconsistent spec: {0}")]
    Inconsistent(String),
    #[error("writing fixture: {0}")]
    Io(String),
}

fn bad(msg: impl Into<String>) -> SynthError {
    SynthError::Inconsistent(msg.into())
}

fn sorted(mut v: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    v.sort_by(|a, b| a[0].total_cmp(&b[0]));
    v
}

impl FixtureSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let d = self.duration_s;
        if !(d.is_finite() && d > 0.0 && d <= MAX_FIXTURE_DURATION_S) {
            return Err(bad(format!("duration {d} outside (0, {MAX_FIXTURE_DURATION_S}]")));
        }
        if !crate::ingest::SUPPORTED_SAMPLE_RATES.contains(&self.sample_rate_hz) {
            return Err(bad(format!("sample rate {}", self.sample_rate_hz)));
        }
        if !(crate::ingest::MIN_FRAME_PERIOD_S..=crate::ingest::MAX_FRAME_PERIOD_S).contains(&self.frame_period_s) {
            return Err(bad(format!("frame period {}", self.frame_period_s)));
        }
        if self.width_px == 0 || self.height_px == 0 {
            return Err(bad("zero frame size"));
        }
        let mut all: Vec<[f64; 2]> = Vec::new();
        for (name, list) in [("speech", &self.speech), ("noise", &self.noise)] {
            for iv in list {
                if !(iv[0] >= 0.0 && iv[0] < iv[1] && iv[1] <= d) {
                    return Err(bad(format!("{name} interval {iv:?} not inside [0, {d}]")));
                }
                all.push(*iv);
            }
        }
        if !self.has_audio && !all.is_empty() {
            return Err(bad("speech or noise without an audio stream"));
        }
        let all = sorted(all);
        if let Some(w) = all.windows(2).find(|w| w[1][0] < w[0][1]) {
            return Err(bad(format!("overlapping audio segments {:?} and {:?}", w[0], w[1])));
        }
        if let Some(&c) = self.cuts.iter().find(|&&c| !(c > 0.0 && c < d)) {
            return Err(bad(format!("cut {c} not inside (0, {d})")));
        }
        if self.cuts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("cuts must be strictly increasing"));
        }
        Ok(())
    }

    pub fn ground_truth(&self) -> GroundTruth {
        let busy = sorted(self.speech.iter().chain(&self.noise).copied().collect());
        let mut silence = Vec::new();
        let mut t = 0.0;
        for iv in &busy {
            if iv[0] > t {
                silence.push([t, iv[0]]);
            }
            t = f64::max(t, iv[1]);
        }
        if t < self.duration_s {
            silence.push([t, self.duration_s]);
        }
        GroundTruth {
            duration_s: self.duration_s,
            sample_rate_hz: self.sample_rate_hz,
            frame_period_s: self.frame_period_s,
            speech: sorted(self.speech.clone()),
            noise: sorted(self.noise.clone()),
            silence,
            cuts: self.cuts.clone(),
            has_audio: self.has_audio,
        }
    }

    pub fn samples(&self) -> Vec<f32> {
        let sr = self.sample_rate_hz as f64;
        let n = (self.duration_s * sr).round() as usize;
        let amp = 0.1 * 3f64.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let inside = |list: &[[f64; 2]], t: f64| list.iter().any(|iv| t >= iv[0] && t < iv[1]);
        (0..n)
            .map(|i| {
                let t = i as f64 / sr;
                if inside(&self.speech, t) {
                    let env = 0.5 * (1.0 - (2.0 * PI * 4.0 * t).cos());
                    (0.4 * env * (2.0 * PI * 220.0 * t).sin()) as f32
                } else if inside(&self.noise, t) {
                    rng.gen_range(-amp..amp) as f32
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Brightness of the scene showing at `t_s`.
    pub fn level_at(&self, t_s: f64) -> u8 {
        let scene = self.cuts.iter().filter(|&&c| c <= t_s + 1e-9).count();
        SCENE_LEVELS[scene % SCENE_LEVELS.len()]
    }

    pub fn frame_times(&self) -> Vec<f64> {
        let n = (self.duration_s / self.frame_period_s + 1e-9).floor() as usize;
        (0..=n).map(|k| k as f64 * self.frame_period_s).collect()
    }
}

fn io(path: &Path, e: impl std::fmt::Display) -> SynthError {
    SynthError::Io(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SynthError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| io(path, e))
}

/// Writes the fixture into `out` (created if missing) and returns its ground truth.
pub fn write_fixture(spec: &FixtureSpec, out: &Path) -> Result<GroundTruth, SynthError> {
    spec.validate()?;
    let frames_dir = out.join("frames");
    std::fs::create_dir_all(&frames_dir).map_err(|e| io(&frames_dir, e))?;

    write_json(
        &out.join("probe.json"),
        &serde_json::json!({
            "duration_s": spec.duration_s,
            "width_px": spec.width_px,
            "height_px": spec.height_px,
            "has_audio": spec.has_audio,
        }),
    )?;

    if spec.has_audio {
        let path = out.join("audio.wav");
        let wav_spec = hound::WavSpec {
            channels: 1,
            sample_rate: spec.sample_rate_hz,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, wav_spec).map_err(|e| io(&path, e))?;
        for s in spec.samples() {
            w.write_sample((s * 32767.0).round() as i16).map_err(|e| io(&path, e))?;
        }
        w.finalize().map_err(|e| io(&path, e))?;
    }

    let mut entries = Vec::new();
    for (k, t) in spec.frame_times().into_iter().enumerate() {
        let file = format!("{k:05}.pgm");
        let path = frames_dir.join(&file);
        let level = spec.level_at(t);
        let img = image::GrayImage::from_pixel(spec.width_px, spec.height_px, image::Luma([level]));
        img.save_with_format(&path, image::ImageFormat::Pnm).map_err(|e| io(&path, e))?;
        entries.push(serde_json::json!({ "t_s": t, "file": file }));
    }
    write_json(&frames_dir.join("manifest.json"), &serde_json::json!({ "frames": entries }))?;

    let truth = spec.ground_truth();
    write_json(&out.join("manifest.json"), &truth)?;
    Ok(truth)
}

/// A random consistent spec of at most 60 s, cuts on frame boundaries.
pub fn random_spec(seed: u64) -> FixtureSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration_s = rng.gen_range(10..=60) as f64;
    let mut busy: Vec<[f64; 2]> = Vec::new();
    let mut t = rng.gen_range(0.0..4.0f64).round();
    while t < duration_s - 1.0 {
        let len = rng.gen_range(1..=8) as f64;
        let end = (t + len).min(duration_s);
        busy.push([t, end]);
        t = end + rng.gen_range(1..=10) as f64;
    }
    let (mut speech, mut noise) = (Vec::new(), Vec::new());
    for iv in busy {
        if rng.gen_bool(0.75) {
            speech.push(iv);
        } else {
            noise.push(iv);
        }
    }
    let mut cuts = Vec::new();
    let mut c = rng.gen_range(2..=8) as f64;
    while c < duration_s {
        cuts.push(c);
        c += rng.gen_range(2..=12) as f64;
    }
    FixtureSpec { duration_s, speech, noise, cuts, seed, ..FixtureSpec::default() }
}
