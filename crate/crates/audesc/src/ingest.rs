//! Media ingest through an external decoder.
//!
//! The decoder is any command that, given `{kind}` and an `{input}`, leaves
//! its output under `{output}`:
//!
//! | kind     | expected output                                         |
//! |----------|---------------------------------------------------------|
//! | `probe`  | `probe.json` with `duration_s`, `width_px`, `height_px`, `has_audio` |
//! | `audio`  | `audio.wav`, mono, at `{sample_rate}` (absent if no audio) |
//! | `frames` | `frames/manifest.json` listing `{t_s, file}` grayscale images |
//!
//! A pre-decoded fixture directory already has that layout, so
//! `cp -R {input}/. {output}` is a valid decoder for tests.

use std::path::{Path, PathBuf};
use std::process::Command;

use audesc_core::media::{AudioTrack, FrameSample, GrayFrame, MediaAsset};
use image::imageops::FilterType;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::config::IngestConfig;

pub const SUPPORTED_SAMPLE_RATES: [u32; 4] = [8000, 16000, 44100, 48000];
pub const MIN_FRAME_PERIOD_S: f64 = 0.1;
pub const MAX_FRAME_PERIOD_S: f64 = 5.0;
pub const MAX_FRAME_EDGE_PX: u32 = 256;
/// Allowed gap between decoded audio length and probed duration.
pub const AUDIO_DURATION_TOLERANCE_S: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("source unreachable: {0}")]
    UnreachableSource(String),
    #[error("unsupported container: {0}")]
    UnsupportedContainer(String),
    #[error("media has zero duration")]
    ZeroDuration,
    #[error("decode failed: {0}")]
    DecodeFailure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A local path or a URL that must go through the resolver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VideoRef {
    Path(PathBuf),
    Url(String),
}

impl VideoRef {
    /// Anything with a `scheme://` prefix is a URL.
    pub fn parse(source: &str) -> Self {
        match source.split_once("://") {
            Some((scheme, _))
                if !scheme.is_empty() && scheme.chars().all(|c| c.is_ascii_alphanumeric() || "+-.".contains(c)) =>
            {
                VideoRef::Url(source.to_string())
            }
            _ => VideoRef::Path(PathBuf::from(source)),
        }
    }
}

#[derive(Debug, Deserialize)]
struct Probe {
    duration_s: f64,
    width_px: u32,
    height_px: u32,
    #[serde(default = "yes")]
    has_audio: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
struct FrameManifest {
    frames: Vec<FrameEntry>,
}

#[derive(Debug, Deserialize)]
struct FrameEntry {
    t_s: f64,
    file: String,
}

/// An asset plus what the decoder reported about it.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedAsset {
    pub asset: MediaAsset,
    pub has_audio: bool,
}

fn hash_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Runs a command template after substituting `{name}` placeholders per argument.
pub fn run_template(template: &str, vars: &[(&str, String)]) -> Result<std::process::Output, String> {
    let words = shell_words::split(template).map_err(|e| format!("bad command template: {e}"))?;
    let args: Vec<String> =
        words.into_iter().map(|w| vars.iter().fold(w, |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))).collect();
    let (prog, rest) = args.split_first().ok_or("empty command template")?;
    let out = Command::new(prog).args(rest).output().map_err(|e| format!("{prog}: {e}"))?;
    if !out.status.success() {
        return Err(format!("{prog} exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(out)
}

pub struct Ingest {
    cfg: IngestConfig,
}

impl Ingest {
    pub fn new(cfg: IngestConfig) -> Self {
        Self { cfg }
    }

    pub fn config(&self) -> &IngestConfig {
        &self.cfg
    }

    fn scratch(&self, asset_id: &str, name: &str) -> Result<PathBuf, IngestError> {
        let dir = self.cfg.workdir.join(asset_id).join(name);
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| IngestError::DecodeFailure(format!("{}: {e}", dir.display())))?;
        }
        std::fs::create_dir_all(&dir).map_err(|e| IngestError::DecodeFailure(format!("{}: {e}", dir.display())))?;
        Ok(dir)
    }

    fn decode(&self, kind: &str, asset: &MediaAsset, out: &Path, sample_rate: u32, period: f64) -> Result<(), String> {
        run_template(
            &self.cfg.decoder_cmd,
            &[
                ("kind", kind.to_string()),
                ("input", asset.container_path.clone()),
                ("output", out.display().to_string()),
                ("sample_rate", sample_rate.to_string()),
                ("period", period.to_string()),
            ],
        )
        .map(|_| ())
    }

    fn fetch(&self, url: &str) -> Result<PathBuf, IngestError> {
        let template = self
            .cfg
            .resolver_cmd
            .as_deref()
            .ok_or_else(|| IngestError::UnreachableSource(format!("{url}: no resolver configured")))?;
        let out = self.cfg.workdir.join("resolved").join(hash_hex(url));
        if let Some(parent) = out.parent() {
            std::fs::create_dir_all(parent).map_err(|e| IngestError::UnreachableSource(e.to_string()))?;
        }
        run_template(template, &[("url", url.to_string()), ("output", out.display().to_string())])
            .map_err(|e| IngestError::UnreachableSource(format!("{url}: {e}")))?;
        if !out.exists() {
            return Err(IngestError::UnreachableSource(format!("{url}: resolver produced nothing")));
        }
        Ok(out)
    }

    /// Stable id for a reference, known before any decoding: a hash of the
    /// canonical path, or of the URL. Fails for missing local paths.
    pub fn asset_id(&self, source: &VideoRef) -> Result<String, IngestError> {
        match source {
            VideoRef::Path(p) => {
                let canonical =
                    p.canonicalize().map_err(|e| IngestError::UnreachableSource(format!("{}: {e}", p.display())))?;
                Ok(hash_hex(&canonical.display().to_string()))
            }
            VideoRef::Url(u) => Ok(hash_hex(u)),
        }
    }

    /// Turns a reference into a probed local asset.
    pub fn resolve(&self, source: &VideoRef) -> Result<ResolvedAsset, IngestError> {
        let asset_id = self.asset_id(source)?;
        let local = match source {
            VideoRef::Path(p) => p.clone(),
            VideoRef::Url(u) => self.fetch(u)?,
        };
        let canonical =
            local.canonicalize().map_err(|e| IngestError::UnreachableSource(format!("{}: {e}", local.display())))?;
        let mut asset = MediaAsset {
            asset_id: asset_id.clone(),
            duration_s: 0.0,
            container_path: canonical.display().to_string(),
            width_px: 0,
            height_px: 0,
        };
        let dir = self.scratch(&asset_id, "probe")?;
        self.decode("probe", &asset, &dir, self.cfg.sample_rate_hz, self.cfg.frame_period_s)
            .map_err(IngestError::UnsupportedContainer)?;
        let probe: Probe = read_json(&dir.join("probe.json")).map_err(IngestError::UnsupportedContainer)?;
        if !(probe.duration_s.is_finite() && probe.duration_s > 0.0) {
            return Err(IngestError::ZeroDuration);
        }
        if probe.width_px == 0 || probe.height_px == 0 {
            return Err(IngestError::UnsupportedContainer("probe reported zero frame size".into()));
        }
        asset.duration_s = probe.duration_s;
        asset.width_px = probe.width_px;
        asset.height_px = probe.height_px;
        Ok(ResolvedAsset { asset, has_audio: probe.has_audio })
    }

    /// Mono audio at `sample_rate_hz`. Without an audio stream the result is a
    /// silent track of the asset's duration with `synthesized_silence` set.
    pub fn extract_audio(&self, resolved: &ResolvedAsset, sample_rate_hz: u32) -> Result<AudioTrack, IngestError> {
        if !SUPPORTED_SAMPLE_RATES.contains(&sample_rate_hz) {
            return Err(IngestError::InvalidArgument(format!(
                "sample rate {sample_rate_hz} not in {SUPPORTED_SAMPLE_RATES:?}"
            )));
        }
        let asset = &resolved.asset;
        if !resolved.has_audio {
            return Ok(AudioTrack::silent(sample_rate_hz, asset.duration_s));
        }
        let dir = self.scratch(&asset.asset_id, &format!("audio-{sample_rate_hz}"))?;
        self.decode("audio", asset, &dir, sample_rate_hz, self.cfg.frame_period_s)
            .map_err(IngestError::DecodeFailure)?;
        let wav = dir.join("audio.wav");
        if !wav.exists() {
            return Ok(AudioTrack::silent(sample_rate_hz, asset.duration_s));
        }
        let track = read_wav_mono(&wav)?;
        if track.sample_rate_hz != sample_rate_hz {
            return Err(IngestError::DecodeFailure(format!(
                "decoder wrote {} Hz, asked for {sample_rate_hz} Hz",
                track.sample_rate_hz
            )));
        }
        if (track.duration_s - asset.duration_s).abs() > AUDIO_DURATION_TOLERANCE_S {
            return Err(IngestError::DecodeFailure(format!(
                "audio lasts {:.3} s, asset {:.3} s",
                track.duration_s, asset.duration_s
            )));
        }
        Ok(track)
    }

    /// Frames at exactly `k * period_s` for `k = 0..=floor(duration / period_s)`,
    /// each taken from the nearest decoded frame.
    pub fn sample_frames(&self, resolved: &ResolvedAsset, period_s: f64) -> Result<Vec<FrameSample>, IngestError> {
        if !(MIN_FRAME_PERIOD_S..=MAX_FRAME_PERIOD_S).contains(&period_s) {
            return Err(IngestError::InvalidArgument(format!(
                "frame period {period_s} outside [{MIN_FRAME_PERIOD_S}, {MAX_FRAME_PERIOD_S}]"
            )));
        }
        let asset = &resolved.asset;
        let dir = self.scratch(&asset.asset_id, &format!("frames-{period_s}"))?;
        self.decode("frames", asset, &dir, self.cfg.sample_rate_hz, period_s).map_err(IngestError::DecodeFailure)?;
        let frames_dir = dir.join("frames");
        let manifest: FrameManifest =
            read_json(&frames_dir.join("manifest.json")).map_err(IngestError::DecodeFailure)?;
        let mut entries = manifest.frames;
        if entries.is_empty() {
            return Err(IngestError::DecodeFailure("decoder produced no frames".into()));
        }
        entries.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));

        let count = (asset.duration_s / period_s + 1e-9).floor() as usize + 1;
        let mut cache: Vec<Option<GrayFrame>> = vec![None; entries.len()];
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            let t = k as f64 * period_s;
            let idx = nearest_entry(&entries, t);
            if cache[idx].is_none() {
                cache[idx] = Some(load_gray(&frames_dir.join(&entries[idx].file))?);
            }
            out.push(FrameSample { t_s: t, pixels: cache[idx].clone().expect("loaded above"), source_index: k });
        }
        Ok(out)
    }
}

fn nearest_entry(entries: &[FrameEntry], t: f64) -> usize {
    let mut best = 0;
    for (i, e) in entries.iter().enumerate() {
        if (e.t_s - t).abs() < (entries[best].t_s - t).abs() {
            best = i;
        }
    }
    best
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", path.display()))
}

/// Reads a WAV file and mixes it down to mono `f32` in `[-1, 1]`.
pub fn read_wav_mono(path: &Path) -> Result<AudioTrack, IngestError> {
    let fail = |e: hound::Error| IngestError::DecodeFailure(format!("{}: {e}", path.display()));
    let mut reader = hound::WavReader::open(path).map_err(fail)?;
    let spec = reader.spec();
    let interleaved: Vec<f32> = match spec.sample_format {
        hound::SampleFormat::Float => reader.samples::<f32>().collect::<Result<_, _>>().map_err(fail)?,
        hound::SampleFormat::Int => {
            let scale = (1i64 << (spec.bits_per_sample - 1)) as f32;
            reader.samples::<i32>().map(|s| s.map(|v| v as f32 / scale)).collect::<Result<_, _>>().map_err(fail)?
        }
    };
    let ch = spec.channels.max(1) as usize;
    let mono = interleaved.chunks(ch).map(|c| (c.iter().sum::<f32>() / ch as f32).clamp(-1.0, 1.0)).collect();
    Ok(AudioTrack::new(spec.sample_rate, mono))
}

/// Loads any supported image as 8-bit luma, shrunk to fit [`MAX_FRAME_EDGE_PX`].
pub fn load_gray(path: &Path) -> Result<GrayFrame, IngestError> {
    let img = image::open(path).map_err(|e| IngestError::DecodeFailure(format!("{}: {e}", path.display())))?;
    let mut luma = img.to_luma8();
    let (w, h) = luma.dimensions();
    let long = w.max(h);
    if long > MAX_FRAME_EDGE_PX {
        let scale = MAX_FRAME_EDGE_PX as f64 / long as f64;
        let nw = ((w as f64 * scale).round() as u32).max(1);
        let nh = ((h as f64 * scale).round() as u32).max(1);
        luma = image::imageops::resize(&luma, nw, nh, FilterType::Triangle);
    }
    let (width, height) = luma.dimensions();
    Ok(GrayFrame { width, height, data: luma.into_raw() })
}
