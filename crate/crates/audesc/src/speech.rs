//! Speech detectors that need the filesystem or a subprocess.

use std::path::{Path, PathBuf};

use audesc_core::interval::{Interval, IntervalSet};
use audesc_core::media::AudioTrack;
use audesc_core::timing::{EnergyModulationDetector, ReplayDetector, SpeechDetector, TimingError};

use crate::config::{SpeechConfig, SpeechDetectorKind};
use crate::ingest::run_template;
use crate::synth::GroundTruth;

/// Runs a command on a WAV dump of the track and reads `[[start, end], ...]` from stdout.
pub struct ExternalDetector {
    pub cmd: String,
    pub scratch_dir: PathBuf,
}

impl SpeechDetector for ExternalDetector {
    fn detect(&self, audio: &AudioTrack) -> Result<IntervalSet, TimingError> {
        let fail = |m: String| TimingError::DetectorFailure(m);
        std::fs::create_dir_all(&self.scratch_dir).map_err(|e| fail(e.to_string()))?;
        let wav = self.scratch_dir.join(format!("speech-input-{}.wav", std::process::id()));
        write_wav(&wav, audio).map_err(fail)?;
        let out = run_template(&self.cmd, &[("input", wav.display().to_string())]);
        let _ = std::fs::remove_file(&wav);
        let out = out.map_err(fail)?;
        let pairs: Vec<[f64; 2]> =
            serde_json::from_slice(&out.stdout).map_err(|e| fail(format!("detector output: {e}")))?;
        if let Some(p) = pairs.iter().find(|p| !(p[0].is_finite() && p[1].is_finite() && p[0] <= p[1])) {
            return Err(fail(format!("bad interval {p:?}")));
        }
        Ok(IntervalSet::from_intervals(pairs.into_iter().map(|p| Interval::new(p[0], p[1])), audio.duration_s, 0.0))
    }
}

fn write_wav(path: &Path, audio: &AudioTrack) -> Result<(), String> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate_hz,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| e.to_string())?;
    for &s in &audio.samples {
        w.write_sample(s).map_err(|e| e.to_string())?;
    }
    w.finalize().map_err(|e| e.to_string())
}

/// Speech labels from a synthesized fixture's `manifest.json`.
pub fn manifest_detector(container: &Path) -> Result<ReplayDetector, TimingError> {
    let path = container.join("manifest.json");
    let bytes = std::fs::read(&path).map_err(|e| TimingError::DetectorFailure(format!("{}: {e}", path.display())))?;
    let truth: GroundTruth =
        serde_json::from_slice(&bytes).map_err(|e| TimingError::DetectorFailure(format!("{}: {e}", path.display())))?;
    Ok(ReplayDetector::new(IntervalSet::from_intervals(
        truth.speech.iter().map(|p| Interval::new(p[0], p[1])),
        truth.duration_s,
        0.0,
    )))
}

/// The detector selected by configuration for the asset stored at `container`.
pub fn detector_for(
    cfg: &SpeechConfig,
    container: &Path,
    scratch_dir: &Path,
) -> Result<Box<dyn SpeechDetector + Send>, TimingError> {
    Ok(match cfg.detector {
        SpeechDetectorKind::Builtin => Box::new(EnergyModulationDetector::default()),
        SpeechDetectorKind::Manifest => Box::new(manifest_detector(container)?),
        SpeechDetectorKind::External => Box::new(ExternalDetector {
            cmd: cfg.cmd.clone().ok_or_else(|| TimingError::DetectorFailure("speech.cmd is not set".into()))?,
            scratch_dir: scratch_dir.to_path_buf(),
        }),
    })
}
