use alloc::vec::Vec;

use super::TimingError;
use crate::interval::{Interval, IntervalSet};
use crate::media::AudioTrack;

/// Source of speech intervals. The complement within `[0, duration]` is the
/// no-speech signal.
pub trait SpeechDetector {
    fn detect(&self, audio: &AudioTrack) -> Result<IntervalSet, TimingError>;
}

pub fn detect_speech(audio: &AudioTrack, detector: &dyn SpeechDetector) -> Result<IntervalSet, TimingError> {
    if audio.synthesized_silence || audio.samples.iter().all(|&x| x == 0.0) {
        return Ok(IntervalSet::empty());
    }
    detector.detect(audio)
}

/// Replays known speech labels, e.g. a fixture manifest.
#[derive(Debug, Clone, Default)]
pub struct ReplayDetector {
    pub speech: IntervalSet,
}

impl ReplayDetector {
    pub fn new(speech: IntervalSet) -> Self {
        Self { speech }
    }
}

impl SpeechDetector for ReplayDetector {
    fn detect(&self, audio: &AudioTrack) -> Result<IntervalSet, TimingError> {
        let duration = audio.duration_s;
        Ok(IntervalSet::from_intervals(self.speech.iter().copied(), duration, 0.0))
    }
}

/// Dependency-free heuristic: a block counts as speech when it is loud enough,
/// its short-term energy is modulated at syllabic rates, and its zero-crossing
/// rate sits in the voice band. Steady tones and stationary noise fail the
/// modulation test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModulationDetector {
    pub frame_s: f64,
    pub block_s: f64,
    pub energy_floor_dbfs: f64,
    /// Minimum coefficient of variation of per-frame RMS inside a block.
    pub min_modulation: f64,
    pub min_zcr_hz: f64,
    pub max_zcr_hz: f64,
}

impl Default for EnergyModulationDetector {
    fn default() -> Self {
        Self {
            frame_s: 0.02,
            block_s: 0.5,
            energy_floor_dbfs: -45.0,
            min_modulation: 0.35,
            min_zcr_hz: 80.0,
            max_zcr_hz: 4000.0,
        }
    }
}

impl EnergyModulationDetector {
    fn block_is_speech(&self, block: &[f32], sr: f64) -> bool {
        let frame = (libm::round(self.frame_s * sr) as usize).max(1);
        let rms: Vec<f64> = block
            .chunks(frame)
            .map(|c| libm::sqrt(c.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>() / c.len() as f64))
            .collect();
        let mean = rms.iter().sum::<f64>() / rms.len() as f64;
        if mean <= 0.0 || 20.0 * libm::log10(mean) < self.energy_floor_dbfs {
            return false;
        }
        let var = rms.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / rms.len() as f64;
        if libm::sqrt(var) / mean < self.min_modulation {
            return false;
        }
        let crossings = block.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count();
        let zcr_hz = crossings as f64 / (block.len() as f64 / sr) / 2.0;
        (self.min_zcr_hz..=self.max_zcr_hz).contains(&zcr_hz)
    }
}

impl SpeechDetector for EnergyModulationDetector {
    fn detect(&self, audio: &AudioTrack) -> Result<IntervalSet, TimingError> {
        if !(self.frame_s > 0.0 && self.block_s >= self.frame_s) {
            return Err(TimingError::InvalidConfig("speech frame/block sizes"));
        }
        let sr = audio.sample_rate_hz as f64;
        let duration = audio.samples.len() as f64 / sr;
        let n = (libm::round(self.block_s * sr) as usize).max(1);
        let speech = audio
            .samples
            .chunks(n)
            .enumerate()
            .filter(|(_, b)| self.block_is_speech(b, sr))
            .map(|(i, b)| Interval::new((i * n) as f64 / sr, (i * n + b.len()) as f64 / sr));
        Ok(IntervalSet::from_intervals(speech, duration, self.block_s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::PI;

    const SR: u32 = 16_000;

    fn synth(secs: f64, f: impl Fn(f64) -> f64) -> AudioTrack {
        let n = (secs * SR as f64) as usize;
        AudioTrack::new(SR, (0..n).map(|i| f(i as f64 / SR as f64) as f32).collect())
    }

    #[test]
    fn silent_track_has_no_speech() {
        let audio = AudioTrack::new(SR, vec![0.0; 80_000]);
        let s = detect_speech(&audio, &EnergyModulationDetector::default()).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.complement(5.0), IntervalSet::full(5.0));
    }

    #[test]
    fn replay_returns_labels() {
        let labels = IntervalSet::from_intervals([Interval::new(2.0, 6.0)], 10.0, 0.0);
        let audio = synth(10.0, |t| 0.3 * libm::sin(2.0 * PI * 200.0 * t));
        let s = detect_speech(&audio, &ReplayDetector::new(labels.clone())).unwrap();
        assert_eq!(s, labels);
    }

    #[test]
    fn modulated_voice_band_signal_is_speech() {
        // 4 Hz syllabic envelope on a 220 Hz carrier inside [2, 6)
        let audio = synth(10.0, |t| {
            if (2.0..6.0).contains(&t) {
                let env = 0.5 * (1.0 - libm::cos(2.0 * PI * 4.0 * t));
                0.4 * env * libm::sin(2.0 * PI * 220.0 * t)
            } else {
                0.0
            }
        });
        let s = EnergyModulationDetector::default().detect(&audio).unwrap();
        assert_eq!(s.as_slice(), &[Interval::new(2.0, 6.0)]);
    }

    #[test]
    fn steady_tone_is_not_speech() {
        let audio = synth(10.0, |t| 0.5 * libm::sin(2.0 * PI * 440.0 * t));
        assert!(EnergyModulationDetector::default().detect(&audio).unwrap().is_empty());
    }
}
