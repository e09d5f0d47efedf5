use alloc::vec::Vec;

use super::TimingError;
use crate::interval::{Interval, IntervalSet};
use crate::media::AudioTrack;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SilenceConfig {
    pub window_s: f64,
    /// RMS level, relative to a full-scale amplitude of 1.0.
    pub threshold_dbfs: f64,
    pub min_len_s: f64,
}

impl Default for SilenceConfig {
    fn default() -> Self {
        Self { window_s: 0.05, threshold_dbfs: -40.0, min_len_s: 0.3 }
    }
}

/// RMS level of each analysis window in dBFS (`-inf` for digital silence).
/// The final window may be shorter than the others.
pub fn window_rms_dbfs(audio: &AudioTrack, window_s: f64) -> Vec<(Interval, f64)> {
    let sr = audio.sample_rate_hz as f64;
    let n = (libm::round(window_s * sr) as usize).max(1);
    audio
        .samples
        .chunks(n)
        .enumerate()
        .map(|(i, chunk)| {
            let sum_sq: f64 = chunk.iter().map(|&x| (x as f64) * (x as f64)).sum();
            let rms = libm::sqrt(sum_sq / chunk.len() as f64);
            let start = (i * n) as f64 / sr;
            let end = (i * n + chunk.len()) as f64 / sr;
            (Interval::new(start, end), 20.0 * libm::log10(rms))
        })
        .collect()
}

// Negated comparisons so NaN settings are rejected too.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn detect_silence(audio: &AudioTrack, cfg: &SilenceConfig) -> Result<IntervalSet, TimingError> {
    if !(cfg.window_s > 0.0) {
        return Err(TimingError::InvalidConfig("silence window must be positive"));
    }
    if !(cfg.threshold_dbfs < 0.0) {
        return Err(TimingError::InvalidConfig("silence threshold must be below 0 dBFS"));
    }
    if audio.is_empty() {
        return Err(TimingError::EmptyAudio);
    }
    let duration = audio.samples.len() as f64 / audio.sample_rate_hz as f64;
    let quiet = window_rms_dbfs(audio, cfg.window_s)
        .into_iter()
        .filter(|(_, level)| *level < cfg.threshold_dbfs)
        .map(|(iv, _)| iv);
    let merged = IntervalSet::from_intervals(quiet, duration, cfg.window_s);
    Ok(IntervalSet::from_intervals(merged.iter().copied().filter(|iv| iv.len() >= cfg.min_len_s), duration, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::PI;

    fn tone(sr: u32, secs: f64, amp: f64) -> AudioTrack {
        let n = (secs * sr as f64) as usize;
        AudioTrack::new(sr, (0..n).map(|i| (amp * libm::sin(2.0 * PI * 440.0 * i as f64 / sr as f64)) as f32).collect())
    }

    #[test]
    fn all_zero_track_is_one_interval() {
        let audio = AudioTrack::new(16_000, vec![0.0; 160_000]);
        let s = detect_silence(&audio, &SilenceConfig::default()).unwrap();
        assert_eq!(s.as_slice(), &[Interval::new(0.0, 10.0)]);
    }

    #[test]
    fn loud_tone_has_no_silence() {
        let s = detect_silence(&tone(16_000, 10.0, 0.5), &SilenceConfig::default()).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn short_gaps_are_dropped() {
        let mut audio = tone(16_000, 4.0, 0.5);
        // 0.2 s of silence, below the 0.3 s minimum
        for x in &mut audio.samples[16_000..19_200] {
            *x = 0.0;
        }
        assert!(detect_silence(&audio, &SilenceConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn errors() {
        let empty = AudioTrack::new(16_000, Vec::new());
        assert_eq!(detect_silence(&empty, &SilenceConfig::default()), Err(TimingError::EmptyAudio));
        let cfg = SilenceConfig { threshold_dbfs: 3.0, ..Default::default() };
        assert!(matches!(detect_silence(&tone(8000, 1.0, 0.1), &cfg), Err(TimingError::InvalidConfig(_))));
    }
}
