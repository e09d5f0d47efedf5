use super::{SceneChangeList, TimingError};
use crate::media::{FrameSample, GrayFrame};

pub const HISTOGRAM_BINS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    /// Cut threshold on the L1 histogram distance, in `(0, 2]`.
    pub threshold: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { threshold: 0.3 }
    }
}

/// Normalized 64-bin intensity histogram.
pub fn luma_histogram(frame: &GrayFrame) -> [f64; HISTOGRAM_BINS] {
    let mut counts = [0u64; HISTOGRAM_BINS];
    for &v in &frame.data {
        counts[(v as usize) * HISTOGRAM_BINS / 256] += 1;
    }
    let total = frame.data.len().max(1) as f64;
    counts.map(|c| c as f64 / total)
}

/// L1 distance of two normalized histograms, in `[0, 2]`.
pub fn histogram_distance(a: &[f64; HISTOGRAM_BINS], b: &[f64; HISTOGRAM_BINS]) -> f64 {
    a.iter().zip(b).map(|(x, y)| libm::fabs(x - y)).sum()
}

/// Cuts between consecutive frames; each is stamped with the later frame's time.
pub fn detect_scene_changes(frames: &[FrameSample], cfg: &SceneConfig) -> Result<SceneChangeList, TimingError> {
    if frames.len() < 2 {
        return Err(TimingError::TooFewFrames(frames.len()));
    }
    if !(cfg.threshold > 0.0 && cfg.threshold <= 2.0) {
        return Err(TimingError::InvalidConfig("scene threshold must be in (0, 2]"));
    }
    let mut out = SceneChangeList::default();
    let mut prev = luma_histogram(&frames[0].pixels);
    for f in &frames[1..] {
        let cur = luma_histogram(&f.pixels);
        let d = histogram_distance(&prev, &cur);
        if d >= cfg.threshold {
            out.timestamps.push(f.t_s);
            out.scores.push(d);
        }
        prev = cur;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn solid(values: &[u8]) -> Vec<FrameSample> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| FrameSample { t_s: i as f64, pixels: GrayFrame::solid(8, 6, v), source_index: i })
            .collect()
    }

    #[test]
    fn identical_frames_have_no_cuts() {
        let frames = solid(&[90; 10]);
        assert!(detect_scene_changes(&frames, &SceneConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn black_to_white_scores_two() {
        let frames = solid(&[0, 0, 0, 0, 0, 255, 255, 255, 255, 255, 255]);
        let cuts = detect_scene_changes(&frames, &SceneConfig::default()).unwrap();
        assert_eq!(cuts.timestamps, [5.0]);
        assert_eq!(cuts.scores, [2.0]);
    }

    #[test]
    fn preconditions() {
        assert_eq!(detect_scene_changes(&solid(&[0]), &SceneConfig::default()), Err(TimingError::TooFewFrames(1)));
        assert!(detect_scene_changes(&solid(&[0, 1]), &SceneConfig { threshold: 0.0 }).is_err());
        assert!(detect_scene_changes(&solid(&[0, 1]), &SceneConfig { threshold: 2.5 }).is_err());
    }
}
