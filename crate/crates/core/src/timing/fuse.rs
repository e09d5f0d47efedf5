use alloc::vec::Vec;

use super::{CandidatePoint, Provenance, SceneChangeList, Signal};
use crate::interval::IntervalSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuseConfig {
    /// A cut within this distance of a silent pause counts as coinciding with it.
    pub coincidence_s: f64,
    pub pause_score: f64,
    pub coincident_score: f64,
}

impl Default for FuseConfig {
    fn default() -> Self {
        Self { coincidence_s: 0.5, pause_score: 1.0, coincident_score: 2.0 }
    }
}

/// Candidate insertion points from the three signals, sorted by time.
///
/// Pauses (silence that is also speech-free) contribute their start time. Cuts
/// outside speech contribute their own time; a cut within the coincidence
/// window of a pause is promoted to the coincident score and absorbs pause
/// starts that lie within the same window. Nothing inside speech survives.
pub fn fuse_signals(
    silence: &IntervalSet,
    speech: &IntervalSet,
    scenes: &SceneChangeList,
    duration_s: f64,
    cfg: &FuseConfig,
) -> Vec<CandidatePoint> {
    let no_speech = speech.complement(duration_s);
    let pauses = silence.intersect(&no_speech);

    let mut absorbed = alloc::vec![false; pauses.len()];
    let mut out = Vec::new();

    for (t, _) in scenes.iter() {
        if !(0.0..=duration_s).contains(&t) || speech.contains(t) {
            continue;
        }
        let mut provenance: Provenance = [Signal::SceneChange, Signal::NoSpeech].into_iter().collect();
        let mut score = cfg.pause_score;
        for (i, pause) in pauses.iter().enumerate() {
            if pause.distance_to(t) <= cfg.coincidence_s {
                provenance.insert(Signal::Silence);
                score = cfg.coincident_score;
                if libm::fabs(pause.start_s - t) <= cfg.coincidence_s {
                    absorbed[i] = true;
                }
            }
        }
        out.push(CandidatePoint { t_s: t, score, provenance });
    }

    for (pause, _) in pauses.iter().zip(&absorbed).filter(|(_, a)| !**a) {
        out.push(CandidatePoint {
            t_s: pause.start_s,
            score: cfg.pause_score,
            provenance: [Signal::Silence, Signal::NoSpeech].into_iter().collect(),
        });
    }

    out.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
    let mut merged: Vec<CandidatePoint> = Vec::with_capacity(out.len());
    for c in out {
        match merged.last_mut() {
            Some(last) if last.t_s == c.t_s => {
                last.score = last.score.max(c.score);
                last.provenance.extend(c.provenance);
            }
            _ => merged.push(c),
        }
    }
    merged
}
