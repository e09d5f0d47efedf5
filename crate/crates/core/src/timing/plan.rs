use alloc::vec::Vec;

use super::{CandidatePoint, PlanPoint, Provenance, TimestampPlan, TimingError};
use crate::customization::Frequency;
use crate::interval::IntervalSet;

/// Offset past the end of a speech interval when moving a point out of it.
pub const ADJUST_EPSILON_S: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanConfig {
    /// Candidates at or above this score are always planned.
    pub seed_min_score: f64,
    /// The earliest candidate inside this window opens the plan (otherwise t=0
    /// moved out of speech does), and the latest candidate inside the same
    /// window before the end closes it.
    pub anchor_window_s: f64,
    /// Minimum separation of a synthetic point from the ends of its gap and
    /// from neighbouring speech.
    pub epsilon_s: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self { seed_min_score: 2.0, anchor_window_s: 8.0, epsilon_s: ADJUST_EPSILON_S }
    }
}

/// Move `t_s` past any speech interval containing it.
///
/// Returns `t_s` unchanged when it is already outside speech, otherwise the
/// end of the containing interval plus 10 ms (clamped to the duration),
/// repeated while that lands in further speech. `None` when no speech-free
/// time exists at or after `t_s`.
pub fn adjust_to_nonspeech(t_s: f64, speech: &IntervalSet, duration_s: f64) -> Option<f64> {
    let mut t = t_s;
    while let Some(iv) = speech.containing(t) {
        if iv.end_s >= duration_s {
            return None;
        }
        t = (iv.end_s + ADJUST_EPSILON_S).min(duration_s);
    }
    Some(t)
}

pub fn plan_timestamps(
    candidates: &[CandidatePoint],
    speech: &IntervalSet,
    duration_s: f64,
    frequency: Frequency,
) -> Result<TimestampPlan, TimingError> {
    plan_timestamps_with(candidates, speech, duration_s, frequency, &PlanConfig::default())
}

/// Seed the plan with anchors and high-score candidates, then split every gap
/// longer than the frequency, recursively.
///
/// A gap is split at its best candidate (highest score, then closest to the
/// gap midpoint, then earliest). Without candidates the midpoint moved out of
/// speech is used, or failing that the speech-free time closest to the
/// midpoint. A gap stops splitting once it fits the frequency or has no legal
/// point left. The trailing stretch after the last point is split the same
/// way against the end of the video.
///
/// The split choice for a gap never depends on the frequency and the seeds
/// don't either, so a plan at a shorter frequency contains the plan at a
/// longer one.
pub fn plan_timestamps_with(
    candidates: &[CandidatePoint],
    speech: &IntervalSet,
    duration_s: f64,
    frequency: Frequency,
    cfg: &PlanConfig,
) -> Result<TimestampPlan, TimingError> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(TimingError::InvalidDuration);
    }
    let freq = frequency.seconds() as f64;
    let legal = legal_candidates(candidates, speech, duration_s);

    let mut points: Vec<PlanPoint> = Vec::new();
    match legal.iter().find(|c| c.t_s <= cfg.anchor_window_s) {
        Some(c) => points.push(from_candidate(c)),
        None => {
            let t = adjust_to_nonspeech(0.0, speech, duration_s).ok_or(TimingError::NoLegalPoints)?;
            points.push(synthetic(t));
        }
    }
    if let Some(c) = legal.iter().rev().find(|c| c.t_s >= duration_s - cfg.anchor_window_s) {
        points.push(from_candidate(c));
    }
    points.extend(legal.iter().filter(|c| c.score >= cfg.seed_min_score).map(from_candidate));
    sort_dedup(&mut points);

    let mut gaps: Vec<(f64, f64)> = points.windows(2).map(|w| (w[0].t_s, w[1].t_s)).collect();
    gaps.push((points[points.len() - 1].t_s, duration_s));

    while let Some((a, b)) = gaps.pop() {
        if b - a <= freq {
            continue;
        }
        let chosen = best_candidate(&legal, a, b)
            .map(from_candidate)
            .or_else(|| synthetic_point(a, b, speech, duration_s, cfg).map(synthetic));
        if let Some(p) = chosen {
            let t = p.t_s;
            points.push(p);
            gaps.push((t, b));
            gaps.push((a, t));
        }
    }
    sort_dedup(&mut points);

    Ok(TimestampPlan { points, frequency_s: frequency, duration_s })
}

fn legal_candidates(candidates: &[CandidatePoint], speech: &IntervalSet, duration_s: f64) -> Vec<CandidatePoint> {
    let mut v: Vec<CandidatePoint> = candidates
        .iter()
        .filter(|c| c.t_s.is_finite() && c.t_s >= 0.0 && c.t_s <= duration_s && !speech.contains(c.t_s))
        .cloned()
        .collect();
    v.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
    v.dedup_by(|later, earlier| {
        if later.t_s == earlier.t_s {
            earlier.score = earlier.score.max(later.score);
            earlier.provenance.extend(later.provenance.iter().copied());
            true
        } else {
            false
        }
    });
    v
}

fn best_candidate(legal: &[CandidatePoint], a: f64, b: f64) -> Option<&CandidatePoint> {
    let mid = 0.5 * (a + b);
    let mut best: Option<&CandidatePoint> = None;
    // `legal` is sorted by time, so ties on the first two keys keep the earliest.
    for c in legal.iter().filter(|c| c.t_s > a && c.t_s < b) {
        let better = match best {
            None => true,
            Some(cur) => {
                c.score > cur.score || (c.score == cur.score && libm::fabs(c.t_s - mid) < libm::fabs(cur.t_s - mid))
            }
        };
        if better {
            best = Some(c);
        }
    }
    best
}

/// A speech-free point in `[a + eps, b - eps]`, preferring the adjusted midpoint.
fn synthetic_point(a: f64, b: f64, speech: &IntervalSet, duration_s: f64, cfg: &PlanConfig) -> Option<f64> {
    let eps = cfg.epsilon_s;
    let (lo, hi) = (a + eps, b - eps);
    if lo > hi {
        return None;
    }
    let mid = 0.5 * (a + b);
    if let Some(t) = adjust_to_nonspeech(mid, speech, duration_s) {
        if t >= lo && t <= hi {
            return Some(t);
        }
    }

    // Speech-free pieces of [lo, hi], kept eps away from speech on both sides;
    // take the point of each piece closest to the midpoint.
    let mut best: Option<f64> = None;
    let mut consider = |l: f64, r: f64| {
        if l <= r {
            let t = mid.clamp(l, r);
            if best.is_none_or(|cur| libm::fabs(t - mid) < libm::fabs(cur - mid)) {
                best = Some(t);
            }
        }
    };
    let mut piece_start = match speech.containing(lo) {
        Some(iv) => iv.end_s + eps,
        None => lo,
    };
    for iv in speech.iter().filter(|iv| iv.start_s > lo && iv.start_s <= hi) {
        if iv.start_s > piece_start {
            consider(piece_start, iv.start_s - eps);
        }
        piece_start = piece_start.max(iv.end_s + eps);
    }
    if !speech.contains(piece_start) {
        consider(piece_start, hi);
    }
    best
}

fn from_candidate(c: &CandidatePoint) -> PlanPoint {
    PlanPoint { t_s: c.t_s, score: c.score, provenance: c.provenance.clone() }
}

fn synthetic(t_s: f64) -> PlanPoint {
    PlanPoint { t_s, score: 0.0, provenance: Provenance::new() }
}

fn sort_dedup(points: &mut Vec<PlanPoint>) {
    points.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
    points.dedup_by(|later, earlier| later.t_s == earlier.t_s);
}
