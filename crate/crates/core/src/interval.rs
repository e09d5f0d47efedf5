//! Half-open time intervals in seconds.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start_s: f64,
    pub end_s: f64,
}

impl Interval {
    pub fn new(start_s: f64, end_s: f64) -> Self {
        Self { start_s, end_s }
    }

    pub fn len(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn is_empty(&self) -> bool {
        self.end_s <= self.start_s
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start_s <= t && t < self.end_s
    }

    /// Distance from `t` to the closest point of the interval, 0 inside it.
    pub fn distance_to(&self, t: f64) -> f64 {
        if t < self.start_s {
            self.start_s - t
        } else if t > self.end_s {
            t - self.end_s
        } else {
            0.0
        }
    }
}

/// Sorted, non-overlapping intervals with `start < end`.
///
/// Construction clamps to `[0, duration]` and merges intervals separated by
/// less than `merge_gap_s`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn full(duration_s: f64) -> Self {
        Self::from_intervals([Interval::new(0.0, duration_s)], duration_s, 0.0)
    }

    pub fn from_intervals<I>(intervals: I, duration_s: f64, merge_gap_s: f64) -> Self
    where
        I: IntoIterator<Item = Interval>,
    {
        let mut v: Vec<Interval> = intervals
            .into_iter()
            .map(|iv| Interval::new(iv.start_s.max(0.0), iv.end_s.min(duration_s)))
            .filter(|iv| !iv.is_empty())
            .collect();
        v.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));

        let mut merged: Vec<Interval> = Vec::with_capacity(v.len());
        for iv in v {
            match merged.last_mut() {
                Some(last) if iv.start_s - last.end_s < merge_gap_s || iv.start_s <= last.end_s => {
                    if iv.end_s > last.end_s {
                        last.end_s = iv.end_s;
                    }
                }
                _ => merged.push(iv),
            }
        }
        Self { intervals: merged }
    }

    pub fn as_slice(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn iter(&self) -> impl Iterator<Item = &Interval> {
        self.intervals.iter()
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total covered time.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(Interval::len).sum()
    }

    pub fn containing(&self, t: f64) -> Option<&Interval> {
        // intervals are sorted and disjoint
        let idx = self.intervals.partition_point(|iv| iv.start_s <= t);
        if idx == 0 {
            return None;
        }
        let iv = &self.intervals[idx - 1];
        iv.contains(t).then_some(iv)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.containing(t).is_some()
    }

    /// `[0, duration]` minus this set.
    pub fn complement(&self, duration_s: f64) -> Self {
        let mut out = Vec::new();
        let mut cursor = 0.0;
        for iv in &self.intervals {
            if iv.start_s > cursor {
                out.push(Interval::new(cursor, iv.start_s));
            }
            cursor = cursor.max(iv.end_s);
        }
        if cursor < duration_s {
            out.push(Interval::new(cursor, duration_s));
        }
        Self { intervals: out }
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let (a, b) = (&self.intervals, &other.intervals);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            let start = a[i].start_s.max(b[j].start_s);
            let end = a[i].end_s.min(b[j].end_s);
            if start < end {
                out.push(Interval::new(start, end));
            }
            if a[i].end_s < b[j].end_s {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { intervals: out }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[(f64, f64)], dur: f64, gap: f64) -> IntervalSet {
        IntervalSet::from_intervals(v.iter().map(|&(a, b)| Interval::new(a, b)), dur, gap)
    }

    #[test]
    fn merges_and_clamps() {
        let s = set(&[(5.0, 7.0), (-1.0, 2.0), (2.01, 3.0), (6.0, 12.0)], 10.0, 0.05);
        assert_eq!(s.as_slice(), &[Interval::new(0.0, 3.0), Interval::new(5.0, 10.0)]);
    }

    #[test]
    fn keeps_gaps_at_least_merge_gap() {
        let s = set(&[(0.0, 1.0), (1.05, 2.0)], 10.0, 0.05);
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn complement_and_intersect() {
        let s = set(&[(2.0, 6.0)], 10.0, 0.0);
        let c = s.complement(10.0);
        assert_eq!(c.as_slice(), &[Interval::new(0.0, 2.0), Interval::new(6.0, 10.0)]);
        assert!(s.intersect(&c).is_empty());
        let other = set(&[(1.0, 3.0), (5.0, 8.0)], 10.0, 0.0);
        assert_eq!(s.intersect(&other).as_slice(), &[Interval::new(2.0, 3.0), Interval::new(5.0, 6.0)]);
        assert!(IntervalSet::empty().complement(4.0) == IntervalSet::full(4.0));
    }

    #[test]
    fn half_open_membership() {
        let s = set(&[(3.0, 5.0)], 10.0, 0.0);
        assert!(s.contains(3.0));
        assert!(s.contains(4.999));
        assert!(!s.contains(5.0));
        assert!(!s.contains(2.999));
    }
}
