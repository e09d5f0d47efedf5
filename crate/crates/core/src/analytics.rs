//! Interaction-log model and the reports computed from it.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::customization::{Colors, CustomizationSettings, Emphasis, Frequency, Subjectivity};
use crate::vqa::{Accuracy, QuestionType, VqaExchange};

const DAY_MS: i64 = 86_400_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("rating {field}={value} outside 1..=5")]
    RatingOutOfRange { field: String, value: u8 },
    #[error("exchange video {exchange} does not match session video {session}")]
    VideoMismatch { session: String, exchange: String },
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("duplicate session {0}")]
    DuplicateSession(String),
    #[error("invalid settings: {0}")]
    Settings(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SessionSettings {
    /// The viewer kept the default preset.
    Default,
    Custom(CustomizationSettings),
}

impl SessionSettings {
    pub fn effective(&self) -> CustomizationSettings {
        match self {
            SessionSettings::Default => CustomizationSettings::default(),
            SessionSettings::Custom(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyRatings {
    pub effectiveness: u8,
    pub enjoyment: u8,
    pub immersion: u8,
    /// Per-setting alignment, keyed by setting name.
    #[serde(default)]
    pub alignment: BTreeMap<String, u8>,
}

impl DailyRatings {
    pub fn validate(&self) -> Result<(), SchemaError> {
        let named =
            [("effectiveness", self.effectiveness), ("enjoyment", self.enjoyment), ("immersion", self.immersion)];
        let all = named
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .chain(self.alignment.iter().map(|(k, v)| (alloc::format!("alignment.{k}"), *v)));
        for (field, value) in all {
            if !(1..=5).contains(&value) {
                return Err(SchemaError::RatingOutOfRange { field, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub user_id: String,
    /// Unix milliseconds.
    pub started_at_ms: i64,
    pub video_id: String,
    pub settings: SessionSettings,
    #[serde(default)]
    pub exchanges: Vec<VqaExchange>,
    #[serde(default)]
    pub daily_ratings: Option<DailyRatings>,
}

impl SessionRecord {
    pub fn validate(&self) -> Result<(), SchemaError> {
        if let SessionSettings::Custom(s) = &self.settings {
            s.revalidate().map_err(|e| SchemaError::Settings(e.to_string()))?;
        }
        for ex in &self.exchanges {
            if ex.request.video_id != self.video_id {
                return Err(SchemaError::VideoMismatch {
                    session: self.video_id.clone(),
                    exchange: ex.request.video_id.clone(),
                });
            }
        }
        self.daily_ratings.as_ref().map_or(Ok(()), DailyRatings::validate)
    }
}

/// One journal entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Session(SessionRecord),
    Exchange { session_id: String, exchange: VqaExchange },
    Rating { session_id: String, ratings: DailyRatings },
}

impl LogEvent {
    pub fn stream(&self) -> &'static str {
        match self {
            LogEvent::Session(_) => "session",
            LogEvent::Exchange { .. } => "exchange",
            LogEvent::Rating { .. } => "rating",
        }
    }

    /// Checks that need no other events.
    pub fn validate(&self) -> Result<(), SchemaError> {
        match self {
            LogEvent::Session(s) => s.validate(),
            LogEvent::Exchange { .. } => Ok(()),
            LogEvent::Rating { ratings, .. } => ratings.validate(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InteractionLog {
    pub sessions: Vec<SessionRecord>,
}

impl InteractionLog {
    pub fn session(&self, id: &str) -> Option<&SessionRecord> {
        self.sessions.iter().find(|s| s.session_id == id)
    }

    /// Folds one event in, enforcing the cross-event invariants.
    pub fn apply(&mut self, event: LogEvent) -> Result<(), SchemaError> {
        event.validate()?;
        match event {
            LogEvent::Session(s) => {
                if self.session(&s.session_id).is_some() {
                    return Err(SchemaError::DuplicateSession(s.session_id));
                }
                self.sessions.push(s);
            }
            LogEvent::Exchange { session_id, exchange } => {
                let s = self.session_mut(&session_id)?;
                if exchange.request.video_id != s.video_id {
                    return Err(SchemaError::VideoMismatch {
                        session: s.video_id.clone(),
                        exchange: exchange.request.video_id,
                    });
                }
                s.exchanges.push(exchange);
            }
            LogEvent::Rating { session_id, ratings } => {
                self.session_mut(&session_id)?.daily_ratings = Some(ratings);
            }
        }
        Ok(())
    }

    fn session_mut(&mut self, id: &str) -> Result<&mut SessionRecord, SchemaError> {
        self.sessions.iter_mut().find(|s| s.session_id == id).ok_or_else(|| SchemaError::UnknownSession(id.to_string()))
    }

    pub fn from_events<I: IntoIterator<Item = LogEvent>>(events: I) -> Result<Self, SchemaError> {
        let mut log = Self::default();
        for e in events {
            log.apply(e)?;
        }
        Ok(log)
    }

    pub fn exchanges(&self) -> impl Iterator<Item = &VqaExchange> {
        self.sessions.iter().flat_map(|s| s.exchanges.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakdownCell {
    pub option: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub dimension: String,
    pub option: String,
    pub count: u64,
    /// Share of the dimension total, rounded half away from zero to one decimal.
    pub percent: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub breakdown: Vec<BreakdownCell>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub rows: Vec<DistributionRow>,
}

impl DistributionReport {
    pub fn total(&self, dimension: &str) -> u64 {
        self.rows.iter().filter(|r| r.dimension == dimension).map(|r| r.count).sum()
    }

    pub fn row(&self, dimension: &str, option: &str) -> Option<&DistributionRow> {
        self.rows.iter().find(|r| r.dimension == dimension && r.option == option)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// `count / total` as a percentage with one decimal, computed in integers.
pub fn percent_1dp(count: u64, total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let tenths = (count * 2000 + total) / (2 * total);
    tenths as f64 / 10.0
}

fn push_dimension(rows: &mut Vec<DistributionRow>, dimension: &str, counts: &[(String, u64)]) {
    let total: u64 = counts.iter().map(|(_, c)| c).sum();
    for (option, count) in counts {
        rows.push(DistributionRow {
            dimension: dimension.to_string(),
            option: option.clone(),
            count: *count,
            percent: percent_1dp(*count, total),
            breakdown: Vec::new(),
        });
    }
}

pub const LENGTH_BUCKETS: [(u32, u32); 4] = [(15, 25), (26, 50), (51, 75), (76, 100)];

pub fn length_bucket_label(words: u32) -> Option<String> {
    LENGTH_BUCKETS
        .iter()
        .find(|(lo, hi)| (*lo..=*hi).contains(&words))
        .map(|(lo, hi)| alloc::format!("{lo}-{hi} words"))
}

/// Per-dimension option counts over sessions that chose custom settings, in
/// a fixed row order. An empty log gives an empty report.
pub fn customization_distribution(log: &InteractionLog) -> DistributionReport {
    let custom: Vec<&CustomizationSettings> = log
        .sessions
        .iter()
        .filter_map(|s| match &s.settings {
            SessionSettings::Custom(c) => Some(c),
            SessionSettings::Default => None,
        })
        .collect();
    let mut rows = Vec::new();
    if custom.is_empty() {
        return DistributionReport { rows };
    }
    let count = |pred: &dyn Fn(&CustomizationSettings) -> bool| custom.iter().filter(|s| pred(s)).count() as u64;

    let emphasis: Vec<(String, u64)> =
        [Emphasis::General, Emphasis::Character, Emphasis::Instructional, Emphasis::Environment]
            .iter()
            .map(|&e| (e.as_str().to_string(), count(&|s| s.emphasis == e)))
            .collect();
    push_dimension(&mut rows, "emphasis", &emphasis);

    let frequency: Vec<(String, u64)> = Frequency::ALL
        .iter()
        .map(|&f| (alloc::format!("{} seconds", f.seconds()), count(&|s| s.frequency_s == f)))
        .collect();
    push_dimension(&mut rows, "frequency", &frequency);

    let used = count(&|s| !s.free_form_guidelines.is_empty());
    push_dimension(&mut rows, "free_form", &[("used".into(), used), ("none".into(), custom.len() as u64 - used)]);

    let colors: Vec<(String, u64)> = [Colors::Include, Colors::Exclude]
        .iter()
        .map(|&c| (c.as_str().to_string(), count(&|s| s.colors == c)))
        .collect();
    push_dimension(&mut rows, "color", &colors);

    let subjectivity: Vec<(String, u64)> = [Subjectivity::Objective, Subjectivity::Subjective]
        .iter()
        .map(|&v| (v.as_str().to_string(), count(&|s| s.subjectivity == v)))
        .collect();
    push_dimension(&mut rows, "subjectivity", &subjectivity);

    let length: Vec<(String, u64)> = LENGTH_BUCKETS
        .iter()
        .map(|&(lo, hi)| (alloc::format!("{lo}-{hi} words"), count(&|s| (lo..=hi).contains(&s.target_length_words))))
        .collect();
    push_dimension(&mut rows, "length", &length);

    DistributionReport { rows }
}

/// Counts per question type (types with no questions are omitted), each
/// broken down by accuracy rating where ratings exist.
pub fn question_distribution(log: &InteractionLog) -> DistributionReport {
    let mut counts: BTreeMap<QuestionType, (u64, BTreeMap<Accuracy, u64>)> = BTreeMap::new();
    for ex in log.exchanges() {
        let entry = counts.entry(ex.question_type).or_default();
        entry.0 += 1;
        if let Some(a) = ex.accuracy_rating {
            *entry.1.entry(a).or_default() += 1;
        }
    }
    let total: u64 = counts.values().map(|(c, _)| c).sum();
    let rows = QuestionType::ALL
        .iter()
        .filter_map(|q| counts.get(q).map(|v| (q, v)))
        .map(|(q, (count, acc))| DistributionRow {
            dimension: "question_type".into(),
            option: q.as_str().into(),
            count: *count,
            percent: percent_1dp(*count, total),
            breakdown: Accuracy::ALL
                .iter()
                .filter_map(|a| acc.get(a).map(|&c| BreakdownCell { option: a.as_str().into(), count: c }))
                .collect(),
        })
        .collect();
    DistributionReport { rows }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    /// 1 for the earliest day present in the log.
    pub day: u32,
    pub sessions: u64,
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
}

impl TrendPoint {
    /// Mean and SD rounded half away from zero to one decimal.
    pub fn rounded(&self) -> (f64, f64) {
        (round_1dp(self.mean), round_1dp(self.sd))
    }
}

pub fn round_1dp(x: f64) -> f64 {
    libm::round(x * 10.0) / 10.0
}

/// Calendar day number of a Unix-millisecond instant at a fixed UTC offset.
pub fn day_number(t_ms: i64, utc_offset_minutes: i32) -> i64 {
    (t_ms + utc_offset_minutes as i64 * 60_000).div_euclid(DAY_MS)
}

/// Per-day mean and population SD of chosen description length, over
/// sessions with custom settings.
pub fn length_trend(log: &InteractionLog, utc_offset_minutes: i32) -> Vec<TrendPoint> {
    let mut by_day: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for s in &log.sessions {
        if let SessionSettings::Custom(c) = &s.settings {
            by_day
                .entry(day_number(s.started_at_ms, utc_offset_minutes))
                .or_default()
                .push(c.target_length_words as f64);
        }
    }
    let Some(&first) = by_day.keys().next() else {
        return Vec::new();
    };
    by_day
        .into_iter()
        .map(|(day, xs)| {
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            TrendPoint { day: (day - first + 1) as u32, sessions: xs.len() as u64, mean, sd: libm::sqrt(var) }
        })
        .collect()
}

fn aligned(header: &[&str], body: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            s.push_str(cell);
            if i + 1 < cells.len() {
                s.extend(core::iter::repeat_n(' ', w - cell.chars().count()));
            }
        }
        s.push('\n');
        s
    };
    let mut out = line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    out.push_str(&line(&widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>()));
    for row in body {
        out.push_str(&line(row));
    }
    out
}

/// Plain-text table: type, option, `n (%)`, plus accuracy cells when present.
pub fn render_report(report: &DistributionReport) -> String {
    let with_breakdown = report.rows.iter().any(|r| !r.breakdown.is_empty())
        || report.rows.iter().any(|r| r.dimension == "question_type");
    let mut header = alloc::vec!["Type", "Option", "n (%)"];
    if with_breakdown {
        header.extend(Accuracy::ALL.iter().map(|a| a.as_str()));
    }
    let mut last_dim = "";
    let body: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let dim = if r.dimension == last_dim { String::new() } else { r.dimension.clone() };
            last_dim = &r.dimension;
            let mut row = alloc::vec![dim, r.option.clone(), alloc::format!("{} ({:.1})", r.count, r.percent)];
            if with_breakdown {
                row.extend(Accuracy::ALL.iter().map(|a| {
                    r.breakdown.iter().find(|c| c.option == a.as_str()).map(|c| c.count.to_string()).unwrap_or_default()
                }));
            }
            row
        })
        .collect();
    aligned(&header, &body)
}

pub fn render_trend(trend: &[TrendPoint]) -> String {
    let body: Vec<Vec<String>> = trend
        .iter()
        .map(|p| {
            let (m, sd) = p.rounded();
            alloc::vec![p.day.to_string(), p.sessions.to_string(), alloc::format!("{m:.1}"), alloc::format!("{sd:.1}")]
        })
        .collect();
    aligned(&["Day", "n", "Mean", "SD"], &body)
}
