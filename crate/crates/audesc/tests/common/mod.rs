#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use audesc::config::{Config, SpeechDetectorKind};
use audesc::pipeline::Pipeline;
use audesc::providers::{MockManifest, MockProvider};
use audesc::synth::{write_fixture, FixtureSpec, GroundTruth};

/// Copies a pre-decoded fixture directory into the decoder's output.
pub const COPY_DECODER: &str = "cp -R {input}/. {output}";

pub fn config(root: &Path) -> Config {
    let mut cfg = Config::default();
    cfg.ingest.decoder_cmd = COPY_DECODER.into();
    cfg.ingest.workdir = root.join("work");
    cfg.speech.detector = SpeechDetectorKind::Manifest;
    cfg.store.path = root.join("events.jsonl");
    cfg
}

pub fn fixture(root: &Path, name: &str, spec: &FixtureSpec) -> (PathBuf, GroundTruth) {
    let dir = root.join(name);
    let truth = write_fixture(spec, &dir).expect("fixture");
    (dir, truth)
}

pub fn mock_pipeline(cfg: Config, manifest: MockManifest) -> (Pipeline, Arc<MockProvider>) {
    let mock = Arc::new(MockProvider::new(manifest));
    (Pipeline::new(cfg, mock.clone()), mock)
}

/// 24 s, no speech, one cut per 6 s: frames at 1 s give dense candidates.
pub fn quiet_spec() -> FixtureSpec {
    FixtureSpec { duration_s: 24.0, cuts: vec![6.0, 12.0, 18.0], ..FixtureSpec::default() }
}

use audesc_core::analytics::{LogEvent, SessionRecord, SessionSettings};
use audesc_core::customization::{Colors, CustomizationSettings, Emphasis, Subjectivity};
use audesc_core::vqa::{InputMode, QuestionType, VqaExchange, VqaRequest};
use audesc_core::Frequency;

pub const DAY_MS: i64 = 86_400_000;

/// Picks the option whose cumulative count first exceeds `i`.
fn nth<T: Copy>(i: usize, counts: &[(T, usize)]) -> T {
    let mut acc = 0;
    for &(v, n) in counts {
        acc += n;
        if i < acc {
            return v;
        }
    }
    panic!("index {i} past the counts");
}

pub fn session(id: &str, video: &str, at_ms: i64, settings: SessionSettings) -> SessionRecord {
    SessionRecord {
        session_id: id.into(),
        user_id: "p1".into(),
        started_at_ms: at_ms,
        video_id: video.into(),
        settings,
        exchanges: Vec::new(),
        daily_ratings: None,
    }
}

/// 51 custom sessions with fixed per-option counts, plus default-preset
/// sessions that must not count.
pub fn customization_study_events() -> Vec<LogEvent> {
    let mut out = Vec::new();
    for i in 0..51 {
        let s = CustomizationSettings {
            emphasis: nth(
                i,
                &[
                    (Emphasis::General, 27),
                    (Emphasis::Character, 15),
                    (Emphasis::Instructional, 6),
                    (Emphasis::Environment, 3),
                ],
            ),
            frequency_s: nth(i, &[(Frequency::Frequent, 28), (Frequency::Moderate, 22), (Frequency::Sparse, 1)]),
            colors: nth((i + 7) % 51, &[(Colors::Include, 41), (Colors::Exclude, 10)]),
            subjectivity: nth((i + 13) % 51, &[(Subjectivity::Objective, 37), (Subjectivity::Subjective, 14)]),
            target_length_words: nth((i + 29) % 51, &[(20, 21), (40, 25), (60, 2), (90, 3)]),
            free_form_guidelines: if (i * 5) % 51 < 12 { "Include character names".into() } else { String::new() },
        };
        out.push(LogEvent::Session(session(
            &format!("t{i}"),
            &format!("v{i}"),
            i as i64 * 1000,
            SessionSettings::Custom(s),
        )));
    }
    for i in 0..4 {
        out.push(LogEvent::Session(session(&format!("d{i}"), "vd", 0, SessionSettings::Default)));
    }
    out
}

pub const FIRST_DAY_LENGTHS: [u32; 10] = [19, 22, 33, 34, 40, 50, 51, 72, 75, 81];
pub const LAST_DAY_LENGTHS: [u32; 10] = [18, 23, 24, 26, 29, 30, 42, 43, 46, 52];

/// Sessions on day one and day seven of a week.
pub fn trend_events() -> Vec<LogEvent> {
    let mut out = Vec::new();
    for (day, lengths) in [(0i64, FIRST_DAY_LENGTHS), (6, LAST_DAY_LENGTHS)] {
        for (k, &len) in lengths.iter().enumerate() {
            let s = CustomizationSettings { target_length_words: len, ..CustomizationSettings::default() };
            let at = 20_000 * DAY_MS + day * DAY_MS + 3_600_000 * (k as i64 + 8);
            out.push(LogEvent::Session(session(&format!("w{day}-{k}"), "v", at, SessionSettings::Custom(s))));
        }
    }
    out
}

/// `n` exchanges spread over three sessions and every question type.
pub fn exchange_events(n: usize) -> Vec<LogEvent> {
    let mut out: Vec<LogEvent> = (0..3)
        .map(|k| LogEvent::Session(session(&format!("q{k}"), &format!("qv{k}"), 0, SessionSettings::Default)))
        .collect();
    for i in 0..n {
        let k = i % 3;
        out.push(LogEvent::Exchange {
            session_id: format!("q{k}"),
            exchange: VqaExchange {
                request: VqaRequest {
                    video_id: format!("qv{k}"),
                    t_s: i as f64,
                    question: format!("question {i}"),
                    input_mode: InputMode::Spoken,
                },
                answer: "answer".into(),
                question_type: QuestionType::ALL[i % 7],
                accuracy_rating: None,
                asked_at_ms: i as i64,
                hint: None,
                error: None,
            },
        });
    }
    out
}

pub fn write_log(path: &Path, events: Vec<LogEvent>) {
    let store = audesc::store::Store::open(path).expect("store");
    for e in events {
        store.record(e).expect("record");
    }
}
