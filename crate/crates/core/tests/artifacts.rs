use audesc_core::analytics::{
    customization_distribution, question_distribution, InteractionLog, SessionRecord, SessionSettings,
};
use audesc_core::customization::{to_prompt_params, Colors, CustomizationSettings, Emphasis, Subjectivity};
use audesc_core::gateway::{Description, VideoMetadata};
use audesc_core::prompt::{build_ad_prompt, placeholders};
use audesc_core::templates::{self, GuidelineSet};
use audesc_core::timing::{PlanPoint, TimestampPlan};
use audesc_core::track::{parse_structured, schedule, serialize, AdTrack, TrackFormat};
use audesc_core::vqa::{InputMode, QuestionType, VqaExchange, VqaRequest};
use audesc_core::Frequency;
use proptest::prelude::*;
use sha2::{Digest, Sha256};

const TEMPLATE_HASHES: [(&str, &str); 8] = [
    ("ad_prompt.txt", "b17bb8c107bd2034657b9f49f7d5ca9fc33f5b810d6a2a71099f218a4cdbaec4"),
    ("general_guidelines.txt", "df7b7047e9fbcbb361c5ee23b3cf3ba58e8a8a006195d9e4fae5731bd821750f"),
    ("subjectivity.txt", "88373595836bbdc980ba96dbe3a20e3f9656c2c200bb861bc43e126a9409d36b"),
    ("color_preferences.txt", "e4fb42f5a91b72b7757e507adec5fa3bd61d7b50d499a89b8674b70174710b44"),
    ("emphasis.txt", "24c066b5857686187d21468e56ca31896cd151cf11363fbdd041d4bb5a84bacb"),
    ("vqa_prompt.txt", "ebf521644f9d7ced5730e5dfdb0273d2dae7ac3177574134bf09fd742710d46f"),
    ("codebook.txt", "33720cb2ff909bc56ed9276f3e3f2af5c70e4817dcad429fed72bfe1596a2d30"),
    ("question_rules.txt", "b86252f14532b5bd3d86622246e17301552bdfb1b06431fb01d626d7f8805ae0"),
];

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn template_assets_match_checked_in_hashes() {
    for (name, want) in TEMPLATE_HASHES {
        let (_, text) = templates::ALL.iter().find(|(n, _)| *n == name).unwrap();
        assert_eq!(hex(text.as_bytes()), want, "{name}");
    }
}

fn plan(times: &[f64]) -> TimestampPlan {
    TimestampPlan {
        points: times.iter().map(|&t| PlanPoint { t_s: t, score: 1.0, provenance: Default::default() }).collect(),
        frequency_s: Frequency::Frequent,
        duration_s: 60.0,
    }
}

#[test]
fn settings_grid_renders_cleanly() {
    let p = plan(&[0.0, 6.5, 12.25, 30.0]);
    let block = GuidelineSet::standard().block();
    let mut n = 0;
    for &emphasis in Emphasis::ALL {
        for &subjectivity in Subjectivity::ALL {
            for &colors in Colors::ALL {
                for f in Frequency::ALL {
                    for len in 15..=100 {
                        let s = CustomizationSettings {
                            frequency_s: f,
                            target_length_words: len,
                            emphasis,
                            subjectivity,
                            colors,
                            free_form_guidelines: String::new(),
                        };
                        let b = build_ad_prompt(&to_prompt_params(&s), &p, &GuidelineSet::standard(), &[]).unwrap();
                        if len == 15 || len == 100 {
                            assert!(placeholders(&b.text).is_empty());
                            assert_eq!(b.text.matches(&block).count(), 1);
                            let stamped: Vec<&str> = b.text.lines().filter(|l| l.contains("6.500")).collect();
                            assert_eq!(stamped, ["    0.000, 6.500, 12.250, 30.000"]);
                            assert_eq!(
                                b,
                                build_ad_prompt(&to_prompt_params(&s), &p, &GuidelineSet::standard(), &[]).unwrap()
                            );
                        }
                        n += 1;
                    }
                }
            }
        }
    }
    assert_eq!(n, 4 * 2 * 2 * 3 * 86);
}

fn arb_text() -> impl Strategy<Value = String> {
    prop::collection::vec("[A-Za-z0-9,.'!?&<>-]{1,12}", 1..30).prop_map(|w| w.join(" "))
}

fn arb_track() -> impl Strategy<Value = AdTrack> {
    (
        prop::collection::btree_set(0u32..600_000, 0..12),
        prop::collection::vec(arb_text(), 12),
        15u32..=100,
        any::<bool>(),
    )
        .prop_map(|(starts, texts, len, exclude)| {
            let descriptions: Vec<Description> = starts
                .iter()
                .zip(texts)
                .map(|(&ms, text)| Description { start_s: ms as f64 / 1000.0 + 1.0 / 3.0, text })
                .collect();
            let times: Vec<f64> = descriptions.iter().map(|d| d.start_s).collect();
            let settings = CustomizationSettings {
                target_length_words: len,
                colors: if exclude { Colors::Exclude } else { Colors::Include },
                ..Default::default()
            };
            AdTrack::from_metadata(&VideoMetadata { video_id: "vid".into(), descriptions }, &settings, &plan(&times))
        })
}

fn exchange(video: &str, q: QuestionType) -> VqaExchange {
    VqaExchange {
        request: VqaRequest { video_id: video.into(), t_s: 1.0, question: "q".into(), input_mode: InputMode::Spoken },
        answer: "a".into(),
        question_type: q,
        accuracy_rating: None,
        asked_at_ms: 0,
        hint: None,
        error: None,
    }
}

proptest! {
    #[test]
    fn structured_round_trip_is_identity(t in arb_track()) {
        let bytes = serialize(&t, TrackFormat::Structured).unwrap();
        prop_assert_eq!(parse_structured(&bytes).unwrap(), t);
    }

    #[test]
    fn faster_speech_never_ends_later(t in arb_track(), r1 in 1.0f64..=6.0, r2 in 1.0f64..=6.0) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let (a, b) = (schedule(&t, lo).unwrap(), schedule(&t, hi).unwrap());
        for (x, y) in a.items.iter().zip(&b.items) {
            prop_assert!(y.est_end_s <= x.est_end_s);
        }
    }

    #[test]
    fn overlap_flags_match_brute_force(t in arb_track(), rate in 1.0f64..=6.0) {
        let s = schedule(&t, rate).unwrap();
        for (i, item) in s.items.iter().enumerate() {
            let c = &t.cues[i];
            prop_assert_eq!(item.est_end_s, c.start_s + c.word_count as f64 / rate);
            let expect = t.cues.get(i + 1).is_some_and(|n| item.est_end_s > n.start_s);
            prop_assert_eq!(item.overlap, expect);
        }
    }

    #[test]
    fn distributions_equal_raw_recounts(
        picks in prop::collection::vec((0usize..4, 0usize..3, 15u32..=100, any::<bool>(), 0usize..8, 0usize..4), 0..60)
    ) {
        let mut log = InteractionLog::default();
        let mut raw_q = [0u64; 8];
        for (i, &(e, f, len, default, q, nq)) in picks.iter().enumerate() {
            let settings = if default {
                SessionSettings::Default
            } else {
                SessionSettings::Custom(CustomizationSettings {
                    emphasis: Emphasis::ALL[e],
                    frequency_s: Frequency::ALL[f],
                    target_length_words: len,
                    ..Default::default()
                })
            };
            let video = format!("v{i}");
            log.sessions.push(SessionRecord {
                session_id: format!("s{i}"),
                user_id: "u".into(),
                started_at_ms: 0,
                video_id: video.clone(),
                settings,
                exchanges: (0..nq).map(|_| exchange(&video, QuestionType::ALL[q])).collect(),
                daily_ratings: None,
            });
            raw_q[q] += nq as u64;
        }
        let custom: Vec<&SessionRecord> = log.sessions.iter().filter(|s| matches!(s.settings, SessionSettings::Custom(_))).collect();
        let report = customization_distribution(&log);
        for &e in Emphasis::ALL {
            let raw = custom.iter().filter(|s| s.settings.effective().emphasis == e).count() as u64;
            prop_assert_eq!(report.row("emphasis", e.as_str()).map_or(0, |r| r.count), raw);
        }
        for f in Frequency::ALL {
            let raw = custom.iter().filter(|s| s.settings.effective().frequency_s == f).count() as u64;
            prop_assert_eq!(report.row("frequency", &format!("{} seconds", f.seconds())).map_or(0, |r| r.count), raw);
        }
        for dim in ["emphasis", "frequency", "color", "subjectivity", "length", "free_form"] {
            let sum: f64 = report.rows.iter().filter(|r| r.dimension == dim).map(|r| r.percent).sum();
            prop_assert!(custom.is_empty() || (sum - 100.0).abs() <= 0.2 + 1e-9, "{} sums to {}", dim, sum);
        }
        let qr = question_distribution(&log);
        for (i, q) in QuestionType::ALL.iter().enumerate() {
            prop_assert_eq!(qr.row("question_type", q.as_str()).map_or(0, |r| r.count), raw_q[i]);
        }
    }
}
