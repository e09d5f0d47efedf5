//! Verbatim prompt assets compiled into the crate.
//!
//! Each file under `templates/` is one asset. Dictionary files hold one
//! `key|text` pair per line.

use alloc::string::String;
use alloc::vec::Vec;

use crate::customization::{Colors, Emphasis, Subjectivity};

pub const AD_PROMPT: &str = include_str!("../templates/ad_prompt.txt");
pub const GENERAL_GUIDELINES: &str = include_str!("../templates/general_guidelines.txt");
pub const SUBJECTIVITY: &str = include_str!("../templates/subjectivity.txt");
pub const COLOR_PREFERENCES: &str = include_str!("../templates/color_preferences.txt");
pub const EMPHASIS: &str = include_str!("../templates/emphasis.txt");
pub const VQA_PROMPT: &str = include_str!("../templates/vqa_prompt.txt");
pub const CODEBOOK: &str = include_str!("../templates/codebook.txt");
pub const QUESTION_RULES: &str = include_str!("../templates/question_rules.txt");

/// Every asset with its file name, for auditing.
pub const ALL: [(&str, &str); 8] = [
    ("ad_prompt.txt", AD_PROMPT),
    ("general_guidelines.txt", GENERAL_GUIDELINES),
    ("subjectivity.txt", SUBJECTIVITY),
    ("color_preferences.txt", COLOR_PREFERENCES),
    ("emphasis.txt", EMPHASIS),
    ("vqa_prompt.txt", VQA_PROMPT),
    ("codebook.txt", CODEBOOK),
    ("question_rules.txt", QUESTION_RULES),
];

pub(crate) fn data_lines(text: &'static str) -> impl Iterator<Item = &'static str> {
    text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
}

fn dictionary_entry(dict: &'static str, key: &str) -> &'static str {
    data_lines(dict)
        .filter_map(|l| l.split_once('|'))
        .find(|(k, _)| *k == key)
        .map(|(_, v)| v)
        .unwrap_or_else(|| panic!("template dictionary is missing key {key:?}"))
}

/// Lookup into the customization dictionaries.
#[derive(Debug, Clone, Copy)]
pub struct Fragments;

pub fn fragments() -> Fragments {
    Fragments
}

impl Fragments {
    pub fn emphasis(self, e: Emphasis) -> &'static str {
        dictionary_entry(EMPHASIS, e.as_str())
    }

    pub fn subjectivity(self, s: Subjectivity) -> &'static str {
        dictionary_entry(SUBJECTIVITY, s.as_str())
    }

    pub fn color(self, c: Colors) -> &'static str {
        dictionary_entry(COLOR_PREFERENCES, c.as_str())
    }
}

/// The numbered general AD guidelines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuidelineSet {
    entries: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GuidelineError {
    #[error("expected 42 guidelines, found {0}")]
    WrongCount(usize),
    #[error("guideline at position {position} is numbered {found:?}")]
    BadNumbering { position: usize, found: String },
}

pub const GUIDELINE_COUNT: usize = 42;

impl GuidelineSet {
    pub fn standard() -> Self {
        Self::parse(GENERAL_GUIDELINES).expect("bundled guidelines are well formed")
    }

    /// Parse `N. text` lines, requiring exactly 42 entries numbered 1..=42.
    pub fn parse(text: &str) -> Result<Self, GuidelineError> {
        let entries: Vec<String> = text.lines().filter(|l| !l.trim().is_empty()).map(String::from).collect();
        if entries.len() != GUIDELINE_COUNT {
            return Err(GuidelineError::WrongCount(entries.len()));
        }
        for (i, e) in entries.iter().enumerate() {
            let number = e.split_once(". ").map(|(n, _)| n).unwrap_or("");
            if number.parse::<usize>().ok() != Some(i + 1) {
                return Err(GuidelineError::BadNumbering { position: i + 1, found: number.into() });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    /// Newline-joined block substituted into the generation prompt.
    pub fn block(&self) -> String {
        self.entries.join("\n")
    }
}
