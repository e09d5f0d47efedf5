//! The six user-facing AD parameters, their validation, and the mapping onto
//! prompt substitution strings.
//!
//! The default preset (what a viewer gets without touching any control) is
//! 50 words, general emphasis, objective style, colors included. The default
//! frequency of 15 s is our own choice of the middle option.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::templates;

pub const MIN_LENGTH_WORDS: u32 = 15;
pub const MAX_LENGTH_WORDS: u32 = 100;
pub const DEFAULT_LENGTH_WORDS: u32 = 50;
pub const MAX_GUIDELINES_CHARS: usize = 500;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SettingsError {
    #[error("{field} out of range: {value}")]
    OutOfRange { field: &'static str, value: String },
    #[error("unknown option for {field}: {value:?}")]
    UnknownOption { field: &'static str, value: String },
    #[error("unknown settings key {0:?}")]
    UnknownKey(String),
    #[error("free-form guidelines exceed {MAX_GUIDELINES_CHARS} characters ({0})")]
    OversizeGuidelines(usize),
    #[error("{field} has the wrong type")]
    WrongType { field: &'static str },
}

/// Upper bound on the spacing between consecutive descriptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Frequency {
    Frequent,
    Moderate,
    Sparse,
}

impl Frequency {
    pub const ALL: [Frequency; 3] = [Frequency::Frequent, Frequency::Moderate, Frequency::Sparse];

    pub fn seconds(self) -> u32 {
        match self {
            Frequency::Frequent => 8,
            Frequency::Moderate => 15,
            Frequency::Sparse => 30,
        }
    }

    pub fn from_seconds(s: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.seconds() == s)
    }
}

impl TryFrom<u32> for Frequency {
    type Error = SettingsError;
    fn try_from(s: u32) -> Result<Self, Self::Error> {
        Self::from_seconds(s).ok_or(SettingsError::UnknownOption { field: "frequency_s", value: s.to_string() })
    }
}

impl From<Frequency> for u32 {
    fn from(f: Frequency) -> u32 {
        f.seconds()
    }
}

macro_rules! option_enum {
    ($(#[$m:meta])* $name:ident, $field:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = SettingsError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(SettingsError::UnknownOption {
                        field: $field,
                        value: other.to_string(),
                    }),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

option_enum!(
    /// Which visual aspects descriptions prioritize.
    Emphasis, "emphasis" {
        General => "general",
        Character => "character",
        Environment => "environment",
        Instructional => "instructional",
    }
);

option_enum!(Subjectivity, "subjectivity" {
    Objective => "objective",
    Subjective => "subjective",
});

option_enum!(Colors, "colors" {
    Include => "include",
    Exclude => "exclude",
});

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomizationSettings {
    pub frequency_s: Frequency,
    pub target_length_words: u32,
    pub emphasis: Emphasis,
    pub subjectivity: Subjectivity,
    pub colors: Colors,
    #[serde(default)]
    pub free_form_guidelines: String,
}

impl Default for CustomizationSettings {
    fn default() -> Self {
        Self {
            frequency_s: Frequency::Moderate,
            target_length_words: DEFAULT_LENGTH_WORDS,
            emphasis: Emphasis::General,
            subjectivity: Subjectivity::Objective,
            colors: Colors::Include,
            free_form_guidelines: String::new(),
        }
    }
}

/// One loosely typed input value, as it arrives from a form, query string, or document.
#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Number(f64),
    Text(String),
    Null,
}

impl From<&str> for RawValue {
    fn from(s: &str) -> Self {
        RawValue::Text(s.to_string())
    }
}

impl From<f64> for RawValue {
    fn from(n: f64) -> Self {
        RawValue::Number(n)
    }
}

impl From<&serde_json::Value> for RawValue {
    fn from(v: &serde_json::Value) -> Self {
        match v {
            serde_json::Value::Null => RawValue::Null,
            serde_json::Value::Number(n) => RawValue::Number(n.as_f64().unwrap_or(f64::NAN)),
            serde_json::Value::String(s) => RawValue::Text(s.clone()),
            other => RawValue::Text(other.to_string()),
        }
    }
}

impl RawValue {
    fn as_integer(&self, field: &'static str) -> Result<i64, SettingsError> {
        let n = match self {
            RawValue::Number(n) => *n,
            RawValue::Text(s) => {
                s.trim().trim_end_matches('s').parse::<f64>().map_err(|_| SettingsError::WrongType { field })?
            }
            RawValue::Null => return Err(SettingsError::WrongType { field }),
        };
        if !n.is_finite() || libm::trunc(n) != n {
            return Err(SettingsError::OutOfRange { field, value: alloc::format!("{n}") });
        }
        Ok(n as i64)
    }

    fn as_text(&self, field: &'static str) -> Result<&str, SettingsError> {
        match self {
            RawValue::Text(s) => Ok(s),
            _ => Err(SettingsError::WrongType { field }),
        }
    }
}

/// Validate a raw key-value input; missing keys take the default preset.
///
/// `frequency` and `length` are accepted as short aliases of `frequency_s`
/// and `target_length_words`, and `free_form` of `free_form_guidelines`.
/// A `null` value means "use the default".
pub fn validate<K, I>(raw: I) -> Result<CustomizationSettings, SettingsError>
where
    K: AsRef<str>,
    I: IntoIterator<Item = (K, RawValue)>,
{
    let mut s = CustomizationSettings::default();
    for (key, value) in raw {
        if value == RawValue::Null {
            match canonical_key(key.as_ref()) {
                Some(_) => continue,
                None => return Err(SettingsError::UnknownKey(key.as_ref().to_string())),
            }
        }
        match canonical_key(key.as_ref()) {
            Some("frequency_s") => {
                let n = value.as_integer("frequency_s")?;
                s.frequency_s = u32::try_from(n)
                    .ok()
                    .and_then(Frequency::from_seconds)
                    .ok_or(SettingsError::UnknownOption { field: "frequency_s", value: n.to_string() })?;
            }
            Some("target_length_words") => {
                let n = value.as_integer("target_length_words")?;
                if !(MIN_LENGTH_WORDS as i64..=MAX_LENGTH_WORDS as i64).contains(&n) {
                    return Err(SettingsError::OutOfRange { field: "target_length_words", value: n.to_string() });
                }
                s.target_length_words = n as u32;
            }
            Some("emphasis") => s.emphasis = value.as_text("emphasis")?.trim().parse()?,
            Some("subjectivity") => s.subjectivity = value.as_text("subjectivity")?.trim().parse()?,
            Some("colors") => s.colors = value.as_text("colors")?.trim().parse()?,
            Some("free_form_guidelines") => {
                s.free_form_guidelines = normalize_guidelines(value.as_text("free_form_guidelines")?)?;
            }
            _ => return Err(SettingsError::UnknownKey(key.as_ref().to_string())),
        }
    }
    Ok(s)
}

/// Validate a structured settings document (a JSON object).
pub fn validate_json(value: &serde_json::Value) -> Result<CustomizationSettings, SettingsError> {
    match value {
        serde_json::Value::Object(map) => validate(map.iter().map(|(k, v)| (k.as_str(), RawValue::from(v)))),
        serde_json::Value::Null => Ok(CustomizationSettings::default()),
        _ => Err(SettingsError::WrongType { field: "settings" }),
    }
}

fn canonical_key(key: &str) -> Option<&'static str> {
    Some(match key {
        "frequency_s" | "frequency" => "frequency_s",
        "target_length_words" | "length" => "target_length_words",
        "emphasis" => "emphasis",
        "subjectivity" => "subjectivity",
        "colors" | "color" => "colors",
        "free_form_guidelines" | "free_form" => "free_form_guidelines",
        _ => return None,
    })
}

fn normalize_guidelines(text: &str) -> Result<String, SettingsError> {
    let cleaned: String = text
        .chars()
        .filter_map(|c| match c {
            c if c.is_control() && c.is_whitespace() => Some(' '),
            c if c.is_control() => None,
            c => Some(c),
        })
        .collect();
    let cleaned = cleaned.trim().to_string();
    let n = cleaned.chars().count();
    if n > MAX_GUIDELINES_CHARS {
        return Err(SettingsError::OversizeGuidelines(n));
    }
    Ok(cleaned)
}

impl CustomizationSettings {
    /// Re-run validation over this value's own fields.
    pub fn revalidate(&self) -> Result<Self, SettingsError> {
        validate(self.to_raw())
    }

    pub fn to_raw(&self) -> BTreeMap<String, RawValue> {
        let mut m = BTreeMap::new();
        m.insert("frequency_s".into(), RawValue::Number(self.frequency_s.seconds() as f64));
        m.insert("target_length_words".into(), RawValue::Number(self.target_length_words as f64));
        m.insert("emphasis".into(), RawValue::Text(self.emphasis.as_str().into()));
        m.insert("subjectivity".into(), RawValue::Text(self.subjectivity.as_str().into()));
        m.insert("colors".into(), RawValue::Text(self.colors.as_str().into()));
        m.insert("free_form_guidelines".into(), RawValue::Text(self.free_form_guidelines.clone()));
        m
    }

    /// Inclusive word-count band accepted for a single description.
    pub fn length_band(&self) -> (f64, f64) {
        let target = self.target_length_words as f64;
        (0.5 * target, 1.5 * target)
    }
}

/// Substitution strings for the AD generation template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptParams {
    pub target_length: String,
    pub emphasis: String,
    pub subjectivity: String,
    pub color_preferences: String,
    pub free_form: String,
}

pub fn to_prompt_params(settings: &CustomizationSettings) -> PromptParams {
    let t = templates::fragments();
    PromptParams {
        target_length: settings.target_length_words.to_string(),
        emphasis: t.emphasis(settings.emphasis).to_string(),
        subjectivity: t.subjectivity(settings.subjectivity).to_string(),
        color_preferences: t.color(settings.colors).to_string(),
        free_form: settings.free_form_guidelines.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn raw(pairs: &[(&str, RawValue)]) -> Vec<(String, RawValue)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn empty_input_is_default_preset() {
        let s = validate(Vec::<(String, RawValue)>::new()).unwrap();
        assert_eq!(s.target_length_words, 50);
        assert_eq!(s.emphasis, Emphasis::General);
        assert_eq!(s.subjectivity, Subjectivity::Objective);
        assert_eq!(s.colors, Colors::Include);
        assert_eq!(s.frequency_s, Frequency::Moderate);
        assert!(s.free_form_guidelines.is_empty());
    }

    #[test]
    fn length_bounds() {
        for bad in [7.0, 150.0, 14.0, 101.0] {
            let e = validate(raw(&[("length", RawValue::Number(bad))])).unwrap_err();
            assert!(matches!(e, SettingsError::OutOfRange { .. }), "{bad}: {e:?}");
        }
        for ok in [15.0, 100.0] {
            assert!(validate(raw(&[("length", RawValue::Number(ok))])).is_ok());
        }
        let e = validate(raw(&[("length", RawValue::Number(50.5))])).unwrap_err();
        assert!(matches!(e, SettingsError::OutOfRange { .. }));
    }

    #[test]
    fn accepted_verbatim_with_defaults() {
        let s = validate(raw(&[
            ("frequency", RawValue::Number(30.0)),
            ("emphasis", "instructional".into()),
            ("colors", "exclude".into()),
        ]))
        .unwrap();
        assert_eq!(
            s,
            CustomizationSettings {
                frequency_s: Frequency::Sparse,
                emphasis: Emphasis::Instructional,
                colors: Colors::Exclude,
                ..Default::default()
            }
        );
    }

    #[test]
    fn unknown_options_and_keys() {
        let e = validate(raw(&[("emphasis", "scenery".into())])).unwrap_err();
        assert!(matches!(e, SettingsError::UnknownOption { field: "emphasis", .. }));
        let e = validate(raw(&[("frequency", RawValue::Number(10.0))])).unwrap_err();
        assert!(matches!(e, SettingsError::UnknownOption { .. }));
        let e = validate(raw(&[("volume", RawValue::Number(1.0))])).unwrap_err();
        assert_eq!(e, SettingsError::UnknownKey("volume".into()));
    }

    #[test]
    fn guidelines_are_capped_and_stripped() {
        let long = "a".repeat(501);
        let e = validate(raw(&[("free_form", RawValue::Text(long))])).unwrap_err();
        assert_eq!(e, SettingsError::OversizeGuidelines(501));
        let s = validate(raw(&[("free_form", "  Include\u{0007} character\nnames ".into())])).unwrap();
        assert_eq!(s.free_form_guidelines, "Include character names");
    }

    #[test]
    fn frequency_accepts_suffixed_text() {
        let s = validate(raw(&[("frequency", "8s".into())])).unwrap();
        assert_eq!(s.frequency_s, Frequency::Frequent);
    }

    #[test]
    fn prompt_params_fragments() {
        let s = CustomizationSettings {
            subjectivity: Subjectivity::Objective,
            colors: Colors::Exclude,
            emphasis: Emphasis::Instructional,
            ..Default::default()
        };
        let p = to_prompt_params(&s);
        assert!(p.subjectivity.starts_with("Maintain strict factual neutrality"));
        assert!(p.color_preferences.contains("Omit ALL color information"));
        assert!(p.emphasis.starts_with("Prioritize the main plot or instructional"));
        assert_eq!(p.target_length, "50");
        let s = CustomizationSettings { colors: Colors::Include, ..s };
        assert_eq!(to_prompt_params(&s).color_preferences, "");
    }

    #[test]
    fn json_document_round_trip() {
        let s = CustomizationSettings {
            frequency_s: Frequency::Frequent,
            target_length_words: 25,
            emphasis: Emphasis::Character,
            subjectivity: Subjectivity::Subjective,
            colors: Colors::Exclude,
            free_form_guidelines: "Include character names".into(),
        };
        let doc = serde_json::to_value(&s).unwrap();
        assert_eq!(doc["frequency_s"], serde_json::json!(8));
        assert_eq!(validate_json(&doc).unwrap(), s);
        assert_eq!(validate_json(&serde_json::Value::Null).unwrap(), CustomizationSettings::default());
    }
}
