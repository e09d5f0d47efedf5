//! Service configuration: a TOML file overlaid with `AUDESC_*` environment variables.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Decoder used when none is configured; see `scripts/ffmpeg-decode.sh`.
pub const DEFAULT_DECODER_CMD: &str = "sh scripts/ffmpeg-decode.sh {kind} {input} {output} {sample_rate} {period}";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub server: ServerConfig,
    pub ingest: IngestConfig,
    pub speech: SpeechConfig,
    pub provider: ProviderConfig,
    pub store: StoreConfig,
    pub analytics: AnalyticsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { bind: "127.0.0.1:8080".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    /// Placeholders: `{kind}` (probe, audio, frames), `{input}`, `{output}`,
    /// `{sample_rate}`, `{period}`.
    pub decoder_cmd: String,
    /// Placeholders: `{url}`, `{output}`. URLs are rejected when unset.
    pub resolver_cmd: Option<String>,
    pub sample_rate_hz: u32,
    pub frame_period_s: f64,
    pub workdir: PathBuf,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            decoder_cmd: DEFAULT_DECODER_CMD.into(),
            resolver_cmd: None,
            sample_rate_hz: 16_000,
            frame_period_s: 1.0,
            workdir: std::env::temp_dir().join("audesc"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeechDetectorKind {
    /// Energy and modulation heuristic.
    Builtin,
    /// Replays `speech` labels from a fixture's `manifest.json`.
    Manifest,
    /// Runs `speech.cmd`.
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeechConfig {
    pub detector: SpeechDetectorKind,
    /// Placeholder `{input}` (a mono WAV path). Must print `[[start, end], ...]` in seconds.
    pub cmd: Option<String>,
}

impl Default for SpeechConfig {
    fn default() -> Self {
        Self { detector: SpeechDetectorKind::Builtin, cmd: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    pub credential_env: Option<String>,
    pub model: String,
    pub generation_timeout_ms: u64,
    pub vqa_timeout_ms: u64,
    pub mock_manifest: Option<PathBuf>,
    pub max_concurrency: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Mock,
            endpoint: None,
            credential_env: None,
            model: "mock".into(),
            generation_timeout_ms: audesc_core::gateway::DEFAULT_GENERATION_TIMEOUT_MS,
            vqa_timeout_ms: audesc_core::gateway::DEFAULT_VQA_TIMEOUT_MS,
            mock_manifest: None,
            max_concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreConfig {
    /// Append-only event journal.
    pub path: PathBuf,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self { path: PathBuf::from("audesc-events.jsonl") }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsConfig {
    /// Fixed offset used to bucket sessions into days.
    pub utc_offset_minutes: i32,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("environment variable {name}: {reason}")]
    Env { name: &'static str, reason: String },
}

impl Config {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })
    }

    /// File (if given) then environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.to_path_buf(), source })?;
                Self::from_toml_str(&text, p)?
            }
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(name: &'static str, v: &str) -> Result<T, ConfigError> {
            v.parse().map_err(|_| ConfigError::Env { name, reason: format!("cannot parse {v:?}") })
        }
        if let Some(v) = get("AUDESC_BIND") {
            self.server.bind = v;
        }
        if let Some(v) = get("AUDESC_PORT") {
            let port: u16 = parse("AUDESC_PORT", &v)?;
            let host = self.server.bind.rsplit_once(':').map_or("127.0.0.1", |(h, _)| h).to_string();
            self.server.bind = format!("{host}:{port}");
        }
        if let Some(v) = get("AUDESC_PROVIDER") {
            self.provider.kind = match v.as_str() {
                "mock" => ProviderKind::Mock,
                "http" => ProviderKind::Http,
                _ => {
                    return Err(ConfigError::Env {
                        name: "AUDESC_PROVIDER",
                        reason: format!("expected mock or http, got {v:?}"),
                    })
                }
            };
        }
        if let Some(v) = get("AUDESC_PROVIDER_ENDPOINT") {
            self.provider.endpoint = Some(v);
        }
        if let Some(v) = get("AUDESC_MODEL") {
            self.provider.model = v;
        }
        if let Some(v) = get("AUDESC_MOCK_MANIFEST") {
            self.provider.mock_manifest = Some(v.into());
        }
        if let Some(v) = get("AUDESC_STORE_PATH") {
            self.store.path = v.into();
        }
        if let Some(v) = get("AUDESC_WORKDIR") {
            self.ingest.workdir = v.into();
        }
        if let Some(v) = get("AUDESC_DECODER_CMD") {
            self.ingest.decoder_cmd = v;
        }
        if let Some(v) = get("AUDESC_RESOLVER_CMD") {
            self.ingest.resolver_cmd = Some(v);
        }
        Ok(())
    }
}
