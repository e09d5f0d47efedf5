use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use audesc::config::Config;
use audesc::ingest::VideoRef;
use audesc::pipeline::{Pipeline, PipelineError};
use audesc::providers;
use audesc::server::{self, AppState};
use audesc::store::{read_log, Store};
use audesc::synth::{self, FixtureSpec};
use audesc_core::analytics::{
    customization_distribution, length_trend, question_distribution, render_report, render_trend,
};
use audesc_core::customization::{validate_json, CustomizationSettings};
use audesc_core::track::{serialize, TrackFormat};
use clap::{Parser, Subcommand, ValueEnum};

/// Exit status for bad arguments, settings or specs.
const EXIT_USAGE: u8 = 2;
/// Exit status for pipeline failures; stderr carries a JSON error.
const EXIT_FAILURE: u8 = 1;

#[derive(Parser)]
#[command(name = "audesc", version, about = "Audio descriptions for video: generation, Q&A, analytics")]
struct Cli {
    /// TOML configuration file; AUDESC_* variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
    /// Generate an AD track for one video.
    Generate {
        #[arg(long)]
        source: String,
        /// JSON or TOML customization document; defaults apply when omitted.
        #[arg(long)]
        settings_file: Option<PathBuf>,
        /// Structured track output.
        #[arg(long, required_unless_present = "dry_run")]
        out: Option<PathBuf>,
        /// Also write WebVTT here.
        #[arg(long)]
        vtt: Option<PathBuf>,
        /// Print the rendered prompt and stop.
        #[arg(long)]
        dry_run: bool,
    },
    /// Print the rendered generation prompt for a video.
    Prompt {
        #[arg(long)]
        source: String,
        #[arg(long)]
        settings_file: Option<PathBuf>,
    },
    /// Write a synthetic pre-decoded fixture with ground truth.
    SynthFixture {
        /// JSON spec; an empty spec gives a silent black 10 s clip.
        #[arg(long, conflicts_with = "random_seed")]
        spec: Option<PathBuf>,
        #[arg(long)]
        random_seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reports over an event journal.
    Analyze {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, value_enum)]
        report: Report,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Overrides analytics.utc_offset_minutes.
        #[arg(long, allow_negative_numbers = true)]
        utc_offset_minutes: Option<i32>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Report {
    Customization,
    Questions,
    LengthTrend,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Text,
    Json,
}

enum Failure {
    Usage(anyhow::Error),
    Pipeline(PipelineError),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Pipeline(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = if matches!(cli.command, Command::Serve { .. }) { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .json()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default_level)),
        )
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("{}", serde_json::json!({ "error": "usage", "detail": format!("{e:#}") }));
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("{}", serde_json::json!({ "error": e.kind(), "detail": e.to_string() }));
            ExitCode::from(EXIT_FAILURE)
        }
        Err(Failure::Other(e)) => {
            eprintln!("{}", serde_json::json!({ "error": "failure", "detail": format!("{e:#}") }));
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn load_settings(path: Option<&Path>) -> Result<CustomizationSettings, Failure> {
    let Some(path) = path else {
        return Ok(CustomizationSettings::default());
    };
    let usage = |e: anyhow::Error| Failure::Usage(e);
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(usage)?;
    let value: serde_json::Value = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display())).map_err(usage)?
    } else {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())).map_err(usage)?
    };
    validate_json(&value).with_context(|| format!("settings in {}", path.display())).map_err(usage)
}

fn pipeline(cfg: &Config) -> Result<Pipeline, Failure> {
    let provider = providers::from_config(&cfg.provider).map_err(|e| Failure::Usage(anyhow::anyhow!(e)))?;
    Ok(Pipeline::new(cfg.clone(), provider))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = Config::load(cli.config.as_deref()).map_err(|e| Failure::Usage(e.into()))?;
    match cli.command {
        Command::Serve { bind } => {
            let bind = bind.unwrap_or_else(|| cfg.server.bind.clone());
            let store = Arc::new(Store::open(&cfg.store.path).context("opening store")?);
            let state = AppState::new(Arc::new(pipeline(&cfg)?), store);
            let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
            rt.block_on(server::serve(state, &bind)).context("serving")?;
            Ok(())
        }
        Command::Generate { source, settings_file, out, vtt, dry_run } => {
            let settings = load_settings(settings_file.as_deref())?;
            let p = pipeline(&cfg)?;
            let source = VideoRef::parse(&source);
            if dry_run {
                return print_prompt(&p, &source, &settings);
            }
            let generated = p.run(&source, &settings, &|_| {})?;
            let out = out.expect("clap requires --out without --dry-run");
            let bytes = serialize(&generated.track, TrackFormat::Structured).context("serializing track")?;
            std::fs::write(&out, bytes).with_context(|| format!("writing {}", out.display()))?;
            if let Some(vtt) = vtt {
                let bytes = serialize(&generated.track, TrackFormat::Vtt).context("serializing track")?;
                std::fs::write(&vtt, bytes).with_context(|| format!("writing {}", vtt.display()))?;
            }
            let calls = generated.outcome.as_ref().map_or(0, |o| o.calls());
            println!(
                "{}",
                serde_json::json!({
                    "video_id": generated.track.video_id,
                    "cues": generated.track.cues.len(),
                    "provider_calls": calls,
                    "out": out,
                })
            );
            Ok(())
        }
        Command::Prompt { source, settings_file } => {
            let settings = load_settings(settings_file.as_deref())?;
            print_prompt(&pipeline(&cfg)?, &VideoRef::parse(&source), &settings)
        }
        Command::SynthFixture { spec, random_seed, out } => {
            let spec = match (spec, random_seed) {
                (_, Some(seed)) => synth::random_spec(seed),
                (Some(path), None) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))
                        .map_err(Failure::Usage)?;
                    serde_json::from_str::<FixtureSpec>(&text)
                        .with_context(|| format!("parsing {}", path.display()))
                        .map_err(Failure::Usage)?
                }
                (None, None) => FixtureSpec::default(),
            };
            let truth = synth::write_fixture(&spec, &out).map_err(|e| match e {
                synth::SynthError::Inconsistent(_) => Failure::Usage(e.into()),
                synth::SynthError::Io(_) => Failure::Other(e.into()),
            })?;
            println!("{}", serde_json::to_string(&truth).context("serializing manifest")?);
            Ok(())
        }
        Command::Analyze { log, report, format, utc_offset_minutes } => {
            let log = read_log(&log).with_context(|| format!("reading {}", log.display()))?;
            let offset = utc_offset_minutes.unwrap_or(cfg.analytics.utc_offset_minutes);
            let json = format == Format::Json;
            let text = match report {
                Report::Customization => {
                    let r = customization_distribution(&log);
                    if json {
                        serde_json::to_string_pretty(&r).context("json")?
                    } else {
                        render_report(&r)
                    }
                }
                Report::Questions => {
                    let r = question_distribution(&log);
                    if json {
                        serde_json::to_string_pretty(&r).context("json")?
                    } else {
                        render_report(&r)
                    }
                }
                Report::LengthTrend => {
                    let t = length_trend(&log, offset);
                    if json {
                        serde_json::to_string_pretty(&t).context("json")?
                    } else {
                        render_trend(&t)
                    }
                }
            };
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn print_prompt(p: &Pipeline, source: &VideoRef, settings: &CustomizationSettings) -> Result<(), Failure> {
    let resolved = p.resolve(source)?;
    let prepared = p.prepare(resolved, &|_| {})?;
    let (bundle, _) = p.prompt(&prepared, settings)?;
    print!("{}", bundle.text);
    if !bundle.text.ends_with('\n') {
        println!();
    }
    Ok(())
}
