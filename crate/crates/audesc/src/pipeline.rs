//! Ingest, timing, prompting, generation and question answering for one process.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use audesc_core::analytics::LogEvent;
use audesc_core::customization::{to_prompt_params, CustomizationSettings, Frequency};
use audesc_core::gateway::{
    answer_question, generate_descriptions, GatewayConfig, GatewayError, GenerationOutcome, Provider,
};
use audesc_core::interval::IntervalSet;
use audesc_core::media::{AudioTrack, FrameSample, MediaAsset};
use audesc_core::prompt::{build_ad_prompt, build_vqa_prompt, PromptBundle, PromptError};
use audesc_core::templates::GuidelineSet;
use audesc_core::timing::{
    detect_scene_changes, detect_silence, detect_speech, fuse_signals, plan_timestamps, CandidatePoint, FuseConfig,
    SceneChangeList, SceneConfig, SilenceConfig, TimingError,
};
use audesc_core::track::{AdTrack, TrackFlag};
use audesc_core::vqa::{
    assemble_context, classify_question, QuestionType, VqaConfig, VqaError, VqaExchange, VqaRequest,
    INFER_FROM_VIDEO_HINT,
};
use audesc_core::TimestampPlan;
use serde::Serialize;

use crate::config::Config;
use crate::ingest::{Ingest, IngestError, ResolvedAsset, VideoRef};
use crate::store::{now_ms, Store, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingesting,
    Timing,
    Generating,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl PipelineError {
    /// Stable machine-readable name of the failure.
    pub fn kind(&self) -> &'static str {
        use audesc_core::gateway::ProviderError as P;
        match self {
            PipelineError::Ingest(e) => match e {
                IngestError::UnreachableSource(_) => "unreachable_source",
                IngestError::UnsupportedContainer(_) => "unsupported_container",
                IngestError::ZeroDuration => "zero_duration",
                IngestError::DecodeFailure(_) => "decode_failure",
                IngestError::InvalidArgument(_) => "invalid_argument",
            },
            PipelineError::Timing(TimingError::DetectorFailure(_)) => "detector_failure",
            PipelineError::Timing(_) => "timing_error",
            PipelineError::Prompt(_) => "prompt_error",
            PipelineError::Gateway(e) => match e {
                GatewayError::Provider(P::Timeout(_)) => "provider_timeout",
                GatewayError::Provider(_) => "provider_error",
                GatewayError::MalformedOutput(_) => "malformed_output",
                GatewayError::PlanMismatch => "plan_mismatch",
                GatewayError::EmptyAnswer => "empty_answer",
                GatewayError::WrongBundleKind => "wrong_bundle_kind",
            },
        }
    }
}

/// Everything derived from the media that does not depend on settings.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub resolved: ResolvedAsset,
    pub audio_was_synthesized: bool,
    pub frames: Vec<FrameSample>,
    pub silence: IntervalSet,
    pub speech: IntervalSet,
    pub scenes: SceneChangeList,
    pub candidates: Vec<CandidatePoint>,
}

impl Prepared {
    pub fn asset(&self) -> &MediaAsset {
        &self.resolved.asset
    }

    pub fn video_id(&self) -> &str {
        &self.resolved.asset.asset_id
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub track: AdTrack,
    /// `None` when nothing could be planned and no provider call was made.
    pub outcome: Option<GenerationOutcome>,
}

#[derive(Debug, thiserror::Error)]
pub enum AskError {
    /// Rejected before any provider call; nothing was persisted.
    #[error(transparent)]
    Invalid(#[from] VqaError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    /// The provider call failed; the exchange was persisted with an error marker.
    #[error("{error}")]
    Gateway { error: GatewayError, exchange: Box<VqaExchange> },
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub struct Pipeline {
    cfg: Config,
    ingest: Ingest,
    provider: Arc<dyn Provider>,
    gateway: GatewayConfig,
    guidelines: GuidelineSet,
    prepared: Mutex<HashMap<String, Arc<Prepared>>>,
    plans: Mutex<HashMap<(String, Frequency), TimestampPlan>>,
    plan_computations: Mutex<u64>,
}

impl Pipeline {
    pub fn new(cfg: Config, provider: Arc<dyn Provider>) -> Self {
        Self {
            ingest: Ingest::new(cfg.ingest.clone()),
            gateway: GatewayConfig {
                generation_timeout_ms: cfg.provider.generation_timeout_ms,
                vqa_timeout_ms: cfg.provider.vqa_timeout_ms,
            },
            cfg,
            provider,
            guidelines: GuidelineSet::standard(),
            prepared: Mutex::new(HashMap::new()),
            plans: Mutex::new(HashMap::new()),
            plan_computations: Mutex::new(0),
        }
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn provider(&self) -> &Arc<dyn Provider> {
        &self.provider
    }

    /// How many plans have been computed rather than served from cache.
    pub fn plan_computations(&self) -> u64 {
        *self.plan_computations.lock().expect("plan counter")
    }

    pub fn cached(&self, video_id: &str) -> Option<Arc<Prepared>> {
        self.prepared.lock().expect("prepared cache").get(video_id).cloned()
    }

    pub fn video_id(&self, source: &VideoRef) -> Result<String, PipelineError> {
        Ok(self.ingest.asset_id(source)?)
    }

    pub fn resolve(&self, source: &VideoRef) -> Result<ResolvedAsset, PipelineError> {
        Ok(self.ingest.resolve(source)?)
    }

    /// Decodes and analyses a resolved asset, reusing earlier work for the same asset.
    pub fn prepare(&self, resolved: ResolvedAsset, on_stage: &dyn Fn(Stage)) -> Result<Arc<Prepared>, PipelineError> {
        if let Some(p) = self.cached(&resolved.asset.asset_id) {
            return Ok(p);
        }
        on_stage(Stage::Ingesting);
        let audio = self.ingest.extract_audio(&resolved, self.cfg.ingest.sample_rate_hz)?;
        let frames = self.ingest.sample_frames(&resolved, self.cfg.ingest.frame_period_s)?;
        on_stage(Stage::Timing);
        let prepared = Arc::new(self.analyse(resolved, audio, frames)?);
        self.prepared.lock().expect("prepared cache").insert(prepared.video_id().to_string(), prepared.clone());
        Ok(prepared)
    }

    fn analyse(
        &self,
        resolved: ResolvedAsset,
        audio: AudioTrack,
        frames: Vec<FrameSample>,
    ) -> Result<Prepared, PipelineError> {
        let duration = resolved.asset.duration_s;
        let silence = if audio.is_empty() {
            IntervalSet::full(duration)
        } else {
            detect_silence(&audio, &SilenceConfig::default())?
        };
        let scratch = self.cfg.ingest.workdir.join(&resolved.asset.asset_id);
        let detector = crate::speech::detector_for(
            &self.cfg.speech,
            std::path::Path::new(&resolved.asset.container_path),
            &scratch,
        )?;
        let speech = if audio.is_empty() { IntervalSet::empty() } else { detect_speech(&audio, detector.as_ref())? };
        let scenes = if frames.len() >= 2 {
            detect_scene_changes(&frames, &SceneConfig::default())?
        } else {
            SceneChangeList::default()
        };
        let candidates = fuse_signals(&silence, &speech, &scenes, duration, &FuseConfig::default());
        Ok(Prepared {
            resolved,
            audio_was_synthesized: audio.synthesized_silence,
            frames,
            silence,
            speech,
            scenes,
            candidates,
        })
    }

    /// The plan for a frequency; computed once per asset and frequency.
    /// An empty plan means speech covers the whole video.
    pub fn plan(&self, prepared: &Prepared, frequency: Frequency) -> Result<TimestampPlan, PipelineError> {
        let key = (prepared.video_id().to_string(), frequency);
        if let Some(p) = self.plans.lock().expect("plan cache").get(&key) {
            return Ok(p.clone());
        }
        let duration = prepared.asset().duration_s;
        let plan = match plan_timestamps(&prepared.candidates, &prepared.speech, duration, frequency) {
            Ok(p) => p,
            Err(TimingError::NoLegalPoints) => {
                TimestampPlan { points: Vec::new(), frequency_s: frequency, duration_s: duration }
            }
            Err(e) => return Err(e.into()),
        };
        *self.plan_computations.lock().expect("plan counter") += 1;
        self.plans.lock().expect("plan cache").insert(key, plan.clone());
        Ok(plan)
    }

    pub fn prompt(
        &self,
        prepared: &Prepared,
        settings: &CustomizationSettings,
    ) -> Result<(PromptBundle, TimestampPlan), PipelineError> {
        let plan = self.plan(prepared, settings.frequency_s)?;
        let bundle = build_ad_prompt(&to_prompt_params(settings), &plan, &self.guidelines, &prepared.frames)?;
        Ok((bundle, plan))
    }

    pub fn generate(
        &self,
        prepared: &Prepared,
        settings: &CustomizationSettings,
        on_stage: &dyn Fn(Stage),
    ) -> Result<Generated, PipelineError> {
        let plan = self.plan(prepared, settings.frequency_s)?;
        on_stage(Stage::Generating);
        if plan.is_empty() {
            let mut track = AdTrack::from_metadata(
                &audesc_core::gateway::VideoMetadata {
                    video_id: prepared.video_id().to_string(),
                    descriptions: Vec::new(),
                },
                settings,
                &plan,
            );
            track.flags.push(TrackFlag::NoLegalPoints);
            return Ok(Generated { track, outcome: None });
        }
        let bundle = build_ad_prompt(&to_prompt_params(settings), &plan, &self.guidelines, &prepared.frames)?;
        let outcome = generate_descriptions(
            prepared.video_id(),
            &bundle,
            &prepared.frames,
            &plan,
            settings,
            self.provider.as_ref(),
            &self.gateway,
        )?;
        let track = AdTrack::from_generation(&outcome, settings, &plan);
        Ok(Generated { track, outcome: Some(outcome) })
    }

    /// Resolve, prepare and generate in one go.
    pub fn run(
        &self,
        source: &VideoRef,
        settings: &CustomizationSettings,
        on_stage: &dyn Fn(Stage),
    ) -> Result<Generated, PipelineError> {
        on_stage(Stage::Ingesting);
        let resolved = self.resolve(source)?;
        let prepared = self.prepare(resolved, on_stage)?;
        self.generate(&prepared, settings, on_stage)
    }

    /// Answers a question and persists exactly one exchange unless the request
    /// is rejected up front.
    pub fn ask(
        &self,
        store: &Store,
        session_id: &str,
        prepared: &Prepared,
        track: &AdTrack,
        request: VqaRequest,
    ) -> Result<VqaExchange, AskError> {
        request.validate(prepared.asset().duration_s)?;
        let (main, adjacent) =
            assemble_context(prepared.asset(), &prepared.frames, request.t_s, &VqaConfig::default())?;
        let bundle = build_vqa_prompt(&request.question, &main, &adjacent, track)?;
        let question_type = classify_question(&request.question);
        let mut exchange = VqaExchange {
            request,
            answer: String::new(),
            question_type,
            accuracy_rating: None,
            asked_at_ms: now_ms(),
            hint: (question_type == QuestionType::InferFromVideo).then(|| INFER_FROM_VIDEO_HINT.to_string()),
            error: None,
        };
        let result = answer_question(&bundle, &prepared.frames, self.provider.as_ref(), &self.gateway);
        match &result {
            Ok(a) => exchange.answer = a.answer.clone(),
            Err(e) => exchange.error = Some(e.to_string()),
        }
        store.record(LogEvent::Exchange { session_id: session_id.to_string(), exchange: exchange.clone() })?;
        match result {
            Ok(_) => Ok(exchange),
            Err(error) => Err(AskError::Gateway { error, exchange: Box::new(exchange) }),
        }
    }
}
