//! The simulation loop.
//!
//! Each step `t` runs, in order:
//!
//! 1. decay at boundary steps (in-system only);
//! 2. one artwork per artist (text, then image), calls overlapping but
//!    committed in config order;
//! 3. for each critic and each artist, a critique and its sentiment, then
//!    (in-system only) the point award and the artist's reflection;
//! 4. (in-system only) each critic re-evaluates older artworks, then the
//!    domain keywords are refreshed from the top 3;
//! 5. a ranking export and `StepCompleted`.
//!
//! In the isolated condition artworks and critiques are archived but never
//! reach the registry, the ranking or the artists.

mod contamination;
mod resume;

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, ValidatedConfig};
use crate::log::{EventSink, LogError, LogEvent, RunLogWriter};
use crate::model::{recompute_total, AgentSpec, Artwork, Critique, DomainState, SignificanceScore, SEED_STEP};
use crate::parallel::ordered_map;
use crate::providers::{CallContext, CallRecorder, Capability, ProviderCall, ProviderSuite, RecordError};
use crate::ranking::{self, CritiqueJob, RankingError, RankingView};
use crate::templates::{render_art_prompt_request, render_reflection_request, TemplateError, TemplateId};

pub use contamination::contamination_markers;
pub use resume::{resume, resume_with, ResumeOutcome};

pub const CONFIG_FILE: &str = "config.toml";
pub const LOG_FILE: &str = "run.jsonl";
pub const RANKINGS_DIR: &str = "rankings";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Record {
        context: String,
        #[source]
        source: RecordError,
    },
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("run directory {0} already holds a run log")]
    RunExists(String),
    #[error("corrupt run log: {0}")]
    CorruptLog(String),
    #[error("run log line {line} has schema_version {found}")]
    SchemaMismatch { line: usize, found: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl EngineError {
    fn record(context: impl Into<String>) -> impl FnOnce(RecordError) -> EngineError {
        let context = context.into();
        move |source| EngineError::Record { context, source }
    }

    /// The provider failure behind this error, if any.
    pub fn provider_error(&self) -> Option<&crate::providers::ProviderError> {
        let record = match self {
            EngineError::Record { source, .. } => source,
            EngineError::Ranking(RankingError::Provider { source, .. }) => source,
            EngineError::Ranking(RankingError::Keywords { source, .. }) => match source.as_ref() {
                RankingError::Provider { source, .. } => source,
                _ => return None,
            },
            _ => return None,
        };
        match record {
            RecordError::Provider(p) => Some(p),
            _ => None,
        }
    }
}

impl From<LogError> for EngineError {
    fn from(e: LogError) -> Self {
        EngineError::Record {
            context: "run log".into(),
            source: RecordError::Log(e),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EngineError + '_ {
    move |source| EngineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Artist description as sent to templates: core text, then the summary of
/// folded reflections, then reflections added since.
pub fn compose_artist_desc(artist: &AgentSpec) -> String {
    let mut parts = vec![artist.core_description()];
    if !artist.summarized_additional().is_empty() {
        parts.push(artist.summarized_additional());
    }
    parts.extend(artist.unfolded_entries().iter().map(String::as_str));
    parts.join(" ")
}

pub fn artwork_id(artist_id: &str, t: i64) -> String {
    format!("{artist_id}-t{t:03}")
}

/// Per-step ranking export.
#[derive(Debug, Clone, Serialize)]
pub struct RankingExport<'a> {
    pub step: i64,
    pub keywords: &'a [String],
    pub ranking: &'a RankingView,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepReport {
    pub t: i64,
    pub artworks: Vec<String>,
    pub top: Vec<String>,
}

/// Owns all run state. Provider calls go through the recorder, so every
/// prompt, response and state change lands in the run log.
pub struct Simulation {
    config: ValidatedConfig,
    next_t: i64,
    artists: Vec<AgentSpec>,
    critics: Vec<AgentSpec>,
    domain: DomainState,
    archive: Vec<Artwork>,
    recorder: CallRecorder,
    finished: bool,
}

impl Simulation {
    /// Log `RunStarted`, register the seeds and set the initial keywords.
    pub fn start(
        config: ValidatedConfig,
        suite: ProviderSuite,
        sink: Box<dyn EventSink>,
        run_dir: impl Into<PathBuf>,
    ) -> Result<Self, EngineError> {
        let recorder = CallRecorder::new(suite, sink, run_dir);
        let mut domain = DomainState::new(&config.domain.description, config.domain.decay_interval);
        let mut sim = Simulation {
            artists: config.artist_specs(),
            critics: config.critic_specs(),
            next_t: 0,
            archive: Vec::new(),
            finished: false,
            recorder,
            domain: DomainState::new("", 1),
            config,
        };
        sim.emit(LogEvent::RunStarted {
            condition: sim.config.condition,
            iterations: sim.config.iterations,
            seed: sim.config.seed,
            config_digest: sim.config.digest(),
        })?;
        for seed in &sim.config.domain.seeds {
            let artwork = Artwork {
                id: seed.id.clone(),
                creator_id: String::new(),
                time_step: SEED_STEP,
                art_prompt: seed.description.clone(),
                image_ref: seed.image.clone(),
                critiques: Vec::new(),
                significance: SignificanceScore::seed(),
            };
            sim.recorder
                .emit(&LogEvent::ArtworkCreated {
                    artwork: artwork.id.clone(),
                    creator: String::new(),
                    step: SEED_STEP,
                    art_prompt: artwork.art_prompt.clone(),
                    image: artwork.image_ref.clone(),
                })
                .map_err(EngineError::record("seed"))?;
            sim.recorder
                .emit(&LogEvent::SignificanceUpdated {
                    artwork: artwork.id.clone(),
                    step: SEED_STEP,
                    points: 1,
                    total: artwork.significance.total.clone(),
                })
                .map_err(EngineError::record("seed"))?;
            domain.register(artwork);
        }
        match sim.config.domain.initial_keywords.clone() {
            Some(keywords) => {
                domain.keywords = keywords.clone();
                sim.emit(LogEvent::KeywordsUpdated {
                    step: SEED_STEP,
                    top: Vec::new(),
                    keywords,
                })?;
            }
            None => {
                ranking::refresh_keywords(&mut domain, &mut sim.recorder, SEED_STEP)?;
            }
        }
        sim.domain = domain;
        Ok(sim)
    }

    fn emit(&mut self, event: LogEvent) -> Result<(), EngineError> {
        let kind = event.kind();
        self.recorder.emit(&event).map_err(EngineError::record(kind))
    }

    pub fn config(&self) -> &ValidatedConfig {
        &self.config
    }

    pub fn artists(&self) -> &[AgentSpec] {
        &self.artists
    }

    pub fn critics(&self) -> &[AgentSpec] {
        &self.critics
    }

    pub fn domain(&self) -> &DomainState {
        &self.domain
    }

    /// Artworks created in the isolated condition, in creation order.
    pub fn archive(&self) -> &[Artwork] {
        &self.archive
    }

    pub fn completed_steps(&self) -> i64 {
        self.next_t
    }

    pub fn is_complete(&self) -> bool {
        self.next_t >= i64::from(self.config.iterations)
    }

    pub fn recorder(&self) -> &CallRecorder {
        &self.recorder
    }

    pub(crate) fn recorder_mut(&mut self) -> &mut CallRecorder {
        &mut self.recorder
    }

    /// Digest of what the artists can observe plus the ranking totals:
    /// artist descriptions, domain text, keywords and every registered
    /// total. Stored critiques are excluded.
    pub fn state_hash(&self) -> String {
        let mut h = Sha256::new();
        for a in &self.artists {
            h.update(compose_artist_desc(a).as_bytes());
            h.update([0]);
        }
        h.update(self.domain.description().as_bytes());
        h.update([0]);
        for k in &self.domain.keywords {
            h.update(k.as_bytes());
            h.update([0]);
        }
        for a in self.domain.artworks.values() {
            h.update(a.id.as_bytes());
            h.update(a.significance.total.to_string().as_bytes());
            h.update([0]);
        }
        format!("{:x}", h.finalize())
    }

    /// Run one step. Errors leave the log ending mid-step; resuming drops
    /// that partial step.
    pub fn step(&mut self) -> Result<StepReport, EngineError> {
        if self.is_complete() {
            return Err(EngineError::Invariant("all iterations already ran".into()));
        }
        let t = self.next_t;
        let in_system = self.config.condition.propagates();

        if in_system && ranking::apply_decay(&mut self.domain, t) {
            let n = self.domain.artworks.len();
            self.emit(LogEvent::DecayApplied { step: t, artworks: n })?;
        }

        let created = self.create_artworks(t)?;
        let created_ids: Vec<String> = created.iter().map(|a| a.id.clone()).collect();
        if in_system {
            for a in created.iter().cloned() {
                self.domain.register(a);
            }
        }

        let max_in_flight = self.config.providers.max_in_flight;
        let domain_desc = self.domain.description();
        for ci in 0..self.critics.len() {
            let critic_id = self.critics[ci].id().to_string();
            let critic_desc = self.critics[ci].core_description().to_string();
            for (ai, artwork) in created.iter().enumerate() {
                let job = CritiqueJob::new(&self.recorder, &domain_desc, &critic_desc, artwork)?;
                let critique = ranking::judge(&mut self.recorder, &[job], &critic_id, t, in_system, false, 1)?
                    .pop()
                    .expect("one job, one critique");
                if in_system {
                    ranking::award_and_log(&mut self.domain, critique.clone(), t, &mut self.recorder)?;
                    self.reflect(ai, artwork, &critique, &domain_desc, t)?;
                } else {
                    self.archive
                        .iter_mut()
                        .rev()
                        .find(|a| a.id == artwork.id)
                        .expect("isolated artworks are archived at creation")
                        .critiques
                        .push(critique);
                }
            }
        }

        if in_system {
            for ci in 0..self.critics.len() {
                let critic_id = self.critics[ci].id().to_string();
                let critic_desc = self.critics[ci].core_description().to_string();
                ranking::reevaluate_history(
                    &mut self.domain,
                    &critic_id,
                    &critic_desc,
                    t,
                    &mut self.recorder,
                    max_in_flight,
                )?;
            }
            ranking::refresh_keywords(&mut self.domain, &mut self.recorder, t)?;
        }

        let view = ranking::rank(&self.domain);
        self.export_ranking(t, &view)?;
        self.emit(LogEvent::StepCompleted { t })?;
        self.next_t += 1;
        self.check_totals(t)?;
        Ok(StepReport {
            t,
            artworks: created_ids,
            top: view.top(3).iter().map(|e| e.artwork.clone()).collect(),
        })
    }

    /// Emit `RunCompleted` once every step has run.
    pub fn finish(&mut self) -> Result<(), EngineError> {
        if !self.is_complete() {
            return Err(EngineError::Invariant(format!(
                "run finished after {} of {} steps",
                self.next_t, self.config.iterations
            )));
        }
        if !self.finished {
            self.emit(LogEvent::RunCompleted {
                steps: self.config.iterations,
            })?;
            self.finished = true;
        }
        Ok(())
    }

    /// Steps until `stop_after` (inclusive) or the end, then finish if the
    /// run is complete.
    pub fn run_until(&mut self, stop_after: Option<i64>) -> Result<(), EngineError> {
        while !self.is_complete() && stop_after.is_none_or(|s| self.next_t <= s) {
            self.step()?;
        }
        if self.is_complete() {
            self.finish()?;
        }
        Ok(())
    }

    fn create_artworks(&mut self, t: i64) -> Result<Vec<Artwork>, EngineError> {
        let domain_desc = self.domain.description();
        let requests = self
            .artists
            .iter()
            .map(|a| render_art_prompt_request(&domain_desc, &compose_artist_desc(a)))
            .collect::<Result<Vec<_>, _>>()?;
        let base = self.recorder.reserve(2 * self.artists.len() as u64);
        let contexts = |i: usize, artist: &str| {
            let seq = base + 2 * i as u64;
            (
                CallContext::new(seq, t, artist).with_template(TemplateId::ArtCreation),
                CallContext::new(seq + 1, t, artist),
            )
        };
        let suite = self.recorder.suite().clone();
        let jobs: Vec<(String, String)> = self.artists.iter().map(|a| a.id().to_string()).zip(requests).collect();
        let results = ordered_map(&jobs, self.config.providers.max_in_flight, |i, (artist, request)| {
            let (text_ctx, image_ctx) = contexts(i, artist);
            let text = suite.generate_text(&text_ctx, request)?;
            let image = suite.generate_image(&image_ctx, &text.value)?;
            Ok::<_, crate::providers::ProviderError>((text, image))
        });

        let mut created = Vec::with_capacity(jobs.len());
        for (i, ((artist, request), result)) in jobs.iter().zip(results).enumerate() {
            let id = artwork_id(artist, t);
            let ctx_label = format!("creating {id}");
            let (text, image) = result.map_err(|e| EngineError::Record {
                context: ctx_label.clone(),
                source: RecordError::from(e),
            })?;
            let (text_ctx, image_ctx) = contexts(i, artist);
            let art_prompt = text.value.clone();
            self.recorder
                .commit(ProviderCall::from_reply(
                    &text_ctx,
                    Capability::TextGeneration,
                    request.to_string(),
                    art_prompt.clone(),
                    &text,
                ))
                .map_err(EngineError::record(ctx_label.clone()))?;
            let image_ref = self
                .recorder
                .commit_image(&image_ctx, &id, &art_prompt, image)
                .map_err(EngineError::record(ctx_label.clone()))?;
            if self.config.contamination_check {
                let markers = contamination_markers(&art_prompt);
                if !markers.is_empty() {
                    self.emit(LogEvent::ContaminationWarning {
                        artwork: id.clone(),
                        markers,
                    })?;
                }
            }
            self.emit(LogEvent::ArtworkCreated {
                artwork: id.clone(),
                creator: artist.to_string(),
                step: t,
                art_prompt: art_prompt.clone(),
                image: image_ref.clone(),
            })?;
            let artwork = Artwork {
                id,
                creator_id: artist.to_string(),
                time_step: t,
                art_prompt,
                image_ref,
                critiques: Vec::new(),
                significance: SignificanceScore::empty(),
            };
            if !self.config.condition.propagates() {
                self.archive.push(artwork.clone());
            }
            created.push(artwork);
        }
        Ok(created)
    }

    /// Append the artist's reaction to a critique; summarize the whole
    /// reflection log once it outgrows the budget.
    fn reflect(
        &mut self,
        artist_index: usize,
        artwork: &Artwork,
        critique: &Critique,
        domain_desc: &str,
        t: i64,
    ) -> Result<(), EngineError> {
        let budget = self.config.summarization_budget;
        let artist_id = self.artists[artist_index].id().to_string();
        let request = render_reflection_request(
            domain_desc,
            &artwork.art_prompt,
            &critique.text,
            &compose_artist_desc(&self.artists[artist_index]),
        )?;
        let text = self
            .recorder
            .text(t, &artist_id, TemplateId::Reflection, &request, 0)
            .map_err(EngineError::record(format!("reflection of {artist_id}")))?;
        let artist = &mut self.artists[artist_index];
        artist.push_reflection(text.clone());
        let log_len = artist.additional_log().len();
        self.emit(LogEvent::ReflectionAppended {
            artist: artist_id.clone(),
            step: t,
            log_len,
            text,
        })?;

        if self.artists[artist_index].additional_len() <= budget {
            return Ok(());
        }
        let entries = self.artists[artist_index].additional_log().to_vec();
        let summary = self
            .recorder
            .summarize(t, &artist_id, &entries, budget)
            .map_err(EngineError::record(format!("summarizing {artist_id}")))?;
        let length = summary.chars().count();
        let summary = if length > budget {
            self.emit(LogEvent::Warning {
                step: t,
                message: format!("summary for {artist_id} has {length} characters; truncated to {budget}"),
            })?;
            summary.chars().take(budget).collect()
        } else {
            summary
        };
        self.artists[artist_index].apply_summary(summary.clone());
        self.emit(LogEvent::SummarizationApplied {
            artist: artist_id,
            step: t,
            folded: entries.len(),
            summary,
        })
    }

    fn export_ranking(&self, t: i64, view: &RankingView) -> Result<(), EngineError> {
        let dir = self.recorder.run_dir().join(RANKINGS_DIR);
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let path = dir.join(format!("step-{t:03}.json"));
        let export = RankingExport {
            step: t,
            keywords: &self.domain.keywords,
            ranking: view,
        };
        let text = serde_json::to_string_pretty(&export).expect("exports serialize");
        std::fs::write(&path, text + "\n").map_err(io_err(&path))
    }

    /// The isolated domain never decays, so only in-system runs are checked.
    fn check_totals(&self, t: i64) -> Result<(), EngineError> {
        if !self.config.condition.propagates() {
            return Ok(());
        }
        for a in self.domain.artworks.values() {
            let expected = recompute_total(&a.significance, t, self.domain.decay_interval);
            if a.significance.total != expected {
                return Err(EngineError::Invariant(format!(
                    "{} total {} differs from recomputed {}",
                    a.id, a.significance.total, expected
                )));
            }
        }
        Ok(())
    }
}

/// Summary of a run directory after `run` or `resume`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub steps: i64,
    pub artworks: usize,
    pub top: Vec<(String, String)>,
    pub complete: bool,
}

impl RunOutcome {
    fn of(sim: &Simulation) -> Self {
        let artworks = if sim.config.condition.propagates() {
            sim.domain.artworks.values().filter(|a| !a.is_seed()).count()
        } else {
            sim.archive.len()
        };
        RunOutcome {
            run_dir: sim.recorder.run_dir().to_path_buf(),
            steps: sim.completed_steps(),
            artworks,
            top: ranking::rank(&sim.domain)
                .top(3)
                .iter()
                .map(|e| (e.artwork.clone(), e.total.to_string()))
                .collect(),
            complete: sim.is_complete(),
        }
    }
}

/// Create `run_dir`, write the effective config and run every step.
pub fn run(config: ValidatedConfig, suite: ProviderSuite, run_dir: &Path) -> Result<RunOutcome, EngineError> {
    run_until(config, suite, run_dir, None)
}

/// Like [`run`] but stops after step `stop_after`, leaving a resumable run.
pub fn run_until(
    config: ValidatedConfig,
    suite: ProviderSuite,
    run_dir: &Path,
    stop_after: Option<i64>,
) -> Result<RunOutcome, EngineError> {
    std::fs::create_dir_all(run_dir).map_err(io_err(run_dir))?;
    let log_path = run_dir.join(LOG_FILE);
    if log_path.exists() {
        return Err(EngineError::RunExists(run_dir.display().to_string()));
    }
    let config_path = run_dir.join(CONFIG_FILE);
    std::fs::write(&config_path, config.to_toml()).map_err(io_err(&config_path))?;
    let sink = RunLogWriter::create(&log_path)?;
    let mut sim = Simulation::start(config, suite, Box::new(sink), run_dir)?;
    sim.run_until(stop_after)?;
    Ok(RunOutcome::of(&sim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::validate_config;
    use crate::log::MemoryLog;
    use crate::model::Role;
    use crate::presets;

    #[test]
    fn compose_joins_core_summary_and_unfolded() {
        let mut a = AgentSpec::new("a", Role::Artist, "Core.");
        assert_eq!(compose_artist_desc(&a), "Core.");
        a.push_reflection("One.");
        a.push_reflection("Two.");
        assert_eq!(compose_artist_desc(&a), "Core. One. Two.");
        a.apply_summary("Sum.");
        a.push_reflection("Three.");
        assert_eq!(compose_artist_desc(&a), "Core. Sum. Three.");
    }

    #[test]
    fn artwork_ids_are_padded() {
        assert_eq!(artwork_id("artist-1", 7), "artist-1-t007");
    }

    #[test]
    fn one_step_in_memory() {
        let mut cfg = presets::school();
        cfg.iterations = 1;
        let cfg = validate_config(cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let suite = ProviderSuite::mock(cfg.seed, &cfg.providers.mock);
        let mut sim = Simulation::start(cfg, suite, Box::new(MemoryLog::default()), dir.path()).unwrap();
        let report = sim.step().unwrap();
        assert_eq!(report.artworks.len(), 2);
        assert_eq!(sim.domain().keywords.len(), 9);
        sim.finish().unwrap();
        assert!(dir.path().join("rankings/step-000.json").exists());
    }
}
