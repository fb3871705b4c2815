//! Post-hoc analysis of closed run directories and of external vote data.
//! Outputs go under `<run_dir>/analysis/`; run data is never modified.

pub mod barnard;
pub mod grades;
pub mod heatmap;
pub mod similarity;
pub mod votes;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::engine::{CONFIG_FILE, LOG_FILE};
use crate::log::{read_log, LogError, LogEvent};
use crate::model::{Sentiment, Significance};
use crate::providers::{CallContext, ProviderError, ProviderSuite};
use crate::templates::{render_grading_request, TemplateError, TemplateId};

pub use barnard::{barnard_exact, Alternative, BarnardError, BarnardOptions, BarnardResult, Statistic};
pub use grades::{parse_grades, Extreme, GradeSheet};
pub use similarity::{similarity_matrix, SimilarityMatrix, SimilaritySummary};
pub use votes::{vote_summary, GroupVotes, VoteReport};

pub const ANALYSIS_DIR: &str = "analysis";

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("incomplete run: {0}")]
    IncompleteRun(String),
    #[error("{agent}: need at least 2 art prompts, found {found}")]
    TooFewPrompts { agent: String, found: usize },
    #[error("unknown agent {0:?}")]
    UnknownAgent(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Barnard(#[from] BarnardError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("votes line {line}: {message}")]
    BadVotes { line: usize, message: String },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> AnalysisError + '_ {
    move |e| AnalysisError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), AnalysisError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io(parent))?;
    }
    std::fs::write(path, contents).map_err(io(path))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), AnalysisError> {
    write(
        path,
        serde_json::to_string_pretty(value).expect("reports serialize") + "\n",
    )
}

/// A run directory read back from disk.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub events: Vec<LogEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArtworkRecord {
    pub id: String,
    pub creator: String,
    pub step: i64,
    pub art_prompt: String,
    pub image: String,
    /// Last logged total; absent for artworks never ranked.
    pub total: Option<Significance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CritiqueRecord {
    pub critic: String,
    pub artwork: String,
    pub step: i64,
    pub sentiment: Sentiment,
    pub reevaluation: bool,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunExport {
    pub condition: crate::config::Condition,
    pub artworks: Vec<ArtworkRecord>,
    pub critiques: Vec<CritiqueRecord>,
    /// Keyword set after each step (`-1` for initialization).
    pub keywords: BTreeMap<i64, Vec<String>>,
}

impl RunRecord {
    pub fn load(dir: &Path) -> Result<Self, AnalysisError> {
        let config_path = dir.join(CONFIG_FILE);
        let log_path = dir.join(LOG_FILE);
        if !config_path.exists() || !log_path.exists() {
            return Err(AnalysisError::IncompleteRun(format!(
                "{} is not a run directory",
                dir.display()
            )));
        }
        let config = RunConfig::load(&config_path)?;
        let events = read_log(&log_path)?.into_iter().map(|(_, e)| e).collect();
        Ok(RunRecord {
            dir: dir.to_path_buf(),
            config,
            events,
        })
    }

    /// Load and require a `RunCompleted` event.
    pub fn load_closed(dir: &Path) -> Result<Self, AnalysisError> {
        let run = Self::load(dir)?;
        if !run.events.iter().any(|e| matches!(e, LogEvent::RunCompleted { .. })) {
            return Err(AnalysisError::IncompleteRun(format!(
                "{} has no RunCompleted event",
                dir.display()
            )));
        }
        Ok(run)
    }

    pub fn artists(&self) -> Vec<String> {
        self.config.artists.iter().map(|a| a.id.clone()).collect()
    }

    pub fn output_dir(&self) -> PathBuf {
        self.dir.join(ANALYSIS_DIR)
    }

    /// Each artist's art prompts in generation order.
    pub fn art_prompts(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = self.artists().into_iter().map(|a| (a, Vec::new())).collect();
        for e in &self.events {
            if let LogEvent::ArtworkCreated {
                creator,
                step,
                art_prompt,
                ..
            } = e
            {
                if *step >= 0 {
                    out.entry(creator.clone()).or_default().push(art_prompt.clone());
                }
            }
        }
        out
    }

    pub fn export(&self) -> RunExport {
        let mut artworks: Vec<ArtworkRecord> = Vec::new();
        let mut critiques = Vec::new();
        let mut keywords = BTreeMap::new();
        for e in &self.events {
            match e {
                LogEvent::ArtworkCreated {
                    artwork,
                    creator,
                    step,
                    art_prompt,
                    image,
                } => artworks.push(ArtworkRecord {
                    id: artwork.clone(),
                    creator: creator.clone(),
                    step: *step,
                    art_prompt: art_prompt.clone(),
                    image: image.clone(),
                    total: None,
                }),
                LogEvent::SignificanceUpdated { artwork, total, .. } => {
                    if let Some(a) = artworks.iter_mut().find(|a| &a.id == artwork) {
                        a.total = Some(total.clone());
                    }
                }
                LogEvent::DecayApplied { .. } => {
                    for a in &mut artworks {
                        if let Some(t) = &a.total {
                            a.total = Some(t.halved());
                        }
                    }
                }
                LogEvent::CritiqueRecorded {
                    critic,
                    artwork,
                    step,
                    sentiment,
                    reevaluation,
                    text,
                    ..
                } => critiques.push(CritiqueRecord {
                    critic: critic.clone(),
                    artwork: artwork.clone(),
                    step: *step,
                    sentiment: *sentiment,
                    reevaluation: *reevaluation,
                    text: text.clone(),
                }),
                LogEvent::KeywordsUpdated { step, keywords: k, .. } => {
                    keywords.insert(*step, k.clone());
                }
                _ => {}
            }
        }
        RunExport {
            condition: self.config.condition,
            artworks,
            critiques,
            keywords,
        }
    }
}

/// Similarity matrix, CSVs and heatmap for every artist of a closed run.
pub fn analyze_similarity(
    run: &RunRecord,
    suite: &ProviderSuite,
    out_dir: &Path,
) -> Result<Vec<(String, SimilaritySummary)>, AnalysisError> {
    let dir = out_dir.join("similarity");
    let mut summaries = Vec::new();
    for (agent, prompts) in run.art_prompts() {
        let m = similarity_matrix(&agent, &prompts, suite, run.config.providers.max_in_flight)?;
        write(&dir.join(format!("{agent}.csv")), m.to_csv(false))?;
        write(&dir.join(format!("{agent}.clamped.csv")), m.to_csv(true))?;
        let png = dir.join(format!("{agent}.png"));
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        heatmap::write_png(&m.clamped(), &png)?;
        summaries.push((agent, m.summary()));
    }
    let map: BTreeMap<&str, &SimilaritySummary> = summaries.iter().map(|(a, s)| (a.as_str(), s)).collect();
    write_json(&dir.join("summary.json"), &map)?;
    Ok(summaries)
}

pub fn grading_transcript_path(out_dir: &Path, agent: &str) -> PathBuf {
    out_dir.join("grading").join(format!("{agent}.txt"))
}

/// Ask the critic model to grade every art prompt of `agent` and store the
/// transcript where [`grade_run`] expects it.
pub fn invoke_grader(
    run: &RunRecord,
    agent: &str,
    suite: &ProviderSuite,
    out_dir: &Path,
) -> Result<PathBuf, AnalysisError> {
    let prompts = run
        .art_prompts()
        .remove(agent)
        .ok_or_else(|| AnalysisError::UnknownAgent(agent.to_string()))?;
    let request = render_grading_request(&prompts, run.config.iterations as usize)?;
    let ctx = CallContext::new(0, -1, agent).with_template(TemplateId::Grading);
    let reply = suite.generate_critique(&ctx, &request, None)?;
    let path = grading_transcript_path(out_dir, agent);
    write(&path, &reply.value)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradeReport {
    pub agent: String,
    pub sheet: GradeSheet,
    pub absent: Vec<usize>,
    pub lowest: Option<String>,
    pub highest: Option<String>,
}

/// Parse the stored grading transcripts of the given agents (all artists
/// when empty) and write `grades.json`.
pub fn grade_run(run: &RunRecord, agents: &[String], out_dir: &Path) -> Result<Vec<GradeReport>, AnalysisError> {
    let agents = if agents.is_empty() {
        run.artists()
    } else {
        agents.to_vec()
    };
    let n = run.config.iterations as usize;
    let mut reports = Vec::new();
    for agent in agents {
        if !run.artists().contains(&agent) {
            return Err(AnalysisError::UnknownAgent(agent));
        }
        let path = grading_transcript_path(out_dir, &agent);
        let text = std::fs::read_to_string(&path)
            .map_err(|_| AnalysisError::IncompleteRun(format!("no grader output at {}", path.display())))?;
        let sheet = parse_grades(&text, n);
        reports.push(GradeReport {
            absent: sheet.absent(),
            lowest: sheet.lowest().map(|e| e.to_string()),
            highest: sheet.highest().map(|e| e.to_string()),
            agent,
            sheet,
        });
    }
    write_json(&out_dir.join("grades.json"), &reports)?;
    Ok(reports)
}

pub fn export_run(run: &RunRecord, out_dir: &Path) -> Result<PathBuf, AnalysisError> {
    let path = out_dir.join("export.json");
    write_json(&path, &run.export())?;
    Ok(path)
}
