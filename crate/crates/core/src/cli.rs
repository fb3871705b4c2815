//! Command-line interface.
//!
//! Every failure prints one JSON line to stderr,
//! `{"error": kind, "exit": code, "message": text}`, and exits with:
//!
//! | code | meaning |
//! |---|---|
//! | 0 | success |
//! | 1 | other failure (I/O, internal) |
//! | 2 | usage error |
//! | 3 | file or directory not found |
//! | 4 | invalid config or input data |
//! | 5 | provider failure |
//! | 6 | corrupt run log or schema mismatch |
//! | 7 | incomplete run |
//! | 8 | missing credentials |

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::analysis::{self, Alternative, AnalysisError, BarnardOptions, RunRecord, Statistic};
use crate::config::{validate_config, Backend, ConfigError, RunConfig};
use crate::engine::{self, EngineError, RunOutcome};
use crate::log::LogError;
use crate::presets;
use crate::providers::http::Transport;
use crate::providers::{ProviderError, ProviderSuite, RecordError};
use crate::ranking::RankingError;

#[derive(Debug, Parser)]
#[command(
    name = "creasim",
    version,
    about = "Generative-agent simulation of the systems model of creativity"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation into a new run directory.
    Run {
        /// Config file, or `preset:NAME` for a bundled preset.
        config: String,
        #[arg(long)]
        out: PathBuf,
        /// Use the offline mock backend.
        #[arg(long, conflicts_with = "live")]
        mock: bool,
        /// Use the remote endpoints from the config.
        #[arg(long)]
        live: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Stop after this step, leaving a resumable run.
        #[arg(long)]
        stop_after: Option<i64>,
    },
    /// Continue an interrupted run.
    Resume {
        run_dir: PathBuf,
        #[arg(long)]
        stop_after: Option<i64>,
    },
    /// Pairwise similarity of each artist's art prompts.
    AnalyzeSimilarity {
        run_dir: PathBuf,
        /// Output directory (default: RUN_DIR/analysis).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Embed with the mock backend regardless of the run's config.
        #[arg(long)]
        mock: bool,
    },
    /// Extract scores from grader transcripts (RUN_DIR/analysis/grading/AGENT.txt).
    Grade {
        run_dir: PathBuf,
        /// Agents to grade (default: all artists).
        #[arg(long = "agent")]
        agents: Vec<String>,
        /// Ask the critic model for the transcripts first.
        #[arg(long)]
        invoke: bool,
        #[arg(long)]
        mock: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Barnard's exact test on a 2×2 table given as `a b c d` (rows are groups).
    Barnard {
        #[arg(num_args = 4, value_names = ["A", "B", "C", "D"])]
        table: Vec<u64>,
        #[arg(long, value_enum, default_value_t = AltArg::Greater)]
        alternative: AltArg,
        #[arg(long, value_enum, default_value_t = StatArg::Wald)]
        statistic: StatArg,
        #[arg(long, default_value_t = analysis::barnard::DEFAULT_GRID)]
        grid: usize,
    },
    /// Summarize votes from a CSV with columns group,time_step,votes.
    Votes {
        csv: PathBuf,
        /// Compare two groups' later-vs-earlier split with Barnard's test.
        #[arg(long, num_args = 2, value_names = ["GROUP_A", "GROUP_B"])]
        compare: Vec<String>,
        #[arg(long, default_value_t = analysis::barnard::DEFAULT_GRID)]
        grid: usize,
    },
    /// Export artworks, critiques and keywords of a run as JSON.
    Export {
        run_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: String },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AltArg {
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StatArg {
    Wald,
    Score,
}

/// A failure as reported to the user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: &'static str,
    pub exit: i32,
    pub message: String,
}

impl CliError {
    fn new(kind: &'static str, exit: i32, message: impl Into<String>) -> Self {
        CliError {
            kind,
            exit,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new("not-found", 3, message)
    }

    pub fn json_line(&self) -> String {
        json!({"error": self.kind, "exit": self.exit, "message": self.message}).to_string()
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match &e {
            ConfigError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                CliError::not_found(e.to_string())
            }
            ConfigError::Io { .. } => CliError::new("io", 1, e.to_string()),
            _ => CliError::new("invalid-config", 4, e.to_string()),
        }
    }
}

impl From<&ProviderError> for CliError {
    fn from(e: &ProviderError) -> Self {
        match e {
            ProviderError::MissingCredential { .. } => CliError::new("missing-credential", 8, e.to_string()),
            _ => CliError::new("provider", 5, e.to_string()),
        }
    }
}

fn from_log(e: &LogError) -> CliError {
    match e {
        LogError::Io { .. } => CliError::new("io", 1, e.to_string()),
        LogError::Corrupt { .. } => CliError::new("corrupt-log", 6, e.to_string()),
        LogError::SchemaMismatch { .. } => CliError::new("schema-mismatch", 6, e.to_string()),
    }
}

fn from_record(e: &RecordError, message: String) -> CliError {
    match e {
        RecordError::Provider(p) => CliError {
            message,
            ..CliError::from(p)
        },
        RecordError::Log(l) => CliError { message, ..from_log(l) },
        RecordError::Io { .. } => CliError::new("io", 1, message),
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        let message = e.to_string();
        match e {
            EngineError::Config(c) => c.into(),
            EngineError::Record { source, .. } => from_record(&source, message),
            EngineError::Ranking(RankingError::Provider { source, .. }) => from_record(&source, message),
            EngineError::Ranking(RankingError::Keywords { .. })
            | EngineError::Ranking(RankingError::KeywordParse { .. }) => CliError::new("provider", 5, message),
            EngineError::Ranking(_) | EngineError::Template(_) | EngineError::Invariant(_) => {
                CliError::new("internal", 1, message)
            }
            EngineError::Io { .. } => CliError::new("io", 1, message),
            EngineError::RunExists(_) => CliError::new("usage", 2, message),
            EngineError::CorruptLog(_) => CliError::new("corrupt-log", 6, message),
            EngineError::SchemaMismatch { .. } => CliError::new("schema-mismatch", 6, message),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        let message = e.to_string();
        match e {
            AnalysisError::Io { .. } => CliError::new("io", 1, message),
            AnalysisError::Log(l) => from_log(&l),
            AnalysisError::Config(c) => c.into(),
            AnalysisError::IncompleteRun(_) | AnalysisError::TooFewPrompts { .. } => {
                CliError::new("incomplete-run", 7, message)
            }
            AnalysisError::UnknownAgent(_) => CliError::new("usage", 2, message),
            AnalysisError::Provider(p) => (&p).into(),
            AnalysisError::Barnard(_) | AnalysisError::BadVotes { .. } => CliError::new("invalid-input", 4, message),
            AnalysisError::Template(_) => CliError::new("invalid-input", 4, message),
        }
    }
}

/// Resolve `preset:NAME` or a path.
pub fn load_config(spec: &str) -> Result<RunConfig, CliError> {
    match spec.strip_prefix("preset:") {
        Some(name) => presets::by_name(name).ok_or_else(|| {
            CliError::not_found(format!(
                "unknown preset {name:?}; available: {}",
                presets::NAMES.join(", ")
            ))
        }),
        None => Ok(RunConfig::load(Path::new(spec))?),
    }
}

fn require_dir(dir: &Path) -> Result<(), CliError> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::not_found(format!("{} does not exist", dir.display())))
    }
}

fn suite_for(config: &RunConfig, force_mock: bool, transport: &Arc<dyn Transport>) -> Result<ProviderSuite, CliError> {
    if force_mock {
        return Ok(ProviderSuite::mock(config.seed, &config.providers.mock));
    }
    ProviderSuite::from_config(config, transport.clone()).map_err(|e| CliError::from(&e))
}

fn print_outcome(out: &mut dyn Write, o: &RunOutcome) -> std::io::Result<()> {
    let top: Vec<String> = o.top.iter().map(|(id, total)| format!("{id} ({total})")).collect();
    writeln!(
        out,
        "{} steps completed{}, {} artworks created; top 3: {}",
        o.steps,
        if o.complete { "" } else { " (run not finished)" },
        o.artworks,
        top.join(", ")
    )?;
    writeln!(out, "run directory: {}", o.run_dir.display())
}

fn io_fail(e: std::io::Error) -> CliError {
    CliError::new("io", 1, e.to_string())
}

/// Execute a parsed command, writing human-readable output to `out`.
pub fn execute(cli: Cli, transport: Arc<dyn Transport>, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            out: run_dir,
            mock,
            live,
            seed,
            stop_after,
        } => {
            let mut cfg = load_config(&config)?;
            if mock {
                cfg.providers.backend = Backend::Mock;
            }
            if live {
                cfg.providers.backend = Backend::Remote;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let cfg = validate_config(cfg)?;
            let suite = suite_for(&cfg, false, &transport)?;
            let outcome = engine::run_until(cfg, suite, &run_dir, stop_after)?;
            print_outcome(out, &outcome).map_err(io_fail)
        }
        Command::Resume { run_dir, stop_after } => {
            require_dir(&run_dir)?;
            let cfg = RunConfig::load(&run_dir.join(engine::CONFIG_FILE))?;
            let suite = suite_for(&cfg, false, &transport)?;
            let r = engine::resume_with(&run_dir, suite, stop_after)?;
            writeln!(
                out,
                "resumed after step {} ({} trailing log lines dropped)",
                r.resumed_after, r.dropped_lines
            )
            .map_err(io_fail)?;
            print_outcome(out, &r.outcome).map_err(io_fail)
        }
        Command::AnalyzeSimilarity {
            run_dir,
            out: out_dir,
            mock,
        } => {
            require_dir(&run_dir)?;
            let run = RunRecord::load_closed(&run_dir)?;
            let out_dir = out_dir.unwrap_or_else(|| run.output_dir());
            let suite = suite_for(&run.config, mock, &transport)?;
            for (agent, s) in analysis::analyze_similarity(&run, &suite, &out_dir)? {
                writeln!(
                    out,
                    "{agent}: mean {:.4} ± {:.4} (clamped {:.4} ± {:.4}) over {} pairs",
                    s.mean, s.std, s.mean_clamped, s.std_clamped, s.pairs
                )
                .map_err(io_fail)?;
            }
            writeln!(out, "written to {}", out_dir.join("similarity").display()).map_err(io_fail)
        }
        Command::Grade {
            run_dir,
            agents,
            invoke,
            mock,
            out: out_dir,
        } => {
            require_dir(&run_dir)?;
            let run = RunRecord::load_closed(&run_dir)?;
            let out_dir = out_dir.unwrap_or_else(|| run.output_dir());
            let targets = if agents.is_empty() {
                run.artists()
            } else {
                agents.clone()
            };
            if invoke {
                let suite = suite_for(&run.config, mock, &transport)?;
                for agent in &targets {
                    analysis::invoke_grader(&run, agent, &suite, &out_dir)?;
                }
            }
            for r in analysis::grade_run(&run, &targets, &out_dir)? {
                let scored = r.sheet.len() - r.absent.len();
                writeln!(
                    out,
                    "{}: lowest {} highest {} ({} of {} scored)",
                    r.agent,
                    r.lowest.as_deref().unwrap_or("-"),
                    r.highest.as_deref().unwrap_or("-"),
                    scored,
                    r.sheet.len()
                )
                .map_err(io_fail)?;
            }
            Ok(())
        }
        Command::Barnard {
            table,
            alternative,
            statistic,
            grid,
        } => {
            let t = [[table[0], table[1]], [table[2], table[3]]];
            let options = BarnardOptions {
                alternative: match alternative {
                    AltArg::Greater => Alternative::Greater,
                    AltArg::Less => Alternative::Less,
                    AltArg::TwoSided => Alternative::TwoSided,
                },
                statistic: match statistic {
                    StatArg::Wald => Statistic::Wald,
                    StatArg::Score => Statistic::Score,
                },
                grid,
            };
            let r = analysis::barnard_exact(t, options).map_err(|e| CliError::from(AnalysisError::from(e)))?;
            writeln!(
                out,
                "p-value {:.6} statistic {:.6} nuisance {:.3}",
                r.p_value, r.statistic, r.nuisance
            )
            .map_err(io_fail)
        }
        Command::Votes { csv, compare, grid } => {
            let text =
                std::fs::read_to_string(&csv).map_err(|e| CliError::not_found(format!("{}: {e}", csv.display())))?;
            let report = analysis::vote_summary(&text)?;
            for g in &report.groups {
                let buckets: Vec<String> = g.buckets.iter().map(|(s, v)| format!("t{s}={v}")).collect();
                let (num, den) = g.second_half_share();
                writeln!(
                    out,
                    "{}: total {} [{}] first half {} second half {} (share {num}/{den})",
                    g.group,
                    g.total,
                    buckets.join(" "),
                    g.first_half,
                    g.second_half
                )
                .map_err(io_fail)?;
            }
            writeln!(out, "all groups: {}", report.total).map_err(io_fail)?;
            if let [a, b] = &compare[..] {
                let table = report
                    .later_vs_earlier(a, b)
                    .ok_or_else(|| CliError::new("usage", 2, format!("groups {a:?} and {b:?} must both appear")))?;
                let options = BarnardOptions {
                    grid,
                    ..BarnardOptions::default()
                };
                let r = analysis::barnard_exact(table, options).map_err(|e| CliError::from(AnalysisError::from(e)))?;
                writeln!(
                    out,
                    "barnard {a} vs {b} (later, earlier) {:?}: p-value {:.6} statistic {:.6}",
                    table, r.p_value, r.statistic
                )
                .map_err(io_fail)?;
            }
            Ok(())
        }
        Command::Export { run_dir, out: out_dir } => {
            require_dir(&run_dir)?;
            let run = RunRecord::load(&run_dir)?;
            let out_dir = out_dir.unwrap_or_else(|| run.output_dir());
            let path = analysis::export_run(&run, &out_dir)?;
            writeln!(out, "written to {}", path.display()).map_err(io_fail)
        }
        Command::Validate { config } => {
            let cfg = validate_config(load_config(&config)?)?;
            writeln!(
                out,
                "ok: {:?}, {} iterations, {} artists, {} critics, {} seeds",
                cfg.condition,
                cfg.iterations,
                cfg.artists.len(),
                cfg.critics.len(),
                cfg.domain.seeds.len()
            )
            .map_err(io_fail)
        }
    }
}

/// Parse `args` (including the program name), run, and return the exit
/// code. Errors go to `err` as a JSON line.
pub fn main_with(
    args: impl IntoIterator<Item = String>,
    transport: Arc<dyn Transport>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let _ = write!(err, "{e}");
            let line = CliError::new("usage", 2, e.kind().to_string()).json_line();
            let _ = writeln!(err, "{line}");
            return 2;
        }
    };
    match execute(cli, transport, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", e.json_line());
            e.exit
        }
    }
}
