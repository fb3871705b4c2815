//! Continue an interrupted run.
//!
//! The log is cut after its last `StepCompleted`. The run is then replayed
//! from scratch with the recorded provider responses while every event is
//! compared byte for byte against the kept prefix, which rebuilds the exact
//! in-memory state. The live suite takes over from the next step.

use std::path::Path;
use std::sync::{Arc, Mutex};

use super::{io_err, EngineError, RunOutcome, Simulation, CONFIG_FILE, LOG_FILE};
use crate::config::{validate_config, RunConfig};
use crate::log::{decode_line, EventSink, LogError, LogEvent, RunLogWriter, VerifyingSink};
use crate::providers::replay::ReplayBackend;
use crate::providers::ProviderSuite;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResumeOutcome {
    /// Last step found complete in the log.
    pub resumed_after: i64,
    /// Lines discarded from the end of the log.
    pub dropped_lines: usize,
    pub outcome: RunOutcome,
}

struct SharedVerifier(Arc<Mutex<VerifyingSink>>);

impl EventSink for SharedVerifier {
    fn emit(&mut self, event: &LogEvent) -> Result<(), LogError> {
        self.0.lock().expect("verifier poisoned").emit(event)
    }
}

/// Lines up to and including the last `StepCompleted`, and that step.
/// A torn final line (no trailing newline, not valid JSON) is ignored.
fn completed_prefix(text: &str) -> Result<(Vec<&str>, Vec<LogEvent>, i64, usize), EngineError> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.iter().all(|l| l.trim().is_empty()) {
        return Err(EngineError::CorruptLog("run log is empty".into()));
    }
    let torn_tail = !text.ends_with('\n');
    let mut events = Vec::with_capacity(lines.len());
    let mut last = None;
    for (i, line) in lines.iter().enumerate() {
        match decode_line(line, i + 1) {
            Ok(event) => {
                if let LogEvent::StepCompleted { t } = event {
                    last = Some((i, t));
                }
                events.push(event);
            }
            Err(LogError::SchemaMismatch { line, found }) => return Err(EngineError::SchemaMismatch { line, found }),
            Err(_) if torn_tail && i + 1 == lines.len() => break,
            Err(e) => return Err(EngineError::CorruptLog(e.to_string())),
        }
    }
    let (idx, t) = last.ok_or_else(|| EngineError::CorruptLog("no completed step to resume from".into()))?;
    events.truncate(idx + 1);
    Ok((lines[..=idx].to_vec(), events, t, lines.len() - idx - 1))
}

/// Resume the run in `run_dir` and carry it to completion with `suite`.
pub fn resume(run_dir: &Path, suite: ProviderSuite) -> Result<ResumeOutcome, EngineError> {
    resume_with(run_dir, suite, None)
}

/// Like [`resume`], stopping after step `stop_after` if given.
pub fn resume_with(
    run_dir: &Path,
    suite: ProviderSuite,
    stop_after: Option<i64>,
) -> Result<ResumeOutcome, EngineError> {
    let config = validate_config(RunConfig::load(&run_dir.join(CONFIG_FILE))?)?;
    let log_path = run_dir.join(LOG_FILE);
    let text = std::fs::read_to_string(&log_path).map_err(io_err(&log_path))?;
    let (kept, events, last_t, dropped_lines) = completed_prefix(&text)?;

    let replay = ProviderSuite::uniform(Arc::new(ReplayBackend::new(&events, run_dir)));
    let verifier = Arc::new(Mutex::new(VerifyingSink::new(
        kept.iter().map(|l| l.to_string()).collect(),
    )));
    let diverged = |e: EngineError| EngineError::CorruptLog(format!("replay does not reproduce the log: {e}"));
    let mut sim =
        Simulation::start(config, replay, Box::new(SharedVerifier(verifier.clone())), run_dir).map_err(diverged)?;
    while sim.completed_steps() <= last_t {
        if sim.is_complete() {
            return Err(EngineError::CorruptLog(format!(
                "log records step {last_t} beyond the configured iterations"
            )));
        }
        sim.step().map_err(diverged)?;
    }
    let remaining = verifier.lock().expect("verifier poisoned").remaining();
    if remaining != 0 {
        return Err(EngineError::CorruptLog(format!(
            "{remaining} recorded events were not reproduced by replay"
        )));
    }

    let mut rewritten = kept.join("\n");
    rewritten.push('\n');
    std::fs::write(&log_path, rewritten).map_err(io_err(&log_path))?;
    let writer = RunLogWriter::append(&log_path)?;
    sim.recorder_mut().replace_sink(Box::new(writer));
    sim.recorder_mut().replace_suite(suite);
    sim.run_until(stop_after)?;
    Ok(ResumeOutcome {
        resumed_after: last_t,
        dropped_lines,
        outcome: RunOutcome::of(&sim),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_stops_at_last_completed_step() {
        let text = concat!(
            r#"{"schema_version":1,"event":"StepCompleted","t":0}"#,
            "\n",
            r#"{"schema_version":1,"event":"Warning","step":1,"message":"m"}"#,
            "\n",
            r#"{"schema_version":1,"event":"Warn"#
        );
        let (kept, events, t, dropped) = completed_prefix(text).unwrap();
        assert_eq!((kept.len(), events.len(), t, dropped), (1, 1, 0, 2));
    }

    #[test]
    fn empty_and_stepless_logs_are_corrupt() {
        assert!(matches!(completed_prefix(""), Err(EngineError::CorruptLog(_))));
        let text = "{\"schema_version\":1,\"event\":\"Warning\",\"step\":0,\"message\":\"m\"}\n";
        assert!(matches!(completed_prefix(text), Err(EngineError::CorruptLog(_))));
    }

    #[test]
    fn schema_mismatch_reported() {
        let text = "{\"schema_version\":9,\"event\":\"StepCompleted\",\"t\":0}\n";
        assert!(matches!(
            completed_prefix(text),
            Err(EngineError::SchemaMismatch { line: 1, .. })
        ));
    }

    #[test]
    fn garbage_in_the_middle_is_corrupt() {
        let text = "not json\n{\"schema_version\":1,\"event\":\"StepCompleted\",\"t\":0}\n";
        assert!(matches!(completed_prefix(text), Err(EngineError::CorruptLog(_))));
    }
}
