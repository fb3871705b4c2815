use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{CallContext, Capability, ProviderCall, ProviderError, ProviderSuite, Reply};
use crate::log::{EventSink, LogError, LogEvent};
use crate::model::Sentiment;
use crate::templates::TemplateId;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Hands out sequence numbers, forwards calls to the suite and writes a
/// `PromptIssued` / `ProviderResponse` pair for every call.
///
/// Calls that run concurrently reserve their sequence numbers up front and
/// are committed afterwards in a fixed order, so the log does not depend
/// on scheduling.
pub struct CallRecorder {
    suite: ProviderSuite,
    sink: Box<dyn EventSink>,
    next_seq: u64,
    run_dir: PathBuf,
}

pub(crate) fn image_path(artwork_id: &str) -> String {
    format!("images/{artwork_id}.png")
}

impl CallRecorder {
    pub fn new(suite: ProviderSuite, sink: Box<dyn EventSink>, run_dir: impl Into<PathBuf>) -> Self {
        CallRecorder {
            suite,
            sink,
            next_seq: 0,
            run_dir: run_dir.into(),
        }
    }

    pub fn suite(&self) -> &ProviderSuite {
        &self.suite
    }

    pub fn run_dir(&self) -> &Path {
        &self.run_dir
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn replace_suite(&mut self, suite: ProviderSuite) -> ProviderSuite {
        std::mem::replace(&mut self.suite, suite)
    }

    pub fn replace_sink(&mut self, sink: Box<dyn EventSink>) -> Box<dyn EventSink> {
        std::mem::replace(&mut self.sink, sink)
    }

    /// Reserve `n` consecutive sequence numbers; returns the first.
    pub fn reserve(&mut self, n: u64) -> u64 {
        let first = self.next_seq;
        self.next_seq += n;
        first
    }

    pub fn context(&mut self, step: i64, agent: &str, template: Option<TemplateId>) -> CallContext {
        CallContext {
            seq: self.reserve(1),
            step,
            agent: agent.to_string(),
            template,
            attempt: 0,
        }
    }

    pub fn emit(&mut self, event: &LogEvent) -> Result<(), RecordError> {
        Ok(self.sink.emit(event)?)
    }

    pub fn commit(&mut self, call: ProviderCall) -> Result<(), RecordError> {
        if let Some(template) = call.template {
            self.sink.emit(&LogEvent::PromptIssued {
                seq: call.seq,
                template,
                text: call.request.clone(),
            })?;
        }
        self.sink.emit(&LogEvent::ProviderResponse {
            seq: call.seq,
            capability: call.capability,
            request: call.request,
            response: call.response,
            raw: call.raw,
            retries: call.retries,
            latency_ms: call.latency_ms,
        })?;
        Ok(())
    }

    pub fn text(
        &mut self,
        step: i64,
        agent: &str,
        template: TemplateId,
        prompt: &str,
        attempt: u32,
    ) -> Result<String, RecordError> {
        let ctx = self.context(step, agent, Some(template)).with_attempt(attempt);
        let reply = self.suite.generate_text(&ctx, prompt)?;
        self.commit_text(&ctx, Capability::TextGeneration, prompt, reply)
    }

    pub fn critique(
        &mut self,
        step: i64,
        agent: &str,
        prompt: &str,
        image: Option<&[u8]>,
    ) -> Result<String, RecordError> {
        let ctx = self.context(step, agent, Some(TemplateId::Critique));
        let reply = self.suite.generate_critique(&ctx, prompt, image)?;
        self.commit_text(&ctx, Capability::Critique, prompt, reply)
    }

    pub fn commit_text(
        &mut self,
        ctx: &CallContext,
        capability: Capability,
        prompt: &str,
        reply: Reply<String>,
    ) -> Result<String, RecordError> {
        self.commit(ProviderCall::from_reply(
            ctx,
            capability,
            prompt.to_string(),
            reply.value.clone(),
            &reply,
        ))?;
        Ok(reply.value)
    }

    /// Generate, store under `images/` and return the relative path.
    pub fn image(&mut self, step: i64, agent: &str, artwork_id: &str, art_prompt: &str) -> Result<String, RecordError> {
        let ctx = self.context(step, agent, None);
        let reply = self.suite.generate_image(&ctx, art_prompt)?;
        self.commit_image(&ctx, artwork_id, art_prompt, reply)
    }

    pub fn commit_image(
        &mut self,
        ctx: &CallContext,
        artwork_id: &str,
        art_prompt: &str,
        reply: Reply<Vec<u8>>,
    ) -> Result<String, RecordError> {
        let rel = self.store_image(artwork_id, &reply.value)?;
        self.commit(ProviderCall::from_reply(
            ctx,
            Capability::Image,
            art_prompt.to_string(),
            rel.clone(),
            &reply,
        ))?;
        Ok(rel)
    }

    pub fn store_image(&self, artwork_id: &str, png: &[u8]) -> Result<String, RecordError> {
        let rel = image_path(artwork_id);
        let path = self.run_dir.join(&rel);
        let io = |source| RecordError::Io {
            path: path.display().to_string(),
            source,
        };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        std::fs::write(&path, png).map_err(io)?;
        Ok(rel)
    }

    pub fn read_image(&self, rel: &str) -> Result<Vec<u8>, RecordError> {
        let path = self.run_dir.join(rel);
        std::fs::read(&path).map_err(|source| RecordError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn sentiment(&mut self, step: i64, agent: &str, text: &str) -> Result<Sentiment, RecordError> {
        let ctx = self.context(step, agent, None);
        let reply = self.suite.classify_sentiment(&ctx, text)?;
        self.commit_sentiment(&ctx, text, reply)
    }

    pub fn commit_sentiment(
        &mut self,
        ctx: &CallContext,
        text: &str,
        reply: Reply<Sentiment>,
    ) -> Result<Sentiment, RecordError> {
        let call = ProviderCall::from_reply(
            ctx,
            Capability::Sentiment,
            text.to_string(),
            reply.value.to_string(),
            &reply,
        );
        self.commit(call)?;
        Ok(reply.value)
    }

    /// The request is logged as a JSON array of the input texts.
    pub fn summarize(
        &mut self,
        step: i64,
        agent: &str,
        texts: &[String],
        budget: usize,
    ) -> Result<String, RecordError> {
        let ctx = self.context(step, agent, None);
        let reply = self.suite.summarize(&ctx, texts, budget)?;
        let request = serde_json::to_string(texts).expect("strings serialize");
        let call = ProviderCall::from_reply(&ctx, Capability::Summarize, request, reply.value.clone(), &reply);
        self.commit(call)?;
        Ok(reply.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MockConfig;
    use crate::log::{MemoryLog, VerifyingSink};

    struct Shared(std::sync::Arc<std::sync::Mutex<MemoryLog>>);

    impl EventSink for Shared {
        fn emit(&mut self, event: &LogEvent) -> Result<(), LogError> {
            self.0.lock().unwrap().emit(event)
        }
    }

    #[test]
    fn each_call_gets_next_seq_and_prompt_line() {
        let dir = tempfile::tempdir().unwrap();
        let log = std::sync::Arc::new(std::sync::Mutex::new(MemoryLog::default()));
        let mut rec = CallRecorder::new(
            ProviderSuite::mock(1, &MockConfig::default()),
            Box::new(Shared(log.clone())),
            dir.path(),
        );
        rec.text(0, "a", TemplateId::ArtCreation, "Describe a painting.", 0)
            .unwrap();
        let rel = rec.image(0, "a", "a-t000", "A red square.").unwrap();
        rec.sentiment(0, "c", "wonderful").unwrap();
        assert_eq!(rel, "images/a-t000.png");
        assert!(dir.path().join(&rel).exists());
        let kinds: Vec<_> = log.lock().unwrap().events.iter().map(|e| e.kind()).collect();
        assert_eq!(
            kinds,
            [
                "PromptIssued",
                "ProviderResponse",
                "ProviderResponse",
                "ProviderResponse"
            ]
        );
        let seqs: Vec<u64> = log
            .lock()
            .unwrap()
            .events
            .iter()
            .filter_map(|e| match e {
                LogEvent::ProviderResponse { seq, .. } => Some(*seq),
                _ => None,
            })
            .collect();
        assert_eq!(seqs, [0, 1, 2]);
    }

    #[test]
    fn verifying_sink_surfaces_as_log_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut rec = CallRecorder::new(
            ProviderSuite::mock(1, &MockConfig::default()),
            Box::new(VerifyingSink::new(vec![])),
            dir.path(),
        );
        assert!(matches!(rec.sentiment(0, "c", "fine"), Err(RecordError::Log(_))));
    }
}
