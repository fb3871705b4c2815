//! Serves the responses recorded in a run log, keyed by sequence number.

use std::collections::BTreeMap;
use std::path::PathBuf;

use super::{
    CallContext, Capability, MultimodalGenerator, ProviderError, Reply, SentenceEmbedder, SentimentClassifier,
    Summarizer, TextGenerator, TextToImage,
};
use crate::log::LogEvent;
use crate::model::Sentiment;

#[derive(Debug, Clone)]
struct Recorded {
    capability: Capability,
    response: String,
    raw: Option<String>,
    retries: u32,
    latency_ms: u64,
}

#[derive(Debug, Clone)]
pub struct ReplayBackend {
    calls: BTreeMap<u64, Recorded>,
    run_dir: PathBuf,
}

impl ReplayBackend {
    /// Index every `ProviderResponse` in `events`. Image responses are read
    /// back from `run_dir`.
    pub fn new<'a>(events: impl IntoIterator<Item = &'a LogEvent>, run_dir: impl Into<PathBuf>) -> Self {
        let mut calls = BTreeMap::new();
        for event in events {
            if let LogEvent::ProviderResponse {
                seq,
                capability,
                response,
                raw,
                retries,
                latency_ms,
                ..
            } = event
            {
                calls.insert(
                    *seq,
                    Recorded {
                        capability: *capability,
                        response: response.clone(),
                        raw: raw.clone(),
                        retries: *retries,
                        latency_ms: *latency_ms,
                    },
                );
            }
        }
        ReplayBackend {
            calls,
            run_dir: run_dir.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.calls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calls.is_empty()
    }

    fn lookup(&self, ctx: &CallContext, capability: Capability) -> Result<&Recorded, ProviderError> {
        let rec = self.calls.get(&ctx.seq).ok_or_else(|| ProviderError::Replay {
            seq: ctx.seq,
            message: "no recorded response".into(),
        })?;
        if rec.capability != capability {
            return Err(ProviderError::Replay {
                seq: ctx.seq,
                message: format!("recorded a {} call, replay asked for {}", rec.capability, capability),
            });
        }
        Ok(rec)
    }

    fn reply<T>(rec: &Recorded, value: T) -> Reply<T> {
        Reply {
            value,
            raw: rec.raw.clone(),
            retries: rec.retries,
            latency_ms: rec.latency_ms,
        }
    }
}

impl TextGenerator for ReplayBackend {
    fn generate(&self, ctx: &CallContext, _prompt: &str) -> Result<Reply<String>, ProviderError> {
        let rec = self.lookup(ctx, Capability::TextGeneration)?;
        Ok(Self::reply(rec, rec.response.clone()))
    }
}

impl MultimodalGenerator for ReplayBackend {
    fn generate(
        &self,
        ctx: &CallContext,
        _prompt: &str,
        _image: Option<&[u8]>,
    ) -> Result<Reply<String>, ProviderError> {
        let rec = self.lookup(ctx, Capability::Critique)?;
        Ok(Self::reply(rec, rec.response.clone()))
    }
}

impl TextToImage for ReplayBackend {
    fn generate(&self, ctx: &CallContext, _prompt: &str) -> Result<Reply<Vec<u8>>, ProviderError> {
        let rec = self.lookup(ctx, Capability::Image)?;
        let path = self.run_dir.join(&rec.response);
        let bytes = std::fs::read(&path).map_err(|e| ProviderError::Replay {
            seq: ctx.seq,
            message: format!("{}: {e}", path.display()),
        })?;
        Ok(Self::reply(rec, bytes))
    }
}

impl SentimentClassifier for ReplayBackend {
    fn classify(&self, ctx: &CallContext, _text: &str) -> Result<Reply<Sentiment>, ProviderError> {
        let rec = self.lookup(ctx, Capability::Sentiment)?;
        let label = rec.response.parse().map_err(|e: String| ProviderError::Replay {
            seq: ctx.seq,
            message: e,
        })?;
        Ok(Self::reply(rec, label))
    }
}

impl Summarizer for ReplayBackend {
    fn summarize(&self, ctx: &CallContext, _texts: &[String], _budget: usize) -> Result<Reply<String>, ProviderError> {
        let rec = self.lookup(ctx, Capability::Summarize)?;
        Ok(Self::reply(rec, rec.response.clone()))
    }
}

impl SentenceEmbedder for ReplayBackend {
    fn embed(&self, ctx: &CallContext, _text: &str) -> Result<Reply<Vec<f64>>, ProviderError> {
        let rec = self.lookup(ctx, Capability::Embed)?;
        let v = serde_json::from_str(&rec.response).map_err(|e| ProviderError::Replay {
            seq: ctx.seq,
            message: e.to_string(),
        })?;
        Ok(Self::reply(rec, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn response(seq: u64, capability: Capability, response: &str) -> LogEvent {
        LogEvent::ProviderResponse {
            seq,
            capability,
            request: "q".into(),
            response: response.into(),
            raw: None,
            retries: 2,
            latency_ms: 17,
        }
    }

    #[test]
    fn serves_by_seq_with_bookkeeping() {
        let events = [
            response(0, Capability::TextGeneration, "hello"),
            response(1, Capability::Sentiment, "positive"),
        ];
        let r = ReplayBackend::new(&events, "/nonexistent");
        let t = TextGenerator::generate(&r, &CallContext::new(0, 0, "a"), "ignored").unwrap();
        assert_eq!((t.value.as_str(), t.retries, t.latency_ms), ("hello", 2, 17));
        let s = r.classify(&CallContext::new(1, 0, "a"), "x").unwrap();
        assert_eq!(s.value, Sentiment::Positive);
    }

    #[test]
    fn mismatches_are_errors() {
        let events = [response(0, Capability::TextGeneration, "hello")];
        let r = ReplayBackend::new(&events, "/nonexistent");
        assert!(matches!(
            r.classify(&CallContext::new(0, 0, "a"), "x"),
            Err(ProviderError::Replay { seq: 0, .. })
        ));
        assert!(TextGenerator::generate(&r, &CallContext::new(5, 0, "a"), "x").is_err());
    }
}
