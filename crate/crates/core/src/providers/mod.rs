//! The six generative capabilities the engine relies on, behind traits with
//! interchangeable backends:
//!
//! - [`mock`]: deterministic, offline, a pure function of the run seed and
//!   the call context;
//! - [`remote`]: generic HTTP JSON endpoints with bounded retries;
//! - [`replay`]: serves responses recorded in an existing run log.
//!
//! The engine never talks to a backend directly. It goes through
//! [`ProviderSuite`] (precondition checks, image normalization, embedding
//! normalization) and [`CallRecorder`] (sequence numbers and logging).

pub mod http;
pub mod mock;
mod recorder;
pub mod remote;
pub mod replay;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Sentiment;
use crate::templates::TemplateId;

pub use recorder::{CallRecorder, RecordError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Capability {
    TextGeneration,
    Critique,
    Image,
    Sentiment,
    Summarize,
    Embed,
}

impl std::fmt::Display for Capability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Capability::TextGeneration => "text-generation",
            Capability::Critique => "critique",
            Capability::Image => "image",
            Capability::Sentiment => "sentiment",
            Capability::Summarize => "summarize",
            Capability::Embed => "embed",
        })
    }
}

/// Who is asking and why. Mock backends derive their output from it;
/// remote backends ignore everything except for error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallContext {
    pub seq: u64,
    pub step: i64,
    pub agent: String,
    pub template: Option<TemplateId>,
    /// 0 for the first try of a logical request; bumped when the caller
    /// re-asks after rejecting a response.
    pub attempt: u32,
}

impl CallContext {
    pub fn new(seq: u64, step: i64, agent: impl Into<String>) -> Self {
        CallContext {
            seq,
            step,
            agent: agent.into(),
            template: None,
            attempt: 0,
        }
    }

    pub fn with_template(mut self, template: TemplateId) -> Self {
        self.template = Some(template);
        self
    }

    pub fn with_attempt(mut self, attempt: u32) -> Self {
        self.attempt = attempt;
        self
    }
}

/// A backend's answer plus transport bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply<T> {
    pub value: T,
    /// Unprocessed response body, when it differs from the value.
    pub raw: Option<String>,
    pub retries: u32,
    pub latency_ms: u64,
}

impl<T> Reply<T> {
    pub fn immediate(value: T) -> Self {
        Reply {
            value,
            raw: None,
            retries: 0,
            latency_ms: 0,
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Reply<U> {
        Reply {
            value: f(self.value),
            raw: self.raw,
            retries: self.retries,
            latency_ms: self.latency_ms,
        }
    }
}

/// One provider call as written to the run log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderCall {
    pub seq: u64,
    pub capability: Capability,
    pub template: Option<TemplateId>,
    pub request: String,
    pub response: String,
    pub raw: Option<String>,
    pub retries: u32,
    pub latency_ms: u64,
}

impl ProviderCall {
    pub fn from_reply<T>(
        ctx: &CallContext,
        capability: Capability,
        request: String,
        response: String,
        reply: &Reply<T>,
    ) -> Self {
        ProviderCall {
            seq: ctx.seq,
            capability,
            template: ctx.template,
            request,
            response,
            raw: reply.raw.clone(),
            retries: reply.retries,
            latency_ms: reply.latency_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("{capability}: empty request")]
    EmptyPrompt { capability: Capability },
    #[error("{capability}: endpoint failed after {retry_count} retries: {message}")]
    Endpoint {
        capability: Capability,
        retry_count: u32,
        message: String,
    },
    #[error("{capability}: endpoint returned an empty completion")]
    EmptyCompletion { capability: Capability },
    #[error("image could not be decoded: {0}")]
    ImageDecode(String),
    #[error("{capability}: unexpected response shape: {message}")]
    BadResponse { capability: Capability, message: String },
    #[error("environment variable {variable} is not set (needed for the {capability} endpoint)")]
    MissingCredential { variable: String, capability: Capability },
    #[error("{capability}: embedding has zero norm")]
    ZeroEmbedding { capability: Capability },
    #[error("replay of call {seq}: {message}")]
    Replay { seq: u64, message: String },
}

pub trait TextGenerator: Send + Sync {
    fn generate(&self, ctx: &CallContext, prompt: &str) -> Result<Reply<String>, ProviderError>;
}

/// Text plus an optional image in, text out.
pub trait MultimodalGenerator: Send + Sync {
    fn generate(&self, ctx: &CallContext, prompt: &str, image: Option<&[u8]>) -> Result<Reply<String>, ProviderError>;
}

/// Returns encoded image bytes in any format the `image` crate can decode.
pub trait TextToImage: Send + Sync {
    fn generate(&self, ctx: &CallContext, prompt: &str) -> Result<Reply<Vec<u8>>, ProviderError>;
}

pub trait SentimentClassifier: Send + Sync {
    fn classify(&self, ctx: &CallContext, text: &str) -> Result<Reply<Sentiment>, ProviderError>;
}

pub trait Summarizer: Send + Sync {
    /// `budget` is a character budget; backends may overrun it.
    fn summarize(&self, ctx: &CallContext, texts: &[String], budget: usize) -> Result<Reply<String>, ProviderError>;
}

pub trait SentenceEmbedder: Send + Sync {
    fn embed(&self, ctx: &CallContext, text: &str) -> Result<Reply<Vec<f64>>, ProviderError>;
}

/// Every capability the engine and analysis need. Cloning is cheap.
#[derive(Clone)]
pub struct ProviderSuite {
    pub text_gen: Arc<dyn TextGenerator>,
    pub critic_gen: Arc<dyn MultimodalGenerator>,
    pub image_gen: Arc<dyn TextToImage>,
    pub sentiment: Arc<dyn SentimentClassifier>,
    pub summarizer: Arc<dyn Summarizer>,
    pub embedder: Arc<dyn SentenceEmbedder>,
}

impl std::fmt::Debug for ProviderSuite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ProviderSuite { .. }")
    }
}

fn non_empty(capability: Capability, text: &str) -> Result<(), ProviderError> {
    if text.trim().is_empty() {
        Err(ProviderError::EmptyPrompt { capability })
    } else {
        Ok(())
    }
}

fn completion(capability: Capability, reply: Reply<String>) -> Result<Reply<String>, ProviderError> {
    if reply.value.trim().is_empty() {
        Err(ProviderError::EmptyCompletion { capability })
    } else {
        Ok(reply)
    }
}

impl ProviderSuite {
    /// The offline suite.
    pub fn mock(seed: u64, config: &crate::config::MockConfig) -> Self {
        let backend = Arc::new(mock::MockBackend::new(seed, config.clone()));
        Self::uniform(backend)
    }

    /// The suite selected by a run config. Remote endpoints talk through
    /// `transport`.
    pub fn from_config(
        config: &crate::config::RunConfig,
        transport: Arc<dyn http::Transport>,
    ) -> Result<Self, ProviderError> {
        let p = &config.providers;
        match (&p.backend, &p.remote) {
            (crate::config::Backend::Remote, Some(remote)) => {
                let policy = remote::RetryPolicy {
                    max_retries: p.max_retries,
                    backoff_ms: p.backoff_ms,
                };
                let backend = remote::RemoteBackend::from_config(remote, policy, transport)?;
                Ok(Self::uniform(Arc::new(backend)))
            }
            _ => Ok(Self::mock(config.seed, &p.mock)),
        }
    }

    /// One object serving every capability.
    pub fn uniform<B>(backend: Arc<B>) -> Self
    where
        B: TextGenerator
            + MultimodalGenerator
            + TextToImage
            + SentimentClassifier
            + Summarizer
            + SentenceEmbedder
            + 'static,
    {
        ProviderSuite {
            text_gen: backend.clone(),
            critic_gen: backend.clone(),
            image_gen: backend.clone(),
            sentiment: backend.clone(),
            summarizer: backend.clone(),
            embedder: backend,
        }
    }

    pub fn generate_text(&self, ctx: &CallContext, prompt: &str) -> Result<Reply<String>, ProviderError> {
        non_empty(Capability::TextGeneration, prompt)?;
        completion(Capability::TextGeneration, self.text_gen.generate(ctx, prompt)?)
    }

    pub fn generate_critique(
        &self,
        ctx: &CallContext,
        prompt: &str,
        image: Option<&[u8]>,
    ) -> Result<Reply<String>, ProviderError> {
        non_empty(Capability::Critique, prompt)?;
        completion(Capability::Critique, self.critic_gen.generate(ctx, prompt, image)?)
    }

    /// Generated image re-encoded as PNG.
    pub fn generate_image(&self, ctx: &CallContext, art_prompt: &str) -> Result<Reply<Vec<u8>>, ProviderError> {
        non_empty(Capability::Image, art_prompt)?;
        let reply = self.image_gen.generate(ctx, art_prompt)?;
        let png = to_png(&reply.value)?;
        Ok(reply.map(|_| png))
    }

    pub fn classify_sentiment(&self, ctx: &CallContext, text: &str) -> Result<Reply<Sentiment>, ProviderError> {
        non_empty(Capability::Sentiment, text)?;
        self.sentiment.classify(ctx, text)
    }

    /// Raw summary; enforcing the budget is the caller's job so that the
    /// overrun can be logged.
    pub fn summarize(
        &self,
        ctx: &CallContext,
        texts: &[String],
        budget: usize,
    ) -> Result<Reply<String>, ProviderError> {
        if texts.is_empty() || texts.iter().all(|t| t.trim().is_empty()) {
            return Err(ProviderError::EmptyPrompt {
                capability: Capability::Summarize,
            });
        }
        completion(Capability::Summarize, self.summarizer.summarize(ctx, texts, budget)?)
    }

    /// Unit-norm embedding.
    pub fn embed(&self, ctx: &CallContext, text: &str) -> Result<Reply<Vec<f64>>, ProviderError> {
        non_empty(Capability::Embed, text)?;
        let reply = self.embedder.embed(ctx, text)?;
        let norm = reply.value.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(ProviderError::ZeroEmbedding {
                capability: Capability::Embed,
            });
        }
        Ok(reply.map(|v| v.into_iter().map(|x| x / norm).collect()))
    }
}

/// Decode any supported image format and re-encode it as PNG. PNG input is
/// validated and passed through untouched.
pub fn to_png(bytes: &[u8]) -> Result<Vec<u8>, ProviderError> {
    let format = image::guess_format(bytes).map_err(|e| ProviderError::ImageDecode(e.to_string()))?;
    let decoded = image::load_from_memory(bytes).map_err(|e| ProviderError::ImageDecode(e.to_string()))?;
    if format == image::ImageFormat::Png {
        return Ok(bytes.to_vec());
    }
    let mut out = std::io::Cursor::new(Vec::new());
    decoded
        .write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| ProviderError::ImageDecode(e.to_string()))?;
    Ok(out.into_inner())
}
