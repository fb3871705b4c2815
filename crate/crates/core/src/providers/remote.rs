//! HTTP JSON endpoints, one per capability.
//!
//! Wire shapes (`flavor` in the endpoint config):
//!
//! | capability | flavors |
//! |---|---|
//! | text, critique | `chat` (OpenAI-style chat completions; images sent as `data:` URLs) |
//! | image | `binary` (raw image body), `b64-json` (`data[0].b64_json`) |
//! | sentiment | `hf-classification` (label/score lists) |
//! | summarizer | `hf-summarization` (`summary_text`), `chat` |
//! | embedder | `hf-feature-extraction` (vector, or token vectors mean-pooled), `openai-embeddings` |
//!
//! Transport failures, 5xx and 429 are retried up to `max_retries` times
//! with exponential backoff; other statuses fail at once.

use std::sync::Arc;
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde_json::{json, Value};

use super::http::{HttpReply, HttpRequest, Transport};
use super::{
    CallContext, Capability, MultimodalGenerator, ProviderError, Reply, SentenceEmbedder, SentimentClassifier,
    Summarizer, TextGenerator, TextToImage,
};
use crate::config::{EndpointConfig, RemoteConfig};
use crate::model::Sentiment;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Flavor {
    Chat,
    Binary,
    B64Json,
    HfClassification,
    HfSummarization,
    HfFeatureExtraction,
    OpenAiEmbeddings,
}

impl Flavor {
    fn parse(name: &str) -> Option<Flavor> {
        Some(match name {
            "chat" => Flavor::Chat,
            "binary" => Flavor::Binary,
            "b64-json" => Flavor::B64Json,
            "hf-classification" => Flavor::HfClassification,
            "hf-summarization" => Flavor::HfSummarization,
            "hf-feature-extraction" => Flavor::HfFeatureExtraction,
            "openai-embeddings" => Flavor::OpenAiEmbeddings,
            _ => return None,
        })
    }

    fn default_for(capability: Capability) -> Flavor {
        match capability {
            Capability::TextGeneration | Capability::Critique => Flavor::Chat,
            Capability::Image => Flavor::Binary,
            Capability::Sentiment => Flavor::HfClassification,
            Capability::Summarize => Flavor::HfSummarization,
            Capability::Embed => Flavor::HfFeatureExtraction,
        }
    }

    fn allowed(self, capability: Capability) -> bool {
        use Flavor::*;
        match capability {
            Capability::TextGeneration | Capability::Critique => self == Chat,
            Capability::Image => matches!(self, Binary | B64Json),
            Capability::Sentiment => self == HfClassification,
            Capability::Summarize => matches!(self, HfSummarization | Chat),
            Capability::Embed => matches!(self, HfFeatureExtraction | OpenAiEmbeddings),
        }
    }
}

#[derive(Debug, Clone)]
struct Endpoint {
    capability: Capability,
    url: String,
    model: String,
    bearer: Option<String>,
    flavor: Flavor,
}

impl Endpoint {
    fn resolve(
        capability: Capability,
        cfg: &EndpointConfig,
        env: &dyn Fn(&str) -> Option<String>,
    ) -> Result<Self, ProviderError> {
        let flavor = match &cfg.flavor {
            None => Flavor::default_for(capability),
            Some(name) => {
                Flavor::parse(name)
                    .filter(|f| f.allowed(capability))
                    .ok_or_else(|| ProviderError::BadResponse {
                        capability,
                        message: format!("unsupported flavor {name:?}"),
                    })?
            }
        };
        let bearer = match &cfg.api_key_env {
            None => None,
            Some(var) => Some(
                env(var)
                    .filter(|v| !v.is_empty())
                    .ok_or_else(|| ProviderError::MissingCredential {
                        variable: var.clone(),
                        capability,
                    })?,
            ),
        };
        Ok(Endpoint {
            capability,
            url: cfg.url.clone(),
            model: cfg.model.clone(),
            bearer,
            flavor,
        })
    }
}

/// Retry policy shared by every endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub backoff_ms: u64,
}

pub struct RemoteBackend {
    text: Endpoint,
    critic: Endpoint,
    image: Endpoint,
    sentiment: Endpoint,
    summarizer: Endpoint,
    embedder: Endpoint,
    transport: Arc<dyn Transport>,
    policy: RetryPolicy,
}

struct Exchange {
    body: Vec<u8>,
    retries: u32,
    latency_ms: u64,
}

fn bad(capability: Capability, message: impl Into<String>) -> ProviderError {
    ProviderError::BadResponse {
        capability,
        message: message.into(),
    }
}

fn parse_json(capability: Capability, body: &[u8]) -> Result<Value, ProviderError> {
    serde_json::from_slice(body).map_err(|e| bad(capability, format!("invalid JSON: {e}")))
}

fn retryable(reply: &Result<HttpReply, String>) -> bool {
    match reply {
        Err(_) => true,
        Ok(r) => r.status >= 500 || r.status == 429,
    }
}

fn describe(reply: &Result<HttpReply, String>) -> String {
    match reply {
        Err(e) => e.clone(),
        Ok(r) => {
            let snippet: String = String::from_utf8_lossy(&r.body).chars().take(200).collect();
            format!("HTTP {}: {snippet}", r.status)
        }
    }
}

impl RemoteBackend {
    /// Resolve every endpoint, reading bearer tokens from the environment.
    pub fn from_config(
        cfg: &RemoteConfig,
        policy: RetryPolicy,
        transport: Arc<dyn Transport>,
    ) -> Result<Self, ProviderError> {
        Self::with_env(cfg, policy, transport, &|var| std::env::var(var).ok())
    }

    pub fn with_env(
        cfg: &RemoteConfig,
        policy: RetryPolicy,
        transport: Arc<dyn Transport>,
        env: &dyn Fn(&str) -> Option<String>,
    ) -> Result<Self, ProviderError> {
        Ok(RemoteBackend {
            text: Endpoint::resolve(Capability::TextGeneration, &cfg.text, env)?,
            critic: Endpoint::resolve(Capability::Critique, &cfg.critic, env)?,
            image: Endpoint::resolve(Capability::Image, &cfg.image, env)?,
            sentiment: Endpoint::resolve(Capability::Sentiment, &cfg.sentiment, env)?,
            summarizer: Endpoint::resolve(Capability::Summarize, &cfg.summarizer, env)?,
            embedder: Endpoint::resolve(Capability::Embed, &cfg.embedder, env)?,
            transport,
            policy,
        })
    }

    fn exchange(&self, endpoint: &Endpoint, body: Value) -> Result<Exchange, ProviderError> {
        let request = HttpRequest {
            url: endpoint.url.clone(),
            bearer: endpoint.bearer.clone(),
            body,
        };
        let started = Instant::now();
        let mut attempt = 0u32;
        loop {
            let reply = self.transport.post(&request);
            match &reply {
                Ok(r) if (200..300).contains(&r.status) => {
                    return Ok(Exchange {
                        body: r.body.clone(),
                        retries: attempt,
                        latency_ms: started.elapsed().as_millis() as u64,
                    });
                }
                _ if retryable(&reply) && attempt < self.policy.max_retries => {
                    log::warn!(
                        "{} attempt {} failed: {}",
                        endpoint.capability,
                        attempt + 1,
                        describe(&reply)
                    );
                    let delay = self.policy.backoff_ms.saturating_mul(1u64 << attempt.min(16));
                    if delay > 0 {
                        std::thread::sleep(Duration::from_millis(delay));
                    }
                    attempt += 1;
                }
                _ => {
                    return Err(ProviderError::Endpoint {
                        capability: endpoint.capability,
                        retry_count: attempt,
                        message: describe(&reply),
                    });
                }
            }
        }
    }

    fn chat(&self, endpoint: &Endpoint, prompt: &str, image: Option<&[u8]>) -> Result<Reply<String>, ProviderError> {
        let content = match image {
            None => json!(prompt),
            Some(bytes) => {
                let url = format!(
                    "data:image/png;base64,{}",
                    base64::engine::general_purpose::STANDARD.encode(bytes)
                );
                json!([
                    {"type": "text", "text": prompt},
                    {"type": "image_url", "image_url": {"url": url}},
                ])
            }
        };
        let mut body = json!({"messages": [{"role": "user", "content": content}]});
        if !endpoint.model.is_empty() {
            body["model"] = json!(endpoint.model);
        }
        let ex = self.exchange(endpoint, body)?;
        let value = parse_json(endpoint.capability, &ex.body)?;
        let text = value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| bad(endpoint.capability, "missing choices[0].message.content"))?;
        Ok(Reply {
            value: text.to_string(),
            raw: Some(String::from_utf8_lossy(&ex.body).into_owned()),
            retries: ex.retries,
            latency_ms: ex.latency_ms,
        })
    }
}

/// Probability of the positive class from an HF classification payload
/// (`[{label, score}]` or `[[{label, score}]]`).
fn positive_probability(capability: Capability, value: &Value) -> Result<f64, ProviderError> {
    let list = match value.get(0) {
        Some(Value::Array(inner)) => inner,
        _ => value
            .as_array()
            .ok_or_else(|| bad(capability, "expected a list of labels"))?,
    };
    let mut positive = None;
    let mut negative = None;
    for entry in list {
        let label = entry.get("label").and_then(Value::as_str).unwrap_or_default();
        let score = entry.get("score").and_then(Value::as_f64);
        match label.parse::<Sentiment>() {
            Ok(Sentiment::Positive) => positive = score,
            Ok(Sentiment::Negative) => negative = score,
            Err(_) => {}
        }
    }
    positive
        .or(negative.map(|n| 1.0 - n))
        .ok_or_else(|| bad(capability, "no positive or negative label in response"))
}

/// A single vector, or the mean of a list of token vectors.
fn pooled_embedding(capability: Capability, value: &Value) -> Result<Vec<f64>, ProviderError> {
    let mut v = value;
    // unwrap a batch of one: [[[...]]] -> [[...]]
    while let Some(Value::Array(inner)) = v.get(0) {
        if inner.first().is_some_and(Value::is_array) && v.as_array().is_some_and(|a| a.len() == 1) {
            v = &v[0];
        } else {
            break;
        }
    }
    let as_vec = |x: &Value| -> Option<Vec<f64>> { x.as_array()?.iter().map(Value::as_f64).collect() };
    if let Some(flat) = as_vec(v) {
        return Ok(flat);
    }
    let rows: Vec<Vec<f64>> = v
        .as_array()
        .ok_or_else(|| bad(capability, "expected an embedding array"))?
        .iter()
        .map(|r| as_vec(r).ok_or_else(|| bad(capability, "non-numeric embedding row")))
        .collect::<Result<_, _>>()?;
    let dim = rows
        .first()
        .map(Vec::len)
        .ok_or_else(|| bad(capability, "empty embedding"))?;
    if rows.iter().any(|r| r.len() != dim) {
        return Err(bad(capability, "ragged token embeddings"));
    }
    let n = rows.len() as f64;
    Ok((0..dim).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect())
}

impl TextGenerator for RemoteBackend {
    fn generate(&self, _ctx: &CallContext, prompt: &str) -> Result<Reply<String>, ProviderError> {
        self.chat(&self.text, prompt, None)
    }
}

impl MultimodalGenerator for RemoteBackend {
    fn generate(&self, _ctx: &CallContext, prompt: &str, image: Option<&[u8]>) -> Result<Reply<String>, ProviderError> {
        self.chat(&self.critic, prompt, image)
    }
}

impl TextToImage for RemoteBackend {
    fn generate(&self, _ctx: &CallContext, prompt: &str) -> Result<Reply<Vec<u8>>, ProviderError> {
        let ep = &self.image;
        match ep.flavor {
            Flavor::B64Json => {
                let mut body = json!({"prompt": prompt, "n": 1, "response_format": "b64_json"});
                if !ep.model.is_empty() {
                    body["model"] = json!(ep.model);
                }
                let ex = self.exchange(ep, body)?;
                let value = parse_json(ep.capability, &ex.body)?;
                let encoded = value
                    .pointer("/data/0/b64_json")
                    .and_then(Value::as_str)
                    .ok_or_else(|| bad(ep.capability, "missing data[0].b64_json"))?;
                let bytes = base64::engine::general_purpose::STANDARD
                    .decode(encoded)
                    .map_err(|e| ProviderError::ImageDecode(e.to_string()))?;
                Ok(Reply {
                    value: bytes,
                    raw: None,
                    retries: ex.retries,
                    latency_ms: ex.latency_ms,
                })
            }
            _ => {
                let ex = self.exchange(ep, json!({"inputs": prompt}))?;
                Ok(Reply {
                    value: ex.body,
                    raw: None,
                    retries: ex.retries,
                    latency_ms: ex.latency_ms,
                })
            }
        }
    }
}

impl SentimentClassifier for RemoteBackend {
    fn classify(&self, _ctx: &CallContext, text: &str) -> Result<Reply<Sentiment>, ProviderError> {
        let ep = &self.sentiment;
        let ex = self.exchange(ep, json!({"inputs": text}))?;
        let value = parse_json(ep.capability, &ex.body)?;
        let p = positive_probability(ep.capability, &value)?;
        let label = if p > 0.5 {
            Sentiment::Positive
        } else {
            Sentiment::Negative
        };
        Ok(Reply {
            value: label,
            raw: Some(String::from_utf8_lossy(&ex.body).into_owned()),
            retries: ex.retries,
            latency_ms: ex.latency_ms,
        })
    }
}

impl Summarizer for RemoteBackend {
    fn summarize(&self, _ctx: &CallContext, texts: &[String], budget: usize) -> Result<Reply<String>, ProviderError> {
        let ep = &self.summarizer;
        let joined = texts.join("\n\n");
        if ep.flavor == Flavor::Chat {
            let prompt = format!("Summarize the following notes in at most {budget} characters.\n\n{joined}");
            return self.chat(ep, &prompt, None);
        }
        // roughly four characters per token
        let max_tokens = (budget / 4).max(16);
        let ex = self.exchange(ep, json!({"inputs": joined, "parameters": {"max_length": max_tokens}}))?;
        let value = parse_json(ep.capability, &ex.body)?;
        let text = value
            .pointer("/0/summary_text")
            .or_else(|| value.get("summary_text"))
            .and_then(Value::as_str)
            .ok_or_else(|| bad(ep.capability, "missing summary_text"))?;
        Ok(Reply {
            value: text.to_string(),
            raw: Some(String::from_utf8_lossy(&ex.body).into_owned()),
            retries: ex.retries,
            latency_ms: ex.latency_ms,
        })
    }
}

impl SentenceEmbedder for RemoteBackend {
    fn embed(&self, _ctx: &CallContext, text: &str) -> Result<Reply<Vec<f64>>, ProviderError> {
        let ep = &self.embedder;
        let (body, pointer) = match ep.flavor {
            Flavor::OpenAiEmbeddings => (json!({"model": ep.model, "input": text}), Some("/data/0/embedding")),
            _ => (json!({"inputs": text}), None),
        };
        let ex = self.exchange(ep, body)?;
        let value = parse_json(ep.capability, &ex.body)?;
        let target = match pointer {
            Some(p) => value
                .pointer(p)
                .ok_or_else(|| bad(ep.capability, "missing data[0].embedding"))?,
            None => &value,
        };
        let v = pooled_embedding(ep.capability, target)?;
        Ok(Reply {
            value: v,
            raw: None,
            retries: ex.retries,
            latency_ms: ex.latency_ms,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_payload_shapes() {
        let c = Capability::Sentiment;
        let nested = json!([[{"label": "POSITIVE", "score": 0.9}, {"label": "NEGATIVE", "score": 0.1}]]);
        assert!((positive_probability(c, &nested).unwrap() - 0.9).abs() < 1e-12);
        let flat = json!([{"label": "NEGATIVE", "score": 0.7}]);
        assert!((positive_probability(c, &flat).unwrap() - 0.3).abs() < 1e-12);
        let labels = json!([{"label": "LABEL_1", "score": 0.2}, {"label": "LABEL_0", "score": 0.8}]);
        assert!((positive_probability(c, &labels).unwrap() - 0.2).abs() < 1e-12);
        assert!(positive_probability(c, &json!({"error": "x"})).is_err());
    }

    #[test]
    fn embeddings_are_pooled() {
        let c = Capability::Embed;
        assert_eq!(pooled_embedding(c, &json!([1.0, 2.0])).unwrap(), vec![1.0, 2.0]);
        assert_eq!(
            pooled_embedding(c, &json!([[1.0, 2.0], [3.0, 4.0]])).unwrap(),
            vec![2.0, 3.0]
        );
        assert_eq!(
            pooled_embedding(c, &json!([[[1.0, 2.0], [3.0, 6.0]]])).unwrap(),
            vec![2.0, 4.0]
        );
        assert_eq!(pooled_embedding(c, &json!([[1.0, 2.0]])).unwrap(), vec![1.0, 2.0]);
        assert!(pooled_embedding(c, &json!([[1.0], [1.0, 2.0]])).is_err());
    }

    #[test]
    fn flavors_are_checked_per_capability() {
        assert!(Flavor::Chat.allowed(Capability::Summarize));
        assert!(!Flavor::Binary.allowed(Capability::TextGeneration));
        assert!(Flavor::parse("nope").is_none());
    }
}
