//! Run configuration: the TOML file that defines an experiment.
//!
//! ```toml
//! condition = "in-system"        # or "isolated"
//! iterations = 15
//! seed = 1
//! summarization_budget = 2000    # characters
//!
//! [domain]
//! description = "This is the year of 2021. ..."
//! decay_interval = 5
//! # initial_keywords = ["a", "b", ... 9 entries]   (optional)
//!
//! [[domain.seeds]]
//! id = "seed-starry-night"
//! description = "A swirling night sky ..."
//!
//! [[artists]]
//! id = "artist-1"
//! description = "Answer as a young boy ..."
//!
//! [[critics]]
//! id = "mentor"
//! description = "Answer as a mentor ..."
//!
//! [providers]
//! backend = "mock"               # or "remote"
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{AgentSpec, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    Isolated,
    InSystem,
}

impl Condition {
    pub fn propagates(self) -> bool {
        matches!(self, Condition::InSystem)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub condition: Condition,
    pub iterations: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub summarization_budget: usize,
    /// Flag art prompts that read like self-reflection rather than a
    /// description of a painting.
    #[serde(default = "default_true")]
    pub contamination_check: bool,
    pub domain: DomainConfig,
    pub artists: Vec<AgentConfig>,
    pub critics: Vec<AgentConfig>,
    #[serde(default)]
    pub providers: ProvidersConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub description: String,
    #[serde(default = "default_decay")]
    pub decay_interval: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_keywords: Option<Vec<String>>,
    pub seeds: Vec<SeedConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    pub id: String,
    pub description: String,
    /// Optional image path, relative to the run directory.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub id: String,
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvidersConfig {
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub mock: MockConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote: Option<RemoteConfig>,
}

impl Default for ProvidersConfig {
    fn default() -> Self {
        ProvidersConfig {
            backend: Backend::Mock,
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
            max_in_flight: default_in_flight(),
            timeout_secs: default_timeout(),
            mock: MockConfig::default(),
            remote: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockConfig {
    /// Probability that a mock critique reads positive.
    #[serde(default = "default_positive_rate")]
    pub positive_rate: f64,
    #[serde(default = "default_embedding_dim")]
    pub embedding_dim: usize,
    #[serde(default = "default_positive_lexicon")]
    pub positive_lexicon: Vec<String>,
    #[serde(default = "default_negative_lexicon")]
    pub negative_lexicon: Vec<String>,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig {
            positive_rate: default_positive_rate(),
            embedding_dim: default_embedding_dim(),
            positive_lexicon: default_positive_lexicon(),
            negative_lexicon: default_negative_lexicon(),
        }
    }
}

/// One HTTP endpoint per capability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    pub text: EndpointConfig,
    pub critic: EndpointConfig,
    pub image: EndpointConfig,
    pub sentiment: EndpointConfig,
    pub summarizer: EndpointConfig,
    pub embedder: EndpointConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub url: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    /// Wire shape of the endpoint; see `providers::remote`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flavor: Option<String>,
}

fn default_budget() -> usize {
    2000
}
fn default_true() -> bool {
    true
}
fn default_decay() -> u32 {
    5
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}
fn default_in_flight() -> usize {
    4
}
fn default_timeout() -> u64 {
    120
}
fn default_positive_rate() -> f64 {
    0.5
}
fn default_embedding_dim() -> usize {
    128
}

fn words(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn default_positive_lexicon() -> Vec<String> {
    words(&[
        "wonderful",
        "creative",
        "compelling",
        "original",
        "striking",
        "impressive",
        "captivating",
        "beautiful",
        "fresh",
        "bold",
        "excellent",
        "inspired",
        "memorable",
        "powerful",
        "delightful",
        "great",
        "love",
        "succeeds",
        "remarkable",
        "promising",
    ])
}

fn default_negative_lexicon() -> Vec<String> {
    words(&[
        "lacks",
        "derivative",
        "generic",
        "flat",
        "dull",
        "unoriginal",
        "fails",
        "weak",
        "boring",
        "formulaic",
        "muddled",
        "superficial",
        "shallow",
        "static",
        "poor",
        "disappointing",
        "bland",
        "clumsy",
        "confusing",
        "short",
    ])
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigViolation {
    #[error("domain needs at least 3 seed artworks, found {found}")]
    MissingSeeds { found: usize },
    #[error("{role:?} {id:?} has an empty description")]
    EmptyPersona { role: Role, id: String },
    #[error("iterations must be at least 1")]
    NonPositiveIterations,
    #[error("at least one artist is required")]
    NoArtists,
    #[error("at least one critic is required")]
    NoCritics,
    #[error("domain description is empty")]
    EmptyDomain,
    #[error("seed {id:?} has an empty description")]
    EmptySeed { id: String },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("decay_interval must be at least 1")]
    ZeroDecayInterval,
    #[error("summarization_budget must be at least 1")]
    ZeroBudget,
    #[error("initial_keywords must hold exactly 9 non-empty entries, found {found}")]
    BadInitialKeywords { found: usize },
    #[error("mock positive_rate {0} is outside [0, 1]")]
    BadPositiveRate(String),
    #[error("mock embedding_dim must be at least 1")]
    ZeroEmbeddingDim,
    #[error("max_in_flight must be at least 1")]
    ZeroInFlight,
    #[error("remote backend selected but [providers.remote] is missing")]
    MissingRemote,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ConfigViolation>),
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_toml().as_bytes());
        format!("{:x}", h.finalize())
    }
}

/// A config that passed [`validate_config`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig(RunConfig);

impl ValidatedConfig {
    pub fn get(&self) -> &RunConfig {
        &self.0
    }

    pub fn into_inner(self) -> RunConfig {
        self.0
    }

    pub fn artist_specs(&self) -> Vec<AgentSpec> {
        self.0
            .artists
            .iter()
            .map(|a| AgentSpec::new(&a.id, Role::Artist, &a.description))
            .collect()
    }

    pub fn critic_specs(&self) -> Vec<AgentSpec> {
        self.0
            .critics
            .iter()
            .map(|c| AgentSpec::new(&c.id, Role::Critic, &c.description))
            .collect()
    }
}

impl std::ops::Deref for ValidatedConfig {
    type Target = RunConfig;

    fn deref(&self) -> &RunConfig {
        &self.0
    }
}

/// Check every structural requirement of a run; all violations are reported
/// together.
pub fn validate_config(config: RunConfig) -> Result<ValidatedConfig, ConfigError> {
    let mut v = Vec::new();
    if config.iterations == 0 {
        v.push(ConfigViolation::NonPositiveIterations);
    }
    if config.artists.is_empty() {
        v.push(ConfigViolation::NoArtists);
    }
    if config.critics.is_empty() {
        v.push(ConfigViolation::NoCritics);
    }
    if config.domain.seeds.len() < 3 {
        v.push(ConfigViolation::MissingSeeds {
            found: config.domain.seeds.len(),
        });
    }
    if config.domain.description.trim().is_empty() {
        v.push(ConfigViolation::EmptyDomain);
    }
    for (role, agents) in [(Role::Artist, &config.artists), (Role::Critic, &config.critics)] {
        for a in agents {
            if a.description.trim().is_empty() {
                v.push(ConfigViolation::EmptyPersona { role, id: a.id.clone() });
            }
        }
    }
    for s in &config.domain.seeds {
        if s.description.trim().is_empty() {
            v.push(ConfigViolation::EmptySeed { id: s.id.clone() });
        }
    }
    let mut seen = BTreeSet::new();
    let ids = config
        .artists
        .iter()
        .map(|a| &a.id)
        .chain(config.critics.iter().map(|c| &c.id))
        .chain(config.domain.seeds.iter().map(|s| &s.id));
    for id in ids {
        if !seen.insert(id.clone()) {
            v.push(ConfigViolation::DuplicateId(id.clone()));
        }
    }
    if config.domain.decay_interval == 0 {
        v.push(ConfigViolation::ZeroDecayInterval);
    }
    if config.summarization_budget == 0 {
        v.push(ConfigViolation::ZeroBudget);
    }
    if let Some(k) = &config.domain.initial_keywords {
        if k.len() != 9 || k.iter().any(|w| w.trim().is_empty()) {
            v.push(ConfigViolation::BadInitialKeywords { found: k.len() });
        }
    }
    let p = config.providers.mock.positive_rate;
    if !(0.0..=1.0).contains(&p) {
        v.push(ConfigViolation::BadPositiveRate(p.to_string()));
    }
    if config.providers.mock.embedding_dim == 0 {
        v.push(ConfigViolation::ZeroEmbeddingDim);
    }
    if config.providers.max_in_flight == 0 {
        v.push(ConfigViolation::ZeroInFlight);
    }
    if config.providers.backend == Backend::Remote && config.providers.remote.is_none() {
        v.push(ConfigViolation::MissingRemote);
    }
    if v.is_empty() {
        Ok(ValidatedConfig(config))
    } else {
        Err(ConfigError::Invalid(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn violations(c: RunConfig) -> Vec<ConfigViolation> {
        match validate_config(c) {
            Err(ConfigError::Invalid(v)) => v,
            other => panic!("expected violations, got {other:?}"),
        }
    }

    #[test]
    fn school_shape_is_valid() {
        let c = presets::school();
        assert_eq!(c.iterations, 15);
        assert_eq!(c.artists.len(), 2);
        assert_eq!(c.critics.len(), 1);
        assert_eq!(c.domain.seeds.len(), 3);
        validate_config(c).unwrap();
    }

    #[test]
    fn two_seeds_rejected() {
        let mut c = presets::school();
        c.domain.seeds.truncate(2);
        assert_eq!(violations(c), vec![ConfigViolation::MissingSeeds { found: 2 }]);
    }

    #[test]
    fn zero_iterations_rejected() {
        let mut c = presets::school();
        c.iterations = 0;
        assert_eq!(violations(c), vec![ConfigViolation::NonPositiveIterations]);
    }

    #[test]
    fn empty_persona_rejected() {
        let mut c = presets::school();
        c.critics[0].description = "  ".into();
        assert!(matches!(
            &violations(c)[..],
            [ConfigViolation::EmptyPersona { role: Role::Critic, .. }]
        ));
    }

    #[test]
    fn violations_accumulate() {
        let mut c = presets::school();
        c.iterations = 0;
        c.artists.clear();
        c.domain.initial_keywords = Some(vec!["a".into()]);
        c.providers.mock.positive_rate = 1.5;
        assert_eq!(violations(c).len(), 4);
    }

    #[test]
    fn toml_round_trip_preserves_digest() {
        let c = presets::school();
        let again = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.digest(), c.digest());
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut text = presets::school().to_toml();
        text.insert_str(0, "bogus = 1\n");
        assert!(matches!(RunConfig::from_toml(&text), Err(ConfigError::Parse(_))));
    }
}
