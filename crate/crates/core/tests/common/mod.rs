#![allow(dead_code)]

use std::path::Path;

use creasim::config::{validate_config, Condition, RunConfig, ValidatedConfig};
use creasim::engine::{self, RunOutcome};
use creasim::log::{read_log, LogEvent};
use creasim::presets;
use creasim::providers::ProviderSuite;

/// The two-artist school preset with the given condition and length.
pub fn school(condition: Condition, iterations: u32) -> RunConfig {
    let mut c = presets::school();
    c.condition = condition;
    c.iterations = iterations;
    c
}

/// One artist, one critic.
pub fn single_pair(iterations: u32) -> RunConfig {
    let mut c = school(Condition::InSystem, iterations);
    c.artists.truncate(1);
    c
}

pub fn mock_suite(c: &ValidatedConfig) -> ProviderSuite {
    ProviderSuite::mock(c.seed, &c.providers.mock)
}

pub fn run_mock(config: RunConfig, dir: &Path) -> RunOutcome {
    let c = validate_config(config).expect("valid config");
    let suite = mock_suite(&c);
    engine::run(c, suite, dir).expect("mock run succeeds")
}

pub fn events(dir: &Path) -> Vec<LogEvent> {
    read_log(&dir.join(engine::LOG_FILE))
        .expect("log reads")
        .into_iter()
        .map(|(_, e)| e)
        .collect()
}

pub fn log_bytes(dir: &Path) -> Vec<u8> {
    std::fs::read(dir.join(engine::LOG_FILE)).expect("log exists")
}
