//! Generative-agent simulation of the systems model of creativity: artist
//! agents create art prompts and images, critics judge them, and a domain
//! keeps a decaying significance ranking whose top keywords feed back into
//! creation. Analysis tooling covers prompt similarity, LLM grading, vote
//! aggregation and Barnard's exact test.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod engine;
pub mod log;
pub mod model;
pub mod parallel;
pub mod presets;
pub mod providers;
pub mod ranking;
pub mod templates;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
    #[doc = include_str!("../../../book/src/significance.md")]
    mod significance {}
    #[doc = include_str!("../../../book/src/templates.md")]
    mod templates {}
    #[doc = include_str!("../../../book/src/providers.md")]
    mod providers {}
    #[doc = include_str!("../../../book/src/run-logs.md")]
    mod run_logs {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
