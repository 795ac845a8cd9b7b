//! Flow-adhering plan generation for task-oriented agents.
//!
//! A domain ([`domain::DomainSpec`]) lists APIs with their input and output
//! parameters and the workflows ("flows") an agent should follow. Plans are
//! sequences of `[thought] ... [API] Name()` units produced by a language
//! model. The decoders in [`decoder`] steer generation with lookahead
//! heuristics derived from the flow and API dependency graphs, and [`eval`]
//! measures how well a plan adheres to both.

pub mod decoder;
pub mod domain;
pub mod eval;
pub mod grammar;
pub mod graph;
pub mod lm;
pub mod runner;
pub mod similarity;

pub use decoder::{flap_decode, DecoderConfig, Decoded, Setting, StopReason};
pub use domain::{DomainSpec, Query};
pub use grammar::{parse_plan, Plan, PlanStep};
pub use graph::{ApiGraph, ExecutionState, FlowGraph};
pub use lm::{LanguageModel, RemoteLm, ScriptedLm, TokenDistribution};
pub use similarity::{LexicalSimilarity, RemoteSimilarity, Similarity};
