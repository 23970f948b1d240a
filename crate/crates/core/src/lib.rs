//! Coreference resolution with constituency-syntax-aware token encoding.
//!
//! The pipeline: parse trees compile into typed directed graphs
//! ([`syntax_graph`]); bidirectional multi-type graph attention propagates
//! syntactic context into token vectors ([`gat`], [`propagation`]); a
//! span-ranking head scores antecedents ([`coref`]); standard coreference
//! metrics and error-breakdown tooling close the loop ([`metrics`],
//! [`analysis`]). Everything runs on a small self-contained `f64` autodiff
//! layer ([`tensor`]) — deterministic given a seed, desk-scale by design.

pub mod analysis;
pub mod config;
pub mod coref;
pub mod corpus;
pub mod gat;
pub mod metrics;
pub mod model;
pub mod parallel;
pub mod propagation;
pub mod syntax_graph;
pub mod synth;
pub mod tensor;
pub mod train;
