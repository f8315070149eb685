//! Monitoring pipeline for dated, geo-tagged news collections.
//!
//! The crate covers ingestion ([`corpus`]), text preparation ([`textprep`]),
//! daily volume decomposition ([`tsdecomp`]), static and slice-coupled topic
//! models ([`topics`], [`dtm`]), from-scratch neural classifiers
//! ([`neural`]), evaluation ([`metrics`]), spatio-temporal aggregation
//! ([`geo`]) and the end-to-end orchestration used by the CLI
//! ([`pipeline`]).

pub mod corpus;
pub mod dtm;
pub mod error;
pub mod geo;
pub mod metrics;
pub mod neural;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod textprep;
pub mod topics;
pub mod tsdecomp;

pub use corpus::{Article, Corpus, Gazetteer, Region};
pub use error::{Error, Result};
pub use textprep::{PrepConfig, TokenizedDoc, Vocabulary};
