//! Probabilistic distributional clustering (PDC) of a document collection's
//! vocabulary into disjoint topic clusters.
//!
//! The pipeline runs in stages, each with its own module and file contract:
//!
//! 1. [`corpus`] ingests documents and indexes unigrams, bigrams and tags.
//! 2. [`termselect`] keeps terms over-represented in the foreground collection
//!    (hypergeometric tail + Benjamini–Hochberg).
//! 3. [`affinity`] turns pair co-occurrence counts into signed log-odds and
//!    stores them as a file-backed symmetric matrix.
//! 4. [`engine`] maximizes the within-cluster log-odds sum by repeated
//!    splitting, lowering the prior factor level by level.
//! 5. [`hierarchy`] collects clusters across levels, ranks terms and documents
//!    and names topics.
//! 6. [`layout`] builds the number grid and skyline and renders an SVG report.
//! 7. [`coherence`] scores topics with UMass and NPMI.
//!
//! [`pipeline`] wires the stages together and is what the `pdc` binary calls.

pub mod affinity;
pub mod coherence;
pub mod corpus;
pub mod engine;
mod error;
pub mod hierarchy;
pub mod layout;
pub mod pipeline;
mod stopwords;
pub mod synthetic;
pub mod termselect;
pub(crate) mod textfmt;

pub use affinity::{log_odds, SigmaMatrix};
pub use corpus::{Corpus, DocFrequencies, Document, TermStats};
pub use engine::{super_split, EngineParams, LevelSnapshot, Optimizer, SuperSplitRun};
pub use error::{Error, Result};
pub use hierarchy::{ClusterHierarchy, ClusterRecord, TopicSummary};
pub use layout::{BarColor, ColoredBar, Grid};
pub use pipeline::PipelineConfig;
pub use termselect::TermSet;
