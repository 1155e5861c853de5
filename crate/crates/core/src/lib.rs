//! Answer ranking for question answering with knowledge transfer between
//! corpora.
//!
//! The crate provides a small bigram convolutional pair scorer with
//! hand-written backward passes, and three ways of using a source corpus to
//! improve it on a target corpus:
//!
//! * **INIT**: train on the source, keep the best-dev weights, fine-tune on
//!   the target ([`train::train_init`]).
//! * **MULT**: train on both corpora at once, drawing each step's sample from
//!   the target with probability λ ([`train::train_mult`]).
//! * **ISS-MULT**: cluster the target dev set, drop source samples far from
//!   every cluster center, then run MULT ([`iss::train_iss_mult`]).
//!
//! Answer selection is scored with MAP/MRR and answer triggering with F1
//! ([`metrics`]).

pub mod corpus;
pub mod embeddings;
mod error;
pub mod iss;
pub mod metrics;
pub mod model;
pub mod numkernel;
pub mod rng;
pub mod synth;
pub mod train;

pub use corpus::{Corpus, QAInstance, QuestionGroup, Role, Split};
pub use embeddings::{EmbeddingTable, SentenceMatrix};
pub use error::{Error, ErrorKind, Result};
pub use iss::{ClusterSet, FilterDecision, IssConfig};

pub use metrics::{EvalReport, ScoredGroup};
pub use model::{Gradients, ModelDims, ModelParams};
pub use numkernel::{Dense2, GradCheckReport};
pub use train::{CheckpointMetric, LambdaSide, TrainConfig, TrainedModel};
