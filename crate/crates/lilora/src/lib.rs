//! Desk-scale continual-learning laboratory for shared-basis low-rank
//! adapters.
//!
//! The crate trains a small frozen feed-forward backbone on a stream of
//! synthetic tasks with several adapter strategies — a single reused LoRA
//! pair, one independent pair per task, a shared down-projection, and the
//! full shared-basis decomposition with a learnable fusion coefficient and a
//! cosine-regularized basis stability loss — and evaluates forgetting with
//! standard continual-learning metrics (AP, MAP, BWT, MIF) plus CKA-based
//! representation-similarity analysis.

pub mod adapters;
pub mod analysis;
pub mod backbone;
pub mod cli;
pub mod continual;
pub mod diffcore;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod persist;
pub mod taskgen;

pub use error::{Error, Result};
