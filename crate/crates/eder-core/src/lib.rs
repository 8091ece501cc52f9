//! Diversity-based experience replay.
//!
//! Episodes are segmented into fixed-length windows, each window is scored
//! with the determinant of the Gram matrix of its ℓ2-normalized state
//! embeddings (computed through Cholesky factorization, with an LU backend
//! as independent oracle), segments are admitted to the buffer by rejection
//! sampling proportional to their score, and training batches are drawn
//! from trajectories in proportion to their total diversity. Prioritized
//! and uniform replay baselines, two sparse-reward toy environments, and a
//! tabular Q-learning agent round out a self-contained experiment stack.
//!
//! Modules, bottom-up:
//!
//! * [`linalg`] — Gram construction, Cholesky, and determinant backends;
//! * [`replay`] — segmentation, scoring, admission, and the bounded buffer;
//! * [`sampling`] — diversity-proportional, prioritized, and uniform
//!   samplers over the buffer;
//! * [`envs`] — gridworld and chain environments with pluggable embeddings;
//! * [`agent`] — tabular Q-learning consuming replay batches;
//! * [`experiment`] — the seeded single-run training loop and metrics;
//! * [`bench`](mod@bench) — determinant-backend microbenchmarks;
//! * [`rng`] — the named-stream seed architecture.

pub mod agent;
pub mod bench;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod replay;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
