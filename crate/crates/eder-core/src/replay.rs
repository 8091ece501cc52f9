//! Replay-buffer core: trajectory segmentation, determinant diversity
//! scoring, rejection-sampling admission, and FIFO capacity management.
//!
//! An episode is split into consecutive windows of `segment_length`
//! transitions (the final window keeps the remainder). Each window is scored
//! once with the determinant of the Gram matrix of its state embeddings and
//! the score is cached for the lifetime of the segment. Admission then
//! accepts each segment with probability `score / max(scores)` over the
//! episode's own batch, and the trajectory is stored with its total diversity
//! over accepted segments.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Vector};

/// Environment-defined state key.
pub type StateId = usize;
/// Non-negative action index.
pub type ActionId = usize;

/// Identifier assigned to a trajectory at insertion, unique per buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrajectoryId(pub u64);

/// Segment batches whose largest score is at or below this are treated as
/// all-zero diversity: admission accepts everything instead of starving the
/// buffer, and proportional segment selection falls back to uniform.
pub const DEGENERATE_SCORE_EPS: f64 = 1e-9;

/// One environment interaction with a cached embedding of the source state.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state_id: StateId,
    pub action_id: ActionId,
    pub reward: f64,
    pub next_state_id: StateId,
    pub done: bool,
    /// ℓ2-normalized embedding of `state_id` (norm 1, or 0 for the
    /// zero-embedding corner case).
    pub embedding: Vector,
}

/// A window of consecutive transitions with its cached diversity score.
#[derive(Debug, Clone)]
pub struct Segment {
    /// Index of the first transition within the owning trajectory.
    pub start_index: usize,
    /// Number of transitions covered, in `[1, segment_length]`.
    pub length: usize,
    /// Cached determinant score; set once at insertion, never recomputed.
    pub diversity: f64,
    /// Admission outcome.
    pub accepted: bool,
}

/// A stored episode: its transitions, scored segments, and total diversity
/// over accepted segments.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub id: TrajectoryId,
    pub transitions: Vec<Transition>,
    pub segments: Vec<Segment>,
    /// Sum of `diversity` over accepted segments.
    pub total_diversity: f64,
    /// Cumulative accepted-segment scores, for proportional selection:
    /// `(segment index, running sum of diversity)`.
    accepted_cdf: Vec<(usize, f64)>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Index of the segment containing transition `index`.
    pub fn segment_of(&self, index: usize) -> usize {
        debug_assert!(index < self.transitions.len());
        match self
            .segments
            .binary_search_by(|s| s.start_index.cmp(&index))
        {
            Ok(i) => i,
            Err(i) => i - 1,
        }
    }

    /// Draws an accepted segment with probability proportional to its score,
    /// falling back to uniform over accepted segments when every score is
    /// degenerate, and to uniform over all segments when nothing was
    /// accepted.
    pub(crate) fn draw_segment(&self, rng: &mut impl Rng) -> usize {
        if self.accepted_cdf.is_empty() {
            return rng.random_range(0..self.segments.len());
        }
        let total = self.accepted_cdf.last().unwrap().1;
        if total <= DEGENERATE_SCORE_EPS {
            let k = rng.random_range(0..self.accepted_cdf.len());
            return self.accepted_cdf[k].0;
        }
        let x = rng.random::<f64>() * total;
        let k = self
            .accepted_cdf
            .partition_point(|&(_, cum)| cum <= x)
            .min(self.accepted_cdf.len() - 1);
        self.accepted_cdf[k].0
    }
}

/// How admission treats segments that fail their first acceptance draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectionMode {
    /// One uniform draw per segment, accept or discard. The highest-scored
    /// segment always passes.
    SinglePass,
    /// Repeatedly draw uniform candidates from the batch until one is
    /// accepted or the attempt budget runs out, once per segment slot.
    Resample,
}

/// Segmentation, scoring-backend, and admission knobs.
#[derive(Debug, Clone)]
pub struct DiversityConfig {
    /// Window length `b` for segmentation.
    pub segment_length: usize,
    /// Diagonal jitter added to every Gram matrix before factorization.
    /// Zero restores exact arithmetic; the default absorbs rank deficiency
    /// when the window length approaches the embedding dimension.
    pub jitter: f64,
    /// Score with the Cholesky backend when true, LU otherwise. Changes
    /// runtime, never sampling behaviour.
    pub use_cholesky: bool,
    /// Apply rejection-sampling admission; when false every segment is
    /// accepted.
    pub use_rejection_sampling: bool,
    pub rejection_mode: RejectionMode,
    /// Attempt budget per accepted-segment slot in `Resample` mode.
    pub max_resample_attempts: usize,
}

impl Default for DiversityConfig {
    fn default() -> Self {
        Self {
            segment_length: 10,
            jitter: 1e-10,
            use_cholesky: true,
            use_rejection_sampling: true,
            rejection_mode: RejectionMode::SinglePass,
            max_resample_attempts: 100,
        }
    }
}

/// Splits an episode into consecutive windows of `segment_length` with step
/// equal to the window length. A trailing remainder shorter than the window
/// is kept as a final short segment, so every transition belongs to exactly
/// one segment and the count is `ceil(len / segment_length)`.
pub fn segment_trajectory(
    transitions: &[Transition],
    segment_length: usize,
) -> Result<Vec<Segment>> {
    if transitions.is_empty() {
        return Err(Error::InvalidInput(
            "cannot segment an empty transition list".to_string(),
        ));
    }
    if segment_length == 0 {
        return Err(Error::InvalidInput(
            "segment length must be >= 1".to_string(),
        ));
    }
    let mut segments = Vec::with_capacity(transitions.len().div_ceil(segment_length));
    let mut start = 0;
    while start < transitions.len() {
        let length = segment_length.min(transitions.len() - start);
        segments.push(Segment {
            start_index: start,
            length,
            diversity: 0.0,
            accepted: false,
        });
        start += length;
    }
    Ok(segments)
}

/// Determinant diversity of one segment's embeddings: `det(gram + jitter·I)`
/// through the configured backend. Orthonormal embeddings score 1, any
/// repeated embedding scores ≈ 0.
pub fn segment_diversity<B: std::borrow::Borrow<Vector>>(
    embeddings: &[B],
    cfg: &DiversityConfig,
) -> Result<f64> {
    let kernel = linalg::gram(embeddings, cfg.jitter)?;
    if cfg.use_cholesky {
        linalg::det_via_cholesky(&kernel)
    } else {
        Ok(linalg::det_via_lu(&kernel))
    }
}

/// Total diversity of a segment list: the sum of scores over accepted
/// segments (zero for an empty list).
pub fn trajectory_diversity(segments: &[Segment]) -> f64 {
    segments
        .iter()
        .filter(|s| s.accepted)
        .map(|s| s.diversity)
        .sum()
}

/// Sets the `accepted` flag on each segment by rejection sampling with
/// acceptance probability `diversity / max(diversity)` over this batch.
///
/// In `SinglePass` mode one uniform draw is consumed per segment in order,
/// which keeps the admission stream reproducible; the arg-max segment always
/// passes. If every score in the batch is degenerate (≤
/// [`DEGENERATE_SCORE_EPS`]) all segments are accepted without consuming any
/// draws.
pub fn rejection_filter(
    segments: &mut [Segment],
    cfg: &DiversityConfig,
    rng: &mut impl Rng,
) -> Result<()> {
    if segments.is_empty() {
        return Err(Error::InvalidInput(
            "rejection filter needs at least one segment".to_string(),
        ));
    }
    let max_score = segments
        .iter()
        .map(|s| s.diversity)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_score <= DEGENERATE_SCORE_EPS {
        for s in segments.iter_mut() {
            s.accepted = true;
        }
        return Ok(());
    }
    match cfg.rejection_mode {
        RejectionMode::SinglePass => {
            single_pass_filter(
                segments,
                max_score,
                (0..segments.len()).map(|_| rng.random()),
            );
        }
        RejectionMode::Resample => {
            for s in segments.iter_mut() {
                s.accepted = false;
            }
            for _ in 0..segments.len() {
                for _ in 0..cfg.max_resample_attempts {
                    let candidate = rng.random_range(0..segments.len());
                    let alpha = segments[candidate].diversity / max_score;
                    if rng.random::<f64>() <= alpha {
                        segments[candidate].accepted = true;
                        break;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Single-pass admission against an explicit uniform stream; split out so
/// tests can drive it with hand-picked draw values.
fn single_pass_filter(segments: &mut [Segment], max_score: f64, draws: impl Iterator<Item = f64>) {
    for (s, u) in segments.iter_mut().zip(draws) {
        let alpha = s.diversity / max_score;
        s.accepted = u <= alpha;
    }
}

/// Outcome of one [`ReplayBuffer::insert_trajectory`] call.
#[derive(Debug, Clone)]
pub struct InsertionReport {
    pub trajectory_id: TrajectoryId,
    pub segments_total: usize,
    pub segments_accepted: usize,
    /// Total diversity of the stored trajectory over accepted segments.
    pub trajectory_diversity: f64,
    /// Sum of scores over all scored segments, accepted or not.
    pub diversity_scored_sum: f64,
    /// Whole trajectories evicted FIFO to make room.
    pub evicted: Vec<TrajectoryId>,
    /// Wall time spent scoring segments, for the timing metrics.
    pub scoring_nanos: u64,
}

/// Capacity-bounded trajectory store with rejection-sampling admission.
///
/// Capacity counts transitions; eviction removes whole trajectories oldest
/// first. The buffer owns a dedicated admission RNG stream so that toggling
/// samplers or agents never perturbs which segments were admitted.
#[derive(Debug)]
pub struct ReplayBuffer {
    capacity_transitions: usize,
    trajectories: VecDeque<Trajectory>,
    total_diversity_sum: f64,
    stored_transitions: usize,
    next_id: u64,
    version: u64,
    admission_rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity_transitions: usize, admission_rng: ChaCha8Rng) -> Self {
        Self {
            capacity_transitions,
            trajectories: VecDeque::new(),
            total_diversity_sum: 0.0,
            stored_transitions: 0,
            next_id: 0,
            version: 0,
            admission_rng,
        }
    }

    pub fn capacity_transitions(&self) -> usize {
        self.capacity_transitions
    }

    /// Number of stored transitions.
    pub fn len_transitions(&self) -> usize {
        self.stored_transitions
    }

    pub fn num_trajectories(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Incrementally maintained Σ of trajectory diversities.
    pub fn total_diversity_sum(&self) -> f64 {
        self.total_diversity_sum
    }

    /// Recomputes Σ of trajectory diversities from scratch (accounting
    /// cross-check; the incremental sum must agree within 1e-9 relative).
    pub fn recompute_diversity_sum(&self) -> f64 {
        self.trajectories.iter().map(|t| t.total_diversity).sum()
    }

    /// Monotone counter bumped by every successful insert; samplers key
    /// their cached pools off it.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Stored trajectories, oldest first.
    pub fn trajectories(&self) -> impl Iterator<Item = &Trajectory> {
        self.trajectories.iter()
    }

    pub fn get(&self, id: TrajectoryId) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.id == id)
    }

    /// Segments one complete episode, scores each segment once, applies
    /// admission, and stores the trajectory, evicting whole trajectories
    /// FIFO until the transition capacity is satisfied.
    pub fn insert_trajectory(
        &mut self,
        transitions: Vec<Transition>,
        cfg: &DiversityConfig,
    ) -> Result<InsertionReport> {
        if transitions.is_empty() {
            return Err(Error::InvalidInput(
                "cannot insert an empty episode".to_string(),
            ));
        }
        if transitions.len() > self.capacity_transitions {
            return Err(Error::InvalidInput(format!(
                "episode of {} transitions exceeds buffer capacity {}",
                transitions.len(),
                self.capacity_transitions
            )));
        }

        let mut segments = segment_trajectory(&transitions, cfg.segment_length)?;
        let scoring_started = std::time::Instant::now();
        let mut scored_sum = 0.0;
        for s in segments.iter_mut() {
            let embeddings: Vec<&Vector> = transitions[s.start_index..s.start_index + s.length]
                .iter()
                .map(|t| &t.embedding)
                .collect();
            s.diversity = segment_diversity(&embeddings, cfg)?;
            scored_sum += s.diversity;
        }
        let scoring_nanos = scoring_started.elapsed().as_nanos() as u64;

        if cfg.use_rejection_sampling {
            rejection_filter(&mut segments, cfg, &mut self.admission_rng)?;
        } else {
            for s in segments.iter_mut() {
                s.accepted = true;
            }
        }

        let total_diversity = trajectory_diversity(&segments);
        let segments_accepted = segments.iter().filter(|s| s.accepted).count();
        let mut accepted_cdf = Vec::with_capacity(segments_accepted);
        let mut running = 0.0;
        for (i, s) in segments.iter().enumerate() {
            if s.accepted {
                running += s.diversity;
                accepted_cdf.push((i, running));
            }
        }

        let mut evicted = Vec::new();
        while self.stored_transitions + transitions.len() > self.capacity_transitions {
            let old = self
                .trajectories
                .pop_front()
                .expect("capacity check guarantees at least one stored trajectory");
            self.stored_transitions -= old.len();
            self.total_diversity_sum -= old.total_diversity;
            evicted.push(old.id);
        }

        let id = TrajectoryId(self.next_id);
        self.next_id += 1;
        self.stored_transitions += transitions.len();
        self.total_diversity_sum += total_diversity;
        if self.trajectories.is_empty() {
            // Re-anchor the accumulator so eviction round-off cannot pile up.
            self.total_diversity_sum = total_diversity;
        }
        let segments_total = segments.len();
        self.trajectories.push_back(Trajectory {
            id,
            transitions,
            segments,
            total_diversity,
            accepted_cdf,
        });
        self.version += 1;

        Ok(InsertionReport {
            trajectory_id: id,
            segments_total,
            segments_accepted,
            trajectory_diversity: total_diversity,
            diversity_scored_sum: scored_sum,
            evicted,
            scoring_nanos,
        })
    }
}
