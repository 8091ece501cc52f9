//! Batch samplers over the replay buffer.
//!
//! Three methods share one [`Batch`] contract:
//!
//! * diversity-proportional sampling — trajectories drawn from the top-m
//!   pool with probability `d_τ / Σ d_τ`, then an accepted segment
//!   proportional to its score, then a uniform transition inside it;
//! * prioritized replay — per-transition priorities `(|δ| + ε)^α` held in a
//!   sum tree, stratified draws, β-annealed importance weights;
//! * uniform — every stored transition equally likely, acceptance ignored.
//!
//! Every sampler is a deterministic function of (buffer contents, config,
//! RNG stream). Samplers that need a view of the whole buffer cache it and
//! key the cache off [`ReplayBuffer::version`], so steady-state sampling does
//! not re-scan the buffer between inserts.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::replay::{ReplayBuffer, TrajectoryId, Transition};

/// Pool diversity mass at or below which trajectory selection falls back to
/// uniform over the pool.
const DEGENERATE_POOL_EPS: f64 = 1e-12;

/// Which sampler drives batch selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMethod {
    Eder,
    Per,
    Uniform,
}

/// Size of the diverse-trajectory pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopM {
    /// No pooling; every stored trajectory is a candidate.
    All,
    /// Keep only the `m` trajectories with the highest total diversity
    /// (ties broken toward newer trajectories).
    M(usize),
}

/// Sampler settings shared by all methods.
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub method: SamplerMethod,
    pub batch_size: usize,
    pub top_m: TopM,
    /// Prioritization exponent α; 0 recovers uniform sampling.
    pub per_alpha: f64,
    /// Importance-weight exponent β, annealed linearly from start to end
    /// over training progress.
    pub per_beta_start: f64,
    pub per_beta_end: f64,
    /// Additive floor keeping priorities strictly positive.
    pub per_epsilon: f64,
    /// Salt folded into the sampler RNG stream only.
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            method: SamplerMethod::Eder,
            batch_size: 64,
            top_m: TopM::M(200),
            per_alpha: 0.6,
            per_beta_start: 0.4,
            per_beta_end: 1.0,
            per_epsilon: 1e-6,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    /// β at `progress ∈ [0, 1]` through the run.
    pub fn beta_at(&self, progress: f64) -> f64 {
        let p = progress.clamp(0.0, 1.0);
        self.per_beta_start + (self.per_beta_end - self.per_beta_start) * p
    }
}

/// One sampled element with enough provenance to update priorities later.
#[derive(Debug, Clone)]
pub struct BatchEntry {
    pub trajectory_id: TrajectoryId,
    pub segment_index: usize,
    /// Index of the transition within its trajectory.
    pub transition_index: usize,
    pub transition: Transition,
    /// Importance weight; 1 for the diversity and uniform samplers.
    pub importance_weight: f64,
}

/// A minibatch of sampled transitions.
#[derive(Debug, Clone)]
pub struct Batch {
    pub entries: Vec<BatchEntry>,
}

// ---------------------------------------------------------------------------
// Diversity-proportional sampler
// ---------------------------------------------------------------------------

/// Per-trajectory selection probabilities over the top-m pool.
///
/// The pool is the `top_m` stored trajectories ranked by total diversity
/// (ties broken toward newer trajectories); probabilities are their
/// diversities normalized over the pool, or uniform over the pool when its
/// total mass is degenerate. Returned in buffer (insertion) order.
pub fn trajectory_probabilities(
    buffer: &ReplayBuffer,
    top_m: TopM,
) -> Result<Vec<(TrajectoryId, f64)>> {
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer("no trajectories stored"));
    }
    let pool = select_pool(buffer, top_m);
    let mass: f64 = pool.iter().map(|&(_, d)| d).sum();
    let probabilities = if mass <= DEGENERATE_POOL_EPS {
        let p = 1.0 / pool.len() as f64;
        pool.into_iter().map(|(id, _)| (id, p)).collect()
    } else {
        pool.into_iter().map(|(id, d)| (id, d / mass)).collect()
    };
    Ok(probabilities)
}

/// Pool members in buffer order as `(id, total_diversity)`.
fn select_pool(buffer: &ReplayBuffer, top_m: TopM) -> Vec<(TrajectoryId, f64)> {
    let all: Vec<(TrajectoryId, f64)> = buffer
        .trajectories()
        .map(|t| (t.id, t.total_diversity))
        .collect();
    match top_m {
        TopM::All => all,
        TopM::M(m) if m >= all.len() => all,
        TopM::M(m) => {
            // Rank by (diversity, id): ids grow with insertion order, so
            // equal diversities resolve toward the newer trajectory.
            let mut ranked = all.clone();
            ranked.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .expect("diversities are finite")
                    .then(b.0.cmp(&a.0))
            });
            ranked.truncate(m);
            let keep: std::collections::HashSet<TrajectoryId> =
                ranked.into_iter().map(|(id, _)| id).collect();
            all.into_iter()
                .filter(|(id, _)| keep.contains(id))
                .collect()
        }
    }
}

/// Diversity-proportional sampler with a cached pool CDF.
#[derive(Debug, Default)]
pub struct EderSampler {
    cache: Option<EderPool>,
}

#[derive(Debug)]
struct EderPool {
    buffer_version: u64,
    ids: Vec<TrajectoryId>,
    /// Positions of pool members within the buffer's iteration order.
    positions: Vec<usize>,
    cumulative: Vec<f64>,
}

impl EderSampler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Draws `batch_size` transitions with replacement: trajectory by
    /// diversity share over the top-m pool, accepted segment proportional to
    /// its score, transition uniform inside the segment.
    pub fn sample_batch(
        &mut self,
        buffer: &ReplayBuffer,
        cfg: &SamplerConfig,
        rng: &mut impl Rng,
    ) -> Result<Batch> {
        if buffer
            .trajectories()
            .all(|t| t.segments.iter().all(|s| !s.accepted))
        {
            return Err(Error::EmptyBuffer("no accepted segments stored"));
        }
        self.refresh(buffer, cfg.top_m)?;
        let pool = self.cache.as_ref().expect("refresh populates the cache");
        let trajectories: Vec<&crate::replay::Trajectory> = buffer.trajectories().collect();

        let mut entries = Vec::with_capacity(cfg.batch_size);
        let total = *pool.cumulative.last().expect("pool is non-empty");
        for _ in 0..cfg.batch_size {
            let x = rng.random::<f64>() * total;
            let k = pool
                .cumulative
                .partition_point(|&cum| cum <= x)
                .min(pool.ids.len() - 1);
            let trajectory = trajectories[pool.positions[k]];
            let segment_index = trajectory.draw_segment(rng);
            let segment = &trajectory.segments[segment_index];
            let offset = rng.random_range(0..segment.length);
            let transition_index = segment.start_index + offset;
            entries.push(BatchEntry {
                trajectory_id: trajectory.id,
                segment_index,
                transition_index,
                transition: trajectory.transitions[transition_index].clone(),
                importance_weight: 1.0,
            });
        }
        Ok(Batch { entries })
    }

    fn refresh(&mut self, buffer: &ReplayBuffer, top_m: TopM) -> Result<()> {
        if let Some(pool) = &self.cache {
            if pool.buffer_version == buffer.version() {
                return Ok(());
            }
        }
        let probabilities = trajectory_probabilities(buffer, top_m)?;
        let position_of: HashMap<TrajectoryId, usize> = buffer
            .trajectories()
            .enumerate()
            .map(|(i, t)| (t.id, i))
            .collect();
        let mut ids = Vec::with_capacity(probabilities.len());
        let mut positions = Vec::with_capacity(probabilities.len());
        let mut cumulative = Vec::with_capacity(probabilities.len());
        let mut running = 0.0;
        for (id, p) in probabilities {
            running += p;
            ids.push(id);
            positions.push(position_of[&id]);
            cumulative.push(running);
        }
        self.cache = Some(EderPool {
            buffer_version: buffer.version(),
            ids,
            positions,
            cumulative,
        });
        Ok(())
    }
}

/// One-shot convenience wrapper around [`EderSampler::sample_batch`].
pub fn eder_sample_batch(
    buffer: &ReplayBuffer,
    cfg: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<Batch> {
    EderSampler::new().sample_batch(buffer, cfg, rng)
}

// ---------------------------------------------------------------------------
// Uniform sampler
// ---------------------------------------------------------------------------

/// Uniform sampler with cached per-trajectory prefix sums.
#[derive(Debug, Default)]
pub struct UniformSampler {
    buffer_version: Option<u64>,
    /// prefix[i] = number of transitions stored before trajectory i.
    prefix: Vec<usize>,
}

impl UniformSampler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Draws `batch_size` transitions uniformly with replacement over every
    /// stored transition, ignoring admission flags. Importance weights are 1.
    pub fn sample_batch(
        &mut self,
        buffer: &ReplayBuffer,
        cfg: &SamplerConfig,
        rng: &mut impl Rng,
    ) -> Result<Batch> {
        if buffer.is_empty() {
            return Err(Error::EmptyBuffer("no transitions stored"));
        }
        if self.buffer_version != Some(buffer.version()) {
            self.prefix.clear();
            let mut running = 0;
            for t in buffer.trajectories() {
                self.prefix.push(running);
                running += t.len();
            }
            self.buffer_version = Some(buffer.version());
        }
        let trajectories: Vec<&crate::replay::Trajectory> = buffer.trajectories().collect();
        let total = buffer.len_transitions();
        let mut entries = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let flat = rng.random_range(0..total);
            let pos = self.prefix.partition_point(|&p| p <= flat) - 1;
            let trajectory = trajectories[pos];
            let transition_index = flat - self.prefix[pos];
            entries.push(BatchEntry {
                trajectory_id: trajectory.id,
                segment_index: trajectory.segment_of(transition_index),
                transition_index,
                transition: trajectory.transitions[transition_index].clone(),
                importance_weight: 1.0,
            });
        }
        Ok(Batch { entries })
    }
}

/// One-shot convenience wrapper around [`UniformSampler::sample_batch`].
pub fn uniform_sample_batch(
    buffer: &ReplayBuffer,
    cfg: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<Batch> {
    UniformSampler::new().sample_batch(buffer, cfg, rng)
}

// ---------------------------------------------------------------------------
// Prioritized sampler
// ---------------------------------------------------------------------------

/// Complete binary tree of partial priority sums supporting O(log n)
/// proportional draws and updates.
#[derive(Debug, Clone)]
pub struct SumTree {
    leaf_count: usize,
    /// 1-based heap layout: nodes[1] is the root, leaves start at
    /// nodes[leaf_count].
    nodes: Vec<f64>,
}

impl SumTree {
    /// Builds a tree with capacity for `min_leaves` priorities, rounded up
    /// to a power of two. All priorities start at zero.
    pub fn new(min_leaves: usize) -> Self {
        let leaf_count = min_leaves.max(1).next_power_of_two();
        Self {
            leaf_count,
            nodes: vec![0.0; 2 * leaf_count],
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn leaf_priority(&self, leaf: usize) -> f64 {
        self.nodes[self.leaf_count + leaf]
    }

    /// Sets the priority at `leaf` and refreshes ancestor partial sums.
    pub fn set(&mut self, leaf: usize, priority: f64) -> Result<()> {
        if leaf >= self.leaf_count {
            return Err(Error::InvalidInput(format!(
                "leaf {leaf} out of range for sum tree of {} leaves",
                self.leaf_count
            )));
        }
        if priority.is_nan() || priority < 0.0 {
            return Err(Error::InvalidInput(format!(
                "priority must be >= 0, got {priority}"
            )));
        }
        let mut node = self.leaf_count + leaf;
        self.nodes[node] = priority;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
        Ok(())
    }

    /// Leaf whose cumulative-priority interval contains `mass ∈ [0, total)`.
    pub fn find_prefix(&self, mass: f64) -> usize {
        let mut node = 1;
        let mut remaining = mass;
        while node < self.leaf_count {
            let left = 2 * node;
            if remaining < self.nodes[left] || self.nodes[left + 1] == 0.0 {
                node = left;
            } else {
                remaining -= self.nodes[left];
                node = left + 1;
            }
        }
        node - self.leaf_count
    }
}

/// Writes the prioritized-replay priority `(|td_error| + ε)^α` for one leaf.
pub fn per_update(
    tree: &mut SumTree,
    leaf: usize,
    td_error: f64,
    cfg: &SamplerConfig,
) -> Result<()> {
    let priority = (td_error.abs() + cfg.per_epsilon).powf(cfg.per_alpha);
    tree.set(leaf, priority)
}

/// Priority index for the PER baseline: one sum-tree leaf per stored
/// transition, kept aligned with the buffer through insert/evict reports.
#[derive(Debug)]
pub struct PerIndex {
    tree: SumTree,
    /// leaf -> (trajectory, transition index) for occupied leaves.
    slots: Vec<Option<(TrajectoryId, usize)>>,
    /// trajectory -> its leaves, indexed by transition index.
    by_trajectory: HashMap<TrajectoryId, Vec<usize>>,
    free: Vec<usize>,
    next_unused: usize,
    occupied: usize,
    /// Largest priority written so far; new transitions start here so they
    /// are guaranteed to be replayed at least once.
    max_priority: f64,
}

impl PerIndex {
    pub fn new(capacity_transitions: usize) -> Self {
        let tree = SumTree::new(capacity_transitions);
        let leaf_count = tree.leaf_count();
        Self {
            tree,
            slots: vec![None; leaf_count],
            by_trajectory: HashMap::new(),
            free: Vec::new(),
            next_unused: 0,
            occupied: 0,
            max_priority: 1.0,
        }
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    /// Number of indexed transitions.
    pub fn len(&self) -> usize {
        self.occupied
    }

    pub fn is_empty(&self) -> bool {
        self.occupied == 0
    }

    /// Registers a freshly inserted trajectory at max priority, after
    /// releasing the leaves of any evicted trajectories.
    pub fn on_insert(&mut self, buffer: &ReplayBuffer, report: &crate::replay::InsertionReport) {
        for id in &report.evicted {
            self.release(*id);
        }
        let trajectory = buffer
            .get(report.trajectory_id)
            .expect("inserted trajectory is stored");
        let mut leaves = Vec::with_capacity(trajectory.len());
        for transition_index in 0..trajectory.len() {
            let leaf = self.free.pop().unwrap_or_else(|| {
                let leaf = self.next_unused;
                self.next_unused += 1;
                leaf
            });
            self.slots[leaf] = Some((report.trajectory_id, transition_index));
            self.tree
                .set(leaf, self.max_priority)
                .expect("leaf allocation stays within capacity");
            leaves.push(leaf);
            self.occupied += 1;
        }
        self.by_trajectory.insert(report.trajectory_id, leaves);
    }

    fn release(&mut self, id: TrajectoryId) {
        if let Some(leaves) = self.by_trajectory.remove(&id) {
            for leaf in leaves {
                self.slots[leaf] = None;
                self.tree.set(leaf, 0.0).expect("leaf existed");
                self.free.push(leaf);
                self.occupied -= 1;
            }
        }
    }

    /// Stratified prioritized draw: the total mass is split into
    /// `batch_size` equal strata with one uniform draw each, mapped through
    /// the tree. Importance weights `(N·P(i))^(-β)` are normalized by the
    /// batch maximum; β is annealed by `progress`.
    pub fn sample_batch(
        &self,
        buffer: &ReplayBuffer,
        cfg: &SamplerConfig,
        progress: f64,
        rng: &mut impl Rng,
    ) -> Result<Batch> {
        let total = self.tree.total();
        if total <= 0.0 || self.occupied == 0 {
            return Err(Error::EmptyBuffer("sum tree has no priority mass"));
        }
        let beta = cfg.beta_at(progress);
        let n = self.occupied as f64;
        let stratum = total / cfg.batch_size as f64;
        let mut picks = Vec::with_capacity(cfg.batch_size);
        let mut max_weight = 0.0f64;
        for k in 0..cfg.batch_size {
            let mass = (k as f64 + rng.random::<f64>()) * stratum;
            let leaf = self.tree.find_prefix(mass);
            let (trajectory_id, transition_index) =
                self.slots[leaf].expect("prefix search lands on an occupied leaf");
            let probability = self.tree.leaf_priority(leaf) / total;
            let weight = (n * probability).powf(-beta);
            max_weight = max_weight.max(weight);
            picks.push((trajectory_id, transition_index, weight));
        }
        let entries = picks
            .into_iter()
            .map(|(trajectory_id, transition_index, weight)| {
                let trajectory = buffer
                    .get(trajectory_id)
                    .expect("indexed trajectory is stored");
                BatchEntry {
                    trajectory_id,
                    segment_index: trajectory.segment_of(transition_index),
                    transition_index,
                    transition: trajectory.transitions[transition_index].clone(),
                    importance_weight: weight / max_weight,
                }
            })
            .collect();
        Ok(Batch { entries })
    }

    /// Feeds TD errors from a learner update back into the tree.
    pub fn update_from_batch(
        &mut self,
        batch: &Batch,
        td_errors: &[f64],
        cfg: &SamplerConfig,
    ) -> Result<()> {
        for (entry, &delta) in batch.entries.iter().zip(td_errors) {
            let Some(leaves) = self.by_trajectory.get(&entry.trajectory_id) else {
                continue; // trajectory evicted between sampling and update
            };
            let leaf = leaves[entry.transition_index];
            per_update(&mut self.tree, leaf, delta, cfg)?;
            self.max_priority = self.max_priority.max(self.tree.leaf_priority(leaf));
        }
        Ok(())
    }
}
