//! Desk-scale sparse-reward environments and state embeddings.
//!
//! Two deterministic testbeds: a bounded gridworld with a single goal cell
//! and a left-to-right chain whose only reward sits at the far end. Both pay
//! the goal reward exactly once per episode, which makes exploration the
//! binding constraint. State embeddings are pluggable; the one-hot default
//! makes segment diversity exactly interpretable (1 iff all states in the
//! window are distinct).

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{l2_normalize, Vector};
use crate::replay::{ActionId, StateId};

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: StateId,
    pub reward: f64,
    pub done: bool,
}

/// A finite deterministic episodic environment.
///
/// `reset` takes an RNG for signature stability, but both built-in
/// environments are deterministic and never consume draws from it.
pub trait Environment {
    fn reset(&mut self, rng: &mut dyn RngCore) -> StateId;
    fn step(&mut self, action: ActionId) -> Result<StepOutcome>;
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// 2-D layout of a state, for coordinate embeddings.
    fn coords(&self, state: StateId) -> (usize, usize);
    fn is_goal(&self, state: StateId) -> bool;
}

// ---------------------------------------------------------------------------
// Gridworld
// ---------------------------------------------------------------------------

/// Bounded gridworld: start cell, goal cell, moves clamped at the walls,
/// goal reward paid on entering the goal.
#[derive(Debug, Clone, PartialEq)]
pub struct GridworldSpec {
    pub width: usize,
    pub height: usize,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub max_steps: usize,
    pub step_reward: f64,
    pub goal_reward: f64,
}

impl Default for GridworldSpec {
    fn default() -> Self {
        Self {
            width: 10,
            height: 10,
            start: (0, 0),
            goal: (9, 9),
            max_steps: 100,
            step_reward: 0.0,
            goal_reward: 1.0,
        }
    }
}

impl GridworldSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidInput(
                "grid dimensions must be >= 1".to_string(),
            ));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidInput("max_steps must be >= 1".to_string()));
        }
        for (name, (x, y)) in [("start", self.start), ("goal", self.goal)] {
            if x >= self.width || y >= self.height {
                return Err(Error::InvalidInput(format!(
                    "{name} cell ({x}, {y}) is outside the {}x{} grid",
                    self.width, self.height
                )));
            }
        }
        if self.start == self.goal {
            return Err(Error::InvalidInput(
                "start and goal must differ".to_string(),
            ));
        }
        Ok(())
    }

    pub fn state_of(&self, x: usize, y: usize) -> StateId {
        y * self.width + x
    }
}

/// Grid actions, in tie-break order.
pub const GRID_ACTIONS: [&str; 4] = ["up", "down", "left", "right"];

#[derive(Debug, Clone)]
pub struct Gridworld {
    spec: GridworldSpec,
    position: (usize, usize),
    steps_taken: usize,
}

impl Gridworld {
    pub fn new(spec: GridworldSpec) -> Result<Self> {
        spec.validate()?;
        let position = spec.start;
        Ok(Self {
            spec,
            position,
            steps_taken: 0,
        })
    }

    pub fn spec(&self) -> &GridworldSpec {
        &self.spec
    }
}

impl Environment for Gridworld {
    fn reset(&mut self, _rng: &mut dyn RngCore) -> StateId {
        self.position = self.spec.start;
        self.steps_taken = 0;
        self.spec.state_of(self.position.0, self.position.1)
    }

    fn step(&mut self, action: ActionId) -> Result<StepOutcome> {
        let (x, y) = self.position;
        // Off-grid moves keep the position (wall clamp).
        let next = match action {
            0 => (x, y.saturating_sub(1)),               // up
            1 => (x, (y + 1).min(self.spec.height - 1)), // down
            2 => (x.saturating_sub(1), y),               // left
            3 => ((x + 1).min(self.spec.width - 1), y),  // right
            _ => return Err(Error::InvalidInput(format!("unknown grid action {action}"))),
        };
        self.position = next;
        self.steps_taken += 1;
        let at_goal = next == self.spec.goal;
        let reward = if at_goal {
            self.spec.goal_reward
        } else {
            self.spec.step_reward
        };
        Ok(StepOutcome {
            next_state: self.spec.state_of(next.0, next.1),
            reward,
            done: at_goal || self.steps_taken >= self.spec.max_steps,
        })
    }

    fn n_states(&self) -> usize {
        self.spec.width * self.spec.height
    }

    fn n_actions(&self) -> usize {
        4
    }

    fn coords(&self, state: StateId) -> (usize, usize) {
        (state % self.spec.width, state / self.spec.width)
    }

    fn is_goal(&self, state: StateId) -> bool {
        state == self.spec.state_of(self.spec.goal.0, self.spec.goal.1)
    }
}

// ---------------------------------------------------------------------------
// Chain
// ---------------------------------------------------------------------------

/// Left-to-right chain of `length` states; reward 1 only on reaching the far
/// end. An ε-greedy random walk from state 0 rarely drifts all the way
/// right, which is the point.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub length: usize,
    pub max_steps: usize,
}

impl Default for ChainSpec {
    fn default() -> Self {
        Self {
            length: 10,
            max_steps: 100,
        }
    }
}

impl ChainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length < 3 {
            return Err(Error::InvalidInput("chain length must be >= 3".to_string()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidInput("max_steps must be >= 1".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Chain {
    spec: ChainSpec,
    position: usize,
    steps_taken: usize,
}

impl Chain {
    pub fn new(spec: ChainSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            position: 0,
            steps_taken: 0,
        })
    }
}

impl Environment for Chain {
    fn reset(&mut self, _rng: &mut dyn RngCore) -> StateId {
        self.position = 0;
        self.steps_taken = 0;
        0
    }

    fn step(&mut self, action: ActionId) -> Result<StepOutcome> {
        let next = match action {
            0 => self.position.saturating_sub(1),               // left
            1 => (self.position + 1).min(self.spec.length - 1), // right
            _ => {
                return Err(Error::InvalidInput(format!(
                    "unknown chain action {action}"
                )))
            }
        };
        self.position = next;
        self.steps_taken += 1;
        let at_goal = next == self.spec.length - 1;
        Ok(StepOutcome {
            next_state: next,
            reward: if at_goal { 1.0 } else { 0.0 },
            done: at_goal || self.steps_taken >= self.spec.max_steps,
        })
    }

    fn n_states(&self) -> usize {
        self.spec.length
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn coords(&self, state: StateId) -> (usize, usize) {
        (state, 0)
    }

    fn is_goal(&self, state: StateId) -> bool {
        state == self.spec.length - 1
    }
}

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

/// How raw state ids become ℓ2-normalized embedding vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingMode {
    /// Unit basis vector per state; dimension = number of states. Segment
    /// diversity is then exactly 1 iff all window states are distinct.
    OneHot,
    /// Normalized `(x + 1, y + 1)` layout coordinates; the offset keeps the
    /// origin away from the zero vector. Dimension 2, so windows longer than
    /// 2 are rank-deficient by construction.
    Coordinates,
    /// Normalized column of a fixed seeded Gaussian projection of the
    /// one-hot encoding; exercises high-dimensional embeddings without a
    /// learned encoder.
    RandomProjection { dim: usize, seed: u64 },
}

/// Precomputed embedding table for one environment.
#[derive(Debug, Clone)]
pub struct Embedder {
    vectors: Vec<Vector>,
}

impl Embedder {
    pub fn new(mode: &EmbeddingMode, env: &dyn Environment) -> Result<Self> {
        let n = env.n_states();
        let vectors = match mode {
            EmbeddingMode::OneHot => (0..n)
                .map(|s| {
                    let mut entries = vec![0.0; n];
                    entries[s] = 1.0;
                    Vector::new(entries)
                })
                .collect::<Result<Vec<_>>>()?,
            EmbeddingMode::Coordinates => (0..n)
                .map(|s| {
                    let (x, y) = env.coords(s);
                    let raw = Vector::new(vec![(x + 1) as f64, (y + 1) as f64])?;
                    Ok(l2_normalize(&raw))
                })
                .collect::<Result<Vec<_>>>()?,
            EmbeddingMode::RandomProjection { dim, seed } => {
                if *dim == 0 {
                    return Err(Error::InvalidInput(
                        "projection dimension must be >= 1".to_string(),
                    ));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..n)
                    .map(|_| {
                        let entries: Vec<f64> =
                            (0..*dim).map(|_| rng.sample(StandardNormal)).collect();
                        Ok(l2_normalize(&Vector::new(entries)?))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Ok(Self { vectors })
    }

    /// Embedding dimension.
    pub fn dim(&self) -> usize {
        self.vectors[0].dim()
    }

    pub fn embed(&self, state: StateId) -> Vector {
        self.vectors[state].clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replay::DiversityConfig;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn grid_reset_returns_start() {
        let mut env = Gridworld::new(GridworldSpec::default()).unwrap();
        assert_eq!(env.reset(&mut rng()), 0);
        assert_eq!(env.reset(&mut rng()), env.reset(&mut rng()));
    }

    #[test]
    fn chain_reset_returns_zero() {
        let mut env = Chain::new(ChainSpec {
            length: 5,
            max_steps: 20,
        })
        .unwrap();
        assert_eq!(env.reset(&mut rng()), 0);
    }

    #[test]
    fn grid_goal_entry_pays_and_terminates() {
        let spec = GridworldSpec::default();
        let mut env = Gridworld::new(spec.clone()).unwrap();
        env.reset(&mut rng());
        // Walk to (9, 8), then step down into the goal.
        for _ in 0..9 {
            env.step(3).unwrap();
        }
        for _ in 0..8 {
            env.step(1).unwrap();
        }
        let out = env.step(1).unwrap();
        assert_eq!(out.next_state, spec.state_of(9, 9));
        assert_eq!(out.reward, 1.0);
        assert!(out.done);
    }

    #[test]
    fn grid_wall_clamp_keeps_position() {
        let mut env = Gridworld::new(GridworldSpec::default()).unwrap();
        env.reset(&mut rng());
        let out = env.step(2).unwrap(); // left from (0, 0)
        assert_eq!(out.next_state, 0);
        assert_eq!(out.reward, 0.0);
        assert!(!out.done);
    }

    #[test]
    fn grid_rejects_unknown_action() {
        let mut env = Gridworld::new(GridworldSpec::default()).unwrap();
        env.reset(&mut rng());
        assert!(env.step(4).is_err());
    }

    #[test]
    fn grid_episode_respects_max_steps() {
        let spec = GridworldSpec {
            max_steps: 7,
            ..GridworldSpec::default()
        };
        let mut env = Gridworld::new(spec).unwrap();
        env.reset(&mut rng());
        let mut steps = 0;
        loop {
            steps += 1;
            // Bounce off the left wall forever.
            if env.step(2).unwrap().done {
                break;
            }
        }
        assert_eq!(steps, 7);
    }

    #[test]
    fn chain_far_end_is_terminal() {
        let mut env = Chain::new(ChainSpec {
            length: 5,
            max_steps: 20,
        })
        .unwrap();
        env.reset(&mut rng());
        for _ in 0..3 {
            let out = env.step(1).unwrap();
            assert_eq!(out.reward, 0.0);
            assert!(!out.done);
        }
        let out = env.step(1).unwrap();
        assert_eq!(out.next_state, 4);
        assert_eq!(out.reward, 1.0);
        assert!(out.done);
    }

    #[test]
    fn one_hot_embeddings_are_basis_vectors() {
        let env = Gridworld::new(GridworldSpec::default()).unwrap();
        let embedder = Embedder::new(&EmbeddingMode::OneHot, &env).unwrap();
        let e3 = embedder.embed(3);
        assert_eq!(e3.dim(), 100);
        assert_eq!(e3.as_slice()[3], 1.0);
        assert!((e3.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coordinate_embedding_normalizes_offset_cell() {
        let env = Gridworld::new(GridworldSpec::default()).unwrap();
        let embedder = Embedder::new(&EmbeddingMode::Coordinates, &env).unwrap();
        let spec = GridworldSpec::default();
        let e = embedder.embed(spec.state_of(3, 4));
        assert!((e.as_slice()[0] - 0.62470).abs() < 1e-5);
        assert!((e.as_slice()[1] - 0.78087).abs() < 1e-5);
    }

    #[test]
    fn distinct_one_hot_states_give_unit_segment_diversity() {
        let env = Gridworld::new(GridworldSpec::default()).unwrap();
        let embedder = Embedder::new(&EmbeddingMode::OneHot, &env).unwrap();
        let cfg = DiversityConfig {
            segment_length: 2,
            jitter: 0.0,
            ..DiversityConfig::default()
        };
        let d = crate::replay::segment_diversity(&[embedder.embed(10), embedder.embed(55)], &cfg)
            .unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_projection_embeddings_are_fixed_by_seed_and_unit_norm() {
        let env = Chain::new(ChainSpec::default()).unwrap();
        let mode = EmbeddingMode::RandomProjection { dim: 16, seed: 7 };
        let a = Embedder::new(&mode, &env).unwrap();
        let b = Embedder::new(&mode, &env).unwrap();
        for s in 0..10 {
            assert_eq!(a.embed(s), b.embed(s));
            assert!((a.embed(s).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_hot_diversity_is_a_distinctness_indicator() {
        // Closed-form oracle for the scoring pipeline: a window of one-hot
        // embeddings scores 1 iff all states are distinct, else ~0.
        let env = Gridworld::new(GridworldSpec::default()).unwrap();
        let embedder = Embedder::new(&EmbeddingMode::OneHot, &env).unwrap();
        let cfg = DiversityConfig {
            segment_length: 4,
            jitter: 0.0,
            ..DiversityConfig::default()
        };
        let mut rng = rng();
        for _ in 0..50 {
            let states: Vec<usize> = (0..4).map(|_| rng.random_range(0..100)).collect();
            let embeddings: Vec<_> = states.iter().map(|&s| embedder.embed(s)).collect();
            let d = crate::replay::segment_diversity(&embeddings, &cfg).unwrap();
            let distinct = states
                .iter()
                .collect::<std::collections::HashSet<_>>()
                .len()
                == 4;
            if distinct {
                assert!((d - 1.0).abs() <= 1e-12, "{states:?} scored {d}");
            } else {
                assert!(d.abs() <= 1e-12, "{states:?} scored {d}");
            }
        }
    }

    #[test]
    fn grid_total_reward_is_zero_or_one() {
        let mut env = Gridworld::new(GridworldSpec::default()).unwrap();
        let mut rng = rng();
        for _ in 0..50 {
            env.reset(&mut rng);
            let mut total = 0.0;
            loop {
                let action = rng.random_range(0..4);
                let out = env.step(action).unwrap();
                total += out.reward;
                if out.done {
                    break;
                }
            }
            assert!(total == 0.0 || total == 1.0);
        }
    }
}
