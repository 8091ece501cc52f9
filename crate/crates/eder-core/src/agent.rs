//! Tabular Q-learning agent driven by replay batches.
//!
//! The TD error uses the max-over-actions bootstrap
//! `δ = r + γ·max_a' Q(s', a')·(1 − done) − Q(s, a)` and updates apply
//! `Q(s, a) += lr · w · δ` sequentially in batch order, where `w` is the
//! entry's importance weight (1 except under prioritized replay).

use rand::Rng;

use crate::replay::{ActionId, StateId, Transition};
use crate::sampling::Batch;

/// Linear ε decay: from `start` to `end` over the first `decay_fraction` of
/// training progress, flat at `end` afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_fraction: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            decay_fraction: 0.5,
        }
    }
}

impl EpsilonSchedule {
    /// ε at `progress ∈ [0, 1]` through the run.
    pub fn value(&self, progress: f64) -> f64 {
        let p = (progress / self.decay_fraction).clamp(0.0, 1.0);
        self.start + (self.end - self.start) * p
    }
}

/// Dense state × action value table with ε-greedy action selection.
#[derive(Debug, Clone)]
pub struct QTable {
    values: Vec<f64>,
    n_states: usize,
    n_actions: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
}

impl QTable {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        learning_rate: f64,
        gamma: f64,
        epsilon: EpsilonSchedule,
    ) -> Self {
        Self {
            values: vec![0.0; n_states * n_actions],
            n_states,
            n_actions,
            learning_rate,
            gamma,
            epsilon,
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn q(&self, state: StateId, action: ActionId) -> f64 {
        debug_assert!(state < self.n_states && action < self.n_actions);
        self.values[state * self.n_actions + action]
    }

    fn q_mut(&mut self, state: StateId, action: ActionId) -> &mut f64 {
        &mut self.values[state * self.n_actions + action]
    }

    pub fn max_q(&self, state: StateId) -> f64 {
        let row = &self.values[state * self.n_actions..(state + 1) * self.n_actions];
        row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Highest-valued action, ties broken by the lowest action id.
    pub fn greedy_action(&self, state: StateId) -> ActionId {
        let mut best = 0;
        let mut best_value = self.q(state, 0);
        for action in 1..self.n_actions {
            let value = self.q(state, action);
            if value > best_value {
                best = action;
                best_value = value;
            }
        }
        best
    }

    /// ε-greedy action selection with ε from the schedule at `progress`.
    pub fn act(&self, state: StateId, progress: f64, rng: &mut impl Rng) -> ActionId {
        let epsilon = self.epsilon.value(progress);
        if rng.random::<f64>() < epsilon {
            rng.random_range(0..self.n_actions)
        } else {
            self.greedy_action(state)
        }
    }

    /// Max-bootstrap TD error of a single transition under the current table.
    pub fn td_error(&self, transition: &Transition) -> f64 {
        let bootstrap = if transition.done {
            0.0
        } else {
            self.max_q(transition.next_state_id)
        };
        transition.reward + self.gamma * bootstrap
            - self.q(transition.state_id, transition.action_id)
    }

    /// Applies one replay batch sequentially and returns the TD error of
    /// each entry at the moment it was applied (fed back to prioritized
    /// replay by the caller).
    pub fn update_batch(&mut self, batch: &Batch) -> Vec<f64> {
        let mut deltas = Vec::with_capacity(batch.entries.len());
        for entry in &batch.entries {
            let t = &entry.transition;
            let delta = self.td_error(t);
            *self.q_mut(t.state_id, t.action_id) +=
                self.learning_rate * entry.importance_weight * delta;
            deltas.push(delta);
        }
        deltas
    }
}
