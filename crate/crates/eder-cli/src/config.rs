//! Experiment configuration file: TOML with documented defaults.
//!
//! Every key is optional except `env.kind` and `sampler.method`; missing
//! keys take the defaults listed in the README (and encoded in the `Default`
//! impls here). Unknown keys are rejected at parse time. Semantic validation
//! collects *every* violation instead of stopping at the first, and emits
//! warnings for configurations that are legal but numerically degenerate
//! (window length above the embedding dimension).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use eder_core::agent::EpsilonSchedule;
use eder_core::envs::{ChainSpec, EmbeddingMode, GridworldSpec};
use eder_core::experiment::{AgentParams, EnvSpec, ExperimentParams};
use eder_core::replay::{DiversityConfig, RejectionMode};
use eder_core::sampling::{SamplerConfig, SamplerMethod, TopM};

/// Parsed experiment configuration; see the README for the key reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvTable,
    #[serde(default)]
    pub diversity: DiversityTable,
    pub sampler: SamplerTable,
    #[serde(default)]
    pub agent: AgentTable,
    #[serde(default)]
    pub run: RunTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Gridworld,
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    #[default]
    OneHot,
    Coordinates,
    RandomProjection,
}

/// `[env]` table. Gridworld keys and the chain `length` key are mutually
/// exclusive; `projection_*` keys apply only to the random-projection
/// embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvTable {
    pub kind: EnvKind,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub start: Option<[usize; 2]>,
    pub goal: Option<[usize; 2]>,
    pub step_reward: Option<f64>,
    pub goal_reward: Option<f64>,
    pub length: Option<usize>,
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub embedding: EmbeddingKind,
    pub projection_dim: Option<usize>,
    pub projection_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiversityTable {
    pub segment_length: usize,
    pub jitter: f64,
    pub use_cholesky: bool,
    pub use_rejection_sampling: bool,
    pub rejection_mode: RejectionModeField,
    pub max_resample_attempts: usize,
}

impl Default for DiversityTable {
    fn default() -> Self {
        Self {
            segment_length: 10,
            jitter: 1e-10,
            use_cholesky: true,
            use_rejection_sampling: true,
            rejection_mode: RejectionModeField::SinglePass,
            max_resample_attempts: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionModeField {
    SinglePass,
    Resample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodField {
    Eder,
    Per,
    Uniform,
}

/// `top_m = <positive int>` or `top_m = "all"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TopMField {
    Count(u64),
    Keyword(String),
}

impl Default for TopMField {
    fn default() -> Self {
        TopMField::Count(200)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerTable {
    pub method: MethodField,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub top_m: TopMField,
    #[serde(default = "default_per_alpha")]
    pub per_alpha: f64,
    #[serde(default = "default_per_beta_start")]
    pub per_beta_start: f64,
    #[serde(default = "default_per_beta_end")]
    pub per_beta_end: f64,
    #[serde(default = "default_per_epsilon")]
    pub per_epsilon: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_batch_size() -> usize {
    64
}
fn default_per_alpha() -> f64 {
    0.6
}
fn default_per_beta_start() -> f64 {
    0.4
}
fn default_per_beta_end() -> f64 {
    1.0
}
fn default_per_epsilon() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentTable {
    pub learning_rate: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_fraction: f64,
}

impl Default for AgentTable {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunTable {
    pub total_steps: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub buffer_capacity: usize,
    /// Record real wall-clock scoring/sampling times in the metrics columns.
    /// Off by default so identical config + seed reruns are byte-identical.
    pub timing: bool,
}

impl Default for RunTable {
    fn default() -> Self {
        Self {
            total_steps: 50_000,
            eval_every: 2_500,
            eval_episodes: 3,
            seeds: vec![0, 1, 2, 3, 4],
            output_dir: PathBuf::from("out"),
            buffer_capacity: 100_000,
            timing: false,
        }
    }
}

/// Outcome of semantic validation: hard violations and advisory warnings.
#[derive(Debug, Clone, Default)]
pub struct Validation {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ExperimentConfig {
    /// Parses config text; parse and unknown-key errors carry the TOML
    /// line/key context from the parser.
    pub fn parse(text: &str, origin: &Path) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("{}: {e}", origin.display()))
    }

    /// Collects every semantic violation and warning. An empty `errors`
    /// list means the config is runnable.
    pub fn validate(&self) -> Validation {
        let mut v = Validation::default();
        self.validate_env(&mut v);
        self.validate_diversity(&mut v);
        self.validate_sampler(&mut v);
        self.validate_agent(&mut v);
        self.validate_run(&mut v);
        if v.errors.is_empty() {
            let b = self.diversity.segment_length;
            let dim = self.embedding_dim();
            if b > dim {
                v.warnings.push(format!(
                    "segment_length {b} exceeds the embedding dimension {dim}; \
                     windows will be rank-deficient and score near zero"
                ));
            }
        }
        v
    }

    fn validate_env(&self, v: &mut Validation) {
        let env = &self.env;
        match env.kind {
            EnvKind::Gridworld => {
                if env.length.is_some() {
                    v.errors
                        .push("env.length applies only to kind = \"chain\"".to_string());
                }
                let spec = self.gridworld_spec();
                if let Err(e) = spec.validate() {
                    v.errors.push(format!("env: {e}"));
                }
            }
            EnvKind::Chain => {
                for (key, set) in [
                    ("width", env.width.is_some()),
                    ("height", env.height.is_some()),
                    ("start", env.start.is_some()),
                    ("goal", env.goal.is_some()),
                    ("step_reward", env.step_reward.is_some()),
                    ("goal_reward", env.goal_reward.is_some()),
                ] {
                    if set {
                        v.errors
                            .push(format!("env.{key} applies only to kind = \"gridworld\""));
                    }
                }
                if let Err(e) = self.chain_spec().validate() {
                    v.errors.push(format!("env: {e}"));
                }
            }
        }
        if env.embedding != EmbeddingKind::RandomProjection {
            for (key, set) in [
                ("projection_dim", env.projection_dim.is_some()),
                ("projection_seed", env.projection_seed.is_some()),
            ] {
                if set {
                    v.errors.push(format!(
                        "env.{key} applies only to embedding = \"random_projection\""
                    ));
                }
            }
        } else if env.projection_dim == Some(0) {
            v.errors.push("env.projection_dim must be >= 1".to_string());
        }
    }

    fn validate_diversity(&self, v: &mut Validation) {
        let d = &self.diversity;
        if d.segment_length == 0 {
            v.errors
                .push("diversity.segment_length must be >= 1".to_string());
        }
        if d.jitter.is_nan() || d.jitter < 0.0 {
            v.errors.push("diversity.jitter must be >= 0".to_string());
        }
        if d.max_resample_attempts == 0 {
            v.errors
                .push("diversity.max_resample_attempts must be >= 1".to_string());
        }
    }

    fn validate_sampler(&self, v: &mut Validation) {
        let s = &self.sampler;
        if s.batch_size == 0 {
            v.errors.push("sampler.batch_size must be >= 1".to_string());
        }
        match &s.top_m {
            TopMField::Count(0) => {
                v.errors
                    .push("sampler.top_m must be >= 1 or \"all\"".to_string());
            }
            TopMField::Keyword(word) if word != "all" => {
                v.errors.push(format!(
                    "sampler.top_m must be a positive integer or \"all\", got \"{word}\""
                ));
            }
            _ => {}
        }
        for (key, value) in [
            ("per_alpha", s.per_alpha),
            ("per_beta_start", s.per_beta_start),
            ("per_beta_end", s.per_beta_end),
        ] {
            if !(0.0..=1.0).contains(&value) {
                v.errors
                    .push(format!("sampler.{key} must be within [0, 1], got {value}"));
            }
        }
        if s.per_beta_start > s.per_beta_end {
            v.errors
                .push("sampler.per_beta_start must be <= sampler.per_beta_end".to_string());
        }
        if s.per_epsilon.is_nan() || s.per_epsilon <= 0.0 {
            v.errors.push("sampler.per_epsilon must be > 0".to_string());
        }
    }

    fn validate_agent(&self, v: &mut Validation) {
        let a = &self.agent;
        if !(a.learning_rate > 0.0 && a.learning_rate <= 1.0) {
            v.errors.push(format!(
                "agent.learning_rate must be within (0, 1], got {}",
                a.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&a.gamma) {
            v.errors.push(format!(
                "agent.gamma must be within [0, 1), got {}",
                a.gamma
            ));
        }
        for (key, value) in [
            ("epsilon_start", a.epsilon_start),
            ("epsilon_end", a.epsilon_end),
        ] {
            if !(0.0..=1.0).contains(&value) {
                v.errors
                    .push(format!("agent.{key} must be within [0, 1], got {value}"));
            }
        }
        if !(a.epsilon_decay_fraction > 0.0 && a.epsilon_decay_fraction <= 1.0) {
            v.errors
                .push("agent.epsilon_decay_fraction must be within (0, 1]".to_string());
        }
    }

    fn validate_run(&self, v: &mut Validation) {
        let r = &self.run;
        if r.total_steps == 0 {
            v.errors.push("run.total_steps must be >= 1".to_string());
        }
        if r.eval_every == 0 {
            v.errors.push("run.eval_every must be >= 1".to_string());
        } else if r.total_steps > 0 && r.eval_every > r.total_steps {
            v.errors
                .push("run.eval_every must be <= run.total_steps".to_string());
        }
        if r.eval_episodes == 0 {
            v.errors.push("run.eval_episodes must be >= 1".to_string());
        }
        if r.seeds.is_empty() {
            v.errors
                .push("run.seeds must list at least one seed".to_string());
        }
        if r.buffer_capacity == 0 {
            v.errors
                .push("run.buffer_capacity must be >= 1".to_string());
        }
    }

    fn gridworld_spec(&self) -> GridworldSpec {
        let d = GridworldSpec::default();
        let env = &self.env;
        GridworldSpec {
            width: env.width.unwrap_or(d.width),
            height: env.height.unwrap_or(d.height),
            start: env.start.map(|[x, y]| (x, y)).unwrap_or(d.start),
            goal: env.goal.map(|[x, y]| (x, y)).unwrap_or(d.goal),
            max_steps: env.max_steps.unwrap_or(d.max_steps),
            step_reward: env.step_reward.unwrap_or(d.step_reward),
            goal_reward: env.goal_reward.unwrap_or(d.goal_reward),
        }
    }

    fn chain_spec(&self) -> ChainSpec {
        let d = ChainSpec::default();
        ChainSpec {
            length: self.env.length.unwrap_or(d.length),
            max_steps: self.env.max_steps.unwrap_or(d.max_steps),
        }
    }

    fn env_spec(&self) -> EnvSpec {
        match self.env.kind {
            EnvKind::Gridworld => EnvSpec::Gridworld(self.gridworld_spec()),
            EnvKind::Chain => EnvSpec::Chain(self.chain_spec()),
        }
    }

    fn n_states(&self) -> usize {
        match self.env.kind {
            EnvKind::Gridworld => {
                let s = self.gridworld_spec();
                s.width * s.height
            }
            EnvKind::Chain => self.chain_spec().length,
        }
    }

    fn embedding_mode(&self) -> EmbeddingMode {
        match self.env.embedding {
            EmbeddingKind::OneHot => EmbeddingMode::OneHot,
            EmbeddingKind::Coordinates => EmbeddingMode::Coordinates,
            EmbeddingKind::RandomProjection => EmbeddingMode::RandomProjection {
                dim: self.env.projection_dim.unwrap_or(16),
                seed: self.env.projection_seed.unwrap_or(7),
            },
        }
    }

    fn embedding_dim(&self) -> usize {
        match self.env.embedding {
            EmbeddingKind::OneHot => self.n_states(),
            EmbeddingKind::Coordinates => 2,
            EmbeddingKind::RandomProjection => self.env.projection_dim.unwrap_or(16),
        }
    }

    /// Core-level parameters for one run (validation assumed to have
    /// passed).
    pub fn to_params(&self) -> ExperimentParams {
        let d = &self.diversity;
        let s = &self.sampler;
        let a = &self.agent;
        ExperimentParams {
            env: self.env_spec(),
            embedding: self.embedding_mode(),
            diversity: DiversityConfig {
                segment_length: d.segment_length,
                jitter: d.jitter,
                use_cholesky: d.use_cholesky,
                use_rejection_sampling: d.use_rejection_sampling,
                rejection_mode: match d.rejection_mode {
                    RejectionModeField::SinglePass => RejectionMode::SinglePass,
                    RejectionModeField::Resample => RejectionMode::Resample,
                },
                max_resample_attempts: d.max_resample_attempts,
            },
            sampler: SamplerConfig {
                method: match s.method {
                    MethodField::Eder => SamplerMethod::Eder,
                    MethodField::Per => SamplerMethod::Per,
                    MethodField::Uniform => SamplerMethod::Uniform,
                },
                batch_size: s.batch_size,
                top_m: match &s.top_m {
                    TopMField::Keyword(_) => TopM::All,
                    TopMField::Count(m) => TopM::M(*m as usize),
                },
                per_alpha: s.per_alpha,
                per_beta_start: s.per_beta_start,
                per_beta_end: s.per_beta_end,
                per_epsilon: s.per_epsilon,
                seed: s.seed,
            },
            agent: AgentParams {
                learning_rate: a.learning_rate,
                gamma: a.gamma,
                epsilon: EpsilonSchedule {
                    start: a.epsilon_start,
                    end: a.epsilon_end,
                    decay_fraction: a.epsilon_decay_fraction,
                },
            },
            buffer_capacity: self.run.buffer_capacity,
            total_steps: self.run.total_steps,
            eval_every: self.run.eval_every,
            eval_episodes: self.run.eval_episodes,
            timing: self.run.timing,
        }
    }

    /// The config with every optional key pinned to its effective value, so
    /// that serializing and re-parsing it reproduces the same config.
    pub fn canonical(&self) -> ExperimentConfig {
        let mut out = self.clone();
        match out.env.kind {
            EnvKind::Gridworld => {
                let spec = self.gridworld_spec();
                out.env.width = Some(spec.width);
                out.env.height = Some(spec.height);
                out.env.start = Some([spec.start.0, spec.start.1]);
                out.env.goal = Some([spec.goal.0, spec.goal.1]);
                out.env.step_reward = Some(spec.step_reward);
                out.env.goal_reward = Some(spec.goal_reward);
                out.env.max_steps = Some(spec.max_steps);
            }
            EnvKind::Chain => {
                let spec = self.chain_spec();
                out.env.length = Some(spec.length);
                out.env.max_steps = Some(spec.max_steps);
            }
        }
        if out.env.embedding == EmbeddingKind::RandomProjection {
            out.env.projection_dim = Some(self.env.projection_dim.unwrap_or(16));
            out.env.projection_seed = Some(self.env.projection_seed.unwrap_or(7));
        }
        out
    }

    /// Canonical TOML rendering of the filled config.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(&self.canonical()).expect("config serializes")
    }
}
