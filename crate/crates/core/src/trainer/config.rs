use serde::{Deserialize, Serialize};

use crate::environment::EpisodeConfig;
use crate::error::{IgpoError, Result};
use crate::objective::{Algorithm, KlEstimator, ObjectiveConfig};
use crate::policy::PolicyShape;
use crate::rewards::RewardMode;

/// Optimization settings for the RL phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    /// Ignored by GRPO, which always uses the outcome reward alone.
    pub reward_mode: RewardMode,
    /// Prompts (tasks) per step.
    pub batch_size: usize,
    /// Rollouts per prompt, `G`.
    pub group_size: usize,
    pub max_turns: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub lambda_fmt: f64,
    pub learning_rate: f64,
    pub total_steps: usize,
    pub temperature: f64,
    pub seed: u64,
    pub kl_estimator: KlEstimator,
    /// Re-anchor the KL reference to the current policy every this many
    /// steps; 0 keeps the initial reference.
    pub ref_reanchor_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Igpo,
            reward_mode: RewardMode::F1Ig,
            batch_size: 8,
            group_size: 8,
            max_turns: 10,
            gamma: 1.0,
            epsilon: 0.2,
            beta: 0.001,
            lambda_fmt: -1.0,
            learning_rate: 0.2,
            total_steps: 300,
            temperature: 1.0,
            seed: 1,
            kl_estimator: KlEstimator::K3,
            ref_reanchor_interval: 0,
        }
    }
}

impl TrainConfig {
    /// Hyperparameters sized for large language-model policies; far too
    /// slow (and too small a step size) for this policy.
    pub fn large_scale() -> Self {
        Self {
            batch_size: 32,
            group_size: 16,
            learning_rate: 1e-6,
            ..Self::default()
        }
    }

    pub fn objective(&self) -> ObjectiveConfig {
        ObjectiveConfig {
            epsilon: self.epsilon,
            beta: self.beta,
            algorithm: self.algorithm,
            kl: self.kl_estimator,
        }
    }

    pub fn episode(&self, max_answer_tokens: usize) -> EpisodeConfig {
        EpisodeConfig {
            max_turns: self.max_turns,
            temperature: self.temperature,
            max_answer_tokens,
        }
    }

    // negated so that NaN is rejected
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("train.batch_size", self.batch_size),
            ("train.group_size", self.group_size),
            ("train.max_turns", self.max_turns),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(IgpoError::config(key, "must be positive"));
            }
        }
        if self.group_size < 2 {
            return Err(IgpoError::config(
                "train.group_size",
                "training groups need at least 2 rollouts",
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(IgpoError::config("train.gamma", "must lie in (0, 1]"));
        }
        if !(self.lambda_fmt < 0.0) {
            return Err(IgpoError::config("train.lambda_fmt", "must be negative"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(IgpoError::config("train.learning_rate", "must be positive"));
        }
        if !(self.temperature >= 0.0) {
            return Err(IgpoError::config("train.temperature", "must be non-negative"));
        }
        self.objective().validate().map_err(|e| match e {
            IgpoError::Config { key, reason } => IgpoError::config(format!("train.{key}"), reason),
            other => other,
        })
    }
}

/// Knowledge base and task shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub seed: u64,
    pub n_entities: usize,
    pub n_relations: usize,
    pub chain_density: f64,
    pub hops: usize,
    pub max_answer_tokens: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n_entities: 48,
            n_relations: 5,
            chain_density: 0.6,
            hops: 2,
            max_answer_tokens: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub vocab_size: usize,
    pub window: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub init_scale: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            vocab_size: 64,
            window: 20,
            embed_dim: 16,
            hidden_dim: 64,
            init_scale: 1.0,
        }
    }
}

impl PolicyConfig {
    pub fn shape(&self) -> PolicyShape {
        PolicyShape {
            vocab: self.vocab_size,
            window: self.window,
            embed: self.embed_dim,
            hidden: self.hidden_dim,
        }
    }
}

/// Supervised warm start on generic tool-use streams (see
/// [`super::warmstart`]). Zero steps trains from the random init.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarmupConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Calls per warm-start stream are drawn uniformly from `0..=max_calls`.
    pub max_calls: usize,
    pub answer: WarmupAnswer,
}

/// What the warm-start streams answer with.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmupAnswer {
    /// The most recent entity in view.
    Recent,
    /// The task's true answer.
    Truth,
    /// The true answer once any entity of the chain past the start is in
    /// view, otherwise the most recent entity.
    #[default]
    Informed,
}

impl Default for WarmupConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 16,
            learning_rate: 0.5,
            max_calls: 3,
            answer: WarmupAnswer::default(),
        }
    }
}

/// Everything that determines a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub environment: EnvConfig,
    pub policy: PolicyConfig,
    pub warmup: WarmupConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.policy.shape().validate()?;
        if self.environment.hops == 0 {
            return Err(IgpoError::config("environment.hops", "must be at least 1"));
        }
        if self.environment.hops + 1 > self.train.max_turns {
            return Err(IgpoError::config(
                "environment.hops",
                format!(
                    "{} hops need at least {} turns",
                    self.environment.hops,
                    self.environment.hops + 1
                ),
            ));
        }
        if self.environment.max_answer_tokens == 0 {
            return Err(IgpoError::config("environment.max_answer_tokens", "must be positive"));
        }
        Ok(())
    }
}
