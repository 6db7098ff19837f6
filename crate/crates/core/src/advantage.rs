//! Turn-level advantages: group pooling, z-normalization, discounted
//! accumulation and token assignment, plus GRPO's rollout-level path.

use serde::{Deserialize, Serialize};

use crate::episodes::{Group, Rollout};
use crate::error::{IgpoError, Result};
use crate::rewards::RewardVector;

/// Pooled standard deviations below this produce all-zero advantages.
pub const STD_GUARD: f64 = 1e-8;

/// Advantages of one rollout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvantageField {
    /// Normalized per-turn advantages `A_t`.
    pub turn: Vec<f64>,
    /// Discounted suffix sums `Ã_t`.
    pub cumulative: Vec<f64>,
    /// `Ã` of each token's turn; 0 on tool-response tokens.
    pub token: Vec<f64>,
}

impl AdvantageField {
    pub fn is_zero(&self) -> bool {
        self.token.iter().all(|&a| a == 0.0)
    }
}

/// Population mean and standard deviation.
pub fn population_stats(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn z_scores(xs: &[f64], mean: f64, std: f64) -> impl Iterator<Item = f64> + '_ {
    xs.iter()
        .map(move |&x| if std < STD_GUARD { 0.0 } else { (x - mean) / std })
}

/// Z-scores every turn reward against the pool of all turns of all
/// rollouts in the group. Rollouts may differ in length.
pub fn pool_and_normalize(reward_vectors: &[RewardVector]) -> Vec<Vec<f64>> {
    let pooled: Vec<f64> = reward_vectors.iter().flat_map(|r| r.values.iter().copied()).collect();
    assert!(!pooled.is_empty(), "no rewards to pool");
    let (mean, std) = population_stats(&pooled);
    reward_vectors
        .iter()
        .map(|r| z_scores(&r.values, mean, std).collect())
        .collect()
}

/// `Ã_t = Σ_{k≥t} γ^{k−t} A_k`. `γ = 0` returns `A` unchanged.
pub fn discounted_accumulate(advantages: &[f64], gamma: f64) -> Vec<f64> {
    assert!((0.0..=1.0).contains(&gamma), "gamma must lie in [0, 1]");
    let mut out = vec![0.0; advantages.len()];
    let mut acc = 0.0;
    for t in (0..advantages.len()).rev() {
        acc = if gamma == 0.0 {
            advantages[t]
        } else {
            advantages[t] + gamma * acc
        };
        out[t] = acc;
    }
    out
}

/// Gives every decision token of turn `t` the value `cumulative[t − 1]`.
pub fn assign_to_tokens(rollout: &Rollout, cumulative: &[f64]) -> Vec<f64> {
    assert_eq!(cumulative.len(), rollout.num_turns(), "one advantage per turn");
    rollout
        .token_turns()
        .into_iter()
        .zip(&rollout.decision_mask)
        .map(|(turn, &decision)| {
            if decision && turn > 0 {
                cumulative[turn - 1]
            } else {
                0.0
            }
        })
        .collect()
}

/// Rollout-level z-scores of outcome rewards.
pub fn grpo_advantage(outcome_rewards: &[f64]) -> Vec<f64> {
    assert!(!outcome_rewards.is_empty(), "no rewards to normalize");
    let (mean, std) = population_stats(outcome_rewards);
    z_scores(outcome_rewards, mean, std).collect()
}

/// Full turn-level path for one group.
pub fn igpo_advantages(group: &Group, reward_vectors: &[RewardVector], gamma: f64) -> Result<Vec<AdvantageField>> {
    check_lengths(group, reward_vectors.len())?;
    for (i, (ro, rv)) in group.rollouts.iter().zip(reward_vectors).enumerate() {
        if ro.num_turns() != rv.len() {
            return Err(IgpoError::Shape(format!(
                "rollout {i} has {} turns but {} rewards",
                ro.num_turns(),
                rv.len()
            )));
        }
    }
    let normalized = pool_and_normalize(reward_vectors);
    Ok(group
        .rollouts
        .iter()
        .zip(normalized)
        .map(|(ro, turn)| {
            let cumulative = discounted_accumulate(&turn, gamma);
            let token = assign_to_tokens(ro, &cumulative);
            AdvantageField {
                turn,
                cumulative,
                token,
            }
        })
        .collect())
}

/// GRPO path: each rollout's outcome z-score on all its decision tokens.
pub fn grpo_advantages(group: &Group, outcome_rewards: &[f64]) -> Result<Vec<AdvantageField>> {
    check_lengths(group, outcome_rewards.len())?;
    Ok(group
        .rollouts
        .iter()
        .zip(grpo_advantage(outcome_rewards))
        .map(|(ro, adv)| rollout_constant_field(ro, adv))
        .collect())
}

/// Field with the same advantage on every turn of `rollout`.
pub fn rollout_constant_field(rollout: &Rollout, adv: f64) -> AdvantageField {
    let turn = vec![adv; rollout.num_turns()];
    let token = assign_to_tokens(rollout, &turn);
    AdvantageField {
        cumulative: turn.clone(),
        turn,
        token,
    }
}

fn check_lengths(group: &Group, n: usize) -> Result<()> {
    if group.size() != n {
        return Err(IgpoError::Shape(format!(
            "{} rollouts but {n} reward entries",
            group.size()
        )));
    }
    Ok(())
}
