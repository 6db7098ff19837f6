use rayon::prelude::*;

use super::config::{EnvConfig, TrainConfig};
use super::metrics::StepMetrics;
use super::seeding::{stream_rng, STREAM_ROLLOUT, STREAM_TASKS};
use crate::advantage::{grpo_advantages, igpo_advantages, AdvantageField};
use crate::environment::{run_episode, sample_task, KnowledgeBase, Task};
use crate::episodes::{Group, Rollout};
use crate::error::Result;
use crate::objective::{compute_gradients, surrogate_loss, Algorithm};
use crate::policy::{PolicyParams, PolicySnapshot, TokenPolicy};
use crate::rewards::{assemble_reward_vector, f1_outcome, gt_probs_by_turn, info_gains_from_probs, is_success};

/// Knowledge base plus the task distribution drawn from it.
#[derive(Clone, Debug)]
pub struct Environment {
    pub kb: KnowledgeBase,
    pub hops: usize,
    pub max_answer_tokens: usize,
}

impl Environment {
    pub fn new(config: &EnvConfig, vocab_size: usize) -> Result<Self> {
        let kb = KnowledgeBase::generate(
            vocab_size,
            config.seed,
            config.n_entities,
            config.n_relations,
            config.chain_density,
        )?;
        Ok(Self {
            kb,
            hops: config.hops,
            max_answer_tokens: config.max_answer_tokens,
        })
    }

    /// The `batch` tasks of training step `step`. Depends only on the seed
    /// and the step, so every arm of a comparison sees the same questions.
    pub fn tasks_for_step(&self, seed: u64, step: usize, batch: usize) -> Result<Vec<Task>> {
        let mut rng = stream_rng(seed, STREAM_TASKS, step as u64, 0);
        (0..batch).map(|_| sample_task(&self.kb, self.hops, &mut rng)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub params: PolicyParams,
    pub reference: PolicySnapshot,
    /// Steps completed so far.
    pub step: usize,
    pub cumulative_decision_tokens: u64,
}

impl TrainState {
    /// Fresh state whose KL reference is `params` itself.
    pub fn new(params: PolicyParams) -> Self {
        let reference = params.snapshot();
        Self {
            params,
            reference,
            step: 0,
            cumulative_decision_tokens: 0,
        }
    }
}

/// Samples `group_size` rollouts per task, in parallel; rollout `g` of
/// task `i` uses its own generator keyed by `(seed, step, i, g)`.
pub fn sample_groups<P: TokenPolicy + ?Sized>(
    policy: &P,
    env: &Environment,
    tasks: &[Task],
    config: &TrainConfig,
    step: usize,
) -> Vec<Group> {
    let episode = config.episode(env.max_answer_tokens);
    let g = config.group_size;
    let rollouts: Vec<Rollout> = (0..tasks.len() * g)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(config.seed, STREAM_ROLLOUT, step as u64, k as u64);
            run_episode(policy, &env.kb, &tasks[k / g], &episode, &mut rng)
        })
        .collect();
    let mut rollouts = rollouts.into_iter();
    tasks
        .iter()
        .map(|task| Group {
            question: task.question.clone(),
            ground_truth: task.gt_answer.clone(),
            rollouts: rollouts.by_ref().take(g).collect(),
        })
        .collect()
}

/// Rewards and ground-truth probabilities of one group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupEvaluation {
    pub outcomes: Vec<f64>,
    pub successes: Vec<bool>,
    /// `p_0 … p_{T−1}` per rollout.
    pub gt_probs: Vec<Vec<f64>>,
}

impl GroupEvaluation {
    pub fn new<P: TokenPolicy + ?Sized>(policy: &P, group: &Group, lambda_fmt: f64) -> Self {
        let wrapped = group.wrapped_ground_truth();
        let gt_probs = group
            .rollouts
            .par_iter()
            .map(|ro| gt_probs_by_turn(policy, &group.question, ro, &wrapped))
            .collect();
        let outcomes = group
            .rollouts
            .iter()
            .map(|ro| f1_outcome(&ro.predicted_answer, &group.ground_truth, ro.format_valid, lambda_fmt))
            .collect();
        let successes = group
            .rollouts
            .iter()
            .map(|ro| is_success(ro, &group.ground_truth))
            .collect();
        Self {
            outcomes,
            successes,
            gt_probs,
        }
    }
}

/// Advantages for one group under `config`. GRPO uses the outcome alone;
/// IGPO builds reward vectors per `config.reward_mode`.
pub fn compute_fields(group: &Group, eval: &GroupEvaluation, config: &TrainConfig) -> Result<Vec<AdvantageField>> {
    match config.algorithm {
        Algorithm::Grpo => grpo_advantages(group, &eval.outcomes),
        Algorithm::Igpo => {
            let vectors: Vec<_> = eval
                .gt_probs
                .iter()
                .zip(&eval.outcomes)
                .map(|(probs, &outcome)| {
                    assemble_reward_vector(config.reward_mode, &info_gains_from_probs(probs), outcome)
                })
                .collect();
            igpo_advantages(group, &vectors, config.gamma)
        }
    }
}

/// Fraction of groups in which every token advantage is zero.
pub fn zero_advantage_fraction(fields: &[Vec<AdvantageField>]) -> f64 {
    if fields.is_empty() {
        return 0.0;
    }
    let zero = fields.iter().filter(|g| g.iter().all(AdvantageField::is_zero)).count();
    zero as f64 / fields.len() as f64
}

/// `H(p_0) − H(p_{T−1})` in nats with `H = −ln p`; `None` for
/// single-turn rollouts, which have no interaction to measure.
pub fn gt_entropy_reduction(probs: &[f64]) -> Option<f64> {
    if probs.len() < 2 {
        return None;
    }
    Some(probs[probs.len() - 1].ln() - probs[0].ln())
}

/// One on-policy update: sample, score, compute advantages, take a
/// gradient-ascent step on the surrogate objective.
pub fn train_step(state: &mut TrainState, env: &Environment, config: &TrainConfig) -> Result<StepMetrics> {
    let step = state.step;
    let tasks = env.tasks_for_step(config.seed, step, config.batch_size)?;
    let old = state.params.snapshot();
    let groups = sample_groups(&*old, env, &tasks, config, step);
    let evals: Vec<GroupEvaluation> = groups
        .iter()
        .map(|g| GroupEvaluation::new(&*old, g, config.lambda_fmt))
        .collect();
    let fields = groups
        .iter()
        .zip(&evals)
        .map(|(g, e)| compute_fields(g, e, config))
        .collect::<Result<Vec<_>>>()?;

    let (loss, diag) = surrogate_loss(
        &state.params,
        old.params(),
        state.reference.params(),
        &groups,
        &fields,
        &config.objective(),
    )?;
    let grad = compute_gradients(&state.params, &loss);
    state.params.apply(&grad, -config.learning_rate);

    let n_rollouts = groups.iter().map(Group::size).sum::<usize>();
    let rollouts = groups.iter().flat_map(|g| &g.rollouts);
    let decision_tokens: usize = rollouts.clone().map(Rollout::decision_token_count).sum();
    let turns: usize = rollouts.clone().map(Rollout::num_turns).sum();
    let valid = rollouts.filter(|r| r.format_valid).count();
    let outcomes: Vec<f64> = evals.iter().flat_map(|e| e.outcomes.iter().copied()).collect();
    let successes = evals.iter().flat_map(|e| &e.successes).filter(|&&s| s).count();
    let reductions: Vec<f64> = evals
        .iter()
        .flat_map(|e| &e.gt_probs)
        .filter_map(|p| gt_entropy_reduction(p))
        .collect();

    state.cumulative_decision_tokens += decision_tokens as u64;
    state.step += 1;
    if config.ref_reanchor_interval > 0 && state.step.is_multiple_of(config.ref_reanchor_interval) {
        state.reference = state.params.snapshot();
    }

    let n = n_rollouts as f64;
    Ok(StepMetrics {
        step,
        rollouts: n_rollouts,
        mean_outcome_reward: outcomes.iter().sum::<f64>() / n,
        success_rate: successes as f64 / n,
        format_valid_rate: valid as f64 / n,
        mean_turns: turns as f64 / n,
        zero_advantage_fraction: zero_advantage_fraction(&fields),
        gt_entropy_reduction: if reductions.is_empty() {
            None
        } else {
            Some(reductions.iter().sum::<f64>() / reductions.len() as f64)
        },
        decision_tokens: decision_tokens as u64,
        cumulative_decision_tokens: state.cumulative_decision_tokens,
        objective: diag.objective,
        mean_kl: diag.mean_kl,
        clip_fraction: diag.clip_fraction,
        grad_norm: grad.norm(),
    })
}
