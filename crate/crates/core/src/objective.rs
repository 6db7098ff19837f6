//! Clipped surrogate objectives with importance ratios against the old
//! policy and a KL penalty toward the reference policy.
//!
//! Both algorithms share one token-level form,
//!
//! ```text
//! J = mean_groups (1/G) Σ_i (1/|o_i|) Σ_{decision tokens j}
//!       [ min(ρ_j Â_j, clip(ρ_j, 1−ε, 1+ε) Â_j) − β KL_j ]
//! ```
//!
//! where `|o_i|` counts decision tokens only. GRPO feeds one advantage per
//! rollout; IGPO feeds the discounted turn advantage of each token's turn.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::advantage::AdvantageField;
use crate::episodes::{Group, Rollout, Token};
use crate::error::{IgpoError, Result};
use crate::policy::{backward, Forward, GradientBuffer, LogProbTerm, LossNode, PolicyParams, Upstream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "GRPO")]
    Grpo,
    #[serde(rename = "IGPO")]
    Igpo,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Grpo => "GRPO",
            Algorithm::Igpo => "IGPO",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = IgpoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "GRPO" => Ok(Algorithm::Grpo),
            "IGPO" => Ok(Algorithm::Igpo),
            _ => Err(IgpoError::config(
                "algorithm",
                format!("unknown algorithm `{s}` (GRPO, IGPO)"),
            )),
        }
    }
}

/// Per-token KL estimator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlEstimator {
    /// `exp(lr − lp) − (lr − lp) − 1` on the sampled token.
    #[default]
    K3,
    /// Full categorical `Σ_v π(v) (log π(v) − log π_ref(v))`.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub epsilon: f64,
    pub beta: f64,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub kl: KlEstimator,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.2,
            beta: 0.001,
            algorithm: Algorithm::Igpo,
            kl: KlEstimator::K3,
        }
    }
}

impl ObjectiveConfig {
    // negated so that NaN is rejected
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(IgpoError::config("epsilon", "must be positive"));
        }
        if !(self.beta >= 0.0) {
            return Err(IgpoError::config("beta", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Objective value `J` (the loss is `−J`).
    pub objective: f64,
    /// Mean per-token KL estimate over decision tokens.
    pub mean_kl: f64,
    /// Fraction of decision tokens whose clipped branch is active.
    pub clip_fraction: f64,
    pub decision_tokens: usize,
}

/// Question plus the rollout's first `j` tokens.
fn context_before(question: &[Token], rollout: &Rollout, j: usize) -> Vec<Token> {
    let mut ctx = Vec::with_capacity(question.len() + j);
    ctx.extend_from_slice(question);
    ctx.extend_from_slice(&rollout.tokens[..j]);
    ctx
}

/// `π_θ(o_j | ·) / π_old(o_j | ·)` under teacher forcing.
pub fn token_ratio(params: &PolicyParams, old: &PolicyParams, question: &[Token], rollout: &Rollout, j: usize) -> f64 {
    debug_assert!(rollout.decision_mask[j], "ratio requested for a tool token");
    let ctx = context_before(question, rollout, j);
    let tok = rollout.tokens[j].index();
    (params.forward(&ctx).logprobs[tok] - old.forward(&ctx).logprobs[tok]).exp()
}

/// K3 estimator value for log-probabilities `lp` (policy) and `lr` (reference).
pub fn k3(lp: f64, lr: f64) -> f64 {
    let u = lr - lp;
    u.exp() - u - 1.0
}

/// Per-token KL estimate at decision token `j`.
pub fn kl_penalty(
    params: &PolicyParams,
    reference: &PolicyParams,
    question: &[Token],
    rollout: &Rollout,
    j: usize,
) -> f64 {
    debug_assert!(rollout.decision_mask[j], "KL requested for a tool token");
    let ctx = context_before(question, rollout, j);
    let tok = rollout.tokens[j].index();
    k3(
        params.forward(&ctx).logprobs[tok],
        reference.forward(&ctx).logprobs[tok],
    )
}

/// Value of `min(ρA, clip(ρ, 1−ε, 1+ε)A)` and whether the clipped branch
/// is strictly smaller (then the term is constant in `ρ`).
pub fn clipped_term(ratio: f64, adv: f64, epsilon: f64) -> (f64, bool) {
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * adv;
    if clipped < unclipped {
        (clipped, true)
    } else {
        (unclipped, false)
    }
}

fn exact_kl(fwd: &Forward, ref_lp: &[f64]) -> (f64, Vec<f64>) {
    let probs: Vec<f64> = fwd.logprobs.iter().map(|x| x.exp()).collect();
    let kl: f64 = probs
        .iter()
        .zip(fwd.logprobs.iter().zip(ref_lp))
        .map(|(p, (lp, lr))| if *p > 0.0 { p * (lp - lr) } else { 0.0 })
        .sum();
    // ∂KL/∂logit_u = p_u (log p_u − log r_u − KL)
    let grad = probs
        .iter()
        .zip(fwd.logprobs.iter().zip(ref_lp))
        .map(|(p, (lp, lr))| p * (lp - lr - kl))
        .collect();
    (kl, grad)
}

fn check_alignment(groups: &[Group], fields: &[Vec<AdvantageField>], algorithm: Algorithm) -> Result<()> {
    if groups.len() != fields.len() {
        return Err(IgpoError::Shape(format!(
            "{} groups but {} advantage sets",
            groups.len(),
            fields.len()
        )));
    }
    for (g, (group, gf)) in groups.iter().zip(fields).enumerate() {
        if group.size() != gf.len() {
            return Err(IgpoError::Shape(format!(
                "group {g}: {} rollouts but {} advantage fields",
                group.size(),
                gf.len()
            )));
        }
        for (i, (ro, f)) in group.rollouts.iter().zip(gf).enumerate() {
            if ro.tokens.len() != f.token.len() {
                return Err(IgpoError::Shape(format!(
                    "group {g} rollout {i}: {} tokens but {} token advantages",
                    ro.tokens.len(),
                    f.token.len()
                )));
            }
            if algorithm == Algorithm::Grpo {
                let mut decision = f
                    .token
                    .iter()
                    .zip(&ro.decision_mask)
                    .filter(|(_, &m)| m)
                    .map(|(a, _)| *a);
                if let Some(first) = decision.next() {
                    if decision.any(|a| a != first) {
                        return Err(IgpoError::config(
                            "algorithm",
                            format!("GRPO needs one advantage per rollout (group {g} rollout {i})"),
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Builds the loss `−J` as a differentiable node plus diagnostics.
///
/// Advantages, old-policy and reference log-probabilities are constants:
/// gradients flow only through `log π_θ` of decision tokens.
pub fn surrogate_loss(
    params: &PolicyParams,
    old: &PolicyParams,
    reference: &PolicyParams,
    groups: &[Group],
    fields: &[Vec<AdvantageField>],
    config: &ObjectiveConfig,
) -> Result<(LossNode, Diagnostics)> {
    config.validate()?;
    check_alignment(groups, fields, config.algorithm)?;
    let mut loss = LossNode::default();
    let mut diag = Diagnostics::default();
    if groups.is_empty() {
        return Ok((loss, diag));
    }
    let (mut kl_sum, mut clipped) = (0.0, 0usize);
    let n_groups = groups.len() as f64;
    let on_policy = params.as_slice() == old.as_slice();

    for (group, gf) in groups.iter().zip(fields) {
        let g_size = group.size() as f64;
        for (ro, field) in group.rollouts.iter().zip(gf) {
            let n_dec = ro.decision_token_count();
            if n_dec == 0 {
                continue;
            }
            let w = 1.0 / (n_groups * g_size * n_dec as f64);
            let mut ctx = group.question.clone();
            for (j, &tok) in ro.tokens.iter().enumerate() {
                if ro.decision_mask[j] {
                    let fwd = params.forward(&ctx);
                    let lp = fwd.logprobs[tok.index()];
                    let lp_old = if on_policy {
                        lp
                    } else {
                        old.forward(&ctx).logprobs[tok.index()]
                    };
                    let ref_lp = reference.forward(&ctx).logprobs;
                    let adv = field.token[j];
                    let ratio = (lp - lp_old).exp();
                    let (term, is_clipped) = clipped_term(ratio, adv, config.epsilon);
                    clipped += is_clipped as usize;
                    let dterm = if is_clipped { 0.0 } else { ratio * adv };

                    let (kl, upstream) = match config.kl {
                        KlEstimator::K3 => {
                            let lr = ref_lp[tok.index()];
                            // ∂k3/∂lp = 1 − exp(lr − lp)
                            let dkl = 1.0 - (lr - lp).exp();
                            let coef = -w * (dterm - config.beta * dkl);
                            (k3(lp, lr), Upstream::Token { token: tok, coef })
                        }
                        KlEstimator::Exact => {
                            let (kl, dkl) = exact_kl(&fwd, &ref_lp);
                            let mut g: Vec<f64> = dkl.iter().map(|d| w * config.beta * d).collect();
                            for (gv, p) in g.iter_mut().zip(&fwd.logprobs) {
                                *gv += w * dterm * p.exp();
                            }
                            g[tok.index()] -= w * dterm;
                            (kl, Upstream::Logits(g))
                        }
                    };
                    kl_sum += kl;
                    diag.decision_tokens += 1;
                    loss.push(-w * (term - config.beta * kl), LogProbTerm { forward: fwd, upstream });
                }
                ctx.push(tok);
            }
        }
    }
    diag.objective = -loss.value();
    if diag.decision_tokens > 0 {
        diag.mean_kl = kl_sum / diag.decision_tokens as f64;
        diag.clip_fraction = clipped as f64 / diag.decision_tokens as f64;
    }
    Ok((loss, diag))
}

/// Gradient of a loss built by [`surrogate_loss`].
pub fn compute_gradients(params: &PolicyParams, loss: &LossNode) -> GradientBuffer {
    backward(params, loss)
}

/// Rollout-level objective with one advantage `Â_i` per rollout, evaluated
/// directly (value only, K3 estimator).
pub fn grpo_objective(
    params: &PolicyParams,
    old: &PolicyParams,
    reference: &PolicyParams,
    groups: &[Group],
    advantages: &[Vec<f64>],
    config: &ObjectiveConfig,
) -> Result<f64> {
    if groups.len() != advantages.len() {
        return Err(IgpoError::Shape("one advantage list per group".into()));
    }
    let mut total = 0.0;
    for (group, adv) in groups.iter().zip(advantages) {
        if adv.len() != group.size() {
            return Err(IgpoError::Shape("one advantage per rollout".into()));
        }
        let mut group_sum = 0.0;
        for (ro, &a) in group.rollouts.iter().zip(adv) {
            let positions: Vec<usize> = (0..ro.tokens.len()).filter(|&j| ro.decision_mask[j]).collect();
            let mut acc = 0.0;
            for &j in &positions {
                let ratio = token_ratio(params, old, &group.question, ro, j);
                let surr = (ratio * a).min(ratio.clamp(1.0 - config.epsilon, 1.0 + config.epsilon) * a);
                acc += surr - config.beta * kl_penalty(params, reference, &group.question, ro, j);
            }
            if !positions.is_empty() {
                group_sum += acc / positions.len() as f64;
            }
        }
        total += group_sum / group.size() as f64;
    }
    Ok(total / groups.len().max(1) as f64)
}
