//! Outcome reward, information-gain turn rewards and per-rollout reward
//! vectors.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::episodes::{Group, Rollout, Token};
use crate::error::IgpoError;
use crate::policy::{gt_answer_prob, TokenPolicy};

/// Which rewards populate a rollout's reward vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardMode {
    /// Outcome reward only; intermediate turns get 0.
    #[serde(rename = "F1")]
    F1,
    /// Information gain only; the answer turn gets 0.
    #[serde(rename = "IG")]
    Ig,
    #[serde(rename = "F1+IG")]
    F1Ig,
}

impl RewardMode {
    pub const ALL: [RewardMode; 3] = [RewardMode::F1, RewardMode::Ig, RewardMode::F1Ig];

    pub fn as_str(self) -> &'static str {
        match self {
            RewardMode::F1 => "F1",
            RewardMode::Ig => "IG",
            RewardMode::F1Ig => "F1+IG",
        }
    }
}

impl fmt::Display for RewardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardMode {
    type Err = IgpoError;

    fn from_str(s: &str) -> Result<Self, IgpoError> {
        RewardMode::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| IgpoError::config("reward_mode", format!("unknown mode `{s}` (F1, IG, F1+IG)")))
    }
}

/// Per-turn rewards `r_1 … r_T` of one rollout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardVector {
    pub values: Vec<f64>,
    pub mode: RewardMode,
}

impl RewardVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Answer-turn entry `r_T`.
    pub fn last(&self) -> f64 {
        *self.values.last().expect("reward vectors are non-empty")
    }
}

/// Word-level F1 with multiset intersection, or `lambda_fmt` when the
/// rollout is format-invalid. Two empty sequences score 0.
pub fn f1_outcome(predicted: &[Token], gt: &[Token], format_valid: bool, lambda_fmt: f64) -> f64 {
    if !format_valid {
        return lambda_fmt;
    }
    if predicted.is_empty() || gt.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<Token, usize> = HashMap::new();
    for &t in gt {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0;
    for t in predicted {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    2.0 * common as f64 / (predicted.len() + gt.len()) as f64
}

/// Exact-match success: format-valid and the answer equals the ground truth.
pub fn is_success(rollout: &Rollout, gt: &[Token]) -> bool {
    rollout.format_valid && rollout.predicted_answer == gt
}

/// Question followed by the rollout through the end of turn `t`
/// (tool response included); `t = 0` is the question alone.
pub fn prefix_through_turn(question: &[Token], rollout: &Rollout, t: usize) -> Vec<Token> {
    let mut prefix = question.to_vec();
    prefix.extend_from_slice(&rollout.tokens[..rollout.turn_end(t)]);
    prefix
}

/// Ground-truth probabilities `π(a | q, o_≤t)` for `t = 0 … T−1`.
pub fn gt_probs_by_turn<P: TokenPolicy + ?Sized>(
    policy: &P,
    question: &[Token],
    rollout: &Rollout,
    wrapped_gt: &[Token],
) -> Vec<f64> {
    let t_max = rollout.num_turns().saturating_sub(1);
    (0..=t_max)
        .map(|t| gt_answer_prob(policy, &prefix_through_turn(question, rollout, t), wrapped_gt))
        .collect()
}

/// Information gain of turn `t` (`1 ≤ t < T`):
/// `π(a | q, o_≤t) − π(a | q, o_≤t−1)`.
pub fn info_gain_turn<P: TokenPolicy + ?Sized>(
    policy: &P,
    question: &[Token],
    rollout: &Rollout,
    t: usize,
    wrapped_gt: &[Token],
) -> f64 {
    assert!(t >= 1 && t < rollout.num_turns(), "turn {t} is not an interaction turn");
    let after = gt_answer_prob(policy, &prefix_through_turn(question, rollout, t), wrapped_gt);
    let before = gt_answer_prob(policy, &prefix_through_turn(question, rollout, t - 1), wrapped_gt);
    after - before
}

/// Consecutive differences of [`gt_probs_by_turn`]: the `T − 1` gains.
pub fn info_gains_from_probs(probs: &[f64]) -> Vec<f64> {
    probs.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Combines gains for turns `1 … T−1` with the outcome reward per `mode`.
pub fn assemble_reward_vector(mode: RewardMode, info_gains: &[f64], outcome: f64) -> RewardVector {
    let mut values = Vec::with_capacity(info_gains.len() + 1);
    match mode {
        RewardMode::F1 => values.resize(info_gains.len(), 0.0),
        RewardMode::Ig | RewardMode::F1Ig => values.extend_from_slice(info_gains),
    }
    values.push(match mode {
        RewardMode::Ig => 0.0,
        RewardMode::F1 | RewardMode::F1Ig => outcome,
    });
    RewardVector { values, mode }
}

/// Reward vector for rollout `i` of `group`.
pub fn build_reward_vector<P: TokenPolicy + ?Sized>(
    policy: &P,
    group: &Group,
    i: usize,
    mode: RewardMode,
    lambda_fmt: f64,
) -> RewardVector {
    let rollout = &group.rollouts[i];
    let outcome = f1_outcome(
        &rollout.predicted_answer,
        &group.ground_truth,
        rollout.format_valid,
        lambda_fmt,
    );
    let gains = match mode {
        RewardMode::F1 => vec![0.0; rollout.num_turns() - 1],
        _ => info_gains_from_probs(&gt_probs_by_turn(
            policy,
            &group.question,
            rollout,
            &group.wrapped_ground_truth(),
        )),
    };
    assemble_reward_vector(mode, &gains, outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episodes::{render_turns, wrap_ground_truth, TurnContent, Vocabulary as V, Vocabulary};
    use crate::policy::scripted::{peaked, FnPolicy};
    use crate::policy::{PolicyParams, PolicyShape};

    fn vocab() -> Vocabulary {
        Vocabulary::compact(8, 2).unwrap()
    }

    #[test]
    fn f1_identical_is_one() {
        let a = [Token(11), Token(12)];
        assert_eq!(f1_outcome(&a, &a, true, -1.0), 1.0);
    }

    #[test]
    fn f1_partial_overlap_bag_intersection() {
        let (the, eiffel, tower) = (Token(11), Token(12), Token(13));
        let f1 = f1_outcome(&[the, eiffel, tower], &[eiffel, tower], true, -1.0);
        assert!((f1 - 0.8).abs() < 1e-15);
        // repeated tokens count once per matching occurrence
        let f1 = f1_outcome(&[eiffel, eiffel], &[eiffel], true, -1.0);
        assert!((f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn f1_invalid_format_is_penalty() {
        assert_eq!(f1_outcome(&[Token(11)], &[Token(11)], false, -1.0), -1.0);
        assert_eq!(f1_outcome(&[], &[], true, -1.0), 0.0);
    }

    fn three_turn_rollout() -> (Vec<Token>, Rollout, Vec<Token>) {
        let v = vocab();
        let q = vec![v.relation(0), v.relation(1), v.entity(0)];
        let toks = render_turns(&[
            TurnContent::Interaction {
                entity: v.entity(0),
                relation: v.relation(0),
                response: vec![v.entity(3)],
            },
            TurnContent::Interaction {
                entity: v.entity(3),
                relation: v.relation(1),
                response: vec![v.entity(5)],
            },
            TurnContent::Answer(vec![v.entity(5)]),
        ]);
        (q, Rollout::parse(toks, &v), wrap_ground_truth(&[v.entity(5)]))
    }

    fn shape() -> PolicyShape {
        PolicyShape {
            vocab: vocab().size(),
            window: 6,
            embed: 3,
            hidden: 5,
        }
    }

    #[test]
    fn gains_vanish_when_window_hides_the_turn() {
        // the window only sees the wrapper, so every prefix scores the same
        let p = PolicyParams::init(PolicyShape { window: 4, ..shape() }, 2, 1.0);
        let (q, ro, gt) = three_turn_rollout();
        for t in 1..ro.num_turns() {
            assert_eq!(info_gain_turn(&p, &q, &ro, t, &gt), 0.0);
        }
    }

    #[test]
    fn gains_telescope() {
        let (q, ro, gt) = three_turn_rollout();
        for seed in 0..10 {
            let p = PolicyParams::init(shape(), seed, 2.0);
            let sum: f64 = (1..ro.num_turns()).map(|t| info_gain_turn(&p, &q, &ro, t, &gt)).sum();
            let end_to_end = gt_answer_prob(&p, &prefix_through_turn(&q, &ro, ro.num_turns() - 1), &gt)
                - gt_answer_prob(&p, &q, &gt);
            assert!((sum - end_to_end).abs() < 1e-10);
            for t in 1..ro.num_turns() {
                let g = info_gain_turn(&p, &q, &ro, t, &gt);
                assert!((-1.0..=1.0).contains(&g));
            }
        }
    }

    #[test]
    fn gain_matches_stepwise_teacher_forcing_oracle() {
        use crate::episodes::{Segment, SegmentKind, Turn, TurnKind};
        // vocab 4, window 5, embed 1, hidden 1, every weight set by hand
        let s = PolicyShape {
            vocab: 4,
            window: 5,
            embed: 1,
            hidden: 1,
        };
        let emb = [0.5, -1.0, 2.0, 0.25];
        let w1 = [1.5, -0.8, 0.3, 0.9, -0.4];
        let b1 = 0.1;
        let w2 = [0.3, -0.7, 1.1, 0.2];
        let b2 = [0.0, 0.4, -0.2, 0.1];
        let mut data = emb.to_vec();
        data.extend(w1);
        data.push(b1);
        data.extend(w2);
        data.extend(b2);
        let p = PolicyParams::from_raw(s, 0, data).unwrap();

        let oracle_lp = |window: [usize; 5], tok: usize| {
            let z: f64 = (0..5).map(|i| emb[window[i]] * w1[i]).sum::<f64>() + b1;
            let a = z.tanh();
            let logits: Vec<f64> = (0..4).map(|v| a * w2[v] + b2[v]).collect();
            let norm: f64 = logits.iter().map(|l| l.exp()).sum();
            logits[tok] - norm.ln()
        };
        // wrapper w = [2,2,2,2], answer a = [1, 3], closing token 0
        let wrapped = [2, 2, 2, 2, 1, 3, 0].map(Token);
        let oracle_prob = |last_prefix: usize| {
            let lp1 = oracle_lp([last_prefix, 2, 2, 2, 2], 1);
            let lp2 = oracle_lp([2, 2, 2, 2, 1], 3);
            ((lp1 + lp2) / 2.0).exp()
        };

        // question [1]; turn 1 is the single token 3, turn 2 the token 2
        let seg = |start, end| {
            vec![Segment {
                kind: SegmentKind::Think,
                start,
                end,
            }]
        };
        let ro = Rollout {
            tokens: vec![Token(3), Token(2)],
            turns: vec![
                Turn {
                    kind: TurnKind::Interaction,
                    index: 1,
                    segments: seg(0, 1),
                },
                Turn {
                    kind: TurnKind::Answer,
                    index: 2,
                    segments: seg(1, 2),
                },
            ],
            decision_mask: vec![true, true],
            predicted_answer: vec![],
            format_valid: false,
        };
        let got = info_gain_turn(&p, &[Token(1)], &ro, 1, &wrapped);
        let want = oracle_prob(3) - oracle_prob(1);
        assert!(want.abs() > 1e-3);
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
    }

    #[test]
    fn reward_vector_modes() {
        let (q, ro, _) = three_turn_rollout();
        let v = vocab();
        let group = Group {
            question: q,
            ground_truth: vec![v.entity(5)],
            rollouts: vec![ro],
        };
        let p = PolicyParams::init(shape(), 4, 1.5);
        let probs = gt_probs_by_turn(&p, &group.question, &group.rollouts[0], &group.wrapped_ground_truth());
        let ig = info_gains_from_probs(&probs);
        assert_eq!(ig.len(), 2);

        let full = build_reward_vector(&p, &group, 0, RewardMode::F1Ig, -1.0);
        assert_eq!(full.values, vec![ig[0], ig[1], 1.0]);
        let ig_only = build_reward_vector(&p, &group, 0, RewardMode::Ig, -1.0);
        assert_eq!(ig_only.values, vec![ig[0], ig[1], 0.0]);
        let f1_only = build_reward_vector(&p, &group, 0, RewardMode::F1, -1.0);
        assert_eq!(f1_only.values, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn immediate_answer_gets_outcome_only() {
        let v = vocab();
        let ro = Rollout::parse(render_turns(&[TurnContent::Answer(vec![v.entity(1)])]), &v);
        let group = Group {
            question: vec![v.relation(0), v.entity(0)],
            ground_truth: vec![v.entity(2)],
            rollouts: vec![ro],
        };
        let p = PolicyParams::init(shape(), 4, 1.0);
        for mode in RewardMode::ALL {
            let rv = build_reward_vector(&p, &group, 0, mode, -1.0);
            assert_eq!(rv.len(), 1);
        }
        assert_eq!(
            build_reward_vector(&p, &group, 0, RewardMode::F1Ig, -1.0).values,
            vec![0.0]
        );
    }

    #[test]
    fn ig_mode_ignores_correctness() {
        let (q, ro, _) = three_turn_rollout();
        let v = vocab();
        let p = PolicyParams::init(shape(), 4, 1.0);
        for gt in [v.entity(5), v.entity(6)] {
            let group = Group {
                question: q.clone(),
                ground_truth: vec![gt],
                rollouts: vec![ro.clone()],
            };
            assert_eq!(build_reward_vector(&p, &group, 0, RewardMode::Ig, -1.0).last(), 0.0);
        }
    }

    /// Puts 0.9 on the most recent entity visible in a `window`-token view
    /// whenever the answer slot is open; uniform elsewhere.
    fn copy_policy(vocab: Vocabulary, window: usize) -> impl TokenPolicy {
        let n = vocab.size();
        FnPolicy::new(n, move |ctx: &[Token]| {
            let view = &ctx[ctx.len().saturating_sub(window)..];
            match (view.last(), view.iter().rev().find(|t| vocab.is_entity(**t))) {
                (Some(&V::ANS_OPEN), Some(&e)) => peaked(n, e, 0.9),
                _ => vec![-(n as f64).ln(); n],
            }
        })
    }

    #[test]
    fn ground_truth_awareness_on_copying_policy() {
        let v = vocab();
        let policy = copy_policy(v, 8);
        let q = vec![v.relation(0), v.relation(1), v.entity(0)];
        let gt = v.entity(5);
        let build = |resp: Token| {
            render_turns(&[
                TurnContent::Interaction {
                    entity: v.entity(0),
                    relation: v.relation(0),
                    response: vec![v.entity(3)],
                },
                TurnContent::Interaction {
                    entity: v.entity(3),
                    relation: v.relation(1),
                    response: vec![resp],
                },
                TurnContent::Answer(vec![gt]),
            ])
        };
        let hit = Rollout::parse(build(gt), &v);
        let miss = Rollout::parse(build(V::NOT_FOUND), &v);
        let wrapped = wrap_ground_truth(&[gt]);
        let p_hit = gt_answer_prob(&policy, &prefix_through_turn(&q, &hit, 2), &wrapped);
        let p_miss = gt_answer_prob(&policy, &prefix_through_turn(&q, &miss, 2), &wrapped);
        assert!(p_hit >= p_miss);
        assert!(info_gain_turn(&policy, &q, &hit, 2, &wrapped) > 0.0);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("f1+ig".parse::<RewardMode>().unwrap(), RewardMode::F1Ig);
        assert!("bogus".parse::<RewardMode>().is_err());
        assert_eq!(serde_json::to_string(&RewardMode::F1Ig).unwrap(), "\"F1+IG\"");
    }
}
