use super::*;
use crate::advantage::{grpo_advantages, AdvantageField};
use crate::environment::sample_task;
use crate::episodes::{render_turns, validate_format, Group, Rollout, Token, TurnContent, Vocabulary};
use crate::objective::{compute_gradients, surrogate_loss, Algorithm};
use crate::policy::{gt_answer_prob, LogProbTerm, LossNode, PolicyParams, Upstream};
use crate::rewards::RewardMode;

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        train: TrainConfig {
            batch_size: 2,
            group_size: 3,
            max_turns: 4,
            total_steps: 3,
            learning_rate: 0.1,
            ..TrainConfig::default()
        },
        environment: EnvConfig {
            n_entities: 6,
            n_relations: 2,
            chain_density: 0.9,
            ..EnvConfig::default()
        },
        policy: PolicyConfig {
            vocab_size: 20,
            window: 8,
            embed_dim: 4,
            hidden_dim: 8,
            init_scale: 1.0,
        },
        warmup: WarmupConfig {
            steps: 5,
            batch_size: 4,
            ..WarmupConfig::default()
        },
    }
}

#[test]
fn zero_advantage_fraction_cases() {
    assert_eq!(zero_advantage_fraction(&[]), 0.0);
    let zero = AdvantageField {
        turn: vec![0.0],
        cumulative: vec![0.0],
        token: vec![0.0; 3],
    };
    let live = AdvantageField {
        token: vec![0.0, 1.0, 0.0],
        ..zero.clone()
    };
    let fields = vec![vec![zero.clone(), zero.clone()], vec![zero, live]];
    assert_eq!(zero_advantage_fraction(&fields), 0.5);
}

#[test]
fn entropy_reduction_needs_two_turns() {
    assert_eq!(gt_entropy_reduction(&[0.3]), None);
    let r = gt_entropy_reduction(&[0.1, 0.5, 0.4]).unwrap();
    assert!((r - (0.4f64.ln() - 0.1f64.ln())).abs() < 1e-15);
}

#[test]
fn demonstrations_are_grammatical_and_uninformed() {
    let cfg = small_config();
    let env = Environment::new(&cfg.environment, cfg.policy.vocab_size).unwrap();
    let mut rng = stream_rng(5, 0, 0, 0);
    for answer in [WarmupAnswer::Recent, WarmupAnswer::Truth, WarmupAnswer::Informed] {
        for n_calls in 0..4 {
            let task = sample_task(&env.kb, 2, &mut rng).unwrap();
            let (tokens, mask) = warmstart::demonstration(&env.kb, &task, n_calls, answer, &mut rng);
            let ro = Rollout::parse(tokens.clone(), env.kb.vocab());
            assert!(ro.format_valid);
            assert_eq!(ro.decision_mask, mask);
            assert_eq!(ro.num_turns(), n_calls + 1);
            let mut visible = vec![task.start];
            for (i, turn) in ro.turns.iter().enumerate().take(n_calls) {
                let call = turn.segment(crate::episodes::SegmentKind::ToolCall).unwrap();
                let (e, r) = (tokens[call.start + 1], tokens[call.start + 2]);
                assert!(visible.contains(&e), "turn {i} calls an unseen entity");
                assert!(task.chain.contains(&r));
                let resp = turn.segment(crate::episodes::SegmentKind::ToolResponse).unwrap();
                let got = tokens[resp.start + 1];
                if got != Vocabulary::NOT_FOUND {
                    visible.retain(|&x| x != got);
                    visible.push(got);
                }
            }
            let expected = match answer {
                WarmupAnswer::Recent => *visible.last().unwrap(),
                WarmupAnswer::Truth => task.gt_answer[0],
                WarmupAnswer::Informed if task.path[1..].iter().any(|e| visible.contains(e)) => task.gt_answer[0],
                WarmupAnswer::Informed => *visible.last().unwrap(),
            };
            assert_eq!(ro.predicted_answer, vec![expected]);
        }
    }
}

#[test]
fn warm_start_lowers_the_loss() {
    let mut cfg = small_config();
    cfg.warmup.steps = 60;
    cfg.warmup.learning_rate = 0.5;
    let prepared = prepare(&cfg).unwrap();
    let l = &prepared.warmup_losses;
    assert_eq!(l.len(), 60);
    assert!(l[59] < 0.5 * l[0], "{} -> {}", l[0], l[59]);
}

#[test]
fn train_step_is_deterministic() {
    let cfg = small_config();
    let run = || {
        let prepared = prepare(&cfg).unwrap();
        let result = run_prepared(&prepared, &cfg.train, |_| {}).unwrap();
        (result.metrics, result.params)
    };
    let (m1, p1) = run();
    let (m2, p2) = run();
    assert_eq!(m1, m2);
    let bits = |p: &PolicyParams| p.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&p1), bits(&p2));
}

#[test]
fn step_metrics_are_consistent() {
    let cfg = small_config();
    let prepared = prepare(&cfg).unwrap();
    let result = run_prepared(&prepared, &cfg.train, |_| {}).unwrap();
    let mut cumulative = 0;
    for (i, m) in result.metrics.iter().enumerate() {
        assert_eq!(m.step, i);
        assert_eq!(m.rollouts, 6);
        cumulative += m.decision_tokens;
        assert_eq!(m.cumulative_decision_tokens, cumulative);
        assert!((0.0..=1.0).contains(&m.success_rate));
        assert!((0.0..=1.0).contains(&m.zero_advantage_fraction));
        assert!(m.mean_kl >= 0.0);
    }
    assert_eq!(result.summary.total_decision_tokens, cumulative);
}

#[test]
fn arms_see_the_same_tasks() {
    let cfg = small_config();
    let env = Environment::new(&cfg.environment, cfg.policy.vocab_size).unwrap();
    assert_eq!(
        env.tasks_for_step(3, 7, 4).unwrap(),
        env.tasks_for_step(3, 7, 4).unwrap()
    );
    assert_ne!(
        env.tasks_for_step(3, 7, 4).unwrap(),
        env.tasks_for_step(3, 8, 4).unwrap()
    );
}

#[test]
fn reference_reanchors_on_interval() {
    let mut cfg = small_config();
    let prepared = prepare(&cfg).unwrap();
    let mut state = TrainState::new(prepared.initial.clone());
    train_step(&mut state, &prepared.env, &cfg.train).unwrap();
    assert!(state.reference.as_slice() == prepared.initial.as_slice());

    cfg.train.ref_reanchor_interval = 1;
    let mut state = TrainState::new(prepared.initial.clone());
    train_step(&mut state, &prepared.env, &cfg.train).unwrap();
    assert!(state.reference.as_slice() == state.params.as_slice());
}

fn hand_group(vocab: &Vocabulary) -> Group {
    let (e0, e1, r) = (vocab.entity(0), vocab.entity(1), vocab.relation(0));
    let solved = render_turns(&[
        TurnContent::Interaction {
            entity: e0,
            relation: r,
            response: vec![e1],
        },
        TurnContent::Answer(vec![e1]),
    ]);
    let guessed = render_turns(&[TurnContent::Answer(vec![e0])]);
    Group {
        question: vec![r, e0],
        ground_truth: vec![e1],
        rollouts: vec![Rollout::parse(solved, vocab), Rollout::parse(guessed, vocab)],
    }
}

fn tiny_params(vocab: usize, seed: u64) -> PolicyParams {
    PolicyParams::init(
        crate::policy::PolicyShape {
            vocab,
            window: 4,
            embed: 3,
            hidden: 5,
        },
        seed,
        1.0,
    )
}

/// One group of two rollouts (T = 2 solved, T = 1 wrong), traced by hand
/// from the forward pass to the gradient and compared with the pipeline.
#[test]
fn single_step_matches_hand_trace() {
    let vocab = Vocabulary::compact(2, 1).unwrap();
    let group = hand_group(&vocab);
    let params = tiny_params(vocab.size(), 4);
    let config = TrainConfig {
        group_size: 2,
        beta: 0.0,
        gamma: 0.5,
        ..TrainConfig::default()
    };

    let eval = GroupEvaluation::new(&params, &group, config.lambda_fmt);
    let fields = compute_fields(&group, &eval, &config).unwrap();
    let (loss, diag) = surrogate_loss(
        &params,
        &params,
        &params,
        std::slice::from_ref(&group),
        &[fields],
        &config.objective(),
    )
    .unwrap();
    let got = compute_gradients(&params, &loss);

    // rewards: r_1 = p_1 − p_0 for the call, then F1 = 1 and 0
    let wrapped = group.wrapped_ground_truth();
    let solved = &group.rollouts[0];
    let q = group.question.clone();
    let mut after_call = q.clone();
    after_call.extend_from_slice(&solved.tokens[..solved.turns[0].end()]);
    let p0 = gt_answer_prob(&params, &q, &wrapped);
    let p1 = gt_answer_prob(&params, &after_call, &wrapped);
    let rewards = [p1 - p0, 1.0, 0.0];
    let mean = rewards.iter().sum::<f64>() / 3.0;
    let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
    let a: Vec<f64> = rewards.iter().map(|r| (r - mean) / std).collect();
    let turn_adv = [[a[0] + 0.5 * a[1], a[1]], [a[2], a[2]]];

    let mut hand = LossNode::default();
    let mut value = 0.0;
    for (i, ro) in group.rollouts.iter().enumerate() {
        let n = ro.decision_token_count() as f64;
        let turn_of = ro.token_turns();
        let mut ctx = q.clone();
        for (j, &tok) in ro.tokens.iter().enumerate() {
            if ro.decision_mask[j] {
                let adv = turn_adv[i][turn_of[j] - 1];
                let w = 1.0 / (2.0 * n);
                value += w * adv;
                hand.push(
                    0.0,
                    LogProbTerm {
                        forward: params.forward(&ctx),
                        upstream: Upstream::Token {
                            token: tok,
                            coef: -w * adv,
                        },
                    },
                );
            }
            ctx.push(tok);
        }
    }
    let want = compute_gradients(&params, &hand);
    assert!((diag.objective - value).abs() < 1e-12);
    for (g, w) in got.as_slice().iter().zip(want.as_slice()) {
        assert!((g - w).abs() < 1e-12, "{g} vs {w}");
    }
}

#[test]
fn grpo_arm_uses_outcome_rewards_only() {
    let vocab = Vocabulary::compact(2, 1).unwrap();
    let group = hand_group(&vocab);
    let params = tiny_params(vocab.size(), 9);
    let eval = GroupEvaluation::new(&params, &group, -1.0);
    for mode in RewardMode::ALL {
        let config = TrainConfig {
            algorithm: Algorithm::Grpo,
            reward_mode: mode,
            ..TrainConfig::default()
        };
        let fields = compute_fields(&group, &eval, &config).unwrap();
        assert_eq!(fields, grpo_advantages(&group, &eval.outcomes).unwrap());
    }
    assert_eq!(eval.outcomes, vec![1.0, 0.0]);
    assert_eq!(eval.successes, vec![true, false]);
}

#[test]
fn zero_signal_group_is_flagged() {
    let vocab = Vocabulary::compact(2, 1).unwrap();
    let mut group = hand_group(&vocab);
    group.rollouts[0] = group.rollouts[1].clone();
    let params = tiny_params(vocab.size(), 2);
    let eval = GroupEvaluation::new(&params, &group, -1.0);
    for algorithm in [Algorithm::Grpo, Algorithm::Igpo] {
        let config = TrainConfig {
            algorithm,
            ..TrainConfig::default()
        };
        let fields = compute_fields(&group, &eval, &config).unwrap();
        assert_eq!(zero_advantage_fraction(&[fields]), 1.0);
    }
}

#[test]
fn metrics_round_trip() {
    let cfg = small_config();
    let prepared = prepare(&cfg).unwrap();
    let result = run_prepared(&prepared, &cfg.train, |_| {}).unwrap();
    let mut buf = Vec::new();
    write_metrics(&mut buf, &MetricsHeader::new(&result.label), &result.metrics).unwrap();
    let (header, back) = read_metrics(buf.as_slice()).unwrap();
    assert_eq!(header.label, result.label);
    assert_eq!(back, result.metrics);

    let text = String::from_utf8(buf)
        .unwrap()
        .replace("\"version\":1", "\"version\":9");
    assert!(read_metrics(text.as_bytes()).is_err());
    assert!(read_metrics(&b""[..]).is_err());
}

#[test]
fn summary_windows() {
    let mk = |step: usize, s: f64| StepMetrics {
        step,
        rollouts: 10,
        mean_outcome_reward: s,
        success_rate: s,
        format_valid_rate: 1.0,
        mean_turns: 2.0,
        zero_advantage_fraction: 0.5,
        gt_entropy_reduction: Some(s),
        decision_tokens: 100,
        cumulative_decision_tokens: 100 * (step as u64 + 1),
        objective: 0.0,
        mean_kl: 0.0,
        clip_fraction: 0.0,
        grad_norm: 0.0,
    };
    let metrics: Vec<_> = (0..20).map(|i| mk(i, i as f64 / 20.0)).collect();
    assert_eq!(final_window(20), 2);
    assert_eq!(final_window(300), 30);
    assert_eq!(final_window(1), 1);
    let s = RunSummary::from_metrics(&metrics);
    assert!((s.final_success - 0.925).abs() < 1e-12);
    assert_eq!(s.total_decision_tokens, 2000);
    let successes: f64 = metrics.iter().map(|m| m.success_rate * 10.0).sum();
    assert!((s.success_per_token - successes / 2000.0).abs() < 1e-12);
    // smoothed success at step i ≥ 1 is (2i − 1)/40
    assert_eq!(RunSummary::tokens_to_reach(&metrics, 0.5), Some(1200));
    assert_eq!(RunSummary::tokens_to_reach(&metrics, s.final_success), Some(2000));
    assert_eq!(RunSummary::tokens_to_reach(&metrics, 2.0), None);
}

#[test]
fn config_validation_names_keys() {
    let mut cfg = ExperimentConfig::default();
    cfg.validate().unwrap();
    cfg.train.group_size = 1;
    assert!(cfg.validate().unwrap_err().to_string().contains("train.group_size"));
    let mut cfg = ExperimentConfig::default();
    cfg.train.epsilon = -1.0;
    assert!(cfg.validate().unwrap_err().to_string().contains("train.epsilon"));
    let mut cfg = ExperimentConfig::default();
    cfg.environment.hops = 12;
    assert!(cfg.validate().unwrap_err().to_string().contains("environment.hops"));
    let mut cfg = ExperimentConfig::default();
    cfg.policy.window = 0;
    assert!(cfg.validate().unwrap_err().to_string().contains("policy.window"));
}

#[test]
fn config_serde_defaults_and_unknown_fields() {
    let cfg: ExperimentConfig = serde_json::from_str(r#"{"train": {"algorithm": "GRPO"}}"#).unwrap();
    assert_eq!(cfg.train.algorithm, Algorithm::Grpo);
    assert_eq!(cfg.environment, EnvConfig::default());
    assert!(serde_json::from_str::<ExperimentConfig>(r#"{"train": {"lr": 1.0}}"#).is_err());
    let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn sampled_rollouts_parse_consistently() {
    let cfg = small_config();
    let prepared = prepare(&cfg).unwrap();
    let tasks = prepared.env.tasks_for_step(1, 0, 2).unwrap();
    let groups = sample_groups(&prepared.initial, &prepared.env, &tasks, &cfg.train, 0);
    for g in &groups {
        assert_eq!(g.size(), 3);
        for ro in &g.rollouts {
            let (valid, turns) = validate_format(&ro.tokens, prepared.env.kb.vocab());
            assert_eq!(valid, ro.format_valid);
            assert_eq!(turns, ro.turns);
        }
    }
}

fn copy_last_entity(vocab: Vocabulary) -> impl Fn(&[Token]) -> Vec<f64> + Sync {
    use crate::policy::scripted::peaked;
    move |ctx: &[Token]| {
        let last_entity = ctx.iter().rev().find(|t| vocab.is_entity(**t));
        match (ctx.last(), last_entity) {
            (Some(&Vocabulary::ANS_OPEN), Some(&e)) => peaked(vocab.size(), e, 0.9),
            _ => vec![-(vocab.size() as f64).ln(); vocab.size()],
        }
    }
}

#[test]
fn entropy_reduction_of_scripted_policies() {
    use crate::policy::scripted::FnPolicy;
    use crate::rewards::{gt_probs_by_turn, info_gains_from_probs};

    let vocab = Vocabulary::compact(2, 1).unwrap();
    let group = hand_group(&vocab);
    let solved = &group.rollouts[0];
    let wrapped = group.wrapped_ground_truth();
    let n = vocab.size();

    let uniform = FnPolicy::new(n, move |_: &[Token]| vec![-(n as f64).ln(); n]);
    let probs = gt_probs_by_turn(&uniform, &group.question, solved, &wrapped);
    assert_eq!(gt_entropy_reduction(&probs), Some(0.0));

    let copier = FnPolicy::new(n, copy_last_entity(vocab));
    let probs = gt_probs_by_turn(&copier, &group.question, solved, &wrapped);
    let reduction = gt_entropy_reduction(&probs).unwrap();
    assert!(reduction > 0.0, "{reduction}");

    let gains: f64 = info_gains_from_probs(&probs).iter().sum();
    assert!((gains - (probs[1] - probs[0])).abs() <= 1e-10);
    assert!((reduction - ((probs[0] + gains).ln() - probs[0].ln())).abs() <= 1e-10);
}
