#![allow(dead_code)]

use igpo_core::advantage::{igpo_advantages, AdvantageField};
use igpo_core::episodes::{render_turns, Group, Rollout, Token, TurnContent, Vocabulary};
use igpo_core::policy::{PolicyParams, PolicyShape};
use igpo_core::rewards::{assemble_reward_vector, RewardMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 14-token vocabulary: the specials, two entities and one relation.
pub fn tiny_vocab() -> Vocabulary {
    Vocabulary::new(14, 2, 1).unwrap()
}

/// 152 parameters.
pub fn tiny_shape() -> PolicyShape {
    PolicyShape {
        vocab: 14,
        window: 3,
        embed: 3,
        hidden: 4,
    }
}

pub fn perturbed(params: &PolicyParams, seed: u64, scale: f64) -> PolicyParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = params.clone();
    for x in p.as_mut_slice() {
        *x += scale * (rng.random::<f64>() * 2.0 - 1.0);
    }
    p
}

/// A random well-formed rollout over `vocab` with up to `max_calls` calls;
/// occasionally truncated to exercise invalid streams.
pub fn random_rollout<R: Rng>(vocab: &Vocabulary, max_calls: usize, rng: &mut R) -> Rollout {
    let ents: Vec<Token> = vocab.entities().collect();
    let rels: Vec<Token> = vocab.relations().collect();
    let mut turns = Vec::new();
    for _ in 0..rng.random_range(0..=max_calls) {
        let response = if rng.random_bool(0.3) {
            vec![Vocabulary::NOT_FOUND]
        } else {
            vec![ents[rng.random_range(0..ents.len())]]
        };
        turns.push(TurnContent::Interaction {
            entity: ents[rng.random_range(0..ents.len())],
            relation: rels[rng.random_range(0..rels.len())],
            response,
        });
    }
    turns.push(TurnContent::Answer(vec![ents[rng.random_range(0..ents.len())]]));
    let mut tokens = render_turns(&turns);
    if rng.random_bool(0.15) {
        let cut = rng.random_range(1..tokens.len());
        tokens.truncate(cut);
    }
    Rollout::parse(tokens, vocab)
}

pub fn random_group<R: Rng>(vocab: &Vocabulary, size: usize, max_calls: usize, rng: &mut R) -> Group {
    let ents: Vec<Token> = vocab.entities().collect();
    let rel = vocab.relation(0);
    Group {
        question: vec![rel, ents[0]],
        ground_truth: vec![ents[1]],
        rollouts: (0..size).map(|_| random_rollout(vocab, max_calls, rng)).collect(),
    }
}

/// IGPO advantages from random per-turn rewards.
pub fn random_fields<R: Rng>(group: &Group, gamma: f64, rng: &mut R) -> Vec<AdvantageField> {
    let vectors: Vec<_> = group
        .rollouts
        .iter()
        .map(|ro| {
            let gains: Vec<f64> = (1..ro.num_turns()).map(|_| rng.random::<f64>() - 0.5).collect();
            assemble_reward_vector(RewardMode::F1Ig, &gains, rng.random::<f64>())
        })
        .collect();
    igpo_advantages(group, &vectors, gamma).unwrap()
}

pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
