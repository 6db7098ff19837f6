//! Supervised warm start.
//!
//! A randomly initialized policy almost never emits a well-formed rollout,
//! so RL starts from weights fitted by teacher forcing to synthetic streams.
//! Each call pairs a random entity already in view with a random relation
//! from the question, and the tool's real response is spliced in; the
//! answer follows [`WarmupAnswer`]. Calls are chosen without regard to
//! the chain, which leaves the search itself to RL.

use rand::seq::IndexedRandom;
use rand::Rng;

use super::config::{WarmupAnswer, WarmupConfig};
use super::seeding::{stream_rng, STREAM_WARMUP};
use crate::environment::{sample_task, tool_search, KnowledgeBase, Task};
use crate::episodes::{Token, Vocabulary};
use crate::error::Result;
use crate::policy::{backward, LogProbTerm, LossNode, PolicyParams, Upstream};

/// One teacher stream for `task` with `n_calls` exploratory calls.
/// Returns the tokens and their decision mask.
pub fn demonstration<R: Rng + ?Sized>(
    kb: &KnowledgeBase,
    task: &Task,
    n_calls: usize,
    answer: WarmupAnswer,
    rng: &mut R,
) -> (Vec<Token>, Vec<bool>) {
    let vocab = kb.vocab();
    let mut tokens = Vec::new();
    let mut mask = Vec::new();
    let mut visible = vec![task.start];
    fn emit(toks: &[Token], decision: bool, tokens: &mut Vec<Token>, mask: &mut Vec<bool>) {
        tokens.extend_from_slice(toks);
        mask.extend(std::iter::repeat_n(decision, toks.len()));
    }
    for _ in 0..n_calls {
        let entity = *visible.choose(rng).unwrap();
        let relation = *task.chain.choose(rng).unwrap();
        emit(
            &[
                Vocabulary::THINK_OPEN,
                Vocabulary::THINK,
                Vocabulary::THINK_CLOSE,
                Vocabulary::CALL_OPEN,
                entity,
                relation,
                Vocabulary::CALL_CLOSE,
            ],
            true,
            &mut tokens,
            &mut mask,
        );
        let response = tool_search(kb, entity, relation);
        let mut injected = vec![Vocabulary::RESP_OPEN];
        injected.extend(&response);
        injected.push(Vocabulary::RESP_CLOSE);
        emit(&injected, false, &mut tokens, &mut mask);
        for tok in response {
            if vocab.is_entity(tok) {
                visible.retain(|&e| e != tok);
                visible.push(tok);
            }
        }
    }
    let answer = match answer {
        WarmupAnswer::Recent => *visible.last().unwrap(),
        WarmupAnswer::Truth => task.gt_answer[0],
        WarmupAnswer::Informed => {
            if task.path[1..].iter().any(|e| visible.contains(e)) {
                task.gt_answer[0]
            } else {
                *visible.last().unwrap()
            }
        }
    };
    emit(
        &[
            Vocabulary::THINK_OPEN,
            Vocabulary::THINK,
            Vocabulary::THINK_CLOSE,
            Vocabulary::ANS_OPEN,
            answer,
            Vocabulary::ANS_CLOSE,
        ],
        true,
        &mut tokens,
        &mut mask,
    );
    (tokens, mask)
}

/// Mean negative log-likelihood of the decision tokens of a batch of
/// `(question, tokens, mask)` streams.
pub fn nll_loss(params: &PolicyParams, batch: &[(Vec<Token>, Vec<Token>, Vec<bool>)]) -> LossNode {
    let n: usize = batch.iter().map(|(_, _, m)| m.iter().filter(|&&d| d).count()).sum();
    let mut loss = LossNode::default();
    if n == 0 {
        return loss;
    }
    let w = 1.0 / n as f64;
    for (question, tokens, mask) in batch {
        let mut ctx = question.clone();
        for (&tok, &decision) in tokens.iter().zip(mask) {
            if decision {
                let forward = params.forward(&ctx);
                let lp = forward.logprobs[tok.index()];
                loss.push(
                    -w * lp,
                    LogProbTerm {
                        forward,
                        upstream: Upstream::Token { token: tok, coef: -w },
                    },
                );
            }
            ctx.push(tok);
        }
    }
    loss
}

/// Runs the warm start in place; returns the per-step losses.
pub fn warm_start(
    params: &mut PolicyParams,
    kb: &KnowledgeBase,
    hops: usize,
    config: &WarmupConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut losses = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let mut rng = stream_rng(seed, STREAM_WARMUP, step as u64, 0);
        let mut batch = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size {
            let task = sample_task(kb, hops, &mut rng)?;
            let n_calls = rng.random_range(0..=config.max_calls);
            let (tokens, mask) = demonstration(kb, &task, n_calls, config.answer, &mut rng);
            batch.push((task.question, tokens, mask));
        }
        let loss = nll_loss(params, &batch);
        let grad = backward(params, &loss);
        params.apply(&grad, -config.learning_rate);
        losses.push(loss.value());
    }
    Ok(losses)
}
