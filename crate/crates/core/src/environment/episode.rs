use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kb::{tool_search, KnowledgeBase};
use super::task::Task;
use crate::episodes::{GrammarCursor, Rollout, Step, Token, Vocabulary};
use crate::policy::{sample_token, TokenPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub max_turns: usize,
    pub temperature: f64,
    /// Longest answer span; one more content token ends the episode.
    pub max_answer_tokens: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_turns: 10,
            temperature: 1.0,
            max_answer_tokens: 4,
        }
    }
}

/// Samples one rollout for `task`.
///
/// Decision tokens come from `policy`; after every closed call the tool
/// response is injected. The episode ends at `ANS_CLOSE`, at the first
/// grammar violation (the offending token is kept), when the answer grows
/// past `max_answer_tokens`, or after `max_turns` interaction turns.
pub fn run_episode<P, R>(policy: &P, kb: &KnowledgeBase, task: &Task, config: &EpisodeConfig, rng: &mut R) -> Rollout
where
    P: TokenPolicy + ?Sized,
    R: Rng + ?Sized,
{
    let (rollout, _) = run_episode_traced(policy, kb, task, config, rng);
    rollout
}

/// As [`run_episode`], also returning the positions the tool injected.
pub(crate) fn run_episode_traced<P, R>(
    policy: &P,
    kb: &KnowledgeBase,
    task: &Task,
    config: &EpisodeConfig,
    rng: &mut R,
) -> (Rollout, Vec<usize>)
where
    P: TokenPolicy + ?Sized,
    R: Rng + ?Sized,
{
    assert!(config.max_turns >= 1, "max_turns must be at least 1");
    let vocab = *kb.vocab();
    let mut cursor = GrammarCursor::new(vocab);
    let mut context: Vec<Token> = task.question.clone();
    let q = context.len();
    let mut injected = Vec::new();
    let mut turns_done = 0;
    let mut answer_len = 0;

    loop {
        let tok = sample_token(policy, &context, config.temperature, rng);
        let in_answer = cursor.segment_for(tok) == crate::episodes::SegmentKind::Answer
            && tok != Vocabulary::ANS_OPEN
            && tok != Vocabulary::ANS_CLOSE;
        context.push(tok);
        match cursor.feed(tok) {
            Err(_) | Ok(Step::AnswerComplete) => break,
            Ok(Step::CallComplete { entity, relation }) => {
                let mut response = vec![Vocabulary::RESP_OPEN];
                response.extend(tool_search(kb, entity, relation));
                response.push(Vocabulary::RESP_CLOSE);
                for t in response {
                    injected.push(context.len() - q);
                    context.push(t);
                    let step = cursor.feed(t).expect("tool responses are grammatical");
                    if step == Step::TurnComplete {
                        turns_done += 1;
                    }
                }
                if turns_done >= config.max_turns {
                    break;
                }
            }
            Ok(_) => {
                if in_answer {
                    answer_len += 1;
                    if answer_len > config.max_answer_tokens {
                        break;
                    }
                }
            }
        }
    }
    let rollout = Rollout::parse(context.split_off(q), &vocab);
    debug_assert!(rollout
        .decision_mask
        .iter()
        .enumerate()
        .all(|(j, &m)| m != injected.contains(&j)));
    (rollout, injected)
}
