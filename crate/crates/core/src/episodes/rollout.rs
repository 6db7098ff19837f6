use serde::{Deserialize, Serialize};

use super::turn::{validate_format, SegmentKind, Turn, TurnKind};
use super::vocab::{Token, Vocabulary};

/// One agent trajectory, excluding the question prefix.
///
/// `decision_mask[j]` is false exactly on tool-response tokens. A
/// format-invalid rollout keeps its partial turn partition and has an empty
/// `predicted_answer`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub tokens: Vec<Token>,
    pub turns: Vec<Turn>,
    pub decision_mask: Vec<bool>,
    pub predicted_answer: Vec<Token>,
    pub format_valid: bool,
}

impl Rollout {
    /// Annotates a raw token stream: turn partition, mask and answer.
    pub fn parse(tokens: Vec<Token>, vocab: &Vocabulary) -> Self {
        let (format_valid, turns) = validate_format(&tokens, vocab);
        let mut decision_mask = vec![true; tokens.len()];
        for seg in turns.iter().flat_map(|t| &t.segments) {
            if seg.kind == SegmentKind::ToolResponse {
                decision_mask[seg.range()].fill(false);
            }
        }
        let mut rollout = Self {
            tokens,
            turns,
            decision_mask,
            predicted_answer: Vec::new(),
            format_valid,
        };
        rollout.predicted_answer = extract_answer(&rollout);
        rollout
    }

    /// Number of turns `T`.
    pub fn num_turns(&self) -> usize {
        self.turns.len()
    }

    /// Token offset at which turn `t` ends; `turn_end(0) == 0`.
    pub fn turn_end(&self, t: usize) -> usize {
        if t == 0 {
            0
        } else {
            self.turns[t - 1].end()
        }
    }

    pub fn decision_token_count(&self) -> usize {
        self.decision_mask.iter().filter(|&&m| m).count()
    }

    /// 1-based turn of every token; 0 for tokens outside any turn.
    pub fn token_turns(&self) -> Vec<usize> {
        let mut out = vec![0; self.tokens.len()];
        for turn in &self.turns {
            out[turn.range()].fill(turn.index);
        }
        out
    }
}

/// Contents strictly inside the final turn's `ANS_OPEN … ANS_CLOSE`.
///
/// Empty when the rollout is format-invalid or the span is unterminated.
pub fn extract_answer(rollout: &Rollout) -> Vec<Token> {
    if !rollout.format_valid {
        return Vec::new();
    }
    let Some(last) = rollout.turns.last() else {
        return Vec::new();
    };
    if last.kind != TurnKind::Answer {
        return Vec::new();
    }
    match last.segment(SegmentKind::Answer) {
        Some(seg)
            if seg.end - seg.start >= 3
                && rollout.tokens[seg.start] == Vocabulary::ANS_OPEN
                && rollout.tokens[seg.end - 1] == Vocabulary::ANS_CLOSE =>
        {
            rollout.tokens[seg.start + 1..seg.end - 1].to_vec()
        }
        _ => Vec::new(),
    }
}

/// `G` rollouts sampled for one question/answer pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub question: Vec<Token>,
    pub ground_truth: Vec<Token>,
    pub rollouts: Vec<Rollout>,
}

impl Group {
    pub fn size(&self) -> usize {
        self.rollouts.len()
    }

    pub fn wrapped_ground_truth(&self) -> Vec<Token> {
        wrap_ground_truth(&self.ground_truth)
    }
}

/// Embeds an answer in the schema of a finished answer turn:
/// `THINK_OPEN THINK THINK_CLOSE ANS_OPEN a… ANS_CLOSE`.
pub fn wrap_ground_truth(answer: &[Token]) -> Vec<Token> {
    let mut out = Vec::with_capacity(answer.len() + GT_PREFIX_LEN + 1);
    out.extend([
        Vocabulary::THINK_OPEN,
        Vocabulary::THINK,
        Vocabulary::THINK_CLOSE,
        Vocabulary::ANS_OPEN,
    ]);
    out.extend_from_slice(answer);
    out.push(Vocabulary::ANS_CLOSE);
    out
}

/// Wrapper tokens preceding the answer inside [`wrap_ground_truth`].
pub const GT_PREFIX_LEN: usize = 4;
