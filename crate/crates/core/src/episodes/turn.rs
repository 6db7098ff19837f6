use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::grammar::{GrammarCursor, Step};
use super::vocab::{Token, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Think,
    ToolCall,
    ToolResponse,
    Answer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnKind {
    Interaction,
    Answer,
}

/// A contiguous run of tokens of one segment kind.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub kind: TurnKind,
    /// 1-based turn number.
    pub index: usize,
    pub segments: Vec<Segment>,
}

impl Turn {
    pub fn start(&self) -> usize {
        self.segments.first().map_or(0, |s| s.start)
    }

    pub fn end(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end)
    }

    pub fn range(&self) -> Range<usize> {
        self.start()..self.end()
    }

    pub fn segment(&self, kind: SegmentKind) -> Option<&Segment> {
        self.segments.iter().find(|s| s.kind == kind)
    }

    fn push(&mut self, kind: SegmentKind, pos: usize) {
        match self.segments.last_mut() {
            Some(seg) if seg.kind == kind && seg.end == pos => seg.end += 1,
            _ => self.segments.push(Segment {
                kind,
                start: pos,
                end: pos + 1,
            }),
        }
    }
}

/// Parses a token stream into turns.
///
/// Returns `(true, turns)` iff the whole stream is one grammatical rollout.
/// On failure the turns cover the stream up to and including the first
/// offending token; tokens after it belong to no turn.
pub fn validate_format(tokens: &[Token], vocab: &Vocabulary) -> (bool, Vec<Turn>) {
    let mut cursor = GrammarCursor::new(*vocab);
    let mut turns: Vec<Turn> = Vec::new();
    let mut open: Option<Turn> = None;

    for (pos, &tok) in tokens.iter().enumerate() {
        if cursor.is_done() {
            return (false, turns);
        }
        let kind = cursor.segment_for(tok);
        let turn = open.get_or_insert_with(|| Turn {
            kind: TurnKind::Answer,
            index: turns.len() + 1,
            segments: Vec::new(),
        });
        turn.push(kind, pos);
        match cursor.feed(tok) {
            Ok(Step::TurnComplete) => {
                let mut t = open.take().unwrap();
                t.kind = TurnKind::Interaction;
                turns.push(t);
            }
            Ok(Step::AnswerComplete) => turns.push(open.take().unwrap()),
            Ok(_) => {}
            Err(_) => {
                turns.push(close_partial(open.take().unwrap()));
                return (false, turns);
            }
        }
    }
    if let Some(t) = open.take() {
        turns.push(close_partial(t));
    }
    (cursor.is_done(), turns)
}

fn close_partial(mut turn: Turn) -> Turn {
    turn.kind = if turn.segment(SegmentKind::ToolCall).is_some() {
        TurnKind::Interaction
    } else {
        TurnKind::Answer
    };
    turn
}

/// Structured content of one well-formed turn.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TurnContent {
    Interaction {
        entity: Token,
        relation: Token,
        response: Vec<Token>,
    },
    Answer(Vec<Token>),
}

/// Serializes well-formed turns into the token stream they denote.
pub fn render_turns(turns: &[TurnContent]) -> Vec<Token> {
    let mut out = Vec::new();
    for turn in turns {
        out.extend([Vocabulary::THINK_OPEN, Vocabulary::THINK, Vocabulary::THINK_CLOSE]);
        match turn {
            TurnContent::Interaction {
                entity,
                relation,
                response,
            } => {
                out.extend([Vocabulary::CALL_OPEN, *entity, *relation, Vocabulary::CALL_CLOSE]);
                out.push(Vocabulary::RESP_OPEN);
                out.extend_from_slice(response);
                out.push(Vocabulary::RESP_CLOSE);
            }
            TurnContent::Answer(answer) => {
                out.push(Vocabulary::ANS_OPEN);
                out.extend_from_slice(answer);
                out.push(Vocabulary::ANS_CLOSE);
            }
        }
    }
    out
}

/// Inverse of [`render_turns`] for turns produced by a successful parse.
pub fn turn_contents(tokens: &[Token], turns: &[Turn]) -> Vec<TurnContent> {
    turns
        .iter()
        .map(|turn| match turn.kind {
            TurnKind::Interaction => {
                let call = turn.segment(SegmentKind::ToolCall).expect("tool call");
                let resp = turn.segment(SegmentKind::ToolResponse).expect("tool response");
                TurnContent::Interaction {
                    entity: tokens[call.start + 1],
                    relation: tokens[call.start + 2],
                    response: tokens[resp.start + 1..resp.end - 1].to_vec(),
                }
            }
            TurnKind::Answer => {
                let ans = turn.segment(SegmentKind::Answer).expect("answer");
                TurnContent::Answer(tokens[ans.start + 1..ans.end - 1].to_vec())
            }
        })
        .collect()
}
