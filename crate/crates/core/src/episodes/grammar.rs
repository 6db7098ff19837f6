//! Incremental recognizer for the turn grammar
//!
//! ```text
//! rollout := interaction* answer
//! interaction := THINK_OPEN THINK THINK_CLOSE CALL_OPEN entity relation CALL_CLOSE
//!                RESP_OPEN (entity | NOT_FOUND)+ RESP_CLOSE
//! answer := THINK_OPEN THINK THINK_CLOSE ANS_OPEN content+ ANS_CLOSE
//! ```
//!
//! The same cursor drives live episodes (choosing when the tool must answer)
//! and after-the-fact validation, so the two can never disagree.

use super::turn::SegmentKind;
use super::vocab::{Token, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    TurnStart,
    ThinkFiller,
    ThinkClose,
    Branch,
    CallEntity,
    CallRelation,
    CallClose,
    RespOpen,
    RespFirst,
    RespMore,
    AnswerFirst,
    AnswerMore,
    Done,
}

/// Outcome of feeding one accepted token.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Continue,
    /// `CALL_CLOSE` accepted; the tool response comes next.
    CallComplete {
        entity: Token,
        relation: Token,
    },
    /// `RESP_CLOSE` accepted; an interaction turn is finished.
    TurnComplete,
    /// `ANS_CLOSE` accepted; the rollout is finished.
    AnswerComplete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Violation {
    pub position: usize,
    pub token: Token,
    pub expected: &'static str,
}

#[derive(Clone, Debug)]
pub struct GrammarCursor {
    vocab: Vocabulary,
    state: State,
    pending_entity: Token,
    pending_relation: Token,
    position: usize,
}

impl GrammarCursor {
    pub fn new(vocab: Vocabulary) -> Self {
        Self {
            vocab,
            state: State::TurnStart,
            pending_entity: Vocabulary::PAD,
            pending_relation: Vocabulary::PAD,
            position: 0,
        }
    }

    /// Tokens consumed so far.
    pub fn position(&self) -> usize {
        self.position
    }

    pub fn is_done(&self) -> bool {
        self.state == State::Done
    }

    pub fn at_turn_start(&self) -> bool {
        self.state == State::TurnStart
    }

    /// True while the tool (not the agent) is expected to emit tokens.
    pub fn in_tool_response(&self) -> bool {
        matches!(self.state, State::RespOpen | State::RespFirst | State::RespMore)
    }

    /// Segment that `tok` belongs to if fed next. A violating token is
    /// attributed to the segment in progress.
    pub fn segment_for(&self, tok: Token) -> SegmentKind {
        match self.state {
            State::TurnStart | State::ThinkFiller | State::ThinkClose => SegmentKind::Think,
            State::Branch if tok == Vocabulary::CALL_OPEN => SegmentKind::ToolCall,
            State::Branch if tok == Vocabulary::ANS_OPEN => SegmentKind::Answer,
            State::Branch => SegmentKind::Think,
            State::CallEntity | State::CallRelation | State::CallClose => SegmentKind::ToolCall,
            State::RespOpen | State::RespFirst | State::RespMore => SegmentKind::ToolResponse,
            State::AnswerFirst | State::AnswerMore | State::Done => SegmentKind::Answer,
        }
    }

    pub fn feed(&mut self, tok: Token) -> Result<Step, Violation> {
        let v = &self.vocab;
        let (next, step, expected) = match self.state {
            State::TurnStart => (State::ThinkFiller, Step::Continue, tok == Vocabulary::THINK_OPEN),
            State::ThinkFiller => (State::ThinkClose, Step::Continue, tok == Vocabulary::THINK),
            State::ThinkClose => (State::Branch, Step::Continue, tok == Vocabulary::THINK_CLOSE),
            State::Branch if tok == Vocabulary::CALL_OPEN => (State::CallEntity, Step::Continue, true),
            State::Branch if tok == Vocabulary::ANS_OPEN => (State::AnswerFirst, Step::Continue, true),
            State::Branch => (State::Branch, Step::Continue, false),
            State::CallEntity => {
                self.pending_entity = tok;
                (State::CallRelation, Step::Continue, v.is_entity(tok))
            }
            State::CallRelation => {
                self.pending_relation = tok;
                (State::CallClose, Step::Continue, v.is_relation(tok))
            }
            State::CallClose => (
                State::RespOpen,
                Step::CallComplete {
                    entity: self.pending_entity,
                    relation: self.pending_relation,
                },
                tok == Vocabulary::CALL_CLOSE,
            ),
            State::RespOpen => (State::RespFirst, Step::Continue, tok == Vocabulary::RESP_OPEN),
            State::RespFirst => (
                State::RespMore,
                Step::Continue,
                v.is_entity(tok) || tok == Vocabulary::NOT_FOUND,
            ),
            State::RespMore if tok == Vocabulary::RESP_CLOSE => (State::TurnStart, Step::TurnComplete, true),
            State::RespMore => (
                State::RespMore,
                Step::Continue,
                v.is_entity(tok) || tok == Vocabulary::NOT_FOUND,
            ),
            State::AnswerFirst => (State::AnswerMore, Step::Continue, v.is_content(tok)),
            State::AnswerMore if tok == Vocabulary::ANS_CLOSE => (State::Done, Step::AnswerComplete, true),
            State::AnswerMore => (State::AnswerMore, Step::Continue, v.is_content(tok)),
            State::Done => (State::Done, Step::Continue, false),
        };
        if !expected {
            return Err(Violation {
                position: self.position,
                token: tok,
                expected: self.expectation(),
            });
        }
        self.state = next;
        self.position += 1;
        Ok(step)
    }

    fn expectation(&self) -> &'static str {
        match self.state {
            State::TurnStart => "THINK_OPEN",
            State::ThinkFiller => "think filler",
            State::ThinkClose => "THINK_CLOSE",
            State::Branch => "CALL_OPEN or ANS_OPEN",
            State::CallEntity => "entity",
            State::CallRelation => "relation",
            State::CallClose => "CALL_CLOSE",
            State::RespOpen => "RESP_OPEN",
            State::RespFirst => "entity or NOT_FOUND",
            State::RespMore => "entity, NOT_FOUND or RESP_CLOSE",
            State::AnswerFirst => "answer content",
            State::AnswerMore => "answer content or ANS_CLOSE",
            State::Done => "end of rollout",
        }
    }
}
