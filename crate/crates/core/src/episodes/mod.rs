//! Vocabulary, turn grammar and trajectory containers.

mod grammar;
mod rollout;
pub mod trace;
mod turn;
mod vocab;

pub use grammar::{GrammarCursor, Step, Violation};
pub use rollout::{extract_answer, wrap_ground_truth, Group, Rollout, GT_PREFIX_LEN};
pub use turn::{render_turns, turn_contents, validate_format, Segment, SegmentKind, Turn, TurnContent, TurnKind};
pub use vocab::{Token, Vocabulary};
