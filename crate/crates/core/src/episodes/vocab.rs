use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{IgpoError, Result};

/// A token id in the policy's vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(pub u16);

impl Token {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Token id layout: reserved tag tokens first, then entities, then relations.
///
/// Ids past the relation range (when `size` leaves slack) are valid policy
/// outputs but never grammatical.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    size: usize,
    n_entities: usize,
    n_relations: usize,
}

impl Vocabulary {
    pub const PAD: Token = Token(0);
    pub const THINK_OPEN: Token = Token(1);
    pub const THINK_CLOSE: Token = Token(2);
    pub const CALL_OPEN: Token = Token(3);
    pub const CALL_CLOSE: Token = Token(4);
    pub const RESP_OPEN: Token = Token(5);
    pub const RESP_CLOSE: Token = Token(6);
    pub const ANS_OPEN: Token = Token(7);
    pub const ANS_CLOSE: Token = Token(8);
    /// In-band tool result for a missing fact.
    pub const NOT_FOUND: Token = Token(9);
    /// The single free filler token of a think segment.
    pub const THINK: Token = Token(10);

    /// Number of ids taken by tag, PAD, NOT_FOUND and filler tokens.
    pub const RESERVED: usize = 11;

    pub fn new(size: usize, n_entities: usize, n_relations: usize) -> Result<Self> {
        if n_entities == 0 {
            return Err(IgpoError::config("n_entities", "must be positive"));
        }
        if n_relations == 0 {
            return Err(IgpoError::config("n_relations", "must be positive"));
        }
        let needed = Self::RESERVED + n_entities + n_relations;
        if needed > size {
            return Err(IgpoError::config(
                "vocab_size",
                format!(
                    "{size} ids cannot host {n_entities} entities and {n_relations} relations \
                     ({needed} ids needed)"
                ),
            ));
        }
        if size > u16::MAX as usize {
            return Err(IgpoError::config("vocab_size", "must fit in 16 bits"));
        }
        Ok(Self {
            size,
            n_entities,
            n_relations,
        })
    }

    /// Smallest vocabulary hosting the given content counts.
    pub fn compact(n_entities: usize, n_relations: usize) -> Result<Self> {
        Self::new(Self::RESERVED + n_entities + n_relations, n_entities, n_relations)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    pub fn specials() -> [Token; 11] {
        [
            Self::PAD,
            Self::THINK_OPEN,
            Self::THINK_CLOSE,
            Self::CALL_OPEN,
            Self::CALL_CLOSE,
            Self::RESP_OPEN,
            Self::RESP_CLOSE,
            Self::ANS_OPEN,
            Self::ANS_CLOSE,
            Self::NOT_FOUND,
            Self::THINK,
        ]
    }

    /// The `i`-th entity (0-based).
    pub fn entity(&self, i: usize) -> Token {
        assert!(i < self.n_entities, "entity {i} out of range");
        Token((Self::RESERVED + i) as u16)
    }

    /// The `i`-th relation (0-based).
    pub fn relation(&self, i: usize) -> Token {
        assert!(i < self.n_relations, "relation {i} out of range");
        Token((Self::RESERVED + self.n_entities + i) as u16)
    }

    pub fn entities(&self) -> impl Iterator<Item = Token> + '_ {
        (0..self.n_entities).map(|i| self.entity(i))
    }

    pub fn relations(&self) -> impl Iterator<Item = Token> + '_ {
        (0..self.n_relations).map(|i| self.relation(i))
    }

    pub fn is_entity(&self, tok: Token) -> bool {
        let i = tok.index();
        (Self::RESERVED..Self::RESERVED + self.n_entities).contains(&i)
    }

    pub fn is_relation(&self, tok: Token) -> bool {
        let lo = Self::RESERVED + self.n_entities;
        (lo..lo + self.n_relations).contains(&tok.index())
    }

    /// Entities and relations: the tokens allowed inside an answer span.
    pub fn is_content(&self, tok: Token) -> bool {
        self.is_entity(tok) || self.is_relation(tok)
    }

    pub fn contains(&self, tok: Token) -> bool {
        tok.index() < self.size
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specials_distinct_and_disjoint_from_content() {
        let v = Vocabulary::new(64, 48, 5).unwrap();
        let specials = Vocabulary::specials();
        for (i, a) in specials.iter().enumerate() {
            assert!(v.contains(*a));
            assert!(!v.is_content(*a));
            for b in &specials[i + 1..] {
                assert_ne!(a, b);
            }
        }
        assert_eq!(v.entities().count(), 48);
        assert!(v.relations().all(|r| v.is_relation(r) && !v.is_entity(r)));
        assert_eq!(v.relation(4), Token(63));
    }

    #[test]
    fn rejects_overfull_layout() {
        assert!(Vocabulary::new(64, 50, 5).is_err());
        assert!(Vocabulary::new(64, 0, 5).is_err());
    }
}
