use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::episodes::{Token, Vocabulary};
use crate::error::{IgpoError, Result};

/// Functional fact table `(entity, relation) → entity`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnowledgeBase {
    vocab: Vocabulary,
    facts: BTreeMap<(Token, Token), Token>,
}

impl KnowledgeBase {
    /// Every `(entity, relation)` pair receives a fact with probability
    /// `chain_density`; its object is drawn uniformly from the other entities.
    pub fn generate(
        vocab_size: usize,
        seed: u64,
        n_entities: usize,
        n_relations: usize,
        chain_density: f64,
    ) -> Result<Self> {
        if n_entities < 2 {
            return Err(IgpoError::config(
                "environment.n_entities",
                "at least 2 entities are required",
            ));
        }
        if n_relations < 1 {
            return Err(IgpoError::config(
                "environment.n_relations",
                "at least 1 relation is required",
            ));
        }
        if !(0.0..=1.0).contains(&chain_density) {
            return Err(IgpoError::config("environment.chain_density", "must lie in [0, 1]"));
        }
        let vocab = Vocabulary::new(vocab_size, n_entities, n_relations)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut facts = BTreeMap::new();
        for s in 0..n_entities {
            for r in 0..n_relations {
                if rng.random::<f64>() >= chain_density {
                    continue;
                }
                let mut o = rng.random_range(0..n_entities - 1);
                if o >= s {
                    o += 1;
                }
                facts.insert((vocab.entity(s), vocab.relation(r)), vocab.entity(o));
            }
        }
        Ok(Self { vocab, facts })
    }

    pub fn from_facts(vocab: Vocabulary, facts: impl IntoIterator<Item = (Token, Token, Token)>) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (s, r, o) in facts {
            if !vocab.is_entity(s) || !vocab.is_relation(r) || !vocab.is_entity(o) {
                return Err(IgpoError::format(
                    "knowledge base",
                    format!("ids out of range in `{s} {r} {o}`"),
                ));
            }
            if let Some(prev) = table.insert((s, r), o) {
                if prev != o {
                    return Err(IgpoError::format(
                        "knowledge base",
                        format!("({s}, {r}) maps to both {prev} and {o}"),
                    ));
                }
            }
        }
        Ok(Self { vocab, facts: table })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn lookup(&self, entity: Token, relation: Token) -> Option<Token> {
        self.facts.get(&(entity, relation)).copied()
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Facts in `(subject, relation)` order.
    pub fn facts(&self) -> impl Iterator<Item = (Token, Token, Token)> + '_ {
        self.facts.iter().map(|(&(s, r), &o)| (s, r, o))
    }

    /// Writes one `subject relation object` line per fact.
    pub fn export<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (s, r, o) in self.facts() {
            writeln!(out, "{s} {r} {o}")?;
        }
        out.flush()
    }

    pub fn import<R: BufRead>(vocab: Vocabulary, input: R) -> Result<Self> {
        let mut facts = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| IgpoError::format("knowledge base", e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let ids: Vec<u16> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| IgpoError::format("knowledge base", format!("line {}: {e}", n + 1)))?;
            let [s, r, o] = ids[..] else {
                return Err(IgpoError::format(
                    "knowledge base",
                    format!("line {}: expected 3 ids, found {}", n + 1, ids.len()),
                ));
            };
            facts.push((Token(s), Token(r), Token(o)));
        }
        Self::from_facts(vocab, facts)
    }
}

/// The search tool: the object of a known fact, otherwise `NOT_FOUND`.
pub fn tool_search(kb: &KnowledgeBase, entity: Token, relation: Token) -> Vec<Token> {
    vec![kb.lookup(entity, relation).unwrap_or(Vocabulary::NOT_FOUND)]
}
