use rand::Rng;

use super::kb::KnowledgeBase;
use crate::episodes::Token;
use crate::error::{IgpoError, Result};

/// A multi-hop question: follow `chain` from `start` through the KB.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Task {
    /// `r_1 … r_h start`: relations first so the window keeps them in view.
    pub question: Vec<Token>,
    pub gt_answer: Vec<Token>,
    pub start: Token,
    pub chain: Vec<Token>,
    /// Entities visited, `start` through the answer.
    pub path: Vec<Token>,
}

impl Task {
    pub fn hops(&self) -> usize {
        self.chain.len()
    }

    fn new(start: Token, chain: Vec<Token>, path: Vec<Token>) -> Self {
        let mut question = chain.clone();
        question.push(start);
        Self {
            question,
            gt_answer: vec![*path.last().unwrap()],
            start,
            chain,
            path,
        }
    }
}

const REJECTION_ATTEMPTS: usize = 256;

/// Follows `chain` from `start`; `None` if a hop is missing or the walk
/// returns to an entity already on the path (the answer must not be
/// readable from the question or an earlier hop).
pub fn follow_chain(kb: &KnowledgeBase, start: Token, chain: &[Token]) -> Option<Vec<Token>> {
    let mut path = vec![start];
    for &rel in chain {
        let next = kb.lookup(*path.last().unwrap(), rel)?;
        if path.contains(&next) {
            return None;
        }
        path.push(next);
    }
    Some(path)
}

/// Draws a task whose chain of `hops` relations resolves in `kb`.
///
/// Uniform rejection sampling first; if that keeps failing, every valid
/// chain is enumerated and one is drawn uniformly.
pub fn sample_task<R: Rng + ?Sized>(kb: &KnowledgeBase, hops: usize, rng: &mut R) -> Result<Task> {
    if hops == 0 {
        return Err(IgpoError::config("environment.hops", "must be at least 1"));
    }
    let v = kb.vocab();
    for _ in 0..REJECTION_ATTEMPTS {
        let start = v.entity(rng.random_range(0..v.n_entities()));
        let chain: Vec<Token> = (0..hops)
            .map(|_| v.relation(rng.random_range(0..v.n_relations())))
            .collect();
        if let Some(path) = follow_chain(kb, start, &chain) {
            return Ok(Task::new(start, chain, path));
        }
    }
    let all = enumerate_tasks(kb, hops);
    if all.is_empty() {
        return Err(IgpoError::NoChain { hops });
    }
    Ok(all[rng.random_range(0..all.len())].clone())
}

/// Every resolvable task with `hops` relations, in id order.
pub fn enumerate_tasks(kb: &KnowledgeBase, hops: usize) -> Vec<Task> {
    let v = kb.vocab();
    let relations: Vec<Token> = v.relations().collect();
    let mut out = Vec::new();
    for start in v.entities() {
        let mut stack = vec![(vec![start], Vec::new())];
        while let Some((path, chain)) = stack.pop() {
            if chain.len() == hops {
                out.push(Task::new(start, chain, path));
                continue;
            }
            // reverse so the stack pops relations in ascending order
            for &rel in relations.iter().rev() {
                if let Some(next) = kb.lookup(*path.last().unwrap(), rel) {
                    if !path.contains(&next) {
                        let mut p = path.clone();
                        p.push(next);
                        let mut c = chain.clone();
                        c.push(rel);
                        stack.push((p, c));
                    }
                }
            }
        }
    }
    out
}
