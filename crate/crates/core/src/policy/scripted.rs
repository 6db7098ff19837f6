use super::TokenPolicy;
use crate::episodes::Token;

/// A policy given by an arbitrary function from context to log-distribution.
pub struct FnPolicy<F> {
    vocab: usize,
    f: F,
}

impl<F> FnPolicy<F>
where
    F: Fn(&[Token]) -> Vec<f64> + Sync,
{
    pub fn new(vocab: usize, f: F) -> Self {
        Self { vocab, f }
    }
}

impl<F> TokenPolicy for FnPolicy<F>
where
    F: Fn(&[Token]) -> Vec<f64> + Sync,
{
    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn next_token_logprobs(&self, context: &[Token]) -> Vec<f64> {
        (self.f)(context)
    }
}

/// Log-distribution putting all mass on `tok`.
pub fn point_mass(vocab: usize, tok: Token) -> Vec<f64> {
    let mut lp = vec![f64::NEG_INFINITY; vocab];
    lp[tok.index()] = 0.0;
    lp
}

/// Log-distribution with mass `p` on `tok` and the rest spread uniformly.
pub fn peaked(vocab: usize, tok: Token, p: f64) -> Vec<f64> {
    let rest = ((1.0 - p) / (vocab - 1) as f64).ln();
    let mut lp = vec![rest; vocab];
    lp[tok.index()] = p.ln();
    lp
}

/// Deterministic policy: `f` names the next token.
pub fn scripted<F>(vocab: usize, f: F) -> FnPolicy<impl Fn(&[Token]) -> Vec<f64> + Sync>
where
    F: Fn(&[Token]) -> Token + Sync,
{
    FnPolicy::new(vocab, move |ctx| point_mass(vocab, f(ctx)))
}
