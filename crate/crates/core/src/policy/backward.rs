use rayon::prelude::*;

use super::forward::Forward;
use super::params::{GradientBuffer, ParamBlock, PolicyParams};
use crate::episodes::Token;

/// Gradient of the loss with respect to one forward pass's output.
#[derive(Clone, Debug)]
pub enum Upstream {
    /// `∂loss/∂log π(token)` for a single token.
    Token { token: Token, coef: f64 },
    /// `∂loss/∂logit_v` for every vocabulary entry.
    Logits(Vec<f64>),
}

/// One recorded forward pass and how the loss depends on it.
#[derive(Clone, Debug)]
pub struct LogProbTerm {
    pub forward: Forward,
    pub upstream: Upstream,
}

/// A scalar loss recorded as a sum of log-probability terms plus optional
/// direct parameter terms. This is a recomputation tape: each term keeps the
/// activations its reverse pass needs.
#[derive(Clone, Debug, Default)]
pub struct LossNode {
    value: f64,
    terms: Vec<LogProbTerm>,
    param_terms: Vec<(usize, f64)>,
}

impl LossNode {
    pub fn constant(value: f64) -> Self {
        Self {
            value,
            ..Self::default()
        }
    }

    /// The loss `θ_index` itself.
    pub fn parameter(params: &PolicyParams, index: usize) -> Self {
        Self {
            value: params.as_slice()[index],
            terms: Vec::new(),
            param_terms: vec![(index, 1.0)],
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Adds `contribution` to the value together with the term that
    /// produced it.
    pub fn push(&mut self, contribution: f64, term: LogProbTerm) {
        self.value += contribution;
        self.terms.push(term);
    }

    pub fn add_constant(&mut self, c: f64) {
        self.value += c;
    }

    pub fn extend(&mut self, other: LossNode) {
        self.value += other.value;
        self.terms.extend(other.terms);
        self.param_terms.extend(other.param_terms);
    }

    pub fn scale(&mut self, factor: f64) {
        self.value *= factor;
        for t in &mut self.terms {
            match &mut t.upstream {
                Upstream::Token { coef, .. } => *coef *= factor,
                Upstream::Logits(g) => g.iter_mut().for_each(|x| *x *= factor),
            }
        }
        for (_, c) in &mut self.param_terms {
            *c *= factor;
        }
    }
}

const CHUNK: usize = 64;

/// Exact reverse-mode gradient of `loss` with respect to every parameter.
///
/// Terms are reduced in fixed-size chunks and the partial buffers summed in
/// order, so the result does not depend on thread scheduling.
pub fn backward(params: &PolicyParams, loss: &LossNode) -> GradientBuffer {
    let shape = params.shape();
    let partials: Vec<GradientBuffer> = loss
        .terms
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = GradientBuffer::zeros(shape);
            let mut scratch = Scratch::new(shape.vocab, shape.hidden, shape.embed);
            for term in chunk {
                accumulate(params, term, &mut g, &mut scratch);
            }
            g
        })
        .collect();
    let mut grad = GradientBuffer::zeros(shape);
    for p in &partials {
        grad.add_assign(p);
    }
    for &(i, c) in &loss.param_terms {
        grad.as_mut_slice()[i] += c;
    }
    grad
}

struct Scratch {
    dlogits: Vec<f64>,
    dz: Vec<f64>,
    dx: Vec<f64>,
}

impl Scratch {
    fn new(vocab: usize, hidden: usize, embed: usize) -> Self {
        Self {
            dlogits: vec![0.0; vocab],
            dz: vec![0.0; hidden],
            dx: vec![0.0; embed],
        }
    }
}

fn accumulate(params: &PolicyParams, term: &LogProbTerm, grad: &mut GradientBuffer, s: &mut Scratch) {
    let shape = params.shape();
    let (d, h, v) = (shape.embed, shape.hidden, shape.vocab);
    let fwd = &term.forward;

    // logp = logits − lse(logits)  ⇒  ∂/∂logits = g − p·Σg
    match &term.upstream {
        Upstream::Token { token, coef } => {
            for (dl, lp) in s.dlogits.iter_mut().zip(&fwd.logprobs) {
                *dl = -coef * lp.exp();
            }
            s.dlogits[token.index()] += coef;
        }
        Upstream::Logits(g) => s.dlogits.copy_from_slice(g),
    }

    let emb_r = shape.block(ParamBlock::Embedding);
    let w1_r = shape.block(ParamBlock::HiddenWeight);
    let b1_r = shape.block(ParamBlock::HiddenBias);
    let w2_r = shape.block(ParamBlock::OutputWeight);
    let b2_r = shape.block(ParamBlock::OutputBias);
    let p = params.as_slice();
    let g = grad.as_mut_slice();

    for (gb, dl) in g[b2_r].iter_mut().zip(&s.dlogits) {
        *gb += dl;
    }
    let w2 = &p[w2_r.clone()];
    for j in 0..h {
        let a = fwd.hidden[j];
        let row = j * v..(j + 1) * v;
        let mut da = 0.0;
        for ((gw, w), dl) in g[w2_r.start + row.start..w2_r.start + row.end]
            .iter_mut()
            .zip(&w2[row])
            .zip(&s.dlogits)
        {
            *gw += a * dl;
            da += w * dl;
        }
        s.dz[j] = da * (1.0 - a * a);
    }
    for (gb, dz) in g[b1_r].iter_mut().zip(&s.dz) {
        *gb += dz;
    }

    let emb = &p[emb_r.clone()];
    let w1 = &p[w1_r.clone()];
    for (pos, tok) in fwd.window.iter().enumerate() {
        let erow = tok.index() * d;
        for c in 0..d {
            let x = emb[erow + c];
            let wrow = (pos * d + c) * h;
            let mut dx = 0.0;
            for (j, dz) in s.dz.iter().enumerate() {
                g[w1_r.start + wrow + j] += x * dz;
                dx += w1[wrow + j] * dz;
            }
            s.dx[c] = dx;
        }
        for c in 0..d {
            g[emb_r.start + erow + c] += s.dx[c];
        }
    }
}
