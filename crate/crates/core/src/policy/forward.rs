use rand::Rng;

use super::params::{ParamBlock, PolicyParams};
use super::{logsumexp, TokenPolicy};
use crate::episodes::{Token, Vocabulary, GT_PREFIX_LEN};

/// Lower clamp applied to per-token log-probabilities before they are
/// averaged and exponentiated for the ground-truth probability.
pub const LOGPROB_FLOOR: f64 = -30.0;

/// Cached activations of one forward pass, reused by the backward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    pub window: Vec<Token>,
    pub hidden: Vec<f64>,
    pub logprobs: Vec<f64>,
}

impl PolicyParams {
    /// Last `window` tokens of `context`, left-padded with `PAD`.
    pub fn window_of(&self, context: &[Token]) -> Vec<Token> {
        let k = self.shape().window;
        let mut w = vec![Vocabulary::PAD; k];
        let take = context.len().min(k);
        w[k - take..].copy_from_slice(&context[context.len() - take..]);
        w
    }

    pub fn forward(&self, context: &[Token]) -> Forward {
        let shape = self.shape();
        let (d, h, v) = (shape.embed, shape.hidden, shape.vocab);
        let window = self.window_of(context);
        let emb = self.block(ParamBlock::Embedding);
        let w1 = self.block(ParamBlock::HiddenWeight);
        let w2 = self.block(ParamBlock::OutputWeight);

        let mut hidden = self.block(ParamBlock::HiddenBias).to_vec();
        for (pos, tok) in window.iter().enumerate() {
            let row = &emb[tok.index() * d..(tok.index() + 1) * d];
            for (c, &x) in row.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let wrow = &w1[(pos * d + c) * h..(pos * d + c + 1) * h];
                for (z, w) in hidden.iter_mut().zip(wrow) {
                    *z += x * w;
                }
            }
        }
        hidden.iter_mut().for_each(|z| *z = z.tanh());

        let mut logits = self.block(ParamBlock::OutputBias).to_vec();
        for (j, &a) in hidden.iter().enumerate() {
            let wrow = &w2[j * v..(j + 1) * v];
            for (l, w) in logits.iter_mut().zip(wrow) {
                *l += a * w;
            }
        }
        let lse = logsumexp(&logits);
        logits.iter_mut().for_each(|l| *l -= lse);
        Forward {
            window,
            hidden,
            logprobs: logits,
        }
    }
}

impl TokenPolicy for PolicyParams {
    fn vocab_size(&self) -> usize {
        self.shape().vocab
    }

    fn next_token_logprobs(&self, context: &[Token]) -> Vec<f64> {
        self.forward(context).logprobs
    }
}

impl TokenPolicy for super::PolicySnapshot {
    fn vocab_size(&self) -> usize {
        self.params().vocab_size()
    }

    fn next_token_logprobs(&self, context: &[Token]) -> Vec<f64> {
        self.params().next_token_logprobs(context)
    }
}

/// Draws from `softmax(logprobs / temperature)`; `temperature == 0` selects
/// the most likely token (lowest id on ties).
pub fn sample_from_logprobs<R: Rng + ?Sized>(logprobs: &[f64], temperature: f64, rng: &mut R) -> Token {
    assert!(temperature >= 0.0, "temperature must be non-negative");
    if temperature == 0.0 {
        let mut best = 0;
        for (i, &lp) in logprobs.iter().enumerate() {
            if lp > logprobs[best] {
                best = i;
            }
        }
        return Token(best as u16);
    }
    let scaled: Vec<f64> = logprobs.iter().map(|lp| lp / temperature).collect();
    let lse = logsumexp(&scaled);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, s) in scaled.iter().enumerate() {
        acc += (s - lse).exp();
        if u < acc {
            return Token(i as u16);
        }
    }
    // u landed in the rounding slack above the final cumulative mass
    Token((scaled.len() - 1) as u16)
}

pub fn sample_token<P: TokenPolicy + ?Sized, R: Rng + ?Sized>(
    policy: &P,
    context: &[Token],
    temperature: f64,
    rng: &mut R,
) -> Token {
    sample_from_logprobs(&policy.next_token_logprobs(context), temperature, rng)
}

/// Teacher-forced log-probability of `continuation` after `prefix`.
///
/// Returns the total over unmasked tokens and the log-probability of every
/// continuation token (masked ones included, so callers can inspect them).
pub fn sequence_logprob<P: TokenPolicy + ?Sized>(
    policy: &P,
    prefix: &[Token],
    continuation: &[Token],
    mask: Option<&[bool]>,
) -> (f64, Vec<f64>) {
    assert!(!continuation.is_empty(), "continuation must be non-empty");
    if let Some(m) = mask {
        assert_eq!(m.len(), continuation.len(), "mask/continuation length mismatch");
    }
    let mut context = Vec::with_capacity(prefix.len() + continuation.len());
    context.extend_from_slice(prefix);
    let mut total = 0.0;
    let mut per_token = Vec::with_capacity(continuation.len());
    for (j, &tok) in continuation.iter().enumerate() {
        let lp = policy.next_token_logprobs(&context)[tok.index()];
        if mask.is_none_or(|m| m[j]) {
            total += lp;
        }
        per_token.push(lp);
        context.push(tok);
    }
    (total, per_token)
}

/// Length-normalized probability of the ground-truth answer:
/// `exp((1/L) Σ_j log π(a_j | prefix, wrapper, a_<j))`.
///
/// `wrapped_gt` must come from [`crate::episodes::wrap_ground_truth`]; only
/// the `L` answer tokens are averaged, the wrapper only conditions them.
/// The value is a constant with respect to training gradients.
pub fn gt_answer_prob<P: TokenPolicy + ?Sized>(policy: &P, prefix: &[Token], wrapped_gt: &[Token]) -> f64 {
    assert!(
        wrapped_gt.len() > GT_PREFIX_LEN + 1,
        "wrapped ground truth needs at least one answer token"
    );
    let answer = &wrapped_gt[GT_PREFIX_LEN..wrapped_gt.len() - 1];
    let mut context = Vec::with_capacity(prefix.len() + wrapped_gt.len());
    context.extend_from_slice(prefix);
    context.extend_from_slice(&wrapped_gt[..GT_PREFIX_LEN]);
    let mut sum = 0.0;
    for &tok in answer {
        let lp = policy.next_token_logprobs(&context)[tok.index()];
        sum += lp.max(LOGPROB_FLOOR);
        context.push(tok);
    }
    (sum / answer.len() as f64).exp()
}
