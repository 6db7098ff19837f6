//! Window-conditioned autoregressive token policy with hand-written
//! reverse-mode differentiation.
//!
//! The last `window` tokens of the context are embedded, concatenated, passed
//! through one tanh layer and projected to vocabulary logits.

mod backward;
pub mod checkpoint;
mod forward;
mod params;
pub mod scripted;

pub use backward::{backward, LogProbTerm, LossNode, Upstream};
pub use forward::{gt_answer_prob, sample_from_logprobs, sample_token, sequence_logprob, Forward, LOGPROB_FLOOR};
pub use params::{GradientBuffer, ParamBlock, PolicyParams, PolicyShape, PolicySnapshot};

use crate::episodes::Token;

/// Anything that yields a next-token log-distribution for a context.
///
/// `context` is the full history (question followed by rollout tokens);
/// implementations decide how much of it they look at.
pub trait TokenPolicy: Sync {
    fn vocab_size(&self) -> usize;

    fn next_token_logprobs(&self, context: &[Token]) -> Vec<f64>;
}

impl<P: TokenPolicy + ?Sized> TokenPolicy for &P {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_token_logprobs(&self, context: &[Token]) -> Vec<f64> {
        (**self).next_token_logprobs(context)
    }
}

/// Numerically stable `log Σ exp`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
