use std::ops::Range;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{IgpoError, Result};

/// Dimensions of the policy network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyShape {
    pub vocab: usize,
    /// Context window length `k`.
    pub window: usize,
    /// Embedding width `d`.
    pub embed: usize,
    /// Hidden width `h`.
    pub hidden: usize,
}

/// Parameter blocks in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamBlock {
    Embedding,
    HiddenWeight,
    HiddenBias,
    OutputWeight,
    OutputBias,
}

impl PolicyShape {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("vocab", self.vocab),
            ("window", self.window),
            ("embed", self.embed),
            ("hidden", self.hidden),
        ] {
            if v == 0 {
                return Err(IgpoError::config(format!("policy.{key}"), "must be positive"));
            }
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.window * self.embed
    }

    fn block_len(&self, block: ParamBlock) -> usize {
        match block {
            ParamBlock::Embedding => self.vocab * self.embed,
            ParamBlock::HiddenWeight => self.input_width() * self.hidden,
            ParamBlock::HiddenBias => self.hidden,
            ParamBlock::OutputWeight => self.hidden * self.vocab,
            ParamBlock::OutputBias => self.vocab,
        }
    }

    /// Offsets of `block` inside the flat canonical parameter vector.
    pub fn block(&self, block: ParamBlock) -> Range<usize> {
        use ParamBlock::*;
        let mut start = 0;
        for b in [Embedding, HiddenWeight, HiddenBias, OutputWeight, OutputBias] {
            let len = self.block_len(b);
            if b == block {
                return start..start + len;
            }
            start += len;
        }
        unreachable!()
    }

    pub fn num_params(&self) -> usize {
        self.block(ParamBlock::OutputBias).end
    }
}

/// Policy parameters as one flat vector in canonical order: embedding
/// (`vocab × d`, row per token), hidden weight (`k·d × h`, row-major), hidden
/// bias, output weight (`h × vocab`, row-major), output bias.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    shape: PolicyShape,
    seed: u64,
    data: Vec<f64>,
}

impl PolicyParams {
    pub fn zeros(shape: PolicyShape) -> Self {
        Self {
            shape,
            seed: 0,
            data: vec![0.0; shape.num_params()],
        }
    }

    /// Gaussian initialization scaled by fan-in; biases start at zero.
    pub fn init(shape: PolicyShape, seed: u64, scale: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(shape);
        p.seed = seed;
        let fill = |slice: &mut [f64], std: f64, rng: &mut ChaCha8Rng| {
            let normal = Normal::new(0.0, std).expect("finite std");
            slice.iter_mut().for_each(|x| *x = normal.sample(rng));
        };
        fill(p.block_mut(ParamBlock::Embedding), scale, &mut rng);
        fill(
            p.block_mut(ParamBlock::HiddenWeight),
            scale / (shape.input_width() as f64).sqrt(),
            &mut rng,
        );
        fill(
            p.block_mut(ParamBlock::OutputWeight),
            scale / (shape.hidden as f64).sqrt(),
            &mut rng,
        );
        p
    }

    pub fn from_raw(shape: PolicyShape, seed: u64, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.num_params() {
            return Err(IgpoError::Shape(format!(
                "{} values for a policy with {} parameters",
                data.len(),
                shape.num_params()
            )));
        }
        Ok(Self { shape, seed, data })
    }

    pub fn shape(&self) -> PolicyShape {
        self.shape
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn block(&self, block: ParamBlock) -> &[f64] {
        &self.data[self.shape.block(block)]
    }

    pub fn block_mut(&mut self, block: ParamBlock) -> &mut [f64] {
        let r = self.shape.block(block);
        &mut self.data[r]
    }

    /// `θ ← θ + step · g`.
    pub fn apply(&mut self, grad: &GradientBuffer, step: f64) {
        assert_eq!(grad.shape, self.shape, "gradient/parameter shape mismatch");
        for (p, g) in self.data.iter_mut().zip(&grad.data) {
            *p += step * g;
        }
    }

    pub fn snapshot(&self) -> PolicySnapshot {
        PolicySnapshot(Arc::new(self.clone()))
    }
}

/// Frozen, cheaply clonable copy of a policy (old policy and reference).
#[derive(Clone, Debug)]
pub struct PolicySnapshot(Arc<PolicyParams>);

impl PolicySnapshot {
    pub fn params(&self) -> &PolicyParams {
        &self.0
    }
}

impl std::ops::Deref for PolicySnapshot {
    type Target = PolicyParams;

    fn deref(&self) -> &PolicyParams {
        &self.0
    }
}

/// Accumulated `∂objective/∂θ`, congruent with a [`PolicyParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBuffer {
    shape: PolicyShape,
    data: Vec<f64>,
}

impl GradientBuffer {
    pub fn zeros(shape: PolicyShape) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.num_params()],
        }
    }

    pub fn shape(&self) -> PolicyShape {
        self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn zero(&mut self) {
        self.data.fill(0.0);
    }

    pub fn add_assign(&mut self, other: &GradientBuffer) {
        assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }
}
