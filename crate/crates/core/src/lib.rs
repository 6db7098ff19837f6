//! Information-gain-based policy optimization (IGPO) for multi-turn
//! tool-using agents, at desk scale.
//!
//! A small window-conditioned token policy acts in a synthetic multi-hop
//! search environment. Each interaction turn is rewarded by how much it
//! raises the policy's own teacher-forced probability of the ground-truth
//! answer; the final turn is rewarded by answer F1. Rewards are z-scored
//! across every turn of every rollout in a group, discounted backward over
//! turns and assigned to the decision tokens of each turn. GRPO, with a
//! single outcome-based advantage per rollout, is built in as the baseline.

pub mod advantage;
pub mod environment;
pub mod episodes;
pub mod error;
pub mod objective;
pub mod policy;
pub mod rewards;
pub mod trainer;

pub use episodes::{Group, Rollout, Token, Turn, Vocabulary};
pub use error::{IgpoError, Result};
pub use policy::{GradientBuffer, PolicyParams, PolicySnapshot, TokenPolicy};
