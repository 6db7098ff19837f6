//! Synthetic multi-hop search environment: a seeded fact table, chain
//! questions over it, a lookup tool and the episode loop.

mod episode;
mod kb;
mod task;

pub use episode::{run_episode, EpisodeConfig};
pub use kb::{tool_search, KnowledgeBase};
pub use task::{enumerate_tasks, follow_chain, sample_task, Task};
