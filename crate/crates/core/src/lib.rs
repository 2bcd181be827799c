//! Decentralized multi-agent task allocation with load management.
//!
//! `brigade` simulates teams of heterogeneous agents that learn, each with its
//! own deep Q-network over a belief state, to allocate themselves to tasks
//! while managing their load: idling when they are not needed, avoiding
//! excess capability usage, and avoiding unnecessary reassignment. It also
//! quantifies each agent's importance to the learned collaboration and the
//! team's resilience to losing an agent.
//!
//! The crate is organized around the decision process:
//!
//! - [`scenario`] — the declarative world description and the action space.
//! - [`env`] — hidden task severity dynamics, observations, and broadcast.
//! - [`belief`] — per-agent Bayesian filtering and the Q-network encoding.
//! - [`reward`] — completion reward plus idle, excess, and reassignment terms.
//! - [`net`] / [`qlearn`] — the value network and the decentralized training
//!   loop.
//! - [`metrics`] — evaluation rollouts, agent importance, and inactivation
//!   studies.
//!
//! A short end-to-end run on a one-task world:
//!
//! ```
//! use brigade::prelude::*;
//!
//! let scenario = Scenario::from_toml_str(
//!     r#"
//!     locations = ["station"]
//!     idle_locations = ["station"]
//!     horizon = 10
//!     [[tasks]]
//!     id = 1
//!     location = "station"
//!     task_type = "fire"
//!     initial_level = 4
//!     [[agents]]
//!     id = 1
//!     sensing = 5
//!     communication = 3
//!     capability = { fire = 5, rescue = 0 }
//!     "#,
//! )?;
//! let rewards = RewardConfig::per_agent(&RewardSettings::default(), &scenario)?;
//! let config = TrainConfig::for_scenario(&scenario).with_episodes(5);
//! let result = train(&scenario, &rewards, &config);
//! let report = evaluate(&result.nets, &scenario, 20, 7, &[]);
//! assert_eq!(report.trials, 20);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod belief;
pub mod env;
pub mod metrics;
pub mod net;
pub mod qlearn;
pub mod reward;
pub mod scenario;

#[doc(hidden)]
pub mod testutil;

/// The types and functions most runs need.
pub mod prelude {
    pub use crate::belief::{
        believed_level, encode, initial_belief, update_belief, BeliefState, KnowledgeState,
    };
    pub use crate::env::{
        broadcast, joint_capability, observe, step_world, transition_kernel, Message,
        Observation, WorldState,
    };
    pub use crate::metrics::{
        capability_usage, evaluate, importance, importance_report, inactivation_study,
        task_urgency, EvalReport, ImportanceReport, InactivationStudy,
    };
    pub use crate::net::{Checkpoint, QNet};
    pub use crate::qlearn::{
        greedy_policy, select_action, td_target, train, train_step, ReplayBuffer, TrainConfig,
        TrainResult, Trainer, TransitionRecord,
    };
    pub use crate::reward::{RewardConfig, RewardSettings};
    pub use crate::scenario::{
        Action, ActionSpace, Capability, Scenario, ScenarioConfig, TaskType,
    };
}
