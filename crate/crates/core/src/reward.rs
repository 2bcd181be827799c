//! Per-agent reward shaping: the belief-dependent completion reward, the idle
//! incentive and excess-capability penalty, and the reassignment cost matrix.
//!
//! The total per-step reward is `completion + load management`, where load
//! management is kept small relative to the completion spread so that idling
//! and reassignment never outweigh making progress on the tasks. Relocating to
//! another site's idle location is marked with a `-inf` cost; the reduced
//! action space excludes those cells by construction.

use crate::belief::{believed_level, BeliefState};
use crate::scenario::{Action, ActionSpace, Scenario};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("invalid reward configuration: field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("unknown reward preset `{0}`")]
    UnknownPreset(String),
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> RewardError {
    RewardError::Invalid {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

fn default_belief_threshold() -> f64 {
    0.8
}
fn default_excess_margin() -> u8 {
    2
}

/// Reward constants as they appear in configuration documents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardSettings {
    /// Reward per believed severity level, index 0 = complete. Must be
    /// strictly decreasing.
    pub level_rewards: Vec<f64>,
    #[serde(default = "default_belief_threshold")]
    pub belief_threshold: f64,
    #[serde(default)]
    pub idle_reward: f64,
    #[serde(default)]
    pub excess_penalty: f64,
    /// An assignment is penalized when the agent's capability exceeds the
    /// believed level by at least this margin.
    #[serde(default = "default_excess_margin")]
    pub excess_margin: u8,
    /// Cost of relocating to a different site; non-positive.
    #[serde(default)]
    pub traversing_cost: f64,
}

impl Default for RewardSettings {
    /// The featured configuration: idle incentive plus a medium relocation
    /// penalty.
    fn default() -> Self {
        RewardSettings::preset("idle_medium_trp").expect("default preset exists")
    }
}

/// The six named preset combinations: `{no_idle,idle} x {no,medium,high}_trp`.
pub const PRESET_NAMES: [&str; 6] = [
    "no_idle_no_trp",
    "no_idle_medium_trp",
    "no_idle_high_trp",
    "idle_no_trp",
    "idle_medium_trp",
    "idle_high_trp",
];

impl RewardSettings {
    /// Look up one of the named presets.
    ///
    /// The `idle` presets reward idling (0.5) and penalize excess capability
    /// (0.5); the `no_idle` presets disable both halves of the load-management
    /// incentive. The traversing cost is 0 / -2 / -10 for no / medium / high.
    pub fn preset(name: &str) -> Result<Self, RewardError> {
        let (idle_reward, excess_penalty, traversing_cost) = match name {
            "no_idle_no_trp" => (0.0, 0.0, 0.0),
            "no_idle_medium_trp" => (0.0, 0.0, -2.0),
            "no_idle_high_trp" => (0.0, 0.0, -10.0),
            "idle_no_trp" => (0.5, 0.5, 0.0),
            "idle_medium_trp" => (0.5, 0.5, -2.0),
            "idle_high_trp" => (0.5, 0.5, -10.0),
            other => return Err(RewardError::UnknownPreset(other.to_string())),
        };
        Ok(RewardSettings {
            level_rewards: vec![100.0, 25.0, 10.0, 5.0, 0.0],
            belief_threshold: 0.8,
            idle_reward,
            excess_penalty,
            excess_margin: 2,
            traversing_cost,
        })
    }

    /// Apply a per-agent override block on top of these settings.
    pub fn with_overrides(&self, overrides: &RewardOverrides) -> RewardSettings {
        let mut settings = self.clone();
        if let Some(level_rewards) = &overrides.level_rewards {
            settings.level_rewards = level_rewards.clone();
        }
        if let Some(threshold) = overrides.belief_threshold {
            settings.belief_threshold = threshold;
        }
        if let Some(idle) = overrides.idle_reward {
            settings.idle_reward = idle;
        }
        if let Some(excess) = overrides.excess_penalty {
            settings.excess_penalty = excess;
        }
        if let Some(margin) = overrides.excess_margin {
            settings.excess_margin = margin;
        }
        if let Some(tc) = overrides.traversing_cost {
            settings.traversing_cost = tc;
        }
        settings
    }
}

/// Optional per-agent reward overrides, embedded in scenario files.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RewardOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_rewards: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idle_reward: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excess_penalty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excess_margin: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traversing_cost: Option<f64>,
}

/// Reassignment cost matrix over the full action space. Cross-location idle
/// entries are `-inf`: those moves are excluded from the reduced action space
/// rather than priced.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, from: Action, to: Action) -> f64 {
        self.entries[from.0 * self.size + to.0]
    }
}

/// Build the traversing-cost matrix: 0 within a location, `tc` for relocating
/// to a task at another location, `-inf` for relocating to another location's
/// idle slot.
pub fn build_cost_matrix(actions: &ActionSpace, traversing_cost: f64) -> CostMatrix {
    let size = actions.len();
    let mut entries = vec![0.0; size * size];
    for from in actions.actions() {
        for to in actions.actions() {
            let cost = if actions.location_of(from) == actions.location_of(to) {
                0.0
            } else if actions.is_idle(to) {
                f64::NEG_INFINITY
            } else {
                traversing_cost
            };
            entries[from.0 * size + to.0] = cost;
        }
    }
    CostMatrix { size, entries }
}

/// Validated per-agent reward function.
#[derive(Debug, Clone)]
pub struct RewardConfig {
    settings: RewardSettings,
    cost_matrix: CostMatrix,
}

impl RewardConfig {
    /// Validate the settings against a scenario and build the cost matrix.
    pub fn new(settings: RewardSettings, scenario: &Scenario) -> Result<Self, RewardError> {
        if settings.level_rewards.len() != scenario.num_levels() {
            return Err(invalid(
                "level_rewards",
                format!(
                    "expected {} entries (one per severity level), found {}",
                    scenario.num_levels(),
                    settings.level_rewards.len()
                ),
            ));
        }
        for pair in settings.level_rewards.windows(2) {
            if !(pair[0] > pair[1]) {
                return Err(invalid(
                    "level_rewards",
                    "rewards must be strictly decreasing in severity level",
                ));
            }
        }
        if !(settings.belief_threshold > 0.0 && settings.belief_threshold <= 1.0) {
            return Err(invalid("belief_threshold", "must lie in (0, 1]"));
        }
        if settings.idle_reward < 0.0 {
            return Err(invalid("idle_reward", "must be non-negative"));
        }
        if settings.excess_penalty < 0.0 {
            return Err(invalid("excess_penalty", "must be non-negative"));
        }
        if settings.traversing_cost > 0.0 {
            return Err(invalid("traversing_cost", "must be non-positive"));
        }
        let cost_matrix = build_cost_matrix(&scenario.actions, settings.traversing_cost);
        Ok(RewardConfig {
            settings,
            cost_matrix,
        })
    }

    /// One validated config per agent: the base settings with each agent's
    /// override block applied.
    pub fn per_agent(base: &RewardSettings, scenario: &Scenario) -> Result<Vec<Self>, RewardError> {
        scenario
            .config()
            .agents
            .iter()
            .map(|agent| {
                let settings = match &agent.reward {
                    Some(overrides) => base.with_overrides(overrides),
                    None => base.clone(),
                };
                RewardConfig::new(settings, scenario)
            })
            .collect()
    }

    pub fn settings(&self) -> &RewardSettings {
        &self.settings
    }

    pub fn cost_matrix(&self) -> &CostMatrix {
        &self.cost_matrix
    }

    pub fn cost(&self, from: Action, to: Action) -> f64 {
        self.cost_matrix.get(from, to)
    }

    /// Whether load management stays a strictly secondary objective: the
    /// largest per-step load term must be smaller than the smallest gap
    /// between consecutive level rewards. The high-penalty presets violate
    /// this deliberately.
    pub fn load_management_is_secondary(&self) -> bool {
        let min_gap = self
            .settings
            .level_rewards
            .windows(2)
            .map(|pair| pair[0] - pair[1])
            .fold(f64::INFINITY, f64::min);
        self.settings.idle_reward
            + self.settings.excess_penalty
            + self.settings.traversing_cost.abs()
            < min_gap
    }

    /// Belief-dependent completion reward: the mean over tasks of the reward
    /// at each task's believed level. A task with no level believed strongly
    /// enough contributes the worst level's reward.
    pub fn completion_reward(&self, belief: &BeliefState) -> f64 {
        let rewards = &self.settings.level_rewards;
        let worst = *rewards.last().expect("level rewards validated non-empty");
        let total: f64 = belief
            .rows()
            .map(|row| match believed_level(row, self.settings.belief_threshold) {
                Some(level) => rewards[level as usize],
                None => worst,
            })
            .sum();
        total / belief.num_tasks() as f64
    }

    /// Idle incentive and excess-capability penalty for one decision.
    pub fn idle_incentive(
        &self,
        scenario: &Scenario,
        agent: usize,
        belief: &BeliefState,
        action: Action,
    ) -> f64 {
        if scenario.actions.is_idle(action) {
            return self.settings.idle_reward;
        }
        let task = scenario
            .actions
            .task_of(action)
            .expect("non-idle actions are tasks");
        let capability = scenario.agents[agent]
            .capability
            .of(scenario.tasks[task].task_type);
        match believed_level(belief.task(task), self.settings.belief_threshold) {
            Some(level) if capability >= level + self.settings.excess_margin => {
                -self.settings.excess_penalty
            }
            _ => 0.0,
        }
    }

    /// Total per-step reward for choosing `action` with previous assignment
    /// `previous` under belief `belief`. The action must come from the
    /// reduced action space, so the result is always finite.
    pub fn total_reward(
        &self,
        scenario: &Scenario,
        agent: usize,
        previous: Action,
        belief: &BeliefState,
        action: Action,
    ) -> f64 {
        let cost = self.cost(previous, action);
        assert!(
            cost.is_finite(),
            "action {} lies outside the reduced action space of {}",
            scenario.actions.label(action),
            scenario.actions.label(previous)
        );
        self.completion_reward(belief)
            + self.idle_incentive(scenario, agent, belief, action)
            + cost
    }
}
