//! Scenario configuration: the declarative world description, its validation,
//! and the action space derived from it.
//!
//! A scenario file (`.scn`, TOML) mirrors [`ScenarioConfig`] field for field.
//! [`ScenarioConfig::compile`] validates the document and resolves names to
//! indices, producing a [`Scenario`] that the rest of the crate works with.

use crate::reward::RewardSettings;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// Attribute levels (capabilities, sensing, communication) live in `[0, 5]`.
pub const MAX_ATTRIBUTE_LEVEL: u8 = 5;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse scenario file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl fmt::Display) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

/// The two kinds of work a task can demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    Fire,
    Rescue,
}

impl TaskType {
    pub const ALL: [TaskType; 2] = [TaskType::Fire, TaskType::Rescue];

    pub fn name(self) -> &'static str {
        match self {
            TaskType::Fire => "fire",
            TaskType::Rescue => "rescue",
        }
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Task-specific capability levels of one agent.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Capability {
    pub fire: u8,
    pub rescue: u8,
}

impl Capability {
    pub fn of(self, task_type: TaskType) -> u8 {
        match task_type {
            TaskType::Fire => self.fire,
            TaskType::Rescue => self.rescue,
        }
    }

    /// Sum of the task-specific capability levels.
    pub fn total(self) -> u8 {
        self.fire + self.rescue
    }
}

/// One task as declared in a scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskSpec {
    /// 1-based task id; tasks must be listed in id order.
    pub id: u32,
    pub location: String,
    pub task_type: TaskType,
    pub initial_level: u8,
    /// Rescue tasks reference the fire task at the same location.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupled_fire_task: Option<u32>,
}

/// One agent as declared in a scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentSpec {
    /// 1-based agent id; agents must be listed in id order.
    pub id: u32,
    pub capability: Capability,
    pub sensing: u8,
    pub communication: u8,
    /// Optional per-agent reward overrides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<crate::reward::RewardOverrides>,
}

fn default_num_levels() -> u8 {
    5
}
fn default_max_joint_capability() -> u8 {
    5
}
fn default_horizon() -> usize {
    30
}
fn default_fire_block_threshold() -> u8 {
    2
}
fn default_rescue_success_prob() -> f64 {
    0.5
}
fn default_discount() -> f64 {
    0.95
}

/// Declarative world description, mirroring the scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub locations: Vec<String>,
    /// One idle location per distinct task location.
    pub idle_locations: Vec<String>,
    pub tasks: Vec<TaskSpec>,
    pub agents: Vec<AgentSpec>,
    /// Number of severity levels `L`; levels run `0..L-1` with 0 = complete.
    #[serde(default = "default_num_levels")]
    pub num_levels: u8,
    /// Joint capability on a task is capped at this level.
    #[serde(default = "default_max_joint_capability")]
    pub max_joint_capability: u8,
    /// Steps per operation.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Rescue demand cannot reduce while the coupled fire is above this level.
    #[serde(default = "default_fire_block_threshold")]
    pub fire_block_threshold: u8,
    /// Per-capability-unit success probability of a rescue attempt.
    #[serde(default = "default_rescue_success_prob")]
    pub rescue_success_prob: f64,
    /// Probability that an unattended fire grows one level (0 disables growth).
    #[serde(default)]
    pub growth_prob: f64,
    /// Discount factor used as the default for training.
    #[serde(default = "default_discount")]
    pub discount: f64,
    /// Start agents with a uniform belief instead of the announced levels.
    #[serde(default)]
    pub uniform_prior: bool,
    /// Optional reward constants shipped with the scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<RewardSettings>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// A copy with all reward blocks stripped: the part of the document that
    /// describes the world itself. Checkpoints are fingerprinted against this
    /// so they stay valid across reward presets.
    fn world_view(&self) -> ScenarioConfig {
        let mut view = self.clone();
        view.reward = None;
        for agent in &mut view.agents {
            agent.reward = None;
        }
        view
    }

    /// Hex SHA-256 of the canonical serialization of the world description.
    pub fn fingerprint(&self) -> String {
        let canonical =
            toml::to_string(&self.world_view()).expect("scenario config serializes to TOML");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut out = String::with_capacity(64);
        for byte in digest {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    /// Validate the document and resolve names to indices.
    pub fn compile(self) -> Result<Scenario, ScenarioError> {
        if self.num_levels < 2 {
            return Err(invalid("num_levels", "at least 2 severity levels required"));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon", "must be at least 1"));
        }
        if self.max_joint_capability == 0 || self.max_joint_capability > MAX_ATTRIBUTE_LEVEL {
            return Err(invalid(
                "max_joint_capability",
                format!("must be in [1, {MAX_ATTRIBUTE_LEVEL}]"),
            ));
        }
        for (field, value) in [
            ("rescue_success_prob", self.rescue_success_prob),
            ("growth_prob", self.growth_prob),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(invalid(field, "probability must lie in [0, 1]"));
            }
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(invalid("discount", "must lie in (0, 1]"));
        }
        if self.locations.is_empty() {
            return Err(invalid("locations", "at least one location required"));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &self.locations {
            if !seen.insert(name.as_str()) {
                return Err(invalid("locations", format!("duplicate location `{name}`")));
            }
        }
        if self.tasks.is_empty() {
            return Err(invalid("tasks", "at least one task required"));
        }
        if self.agents.is_empty() {
            return Err(invalid("agents", "at least one agent required"));
        }

        let location_index = |name: &str| self.locations.iter().position(|l| l == name);

        let mut tasks = Vec::with_capacity(self.tasks.len());
        for (index, spec) in self.tasks.iter().enumerate() {
            if spec.id as usize != index + 1 {
                return Err(invalid(
                    "tasks.id",
                    format!("task ids must run 1..{} in order", self.tasks.len()),
                ));
            }
            let location = location_index(&spec.location).ok_or_else(|| {
                invalid("tasks.location", format!("unknown location `{}`", spec.location))
            })?;
            if spec.initial_level >= self.num_levels {
                return Err(invalid(
                    "tasks.initial_level",
                    format!("task {} starts outside [0, {})", spec.id, self.num_levels),
                ));
            }
            let coupled_fire = match (spec.task_type, spec.coupled_fire_task) {
                (TaskType::Fire, None) => None,
                (TaskType::Fire, Some(_)) => {
                    return Err(invalid(
                        "tasks.coupled_fire_task",
                        format!("fire task {} must not reference a coupled task", spec.id),
                    ))
                }
                (TaskType::Rescue, Some(fire_id)) => {
                    let fire = self
                        .tasks
                        .iter()
                        .position(|t| t.id == fire_id)
                        .ok_or_else(|| {
                            invalid(
                                "tasks.coupled_fire_task",
                                format!("rescue task {} references unknown task {fire_id}", spec.id),
                            )
                        })?;
                    if self.tasks[fire].task_type != TaskType::Fire {
                        return Err(invalid(
                            "tasks.coupled_fire_task",
                            format!("task {fire_id} is not a fire task"),
                        ));
                    }
                    if self.tasks[fire].location != spec.location {
                        return Err(invalid(
                            "tasks.coupled_fire_task",
                            format!("rescue task {} and fire task {fire_id} are at different locations", spec.id),
                        ));
                    }
                    Some(fire)
                }
                (TaskType::Rescue, None) => {
                    return Err(invalid(
                        "tasks.coupled_fire_task",
                        format!("rescue task {} must reference its fire task", spec.id),
                    ))
                }
            };
            tasks.push(Task {
                task_type: spec.task_type,
                location,
                initial_level: spec.initial_level,
                coupled_fire,
            });
        }

        // Idle locations: exactly one per distinct task location.
        let mut task_locations: Vec<usize> = tasks.iter().map(|t| t.location).collect();
        task_locations.sort_unstable();
        task_locations.dedup();
        if self.idle_locations.len() != task_locations.len() {
            return Err(invalid(
                "idle_locations",
                format!(
                    "expected one idle location per distinct task location ({} found, {} required)",
                    self.idle_locations.len(),
                    task_locations.len()
                ),
            ));
        }
        let mut idle_locations = Vec::with_capacity(self.idle_locations.len());
        for name in &self.idle_locations {
            let loc = location_index(name)
                .ok_or_else(|| invalid("idle_locations", format!("unknown location `{name}`")))?;
            if idle_locations.contains(&loc) {
                return Err(invalid("idle_locations", format!("duplicate idle location `{name}`")));
            }
            if !task_locations.contains(&loc) {
                return Err(invalid(
                    "idle_locations",
                    format!("idle location `{name}` has no tasks"),
                ));
            }
            idle_locations.push(loc);
        }

        let mut agents = Vec::with_capacity(self.agents.len());
        for (index, spec) in self.agents.iter().enumerate() {
            if spec.id as usize != index + 1 {
                return Err(invalid(
                    "agents.id",
                    format!("agent ids must run 1..{} in order", self.agents.len()),
                ));
            }
            for (field, level) in [
                ("capability.fire", spec.capability.fire),
                ("capability.rescue", spec.capability.rescue),
            ] {
                if level > self.max_joint_capability {
                    return Err(invalid(
                        field,
                        format!("agent {} exceeds level {}", spec.id, self.max_joint_capability),
                    ));
                }
            }
            for (field, level) in [("sensing", spec.sensing), ("communication", spec.communication)]
            {
                if level > MAX_ATTRIBUTE_LEVEL {
                    return Err(invalid(
                        field,
                        format!("agent {} exceeds level {MAX_ATTRIBUTE_LEVEL}", spec.id),
                    ));
                }
            }
            agents.push(Agent {
                capability: spec.capability,
                sensing: spec.sensing,
                communication: spec.communication,
            });
        }

        let actions = ActionSpace::new(&tasks, &idle_locations, &self.locations);
        let fingerprint = self.fingerprint();
        Ok(Scenario {
            tasks,
            agents,
            actions,
            fingerprint,
            config: self,
        })
    }
}

/// A task with names resolved to indices.
#[derive(Debug, Clone)]
pub struct Task {
    pub task_type: TaskType,
    pub location: usize,
    pub initial_level: u8,
    /// Index of the fire task this rescue task depends on.
    pub coupled_fire: Option<usize>,
}

/// An agent with names resolved to indices.
#[derive(Debug, Clone)]
pub struct Agent {
    pub capability: Capability,
    pub sensing: u8,
    pub communication: u8,
}

/// A validated scenario, ready for simulation.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: ScenarioConfig,
    pub tasks: Vec<Task>,
    pub agents: Vec<Agent>,
    pub actions: ActionSpace,
    fingerprint: String,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        ScenarioConfig::from_toml_str(text)?.compile()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        ScenarioConfig::from_path(path)?.compile()
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn num_levels(&self) -> usize {
        self.config.num_levels as usize
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    pub fn max_joint_capability(&self) -> u8 {
        self.config.max_joint_capability
    }

    pub fn fire_block_threshold(&self) -> u8 {
        self.config.fire_block_threshold
    }

    pub fn rescue_success_prob(&self) -> f64 {
        self.config.rescue_success_prob
    }

    pub fn growth_prob(&self) -> f64 {
        self.config.growth_prob
    }

    pub fn discount(&self) -> f64 {
        self.config.discount
    }

    pub fn uniform_prior(&self) -> bool {
        self.config.uniform_prior
    }

    /// Hex SHA-256 of the world description (reward blocks excluded).
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Distinct task types present, in a fixed order.
    pub fn task_types(&self) -> Vec<TaskType> {
        TaskType::ALL
            .into_iter()
            .filter(|ty| self.tasks.iter().any(|t| t.task_type == *ty))
            .collect()
    }

    /// Width of the Q-network input layer: `p * L + |G|`.
    pub fn feature_len(&self) -> usize {
        self.num_tasks() * self.num_levels() + self.actions.len()
    }
}

/// One assignment decision: a task or an idle location.
///
/// Actions index the full decision set `G`: indices `0..p` are the tasks in
/// id order, indices `p..p+q` the idle locations in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action(pub usize);

/// The full decision set `G` of a scenario and its geometry.
#[derive(Debug, Clone)]
pub struct ActionSpace {
    task_locations: Vec<usize>,
    idle_locations: Vec<usize>,
    labels: Vec<String>,
}

impl ActionSpace {
    fn new(tasks: &[Task], idle_locations: &[usize], location_names: &[String]) -> Self {
        let task_locations: Vec<usize> = tasks.iter().map(|t| t.location).collect();
        let mut labels = Vec::with_capacity(tasks.len() + idle_locations.len());
        for task in tasks {
            labels.push(format!("{}@{}", task.task_type, location_names[task.location]));
        }
        for &loc in idle_locations {
            labels.push(format!("idle@{}", location_names[loc]));
        }
        ActionSpace {
            task_locations,
            idle_locations: idle_locations.to_vec(),
            labels,
        }
    }

    /// Total number of actions `|G| = p + q`.
    pub fn len(&self) -> usize {
        self.task_locations.len() + self.idle_locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_tasks(&self) -> usize {
        self.task_locations.len()
    }

    pub fn num_idle(&self) -> usize {
        self.idle_locations.len()
    }

    pub fn actions(&self) -> impl Iterator<Item = Action> {
        (0..self.len()).map(Action)
    }

    pub fn contains(&self, action: Action) -> bool {
        action.0 < self.len()
    }

    pub fn is_idle(&self, action: Action) -> bool {
        action.0 >= self.num_tasks() && action.0 < self.len()
    }

    /// Task index of a task action, `None` for idle actions.
    pub fn task_of(&self, action: Action) -> Option<usize> {
        if action.0 < self.num_tasks() {
            Some(action.0)
        } else {
            None
        }
    }

    pub fn task_action(&self, task: usize) -> Action {
        assert!(task < self.num_tasks(), "unknown task index {task}");
        Action(task)
    }

    pub fn location_of(&self, action: Action) -> usize {
        if let Some(task) = self.task_of(action) {
            self.task_locations[task]
        } else {
            self.idle_locations[action.0 - self.num_tasks()]
        }
    }

    /// The idle action co-located with `location`.
    pub fn idle_at(&self, location: usize) -> Action {
        let slot = self
            .idle_locations
            .iter()
            .position(|&loc| loc == location)
            .expect("every task location has an idle location");
        Action(self.num_tasks() + slot)
    }

    /// The reduced action space given the previous assignment: all `p` tasks
    /// plus the single idle action at the previous assignment's location.
    pub fn reduced_actions(&self, previous: Action) -> Vec<Action> {
        assert!(self.contains(previous), "previous assignment outside the action space");
        let mut actions: Vec<Action> = (0..self.num_tasks()).map(Action).collect();
        actions.push(self.idle_at(self.location_of(previous)));
        actions
    }

    pub fn label(&self, action: Action) -> &str {
        &self.labels[action.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::two_site_scenario;

    #[test]
    fn compiles_the_two_site_scenario() {
        let scenario = two_site_scenario();
        assert_eq!(scenario.num_tasks(), 4);
        assert_eq!(scenario.num_agents(), 5);
        assert_eq!(scenario.actions.len(), 6);
        assert_eq!(scenario.num_levels(), 5);
        assert_eq!(scenario.feature_len(), 26);
        assert_eq!(scenario.task_types(), vec![TaskType::Fire, TaskType::Rescue]);
    }

    #[test]
    fn action_space_geometry() {
        let scenario = two_site_scenario();
        let actions = &scenario.actions;
        assert_eq!(actions.num_tasks(), 4);
        assert_eq!(actions.num_idle(), 2);
        assert!(actions.is_idle(Action(4)));
        assert!(!actions.is_idle(Action(3)));
        assert_eq!(actions.task_of(Action(2)), Some(2));
        assert_eq!(actions.task_of(Action(5)), None);
        assert_eq!(actions.location_of(Action(0)), 0);
        assert_eq!(actions.location_of(Action(3)), 1);
        assert_eq!(actions.idle_at(1), Action(5));
        assert_eq!(actions.label(Action(0)), "fire@site1");
        assert_eq!(actions.label(Action(5)), "idle@site2");
    }

    #[test]
    fn fingerprint_ignores_reward_blocks() {
        let base = two_site_scenario();
        let mut with_reward = base.config().clone();
        with_reward.reward = Some(crate::reward::RewardSettings::preset("idle_medium_trp").unwrap());
        assert_eq!(base.fingerprint(), with_reward.fingerprint());

        let mut other_world = base.config().clone();
        other_world.horizon = 31;
        assert_ne!(base.fingerprint(), other_world.fingerprint());
    }

    #[test]
    fn rejects_rescue_without_coupling() {
        let text = r#"
            locations = ["a"]
            idle_locations = ["a"]
            [[tasks]]
            id = 1
            location = "a"
            task_type = "rescue"
            initial_level = 2
            [[agents]]
            id = 1
            sensing = 3
            communication = 3
            capability = { fire = 1, rescue = 1 }
        "#;
        let err = Scenario::from_toml_str(text).unwrap_err();
        assert!(err.to_string().contains("coupled_fire_task"), "{err}");
    }

    #[test]
    fn rejects_mismatched_idle_locations() {
        let text = r#"
            locations = ["a", "b"]
            idle_locations = ["a"]
            [[tasks]]
            id = 1
            location = "a"
            task_type = "fire"
            initial_level = 2
            [[tasks]]
            id = 2
            location = "b"
            task_type = "fire"
            initial_level = 2
            [[agents]]
            id = 1
            sensing = 3
            communication = 3
            capability = { fire = 1, rescue = 1 }
        "#;
        let err = Scenario::from_toml_str(text).unwrap_err();
        assert!(err.to_string().contains("idle_locations"), "{err}");
    }

    #[test]
    fn rejects_out_of_range_levels() {
        let text = r#"
            locations = ["a"]
            idle_locations = ["a"]
            num_levels = 3
            [[tasks]]
            id = 1
            location = "a"
            task_type = "fire"
            initial_level = 3
            [[agents]]
            id = 1
            sensing = 3
            communication = 3
            capability = { fire = 1, rescue = 1 }
        "#;
        let err = Scenario::from_toml_str(text).unwrap_err();
        assert!(err.to_string().contains("initial_level"), "{err}");
    }

    #[test]
    fn reduced_actions_keep_only_the_local_idle() {
        let scenario = two_site_scenario();
        let actions = &scenario.actions;
        for previous in actions.actions() {
            let reduced = actions.reduced_actions(previous);
            assert_eq!(reduced.len(), actions.num_tasks() + 1);
            let idle: Vec<_> = reduced.iter().filter(|a| actions.is_idle(**a)).collect();
            assert_eq!(idle.len(), 1);
            assert_eq!(actions.location_of(*idle[0]), actions.location_of(previous));
        }
    }
}
