//! Per-agent knowledge state: a factored belief over task severity levels,
//! its Bayesian update, and the feature encoding fed to the Q-network.
//!
//! Each agent keeps one probability row per task. An update first pushes every
//! row through the transition kernel implied by the (commonly known) joint
//! assignment, then multiplies in the likelihood of the agent's own
//! observation and of every broadcast report, and renormalizes. Rescue rows
//! use the kernel averaged under the agent's current belief over the coupled
//! fire level, which keeps the representation factored per task.

use crate::env::{
    joint_capability, message_likelihood, observation_likelihood, transition_kernel, Message,
    Observation,
};
use crate::scenario::{Action, ActionSpace, Scenario, TaskType};

/// Factored belief: one probability row over severity levels per task.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    num_levels: usize,
    probs: Vec<f64>,
}

impl BeliefState {
    /// Point mass on `levels[j]` for each task.
    pub fn point_mass(num_levels: usize, levels: &[u8]) -> Self {
        let mut probs = vec![0.0; levels.len() * num_levels];
        for (task, &level) in levels.iter().enumerate() {
            assert!((level as usize) < num_levels, "level outside [0, L)");
            probs[task * num_levels + level as usize] = 1.0;
        }
        BeliefState { num_levels, probs }
    }

    pub fn uniform(num_tasks: usize, num_levels: usize) -> Self {
        BeliefState {
            num_levels,
            probs: vec![1.0 / num_levels as f64; num_tasks * num_levels],
        }
    }

    /// Build from explicit rows; each row must be a distribution over levels.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let num_levels = rows.first().map_or(0, Vec::len);
        assert!(num_levels > 0, "belief rows must be non-empty");
        let mut probs = Vec::with_capacity(rows.len() * num_levels);
        for row in rows {
            assert_eq!(row.len(), num_levels, "ragged belief rows");
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "belief row does not sum to 1");
            assert!(row.iter().all(|&p| p >= 0.0), "negative belief mass");
            probs.extend_from_slice(row);
        }
        BeliefState { num_levels, probs }
    }

    pub fn num_tasks(&self) -> usize {
        self.probs.len() / self.num_levels
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    /// The belief row of one task.
    pub fn task(&self, task: usize) -> &[f64] {
        &self.probs[task * self.num_levels..(task + 1) * self.num_levels]
    }

    fn task_mut(&mut self, task: usize) -> &mut [f64] {
        &mut self.probs[task * self.num_levels..(task + 1) * self.num_levels]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.num_levels)
    }

    /// Flat task-major, level-minor view of all rows.
    pub fn flat(&self) -> &[f64] {
        &self.probs
    }
}

/// What an agent knows: its belief over task levels plus its own previous
/// assignment. This pair is the Q-network input.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeState {
    pub belief: BeliefState,
    pub previous_assignment: Action,
}

/// Belief at the start of an operation: point mass on each task's announced
/// initial level, or uniform rows under `uniform_prior`.
pub fn initial_belief(scenario: &Scenario) -> BeliefState {
    if scenario.uniform_prior() {
        BeliefState::uniform(scenario.num_tasks(), scenario.num_levels())
    } else {
        let levels: Vec<u8> = scenario.tasks.iter().map(|t| t.initial_level).collect();
        BeliefState::point_mass(scenario.num_levels(), &levels)
    }
}

/// Result of one belief update.
#[derive(Debug, Clone)]
pub struct BeliefUpdate {
    pub belief: BeliefState,
    /// Number of task rows whose posterior mass vanished and fell back to the
    /// prediction-only distribution.
    pub zero_mass_fallbacks: usize,
}

/// Prediction step for one task row: the current row pushed through the
/// transition kernel. Rescue rows average the kernel over the agent's current
/// belief about the coupled fire level.
fn predict_row(belief: &BeliefState, scenario: &Scenario, task: usize, cap: u8) -> Vec<f64> {
    let levels = scenario.num_levels();
    let row = belief.task(task);
    let spec = &scenario.tasks[task];
    let mut predicted = vec![0.0; levels];
    match spec.task_type {
        TaskType::Fire => {
            for (demand, &mass) in row.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                let kernel = transition_kernel(scenario, task, demand as u8, cap, None);
                for (next, &p) in kernel.iter().enumerate() {
                    predicted[next] += mass * p;
                }
            }
        }
        TaskType::Rescue => {
            // The kernel depends on the fire level only through blocked vs.
            // unblocked, so the expectation splits into two parts.
            let fire = spec.coupled_fire.expect("rescue tasks are coupled");
            let fire_row = belief.task(fire);
            let threshold = scenario.fire_block_threshold() as usize;
            let blocked: f64 = fire_row
                .iter()
                .enumerate()
                .filter(|(level, _)| *level > threshold)
                .map(|(_, &p)| p)
                .sum();
            let unblocked = 1.0 - blocked;
            for (demand, &mass) in row.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                predicted[demand] += mass * blocked;
                if unblocked > 0.0 {
                    let kernel = transition_kernel(scenario, task, demand as u8, cap, Some(0));
                    for (next, &p) in kernel.iter().enumerate() {
                        predicted[next] += mass * unblocked * p;
                    }
                }
            }
        }
    }
    predicted
}

/// One Bayesian filter step for a single agent.
///
/// The joint assignment is treated as common knowledge (decisions are
/// broadcast alongside observations), so every agent can compute the joint
/// capability behind the prediction step. Messages sent by the agent itself
/// are skipped; its own observation already enters through the sensing
/// likelihood.
pub fn update_belief(
    belief: &BeliefState,
    assignment: &[Action],
    own_obs: &Observation,
    messages: &[Message],
    scenario: &Scenario,
) -> BeliefUpdate {
    let levels = scenario.num_levels();
    assert_eq!(belief.num_tasks(), scenario.num_tasks());
    assert_eq!(belief.num_levels(), levels);

    let mut next = belief.clone();
    let mut fallbacks = 0;
    for task in 0..scenario.num_tasks() {
        let cap = joint_capability(assignment, scenario, task);
        let predicted = predict_row(belief, scenario, task, cap);

        let mut posterior = predicted.clone();
        if let Some(sighting) = own_obs.sighting.filter(|s| s.task == task) {
            let sensing = scenario.agents[own_obs.agent].sensing;
            for (level, p) in posterior.iter_mut().enumerate() {
                *p *= observation_likelihood(sighting.level, level as u8, sensing, levels);
            }
        }
        for message in messages {
            if message.sender == own_obs.agent || message.task != task {
                continue;
            }
            for (level, p) in posterior.iter_mut().enumerate() {
                *p *= message_likelihood(
                    message.reported_level,
                    level as u8,
                    message.sender_communication,
                    levels,
                );
            }
        }

        let mass: f64 = posterior.iter().sum();
        let row = next.task_mut(task);
        if mass > 0.0 {
            for (slot, p) in row.iter_mut().zip(&posterior) {
                *slot = p / mass;
            }
        } else {
            // Impossible likelihood combination: fall back to the prediction.
            fallbacks += 1;
            let prediction_mass: f64 = predicted.iter().sum();
            for (slot, p) in row.iter_mut().zip(&predicted) {
                *slot = p / prediction_mass;
            }
        }
    }
    BeliefUpdate {
        belief: next,
        zero_mass_fallbacks: fallbacks,
    }
}

/// The unique level believed with probability at least `threshold`, if any.
/// For thresholds at or below 0.5 several levels may qualify; the lowest one
/// wins.
pub fn believed_level(task_belief: &[f64], threshold: f64) -> Option<u8> {
    debug_assert!(threshold > 0.0 && threshold <= 1.0);
    task_belief
        .iter()
        .position(|&p| p >= threshold)
        .map(|level| level as u8)
}

/// Encode a knowledge state as the Q-network input: all belief rows
/// (task-major, level-minor) followed by a one-hot of the previous
/// assignment. Length `p * L + |G|`.
pub fn encode(knowledge: &KnowledgeState, actions: &ActionSpace) -> Vec<f64> {
    let mut features = Vec::with_capacity(knowledge.belief.flat().len() + actions.len());
    features.extend_from_slice(knowledge.belief.flat());
    let start = features.len();
    features.resize(start + actions.len(), 0.0);
    assert!(actions.contains(knowledge.previous_assignment));
    features[start + knowledge.previous_assignment.0] = 1.0;
    features
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Sighting;
    use crate::testutil::{rng, single_task_scenario, two_site_scenario};
    use proptest::prelude::*;
    use rand::Rng;

    fn no_obs(agent: usize) -> Observation {
        Observation { agent, sighting: None }
    }

    #[test]
    fn initial_belief_is_a_point_mass_on_announced_levels() {
        let scenario = two_site_scenario();
        let belief = initial_belief(&scenario);
        for row in belief.rows() {
            assert_eq!(row, &[0.0, 0.0, 0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn initial_belief_on_a_completed_task() {
        let mut config = single_task_scenario().config().clone();
        config.tasks[0].initial_level = 0;
        let scenario = config.compile().unwrap();
        let belief = initial_belief(&scenario);
        assert_eq!(belief.task(0), &[1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn uniform_prior_override() {
        let mut config = two_site_scenario().config().clone();
        config.uniform_prior = true;
        let scenario = config.compile().unwrap();
        let belief = initial_belief(&scenario);
        for row in belief.rows() {
            for &p in row {
                assert!((p - 0.2).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn unattended_point_mass_stays_put() {
        let scenario = two_site_scenario();
        let belief = initial_belief(&scenario);
        let idle = scenario.actions.idle_at(0);
        let assignment = vec![idle; scenario.num_agents()];
        let update = update_belief(&belief, &assignment, &no_obs(0), &[], &scenario);
        assert_eq!(update.zero_mass_fallbacks, 0);
        assert_eq!(update.belief, belief);
    }

    #[test]
    fn fully_trusted_message_restricts_the_support() {
        let scenario = two_site_scenario();
        let mut config = scenario.config().clone();
        config.agents[1].communication = 5;
        let scenario = config.compile().unwrap();
        let belief = BeliefState::from_rows(&[
            vec![0.2; 5],
            vec![0.2; 5],
            vec![0.2; 5],
            vec![0.2; 5],
        ]);
        let idle = scenario.actions.idle_at(0);
        let assignment = vec![idle; scenario.num_agents()];
        let message = Message {
            sender: 1,
            sender_communication: 5,
            task: 0,
            reported_level: 2,
        };
        let update = update_belief(&belief, &assignment, &no_obs(0), &[message], &scenario);
        let row = update.belief.task(0);
        for (level, &p) in row.iter().enumerate() {
            if level == 2 {
                assert!((p - 1.0).abs() < 1e-12);
            } else {
                assert_eq!(p, 0.0);
            }
        }
    }

    #[test]
    fn own_messages_are_ignored() {
        let scenario = two_site_scenario();
        let belief = initial_belief(&scenario);
        let idle = scenario.actions.idle_at(0);
        let assignment = vec![idle; scenario.num_agents()];
        let own_message = Message {
            sender: 0,
            sender_communication: 3,
            task: 0,
            reported_level: 1,
        };
        let update = update_belief(&belief, &assignment, &no_obs(0), &[own_message], &scenario);
        assert_eq!(update.belief, belief);
    }

    #[test]
    fn zero_mass_falls_back_to_the_prediction() {
        // A perfectly trusted report contradicting a point-mass prediction.
        let mut config = two_site_scenario().config().clone();
        config.agents[1].communication = 5;
        let scenario = config.compile().unwrap();
        let belief = initial_belief(&scenario); // point mass on level 4
        let idle = scenario.actions.idle_at(0);
        let assignment = vec![idle; scenario.num_agents()];
        let message = Message {
            sender: 1,
            sender_communication: 5,
            task: 0,
            reported_level: 0,
        };
        let update = update_belief(&belief, &assignment, &no_obs(0), &[message], &scenario);
        assert_eq!(update.zero_mass_fallbacks, 1);
        assert_eq!(update.belief.task(0), belief.task(0));
    }

    #[test]
    fn update_depends_only_on_the_current_inputs() {
        // Two different histories that arrive at the same (b, a, z, m) must
        // produce bitwise identical posteriors.
        let scenario = two_site_scenario();
        let idle = scenario.actions.idle_at(0);
        let mut assignment = vec![idle; scenario.num_agents()];
        assignment[0] = Action(0);

        let obs = Observation {
            agent: 0,
            sighting: Some(Sighting { task: 0, level: 3 }),
        };
        let messages = [Message {
            sender: 2,
            sender_communication: 3,
            task: 0,
            reported_level: 3,
        }];

        // History A: start from the initial belief and update once.
        let belief_a =
            update_belief(&initial_belief(&scenario), &assignment, &obs, &messages, &scenario)
                .belief;
        // History B: reach the same belief through an idle no-op step first.
        let idle_step = update_belief(
            &initial_belief(&scenario),
            &vec![idle; scenario.num_agents()],
            &no_obs(0),
            &[],
            &scenario,
        )
        .belief;
        let belief_b = update_belief(&idle_step, &assignment, &obs, &messages, &scenario).belief;
        assert_eq!(belief_a, belief_b);
    }

    #[test]
    fn believed_level_picks_the_unique_qualifying_level() {
        assert_eq!(believed_level(&[0.9, 0.1, 0.0, 0.0, 0.0], 0.8), Some(0));
        assert_eq!(believed_level(&[0.4, 0.3, 0.3, 0.0, 0.0], 0.8), None);
        assert_eq!(believed_level(&[0.0, 0.0, 1.0, 0.0, 0.0], 0.8), Some(2));
        // Ties below 0.5 resolve to the lowest level.
        assert_eq!(believed_level(&[0.5, 0.5, 0.0], 0.5), Some(0));
    }

    #[test]
    fn encode_matches_the_input_layer_formula() {
        let scenario = two_site_scenario();
        let knowledge = KnowledgeState {
            belief: initial_belief(&scenario),
            previous_assignment: scenario.actions.idle_at(0),
        };
        let features = encode(&knowledge, &scenario.actions);
        assert_eq!(features.len(), 26);
        assert_eq!(features[20..], [0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn encode_small_example() {
        let scenario = single_task_scenario();
        // p = 1, L = 5 in the helper; build the p=1, L=2 case by hand.
        let _ = scenario;
        let belief = BeliefState::from_rows(&[vec![1.0, 0.0]]);
        let knowledge = KnowledgeState {
            belief,
            previous_assignment: Action(0),
        };
        // A one-task scenario has actions [task, idle].
        let scenario = single_task_scenario();
        let mut config = scenario.config().clone();
        config.num_levels = 2;
        config.tasks[0].initial_level = 1;
        let scenario = config.compile().unwrap();
        let features = encode(&knowledge, &scenario.actions);
        assert_eq!(features, vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn updated_rows_stay_on_the_simplex() {
        let scenario = two_site_scenario();
        let mut rng = rng(21);
        let mut belief = initial_belief(&scenario);
        for _ in 0..100_000 {
            let assignment: Vec<Action> = (0..scenario.num_agents())
                .map(|_| Action(rng.gen_range(0..scenario.actions.len())))
                .collect();
            let own_action = assignment[0];
            let own_obs = match scenario.actions.task_of(own_action) {
                Some(task) => Observation {
                    agent: 0,
                    sighting: Some(Sighting { task, level: rng.gen_range(0..5) }),
                },
                None => no_obs(0),
            };
            let mut messages = Vec::new();
            for sender in 1..scenario.num_agents() {
                if rng.gen::<f64>() < 0.5 {
                    messages.push(Message {
                        sender,
                        sender_communication: rng.gen_range(0..=4),
                        task: rng.gen_range(0..scenario.num_tasks()),
                        reported_level: rng.gen_range(0..5),
                    });
                }
            }
            belief = update_belief(&belief, &assignment, &own_obs, &messages, &scenario).belief;
            for row in belief.rows() {
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() < 1e-9, "row drifted off the simplex: {row:?}");
                assert!(row.iter().all(|&p| p >= 0.0));
            }
        }
    }

    proptest! {
        #[test]
        fn encode_one_hot_block_sums_to_one(action in 0usize..6) {
            let scenario = two_site_scenario();
            let knowledge = KnowledgeState {
                belief: initial_belief(&scenario),
                previous_assignment: Action(action),
            };
            let features = encode(&knowledge, &scenario.actions);
            let one_hot: f64 = features[20..].iter().sum();
            prop_assert!((one_hot - 1.0).abs() < 1e-15);
        }

        #[test]
        fn distinct_knowledge_states_encode_distinctly(
            a in 0usize..6,
            b in 0usize..6,
            level_a in 0u8..5,
            level_b in 0u8..5,
        ) {
            let scenario = two_site_scenario();
            let make = |action: usize, level: u8| KnowledgeState {
                belief: BeliefState::point_mass(5, &[level, 4, 4, 4]),
                previous_assignment: Action(action),
            };
            let ka = make(a, level_a);
            let kb = make(b, level_b);
            let ea = encode(&ka, &scenario.actions);
            let eb = encode(&kb, &scenario.actions);
            prop_assert_eq!(ea == eb, a == b && level_a == level_b);
        }
    }
}
