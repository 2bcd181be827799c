//! Ground-truth world dynamics, observation generation, and message broadcast.
//!
//! The world state is the vector of true task severity levels, hidden from the
//! agents. Levels are reduced stochastically by the joint capability assigned
//! to each task; level 0 is absorbing. Agents observe only the task they are
//! assigned to, through a sensing-dependent noise model, and broadcast their
//! observations to the whole team.

use crate::scenario::{Action, Scenario, TaskType};
use rand::Rng;

/// True severity level per task, hidden from the agents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldState {
    pub levels: Vec<u8>,
    pub step: usize,
}

impl WorldState {
    pub fn initial(scenario: &Scenario) -> Self {
        WorldState {
            levels: scenario.tasks.iter().map(|t| t.initial_level).collect(),
            step: 0,
        }
    }

    /// The operation is complete once every task sits at level 0.
    pub fn all_complete(&self) -> bool {
        self.levels.iter().all(|&l| l == 0)
    }
}

/// What one agent saw this step: nothing while idling, otherwise the level of
/// its assigned task filtered through sensing noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub agent: usize,
    pub sighting: Option<Sighting>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sighting {
    pub task: usize,
    pub level: u8,
}

/// A broadcast observation, tagged with the sender's communication level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub sender: usize,
    pub sender_communication: u8,
    pub task: usize,
    pub reported_level: u8,
}

/// Probability that an agent with this sensing level observes the true level.
pub fn sensing_accuracy(sensing: u8) -> f64 {
    0.5 + 0.1 * f64::from(sensing)
}

/// Probability that a report from an agent with this communication level is
/// taken to be correct.
pub fn communication_trust(communication: u8) -> f64 {
    0.5 + 0.1 * f64::from(communication)
}

/// Joint capability on `task`: the capped sum of the task-relevant capability
/// of every agent assigned to it.
pub fn joint_capability(assignment: &[Action], scenario: &Scenario, task: usize) -> u8 {
    assert!(task < scenario.num_tasks(), "unknown task index {task}");
    assert_eq!(
        assignment.len(),
        scenario.num_agents(),
        "assignment length does not match the team size"
    );
    let task_type = scenario.tasks[task].task_type;
    let sum: u32 = assignment
        .iter()
        .zip(&scenario.agents)
        .filter(|(action, _)| scenario.actions.task_of(**action) == Some(task))
        .map(|(_, agent)| u32::from(agent.capability.of(task_type)))
        .sum();
    sum.min(u32::from(scenario.max_joint_capability())) as u8
}

/// Binomial probability mass function, computed by the Pascal recurrence so it
/// stays exact-to-rounding without transcendental calls.
fn binomial_pmf(trials: u8, success: f64) -> Vec<f64> {
    let mut pmf = vec![1.0];
    for _ in 0..trials {
        let mut next = vec![0.0; pmf.len() + 1];
        for (k, &p) in pmf.iter().enumerate() {
            next[k] += p * (1.0 - success);
            next[k + 1] += p * success;
        }
        pmf = next;
    }
    pmf
}

/// Distribution over the next severity level of one task.
///
/// Fire demand drops by exactly one level with probability `cap / max_cap`;
/// an unattended fire may grow by one level with probability `growth_prob`.
/// Rescue demand is frozen while the coupled fire is above the block
/// threshold; otherwise each capability unit rescues independently with
/// probability `rescue_success_prob` and the demand drops by the number of
/// successes. Level 0 is absorbing.
pub fn transition_kernel(
    scenario: &Scenario,
    task: usize,
    demand: u8,
    joint_cap: u8,
    coupled_fire_level: Option<u8>,
) -> Vec<f64> {
    let levels = scenario.num_levels();
    assert!((demand as usize) < levels, "demand outside [0, L)");
    assert!(
        joint_cap <= scenario.max_joint_capability(),
        "joint capability exceeds the cap"
    );
    let mut dist = vec![0.0; levels];
    if demand == 0 {
        dist[0] = 1.0;
        return dist;
    }
    let d = demand as usize;
    match scenario.tasks[task].task_type {
        TaskType::Fire => {
            if joint_cap == 0 {
                let growth = scenario.growth_prob();
                if growth > 0.0 && d <= levels - 2 {
                    dist[d + 1] = growth;
                    dist[d] = 1.0 - growth;
                } else {
                    dist[d] = 1.0;
                }
            } else {
                let reduce =
                    f64::from(joint_cap) / f64::from(scenario.max_joint_capability());
                dist[d - 1] = reduce;
                dist[d] = 1.0 - reduce;
            }
        }
        TaskType::Rescue => {
            let fire = coupled_fire_level
                .expect("rescue transitions require the coupled fire level");
            if fire > scenario.fire_block_threshold() {
                dist[d] = 1.0;
            } else {
                let pmf = binomial_pmf(joint_cap, scenario.rescue_success_prob());
                for (rescued, &p) in pmf.iter().enumerate() {
                    dist[d.saturating_sub(rescued)] += p;
                }
            }
        }
    }
    dist
}

fn sample_level<R: Rng>(dist: &[f64], rng: &mut R) -> u8 {
    let draw: f64 = rng.gen();
    let mut cumulative = 0.0;
    let mut last = 0;
    for (level, &p) in dist.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        cumulative += p;
        last = level;
        if draw < cumulative {
            return level as u8;
        }
    }
    last as u8
}

/// Sample the next world state under a joint assignment. Rescue coupling uses
/// the fire level of the *current* state; all tasks transition synchronously.
pub fn step_world<R: Rng>(
    state: &WorldState,
    assignment: &[Action],
    scenario: &Scenario,
    rng: &mut R,
) -> WorldState {
    let levels = (0..scenario.num_tasks())
        .map(|task| {
            let cap = joint_capability(assignment, scenario, task);
            let fire = scenario.tasks[task].coupled_fire.map(|f| state.levels[f]);
            let dist = transition_kernel(scenario, task, state.levels[task], cap, fire);
            sample_level(&dist, rng)
        })
        .collect();
    WorldState {
        levels,
        step: state.step + 1,
    }
}

/// Likelihood of observing `observed` when the task truly sits at
/// `true_level`: the true level with probability `sensing_accuracy`, the
/// remainder split uniformly over the adjacent levels (clipped to the range).
pub fn observation_likelihood(
    observed: u8,
    true_level: u8,
    sensing: u8,
    num_levels: usize,
) -> f64 {
    let accuracy = sensing_accuracy(sensing);
    if observed == true_level {
        return accuracy;
    }
    let mut adjacent = 0;
    if true_level > 0 {
        adjacent += 1;
    }
    if (true_level as usize) < num_levels - 1 {
        adjacent += 1;
    }
    let is_adjacent = observed + 1 == true_level || observed == true_level + 1;
    if is_adjacent && (observed as usize) < num_levels {
        (1.0 - accuracy) / f64::from(adjacent)
    } else {
        0.0
    }
}

/// Likelihood of a broadcast report given the true level: correct with
/// probability `communication_trust`, the remainder spread uniformly over the
/// other `L - 1` levels.
pub fn message_likelihood(
    reported: u8,
    true_level: u8,
    communication: u8,
    num_levels: usize,
) -> f64 {
    let trust = communication_trust(communication);
    if reported == true_level {
        trust
    } else {
        (1.0 - trust) / (num_levels as f64 - 1.0)
    }
}

/// Generate one agent's observation of the (post-transition) world. Idle
/// agents see nothing; assigned agents read their task's level through the
/// sensing noise model.
pub fn observe<R: Rng>(
    agent: usize,
    state: &WorldState,
    own_action: Action,
    scenario: &Scenario,
    rng: &mut R,
) -> Observation {
    assert!(scenario.actions.contains(own_action), "action outside the action space");
    let Some(task) = scenario.actions.task_of(own_action) else {
        return Observation { agent, sighting: None };
    };
    let true_level = state.levels[task];
    let accuracy = sensing_accuracy(scenario.agents[agent].sensing);
    let level = if rng.gen::<f64>() < accuracy {
        true_level
    } else {
        let below = true_level.checked_sub(1);
        let above = if (true_level as usize) < scenario.num_levels() - 1 {
            Some(true_level + 1)
        } else {
            None
        };
        match (below, above) {
            (Some(b), Some(a)) => {
                if rng.gen_range(0..2) == 0 {
                    b
                } else {
                    a
                }
            }
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (None, None) => unreachable!("at least two severity levels exist"),
        }
    };
    Observation {
        agent,
        sighting: Some(Sighting { task, level }),
    }
}

/// Broadcast every non-empty observation to the whole team, reliably.
pub fn broadcast(observations: &[Observation], scenario: &Scenario) -> Vec<Message> {
    observations
        .iter()
        .filter_map(|obs| {
            obs.sighting.map(|sighting| Message {
                sender: obs.agent,
                sender_communication: scenario.agents[obs.agent].communication,
                task: sighting.task,
                reported_level: sighting.level,
            })
        })
        .collect()
}
