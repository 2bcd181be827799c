//! Prototype of the toy optimality check: a one-agent, one-task world with a
//! deterministic kernel, where the trained greedy policy can be compared with
//! exhaustive search over stationary policies on the reachable knowledge
//! points.

use brigade::prelude::*;
use std::collections::BTreeSet;

const TOY: &str = r#"
locations = ["station"]
idle_locations = ["station"]

[[tasks]]
id = 1
location = "station"
task_type = "fire"
initial_level = 4

[[agents]]
id = 1
sensing = 5
communication = 5
capability = { fire = 5, rescue = 0 }
"#;

fn toy_rewards() -> RewardSettings {
    RewardSettings {
        level_rewards: vec![100.0, 25.0, 10.0, 5.0, 0.0],
        belief_threshold: 0.8,
        idle_reward: 3.0,
        excess_penalty: 0.0,
        excess_margin: 2,
        traversing_cost: 0.0,
    }
}

/// Knowledge points of the toy: (level, previously-working). Deterministic
/// transitions: working reduces the level by one, idling freezes it.
fn next_point(point: (u8, bool), work: bool) -> (u8, bool) {
    if work {
        (point.0.saturating_sub(1), true)
    } else {
        (point.0, false)
    }
}

fn reward(point: (u8, bool), work: bool, rewards: &[f64], idle: f64) -> f64 {
    rewards[point.0 as usize] + if work { 0.0 } else { idle }
}

fn reachable_points(start: (u8, bool)) -> Vec<(u8, bool)> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![start];
    while let Some(point) = stack.pop() {
        if seen.insert(point) {
            stack.push(next_point(point, true));
            stack.push(next_point(point, false));
        }
    }
    seen.into_iter().collect()
}

/// Value of a stationary policy from one start over the full horizon.
fn policy_value(
    policy: &[bool],
    points: &[(u8, bool)],
    start: (u8, bool),
    horizon: usize,
    gamma: f64,
    rewards: &[f64],
    idle: f64,
) -> f64 {
    let index = |p: (u8, bool)| points.iter().position(|&q| q == p).unwrap();
    let mut point = start;
    let mut value = 0.0;
    let mut discount = 1.0;
    for _ in 0..horizon {
        let work = policy[index(point)];
        value += discount * reward(point, work, rewards, idle);
        discount *= gamma;
        point = next_point(point, work);
    }
    value
}

fn main() {
    let episodes: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let seeds: Vec<u64> = std::env::args()
        .skip(2)
        .map(|s| s.parse().unwrap())
        .collect();
    let seeds = if seeds.is_empty() { vec![1, 2, 3, 4, 5] } else { seeds };

    let scenario = Scenario::from_toml_str(TOY).unwrap();
    let settings = toy_rewards();
    let rewards = RewardConfig::per_agent(&settings, &scenario).unwrap();

    let start = (4u8, false);
    let points = reachable_points(start);
    println!("reachable knowledge points: {points:?}");

    // Exhaustive stationary-policy search: best value at each point and the
    // action(s) achieving it.
    let level_rewards = &settings.level_rewards;
    let horizon = scenario.horizon();
    let gamma = scenario.discount();
    let num = points.len();
    let mut best_value = vec![f64::NEG_INFINITY; num];
    let mut best_actions: Vec<BTreeSet<bool>> = vec![BTreeSet::new(); num];
    for mask in 0u32..(1 << num) {
        let policy: Vec<bool> = (0..num).map(|i| mask & (1 << i) != 0).collect();
        for (i, &point) in points.iter().enumerate() {
            let value = policy_value(
                &policy, &points, point, horizon, gamma, level_rewards, settings.idle_reward,
            );
            if value > best_value[i] + 1e-9 {
                best_value[i] = value;
                best_actions[i] = BTreeSet::from([policy[i]]);
            } else if (value - best_value[i]).abs() <= 1e-9 {
                best_actions[i].insert(policy[i]);
            }
        }
    }
    for (i, point) in points.iter().enumerate() {
        println!(
            "point {point:?}: optimal value {:.3}, optimal action(s) {:?}",
            best_value[i], best_actions[i]
        );
        assert_eq!(best_actions[i].len(), 1, "optimal action not unique at {point:?}");
    }

    let lr: f64 = std::env::var("TOY_LR").ok().and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let batch: usize = std::env::var("TOY_BATCH").ok().and_then(|s| s.parse().ok()).unwrap_or(32);
    let clip: f64 = std::env::var("TOY_CLIP").ok().and_then(|s| s.parse().ok()).unwrap_or(10.0);
    println!("lr {lr}, batch {batch}, clip {clip}");
    for seed in seeds {
        let config = TrainConfig {
            learning_rate: lr,
            batch_size: batch,
            grad_clip_norm: clip,
            ..TrainConfig::for_scenario(&scenario).with_episodes(episodes)
        }
        .with_seed(seed);
        let result = train(&scenario, &rewards, &config);
        if std::env::var("TOY_DEBUG").is_ok() {
            for &(level, worked) in &points {
                let knowledge = KnowledgeState {
                    belief: BeliefState::point_mass(scenario.num_levels(), &[level]),
                    previous_assignment: if worked { Action(0) } else { Action(1) },
                };
                let q = result.nets[0].forward(&encode(&knowledge, &scenario.actions));
                println!(
                    "  ({level}, worked={worked}): Q(work) {:.3} Q(idle) {:.3} gap {:+.3}",
                    q[0], q[1], q[1] - q[0]
                );
            }
            let tail: Vec<f64> = result.log.iter().rev().take(50).map(|s| s.mean_loss).collect();
            println!("  last-50-episode mean loss: {:.4}", tail.iter().sum::<f64>() / 50.0);
        }
        let policy = greedy_policy(&result.nets[0]);
        let mut mismatches = Vec::new();
        for (i, &(level, worked)) in points.iter().enumerate() {
            let knowledge = KnowledgeState {
                belief: BeliefState::point_mass(scenario.num_levels(), &[level]),
                previous_assignment: if worked { Action(0) } else { Action(1) },
            };
            let action = policy.action(&knowledge, &scenario);
            let works = action == Action(0);
            let optimal = *best_actions[i].iter().next().unwrap();
            if works != optimal {
                mismatches.push((level, worked, works, optimal));
            }
        }
        println!(
            "seed {seed}, {episodes} episodes: {}",
            if mismatches.is_empty() {
                "MATCHES the oracle at every point".to_string()
            } else {
                format!("mismatches: {mismatches:?}")
            }
        );
    }
}
