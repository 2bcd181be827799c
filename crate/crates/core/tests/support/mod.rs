//! Shared helpers for the integration and acceptance suites: a brute-force
//! joint-state Bayes filter used as the oracle for the factored belief
//! update, and generators for small randomized filtering scenarios.

use brigade::env::{message_likelihood, observation_likelihood, transition_kernel, Message, Observation};
use brigade::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exhaustive belief over the joint demand space: one probability per point
/// of `L^p`. Updates enumerate every joint transition and every joint state's
/// likelihood, then marginalize; no factorization shortcuts.
pub struct JointBelief {
    num_tasks: usize,
    num_levels: usize,
    probs: Vec<f64>,
}

impl JointBelief {
    /// Start from the product of the factored rows.
    pub fn from_factored(belief: &BeliefState) -> Self {
        let num_tasks = belief.num_tasks();
        let num_levels = belief.num_levels();
        let size = num_levels.pow(num_tasks as u32);
        let mut probs = vec![1.0; size];
        for (state, p) in probs.iter_mut().enumerate() {
            for (task, level) in decode_state(state, num_tasks, num_levels).into_iter().enumerate()
            {
                *p *= belief.task(task)[level];
            }
        }
        JointBelief {
            num_tasks,
            num_levels,
            probs,
        }
    }

    pub fn marginal(&self, task: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.num_levels];
        for (state, &p) in self.probs.iter().enumerate() {
            let levels = decode_state(state, self.num_tasks, self.num_levels);
            row[levels[task]] += p;
        }
        row
    }

    /// One joint Bayes step under the same modeling conventions as the
    /// factored filter: per-task kernels given the joint capability, with
    /// rescue kernels averaged over the *marginal* belief on the coupled
    /// fire level, then the product of all observation and message
    /// likelihoods, then one global renormalization.
    pub fn update(
        &mut self,
        assignment: &[Action],
        own_obs: &Observation,
        messages: &[Message],
        scenario: &Scenario,
    ) {
        let (p, levels) = (self.num_tasks, self.num_levels);

        // Per-task transition matrices under the expected-kernel convention.
        let mut kernels: Vec<Vec<Vec<f64>>> = Vec::with_capacity(p);
        for task in 0..p {
            let cap = brigade::env::joint_capability(assignment, scenario, task);
            let mut matrix = vec![vec![0.0; levels]; levels];
            for demand in 0..levels {
                let row = match scenario.tasks[task].coupled_fire {
                    None => transition_kernel(scenario, task, demand as u8, cap, None),
                    Some(fire) => {
                        let fire_belief = self.marginal(fire);
                        let mut expected = vec![0.0; levels];
                        for (fire_level, &weight) in fire_belief.iter().enumerate() {
                            if weight == 0.0 {
                                continue;
                            }
                            let kernel = transition_kernel(
                                scenario,
                                task,
                                demand as u8,
                                cap,
                                Some(fire_level as u8),
                            );
                            for (next, &q) in kernel.iter().enumerate() {
                                expected[next] += weight * q;
                            }
                        }
                        expected
                    }
                };
                matrix[demand] = row;
            }
            kernels.push(matrix);
        }

        // Joint prediction: enumerate every (state, next state) pair.
        let size = self.probs.len();
        let mut predicted = vec![0.0; size];
        for (state, &mass) in self.probs.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let from = decode_state(state, p, levels);
            for (next_state, slot) in predicted.iter_mut().enumerate() {
                let to = decode_state(next_state, p, levels);
                let mut prob = mass;
                for task in 0..p {
                    prob *= kernels[task][from[task]][to[task]];
                }
                *slot += prob;
            }
        }

        // Joint likelihood of the evidence at every next state.
        let mut posterior = predicted;
        for (state, mass) in posterior.iter_mut().enumerate() {
            if *mass == 0.0 {
                continue;
            }
            let point = decode_state(state, p, levels);
            if let Some(sighting) = own_obs.sighting {
                let sensing = scenario.agents[own_obs.agent].sensing;
                *mass *= observation_likelihood(
                    sighting.level,
                    point[sighting.task] as u8,
                    sensing,
                    levels,
                );
            }
            for message in messages {
                if message.sender == own_obs.agent {
                    continue;
                }
                *mass *= message_likelihood(
                    message.reported_level,
                    point[message.task] as u8,
                    message.sender_communication,
                    levels,
                );
            }
        }

        let total: f64 = posterior.iter().sum();
        assert!(total > 0.0, "oracle histories must keep positive mass");
        for p in posterior.iter_mut() {
            *p /= total;
        }
        self.probs = posterior;
    }
}

fn decode_state(mut state: usize, num_tasks: usize, num_levels: usize) -> Vec<usize> {
    let mut levels = Vec::with_capacity(num_tasks);
    for _ in 0..num_tasks {
        levels.push(state % num_levels);
        state /= num_levels;
    }
    levels
}

/// A small random filtering scenario: one or two tasks, two or three levels,
/// a couple of agents with imperfect sensing and communication so every
/// likelihood stays strictly positive.
pub fn random_filter_scenario<R: Rng>(rng: &mut R) -> Scenario {
    let num_levels = rng.gen_range(2..=3u8);
    let layout = rng.gen_range(0..4u8);
    let mut text = String::new();
    let two_locations = layout == 2;
    if two_locations {
        text.push_str("locations = [\"a\", \"b\"]\nidle_locations = [\"a\", \"b\"]\n");
    } else {
        text.push_str("locations = [\"a\"]\nidle_locations = [\"a\"]\n");
    }
    text.push_str(&format!("num_levels = {num_levels}\n"));
    text.push_str(&format!("fire_block_threshold = {}\n", rng.gen_range(0..num_levels)));
    text.push_str(&format!("rescue_success_prob = {:.2}\n", rng.gen_range(0.1..0.9)));
    if rng.gen::<bool>() {
        text.push_str(&format!("growth_prob = {:.2}\n", rng.gen_range(0.05..0.4)));
    }
    if rng.gen::<bool>() {
        text.push_str("uniform_prior = true\n");
    }

    let task = |id: u32, loc: &str, ty: &str, level: u8, coupled: Option<u32>| {
        let mut block = format!(
            "[[tasks]]\nid = {id}\nlocation = \"{loc}\"\ntask_type = \"{ty}\"\ninitial_level = {level}\n"
        );
        if let Some(fire) = coupled {
            block.push_str(&format!("coupled_fire_task = {fire}\n"));
        }
        block
    };
    let first_level = rng.gen_range(0..num_levels);
    match layout {
        // One fire task.
        0 => text.push_str(&task(1, "a", "fire", first_level, None)),
        // Fire plus coupled rescue at the same location.
        1 => {
            text.push_str(&task(1, "a", "fire", first_level, None));
            text.push_str(&task(2, "a", "rescue", rng.gen_range(0..num_levels), Some(1)));
        }
        // Two independent fires at different locations.
        2 => {
            text.push_str(&task(1, "a", "fire", first_level, None));
            text.push_str(&task(2, "b", "fire", rng.gen_range(0..num_levels), None));
        }
        // Two independent fires at the same location.
        _ => {
            text.push_str(&task(1, "a", "fire", first_level, None));
            text.push_str(&task(2, "a", "fire", rng.gen_range(0..num_levels), None));
        }
    }

    for id in 1..=rng.gen_range(2..=3u32) {
        text.push_str(&format!(
            "[[agents]]\nid = {id}\nsensing = {}\ncommunication = {}\ncapability = {{ fire = {}, rescue = {} }}\n",
            rng.gen_range(0..=4),
            rng.gen_range(0..=4),
            rng.gen_range(0..=3),
            rng.gen_range(0..=3),
        ));
    }
    Scenario::from_toml_str(&text).expect("generated filter scenario is valid")
}

/// Drive the factored filter and the joint oracle through the same history of
/// a real world rollout under random assignments, and return the largest
/// absolute difference between the factored rows and the joint marginals seen
/// anywhere. Observations and messages come from the actual generative
/// process, which keeps the true level inside the belief support so the
/// zero-mass fallback never fires.
pub fn filter_history_max_divergence(seed: u64, steps: usize) -> f64 {
    let mut rng = rng(seed);
    let scenario = random_filter_scenario(&mut rng);
    let mut world = brigade::env::WorldState::initial(&scenario);
    let mut factored = initial_belief(&scenario);
    let mut oracle = JointBelief::from_factored(&factored);
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        let assignment: Vec<Action> = (0..scenario.num_agents())
            .map(|_| Action(rng.gen_range(0..scenario.actions.len())))
            .collect();
        world = brigade::env::step_world(&world, &assignment, &scenario, &mut rng);
        let observations: Vec<Observation> = (0..scenario.num_agents())
            .map(|agent| brigade::env::observe(agent, &world, assignment[agent], &scenario, &mut rng))
            .collect();
        let messages = brigade::env::broadcast(&observations, &scenario);
        let own_obs = observations[0];

        let update = update_belief(&factored, &assignment, &own_obs, &messages, &scenario);
        assert_eq!(update.zero_mass_fallbacks, 0, "history unexpectedly hit zero mass");
        factored = update.belief;
        oracle.update(&assignment, &own_obs, &messages, &scenario);
        for task in 0..scenario.num_tasks() {
            let marginal = oracle.marginal(task);
            for (level, &p) in factored.task(task).iter().enumerate() {
                worst = worst.max((p - marginal[level]).abs());
            }
        }
    }
    worst
}
