//! Decentralized deep Q-learning over knowledge states.
//!
//! Every agent owns its own network, target network, replay buffer, and
//! reward function; coordination happens only through the environment and the
//! broadcast messages. One training episode runs the world for the full
//! horizon: agents pick decisions from their reduced action spaces by
//! epsilon-greedy, the world transitions once on the joint assignment, agents
//! observe, broadcast, update their knowledge states, store the transition,
//! and each trains on a random minibatch. Target networks are refreshed every
//! fixed number of environment steps.

use crate::belief::{encode, initial_belief, update_belief, KnowledgeState};
use crate::env::{broadcast, observe, step_world, WorldState};
use crate::net::{GradSample, QNet};
use crate::reward::RewardConfig;
use crate::scenario::{Action, Scenario};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

/// Training hyper-parameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub episodes: usize,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Episodes over which epsilon decays linearly from start to end.
    pub epsilon_decay_episodes: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Target networks are refreshed every this many environment steps.
    pub target_sync_period: usize,
    pub hidden_layers: Vec<usize>,
    pub grad_clip_norm: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults for a scenario: 5000 episodes, epsilon decaying over the
    /// first 80%, and the scenario's own discount factor.
    pub fn for_scenario(scenario: &Scenario) -> Self {
        let episodes = 5_000;
        TrainConfig {
            episodes,
            gamma: scenario.discount(),
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_episodes: episodes * 4 / 5,
            learning_rate: 1e-3,
            batch_size: 32,
            replay_capacity: 100_000,
            target_sync_period: 200,
            hidden_layers: vec![64, 64],
            grad_clip_norm: 10.0,
            seed: 42,
        }
    }

    /// Change the episode count, keeping the decay horizon at 80% of it.
    pub fn with_episodes(mut self, episodes: usize) -> Self {
        self.episodes = episodes;
        self.epsilon_decay_episodes = episodes * 4 / 5;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self, scenario: &Scenario) {
        assert!(self.gamma > 0.0 && self.gamma <= 1.0, "gamma outside (0, 1]");
        assert!((0.0..=1.0).contains(&self.epsilon_start));
        assert!((0.0..=1.0).contains(&self.epsilon_end));
        assert!(self.batch_size > 0, "batch size must be positive");
        assert!(self.replay_capacity > 0, "replay capacity must be positive");
        assert!(self.target_sync_period > 0, "sync period must be positive");
        assert!(self.learning_rate > 0.0);
        let _ = scenario;
    }

    /// Network layout for a scenario: `p*L + |G|` inputs, the configured
    /// hidden layers, and one Q-value per action.
    pub fn layer_dims(&self, scenario: &Scenario) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_layers.len() + 2);
        dims.push(scenario.feature_len());
        dims.extend_from_slice(&self.hidden_layers);
        dims.push(scenario.actions.len());
        dims
    }
}

/// One stored experience tuple.
#[derive(Debug, Clone)]
pub struct TransitionRecord {
    pub knowledge: KnowledgeState,
    pub action: Action,
    pub next: KnowledgeState,
    pub reward: f64,
    /// Set on the final step of an episode; terminal targets drop the
    /// bootstrap term.
    pub terminal: bool,
}

/// Fixed-capacity experience store with oldest-first eviction.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    records: VecDeque<TransitionRecord>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer {
            capacity,
            records: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn push(&mut self, record: TransitionRecord) {
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, index: usize) -> &TransitionRecord {
        &self.records[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &TransitionRecord> {
        self.records.iter()
    }

    /// Uniform sample of `count` records (with replacement).
    pub fn sample<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<&TransitionRecord> {
        assert!(!self.records.is_empty(), "sampling from an empty buffer");
        (0..count)
            .map(|_| &self.records[rng.gen_range(0..self.records.len())])
            .collect()
    }
}

/// Greedy action: the argmax of the Q-values restricted to the reduced action
/// space, ties broken toward the lowest action index.
pub fn greedy_action(net: &QNet, knowledge: &KnowledgeState, scenario: &Scenario) -> Action {
    let q = net.forward(&encode(knowledge, &scenario.actions));
    let reduced = scenario.actions.reduced_actions(knowledge.previous_assignment);
    let mut best = reduced[0];
    let mut best_q = q[best.0];
    for &action in &reduced[1..] {
        if q[action.0] > best_q {
            best = action;
            best_q = q[action.0];
        }
    }
    best
}

/// Epsilon-greedy action selection over the reduced action space.
pub fn select_action<R: Rng>(
    net: &QNet,
    knowledge: &KnowledgeState,
    epsilon: f64,
    scenario: &Scenario,
    rng: &mut R,
) -> Action {
    debug_assert!((0.0..=1.0).contains(&epsilon));
    if rng.gen::<f64>() < epsilon {
        let reduced = scenario.actions.reduced_actions(knowledge.previous_assignment);
        reduced[rng.gen_range(0..reduced.len())]
    } else {
        greedy_action(net, knowledge, scenario)
    }
}

/// Deterministic wrapper of a trained network.
pub struct GreedyPolicy<'a> {
    net: &'a QNet,
}

impl<'a> GreedyPolicy<'a> {
    pub fn action(&self, knowledge: &KnowledgeState, scenario: &Scenario) -> Action {
        greedy_action(self.net, knowledge, scenario)
    }
}

/// The greedy policy of a trained network.
pub fn greedy_policy(net: &QNet) -> GreedyPolicy<'_> {
    GreedyPolicy { net }
}

/// TD target for one record: `r + gamma * max Q_target(next)` over the next
/// state's reduced action space, or bare `r` on terminal records.
pub fn td_target(
    record: &TransitionRecord,
    target_net: &QNet,
    gamma: f64,
    scenario: &Scenario,
) -> f64 {
    if record.terminal {
        return record.reward;
    }
    let q = target_net.forward(&encode(&record.next, &scenario.actions));
    let best = scenario
        .actions
        .reduced_actions(record.next.previous_assignment)
        .into_iter()
        .map(|a| q[a.0])
        .fold(f64::NEG_INFINITY, f64::max);
    record.reward + gamma * best
}

/// One minibatch update. Computes targets from the target network, descends
/// the mean squared TD error on the taken actions with gradient-norm
/// clipping, and returns the pre-update loss.
pub fn train_step(
    net: &mut QNet,
    target_net: &QNet,
    batch: &[&TransitionRecord],
    gamma: f64,
    learning_rate: f64,
    grad_clip_norm: f64,
    scenario: &Scenario,
) -> f64 {
    assert!(!batch.is_empty(), "empty training batch");
    let inputs: Vec<Vec<f64>> = batch
        .iter()
        .map(|record| encode(&record.knowledge, &scenario.actions))
        .collect();
    let samples: Vec<GradSample<'_>> = batch
        .iter()
        .zip(&inputs)
        .map(|(record, input)| GradSample {
            input,
            action: record.action.0,
            target: td_target(record, target_net, gamma, scenario),
        })
        .collect();
    let (loss, mut grads) = net.loss_and_grads(&samples);
    let norm = grads.global_norm();
    if norm > grad_clip_norm {
        grads.scale(grad_clip_norm / norm);
    }
    net.apply_update(&grads, learning_rate);
    loss
}

/// Per-agent learner state.
#[derive(Debug, Clone)]
pub struct AgentLearner {
    pub net: QNet,
    pub target: QNet,
    pub buffer: ReplayBuffer,
}

/// Per-episode training statistics.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeStats {
    pub episode: usize,
    /// Mean minibatch loss across agents and steps (0 before training kicks in).
    pub mean_loss: f64,
    /// Mean over agents of the episode's summed reward.
    pub mean_reward: f64,
    pub epsilon: f64,
}

/// The training loop driver. Owns all per-agent learner state plus the
/// episode/step counters, so tests can drive it episode by episode.
pub struct Trainer<'a> {
    scenario: &'a Scenario,
    rewards: &'a [RewardConfig],
    config: TrainConfig,
    pub learners: Vec<AgentLearner>,
    rng: ChaCha8Rng,
    global_step: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(scenario: &'a Scenario, rewards: &'a [RewardConfig], config: TrainConfig) -> Self {
        config.validate(scenario);
        assert_eq!(
            rewards.len(),
            scenario.num_agents(),
            "one reward config per agent required"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let dims = config.layer_dims(scenario);
        let learners = (0..scenario.num_agents())
            .map(|_| {
                let net = QNet::new(&dims, &mut rng);
                AgentLearner {
                    target: net.clone(),
                    net,
                    buffer: ReplayBuffer::new(config.replay_capacity),
                }
            })
            .collect();
        Trainer {
            scenario,
            rewards,
            config,
            learners,
            rng,
            global_step: 0,
        }
    }

    /// Linear epsilon schedule over the decay horizon.
    pub fn epsilon_for(&self, episode: usize) -> f64 {
        let (start, end) = (self.config.epsilon_start, self.config.epsilon_end);
        if self.config.epsilon_decay_episodes == 0 {
            return end;
        }
        let progress = (episode as f64 / self.config.epsilon_decay_episodes as f64).min(1.0);
        start + (end - start) * progress
    }

    pub fn global_step(&self) -> usize {
        self.global_step
    }

    /// Knowledge states at the start of an operation: the initial belief and
    /// the first idle location as previous assignment (agents start resting).
    pub fn initial_knowledge(scenario: &Scenario) -> Vec<KnowledgeState> {
        let home = Action(scenario.actions.num_tasks());
        (0..scenario.num_agents())
            .map(|_| KnowledgeState {
                belief: initial_belief(scenario),
                previous_assignment: home,
            })
            .collect()
    }

    /// Run one full training episode and report its statistics.
    pub fn run_episode(&mut self, episode: usize) -> EpisodeStats {
        let scenario = self.scenario;
        let num_agents = scenario.num_agents();
        let epsilon = self.epsilon_for(episode);
        let mut world = WorldState::initial(scenario);
        let mut knowledge = Self::initial_knowledge(scenario);
        let mut reward_sums = vec![0.0; num_agents];
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;

        for step in 0..scenario.horizon() {
            let assignment: Vec<Action> = (0..num_agents)
                .map(|i| {
                    select_action(
                        &self.learners[i].net,
                        &knowledge[i],
                        epsilon,
                        scenario,
                        &mut self.rng,
                    )
                })
                .collect();

            let next_world = step_world(&world, &assignment, scenario, &mut self.rng);
            let observations: Vec<_> = (0..num_agents)
                .map(|i| observe(i, &next_world, assignment[i], scenario, &mut self.rng))
                .collect();
            let messages = broadcast(&observations, scenario);

            let terminal = step + 1 == scenario.horizon();
            for i in 0..num_agents {
                let update = update_belief(
                    &knowledge[i].belief,
                    &assignment,
                    &observations[i],
                    &messages,
                    scenario,
                );
                let reward = self.rewards[i].total_reward(
                    scenario,
                    i,
                    knowledge[i].previous_assignment,
                    &knowledge[i].belief,
                    assignment[i],
                );
                reward_sums[i] += reward;
                let next = KnowledgeState {
                    belief: update.belief,
                    previous_assignment: assignment[i],
                };
                self.learners[i].buffer.push(TransitionRecord {
                    knowledge: std::mem::replace(&mut knowledge[i], next.clone()),
                    action: assignment[i],
                    next,
                    reward,
                    terminal,
                });
            }

            for learner in &mut self.learners {
                if learner.buffer.len() < self.config.batch_size {
                    continue;
                }
                let batch = learner.buffer.sample(self.config.batch_size, &mut self.rng);
                let loss = train_step(
                    &mut learner.net,
                    &learner.target,
                    &batch,
                    self.config.gamma,
                    self.config.learning_rate,
                    self.config.grad_clip_norm,
                    scenario,
                );
                loss_sum += loss;
                loss_count += 1;
            }

            world = next_world;
            self.global_step += 1;
            if self.global_step % self.config.target_sync_period == 0 {
                for learner in &mut self.learners {
                    learner.target = learner.net.clone();
                }
            }
        }

        EpisodeStats {
            episode,
            mean_loss: if loss_count > 0 { loss_sum / loss_count as f64 } else { 0.0 },
            mean_reward: reward_sums.iter().sum::<f64>() / num_agents as f64,
            epsilon,
        }
    }

    pub fn into_nets(self) -> Vec<QNet> {
        self.learners.into_iter().map(|l| l.net).collect()
    }
}

/// Result of a full training run.
pub struct TrainResult {
    pub nets: Vec<QNet>,
    pub log: Vec<EpisodeStats>,
}

/// Train one network per agent over the configured number of episodes.
/// Single-threaded and bit-reproducible for a fixed seed.
pub fn train(scenario: &Scenario, rewards: &[RewardConfig], config: &TrainConfig) -> TrainResult {
    let mut trainer = Trainer::new(scenario, rewards, config.clone());
    let log = (0..config.episodes).map(|ep| trainer.run_episode(ep)).collect();
    TrainResult {
        nets: trainer.into_nets(),
        log,
    }
}
