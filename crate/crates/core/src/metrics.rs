//! Evaluation harness and resilience analysis: operation effectiveness, load
//! metrics, urgency-weighted agent importance, and inactivation studies.
//!
//! Evaluation rolls the trained greedy policies through full-horizon
//! operations. Completion is a recorded metric, not a stopping condition:
//! idle and reassignment counts accumulate only up to each trial's completion
//! step, while capability usage is accounted over the whole horizon.

use crate::belief::{update_belief, KnowledgeState};
use crate::env::{broadcast, observe, step_world, WorldState};
use crate::net::QNet;
use crate::qlearn::{greedy_action, Trainer};
use crate::scenario::{Action, Scenario, TaskType};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("task urgency is undefined: no task assignments occurred in any trial")]
    UrgencyUndefined,
}

/// Sub-stream kinds hung off one experiment seed.
#[derive(Debug, Clone, Copy)]
pub enum RngStream {
    Train,
    Eval,
    Ablate,
}

/// A named, per-index random stream derived from the experiment seed, so
/// trials stay independent and reproducible regardless of execution order.
pub fn substream(seed: u64, stream: RngStream, index: u64) -> ChaCha8Rng {
    let kind = match stream {
        RngStream::Train => 1u64,
        RngStream::Eval => 2,
        RngStream::Ablate => 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((kind << 32) | index);
    rng
}

/// Everything recorded during one evaluation trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTimeline {
    /// Decision per step per agent: `decisions[step][agent]`.
    pub decisions: Vec<Vec<Action>>,
    /// True severity levels: `levels[0]` before the first step, `levels[t+1]`
    /// after step `t`.
    pub levels: Vec<Vec<u8>>,
}

/// Aggregated evaluation results over `trials` independent rollouts.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub trials: usize,
    pub horizon: usize,
    /// Steps taken to complete all tasks, per trial; `None` when the horizon
    /// ran out first.
    pub completion_steps: Vec<Option<usize>>,
    /// Unused capability per agent per step, per trial: idling agents count
    /// their full task-specific capability sum as unused.
    pub unused_capability: Vec<f64>,
    /// Team idle decisions before completion, per trial.
    pub idle_counts: Vec<usize>,
    /// Team location changes before completion, per trial.
    pub reassignment_counts: Vec<usize>,
    pub timelines: Vec<TrialTimeline>,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

fn standard_error(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var =
        values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0);
    (var / values.len() as f64).sqrt()
}

impl EvalReport {
    pub fn completion_rate(&self) -> f64 {
        self.completion_steps.iter().filter(|s| s.is_some()).count() as f64
            / self.trials as f64
    }

    pub fn failure_rate(&self) -> f64 {
        1.0 - self.completion_rate()
    }

    /// Mean completion step over the completed trials only.
    pub fn mean_completion_step(&self) -> Option<f64> {
        let completed: Vec<f64> = self
            .completion_steps
            .iter()
            .flatten()
            .map(|&s| s as f64)
            .collect();
        if completed.is_empty() {
            None
        } else {
            Some(mean(&completed))
        }
    }

    pub fn stderr_completion_step(&self) -> f64 {
        let completed: Vec<f64> = self
            .completion_steps
            .iter()
            .flatten()
            .map(|&s| s as f64)
            .collect();
        standard_error(&completed)
    }

    pub fn mean_unused_capability(&self) -> f64 {
        mean(&self.unused_capability)
    }

    pub fn stderr_unused_capability(&self) -> f64 {
        standard_error(&self.unused_capability)
    }

    /// Unused capability as a fraction of the team's mean per-agent
    /// capability sum.
    pub fn unused_capability_fraction(&self, scenario: &Scenario) -> f64 {
        let mean_capability = scenario
            .agents
            .iter()
            .map(|a| f64::from(a.capability.total()))
            .sum::<f64>()
            / scenario.num_agents() as f64;
        self.mean_unused_capability() / mean_capability
    }

    pub fn mean_idle_count(&self) -> f64 {
        mean(&self.idle_counts.iter().map(|&c| c as f64).collect::<Vec<_>>())
    }

    pub fn stderr_idle_count(&self) -> f64 {
        standard_error(&self.idle_counts.iter().map(|&c| c as f64).collect::<Vec<_>>())
    }

    pub fn mean_reassignment_count(&self) -> f64 {
        mean(&self.reassignment_counts.iter().map(|&c| c as f64).collect::<Vec<_>>())
    }

    pub fn stderr_reassignment_count(&self) -> f64 {
        standard_error(
            &self.reassignment_counts.iter().map(|&c| c as f64).collect::<Vec<_>>(),
        )
    }
}

/// Run `trials` independent greedy rollouts. Agents listed in `inactive` are
/// forced to idle at their current location every step, without retraining;
/// they observe nothing and broadcast nothing.
pub fn evaluate(
    nets: &[QNet],
    scenario: &Scenario,
    trials: usize,
    seed: u64,
    inactive: &[usize],
) -> EvalReport {
    evaluate_with_stream(nets, scenario, trials, seed, RngStream::Eval, inactive)
}

pub fn evaluate_with_stream(
    nets: &[QNet],
    scenario: &Scenario,
    trials: usize,
    seed: u64,
    stream: RngStream,
    inactive: &[usize],
) -> EvalReport {
    assert_eq!(nets.len(), scenario.num_agents(), "one network per agent required");
    assert!(trials >= 1, "at least one trial required");
    assert!(
        inactive.iter().all(|&i| i < scenario.num_agents()),
        "inactive agent index out of range"
    );
    let num_agents = scenario.num_agents();
    let horizon = scenario.horizon();

    let mut completion_steps = Vec::with_capacity(trials);
    let mut unused_capability = Vec::with_capacity(trials);
    let mut idle_counts = Vec::with_capacity(trials);
    let mut reassignment_counts = Vec::with_capacity(trials);
    let mut timelines = Vec::with_capacity(trials);

    for trial in 0..trials {
        let mut rng = substream(seed, stream, trial as u64);
        let mut world = WorldState::initial(scenario);
        let mut knowledge = Trainer::initial_knowledge(scenario);
        let mut decisions: Vec<Vec<Action>> = Vec::with_capacity(horizon);
        let mut levels = vec![world.levels.clone()];
        let mut completion = if world.all_complete() { Some(0) } else { None };
        let mut unused = 0.0;
        let mut idle_count = 0usize;
        let mut reassignment_count = 0usize;

        for _step in 0..horizon {
            let assignment: Vec<Action> = (0..num_agents)
                .map(|i| {
                    if inactive.contains(&i) {
                        scenario
                            .actions
                            .idle_at(scenario.actions.location_of(knowledge[i].previous_assignment))
                    } else {
                        greedy_action(&nets[i], &knowledge[i], scenario)
                    }
                })
                .collect();

            for (i, &action) in assignment.iter().enumerate() {
                if scenario.actions.is_idle(action) {
                    unused += f64::from(scenario.agents[i].capability.total());
                    if completion.is_none() {
                        idle_count += 1;
                    }
                }
                let moved = scenario.actions.location_of(action)
                    != scenario.actions.location_of(knowledge[i].previous_assignment);
                if moved && completion.is_none() {
                    reassignment_count += 1;
                }
            }

            let next_world = step_world(&world, &assignment, scenario, &mut rng);
            let observations: Vec<_> = (0..num_agents)
                .map(|i| observe(i, &next_world, assignment[i], scenario, &mut rng))
                .collect();
            let messages = broadcast(&observations, scenario);
            for i in 0..num_agents {
                let update = update_belief(
                    &knowledge[i].belief,
                    &assignment,
                    &observations[i],
                    &messages,
                    scenario,
                );
                knowledge[i] = KnowledgeState {
                    belief: update.belief,
                    previous_assignment: assignment[i],
                };
            }

            decisions.push(assignment);
            levels.push(next_world.levels.clone());
            world = next_world;
            if completion.is_none() && world.all_complete() {
                completion = Some(world.step);
            }
        }

        completion_steps.push(completion);
        unused_capability.push(unused / (horizon * num_agents) as f64);
        idle_counts.push(idle_count);
        reassignment_counts.push(reassignment_count);
        timelines.push(TrialTimeline { decisions, levels });
    }

    EvalReport {
        trials,
        horizon,
        completion_steps,
        unused_capability,
        idle_counts,
        reassignment_counts,
        timelines,
    }
}

/// Average capability spent per task type over the evaluation episodes:
/// `u_k = (1/E) * sum over episodes and steps of c_k * [assigned to type k]`.
/// Ranges from 0 (always idle) to `c_k * h`.
pub fn capability_usage(report: &EvalReport, scenario: &Scenario) -> Vec<Vec<f64>> {
    let types = scenario.task_types();
    let mut usage = vec![vec![0.0; types.len()]; scenario.num_agents()];
    for timeline in &report.timelines {
        for step in &timeline.decisions {
            for (agent, &action) in step.iter().enumerate() {
                if let Some(task) = scenario.actions.task_of(action) {
                    let task_type = scenario.tasks[task].task_type;
                    let k = types.iter().position(|&t| t == task_type).unwrap();
                    usage[agent][k] +=
                        f64::from(scenario.agents[agent].capability.of(task_type));
                }
            }
        }
    }
    for row in &mut usage {
        for u in row.iter_mut() {
            *u /= report.trials as f64;
        }
    }
    usage
}

/// Task urgency weights: assignment counts per task type over all episodes,
/// steps, and agents, normalized to sum to one. More frequently allocated
/// types are treated as more urgent.
pub fn task_urgency(report: &EvalReport, scenario: &Scenario) -> Result<Vec<f64>, MetricsError> {
    let types = scenario.task_types();
    let mut counts = vec![0.0; types.len()];
    for timeline in &report.timelines {
        for step in &timeline.decisions {
            for &action in step {
                if let Some(task) = scenario.actions.task_of(action) {
                    let task_type = scenario.tasks[task].task_type;
                    let k = types.iter().position(|&t| t == task_type).unwrap();
                    counts[k] += 1.0;
                }
            }
        }
    }
    let total: f64 = counts.iter().sum();
    if total == 0.0 {
        return Err(MetricsError::UrgencyUndefined);
    }
    Ok(counts.into_iter().map(|c| c / total).collect())
}

/// Urgency-weighted capability usage per agent: `zeta = sum_k w_k * u_k`.
pub fn importance(usage: &[Vec<f64>], urgency: &[f64]) -> Vec<f64> {
    usage
        .iter()
        .map(|row| {
            assert_eq!(row.len(), urgency.len(), "usage and urgency dimensions differ");
            row.iter().zip(urgency).map(|(u, w)| u * w).sum()
        })
        .collect()
}

/// The full importance table for one evaluation run.
#[derive(Debug, Clone)]
pub struct ImportanceReport {
    pub task_types: Vec<TaskType>,
    pub urgency: Vec<f64>,
    /// Available capability per agent per task type.
    pub capability: Vec<Vec<u8>>,
    /// Used capability per agent per task type.
    pub usage: Vec<Vec<f64>>,
    pub importance: Vec<f64>,
}

impl ImportanceReport {
    pub fn least_important_agent(&self) -> usize {
        self.importance
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap()
    }

    pub fn most_important_agent(&self) -> usize {
        self.importance
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap()
    }
}

/// Compute capability usage, task urgency, and importance from one report.
pub fn importance_report(
    report: &EvalReport,
    scenario: &Scenario,
) -> Result<ImportanceReport, MetricsError> {
    let task_types = scenario.task_types();
    let usage = capability_usage(report, scenario);
    let urgency = task_urgency(report, scenario)?;
    let importance = importance(&usage, &urgency);
    let capability = scenario
        .agents
        .iter()
        .map(|agent| task_types.iter().map(|&t| agent.capability.of(t)).collect())
        .collect();
    Ok(ImportanceReport {
        task_types,
        urgency,
        capability,
        usage,
        importance,
    })
}

/// Baseline evaluation plus one variant per inactivated agent.
#[derive(Debug, Clone)]
pub struct InactivationStudy {
    pub baseline: EvalReport,
    /// `(agent index, report with that agent forced to idle)`.
    pub ablations: Vec<(usize, EvalReport)>,
}

/// Evaluate the team as trained and re-evaluate it with single agents forced
/// to idle, without retraining. `only` restricts the study to one agent.
pub fn inactivation_study(
    nets: &[QNet],
    scenario: &Scenario,
    trials: usize,
    seed: u64,
    only: Option<usize>,
) -> InactivationStudy {
    let baseline = evaluate_with_stream(nets, scenario, trials, seed, RngStream::Ablate, &[]);
    let agents: Vec<usize> = match only {
        Some(agent) => vec![agent],
        None => (0..scenario.num_agents()).collect(),
    };
    let ablations = agents
        .into_iter()
        .map(|agent| {
            let report =
                evaluate_with_stream(nets, scenario, trials, seed, RngStream::Ablate, &[agent]);
            (agent, report)
        })
        .collect();
    InactivationStudy { baseline, ablations }
}
