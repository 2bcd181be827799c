//! Report writers. Every file embeds the scenario fingerprint and the run
//! seed; identical inputs produce byte-identical outputs, so nothing here may
//! depend on time or environment.

use anyhow::{Context, Result};
use brigade::metrics::{EvalReport, ImportanceReport, InactivationStudy};
use brigade::qlearn::EpisodeStats;
use brigade::scenario::Scenario;
use std::fmt::Write as _;
use std::path::Path;

fn stamp(fingerprint: &str, seed: u64) -> String {
    format!("# fingerprint={fingerprint} seed={seed}\n")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// `training.csv`: one row per episode of the training run.
pub fn write_training_csv(
    path: &Path,
    fingerprint: &str,
    seed: u64,
    log: &[EpisodeStats],
) -> Result<()> {
    let mut out = stamp(fingerprint, seed);
    out.push_str("episode,mean_loss,mean_reward,epsilon\n");
    for stats in log {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            stats.episode, stats.mean_loss, stats.mean_reward, stats.epsilon
        );
    }
    write_file(path, &out)
}

/// `evaluation.csv`: one row per trial. The completion step is empty when the
/// trial did not complete within the horizon.
pub fn write_eval_csv(path: &Path, fingerprint: &str, seed: u64, report: &EvalReport) -> Result<()> {
    let mut out = stamp(fingerprint, seed);
    out.push_str("trial,completion_step,completed,unused_capability,idle_count,reassignment_count\n");
    for trial in 0..report.trials {
        let completion = report.completion_steps[trial]
            .map(|s| s.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            trial,
            completion,
            report.completion_steps[trial].is_some(),
            report.unused_capability[trial],
            report.idle_counts[trial],
            report.reassignment_counts[trial]
        );
    }
    write_file(path, &out)
}

/// `summary.txt`: means and standard errors of the evaluation metrics.
pub fn write_eval_summary(
    path: &Path,
    fingerprint: &str,
    seed: u64,
    scenario: &Scenario,
    report: &EvalReport,
) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "fingerprint = {fingerprint}");
    let _ = writeln!(out, "seed = {seed}");
    let _ = writeln!(out, "trials = {}", report.trials);
    let _ = writeln!(out, "horizon = {}", report.horizon);
    let _ = writeln!(out, "completion_rate = {}", report.completion_rate());
    let _ = writeln!(out, "failure_rate = {}", report.failure_rate());
    match report.mean_completion_step() {
        Some(mean) => {
            let _ = writeln!(out, "mean_completion_step = {mean}");
            let _ = writeln!(out, "stderr_completion_step = {}", report.stderr_completion_step());
        }
        None => {
            let _ = writeln!(out, "mean_completion_step = none");
        }
    }
    let _ = writeln!(out, "mean_unused_capability = {}", report.mean_unused_capability());
    let _ = writeln!(out, "stderr_unused_capability = {}", report.stderr_unused_capability());
    let _ = writeln!(
        out,
        "unused_capability_fraction = {}",
        report.unused_capability_fraction(scenario)
    );
    let _ = writeln!(out, "mean_idle_count = {}", report.mean_idle_count());
    let _ = writeln!(out, "stderr_idle_count = {}", report.stderr_idle_count());
    let _ = writeln!(out, "mean_reassignment_count = {}", report.mean_reassignment_count());
    let _ = writeln!(out, "stderr_reassignment_count = {}", report.stderr_reassignment_count());
    write_file(path, &out)
}

/// `timeline.csv`: per-agent decisions and true task levels for the first
/// `steps` steps of every trial. Levels are the ones the step started from.
pub fn write_timeline_csv(
    path: &Path,
    fingerprint: &str,
    seed: u64,
    scenario: &Scenario,
    report: &EvalReport,
    steps: usize,
) -> Result<()> {
    let mut out = stamp(fingerprint, seed);
    out.push_str("trial,step");
    for agent in 1..=scenario.num_agents() {
        let _ = write!(out, ",agent_{agent}");
    }
    for task in 1..=scenario.num_tasks() {
        let _ = write!(out, ",task_{task}_level");
    }
    out.push('\n');
    for (trial, timeline) in report.timelines.iter().enumerate() {
        for step in 0..steps.min(timeline.decisions.len()) {
            let _ = write!(out, "{trial},{step}");
            for &action in &timeline.decisions[step] {
                let _ = write!(out, ",{}", scenario.actions.label(action));
            }
            for &level in &timeline.levels[step] {
                let _ = write!(out, ",{level}");
            }
            out.push('\n');
        }
    }
    write_file(path, &out)
}

/// `importance.csv`: one row per agent with available capability, usage, and
/// importance; the urgency weights ride in the comment header.
pub fn write_importance_csv(
    path: &Path,
    fingerprint: &str,
    seed: u64,
    report: &ImportanceReport,
) -> Result<()> {
    let mut out = stamp(fingerprint, seed);
    out.push_str("# urgency:");
    for (ty, weight) in report.task_types.iter().zip(&report.urgency) {
        let _ = write!(out, " {ty}={weight}");
    }
    out.push('\n');
    out.push_str("agent");
    for ty in &report.task_types {
        let _ = write!(out, ",capability_{ty}");
    }
    for ty in &report.task_types {
        let _ = write!(out, ",usage_{ty}");
    }
    out.push_str(",importance\n");
    for agent in 0..report.importance.len() {
        let _ = write!(out, "{}", agent + 1);
        for &c in &report.capability[agent] {
            let _ = write!(out, ",{c}");
        }
        for &u in &report.usage[agent] {
            let _ = write!(out, ",{u}");
        }
        let _ = writeln!(out, ",{}", report.importance[agent]);
    }
    write_file(path, &out)
}

/// Render the importance table for stdout, shaped like a capability table
/// with a trailing urgency line.
pub fn format_importance_table(report: &ImportanceReport) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:>5}", "agent");
    for ty in &report.task_types {
        let _ = write!(out, " {:>8}", format!("C_{ty}"));
    }
    for ty in &report.task_types {
        let _ = write!(out, " {:>8}", format!("U_{ty}"));
    }
    let _ = writeln!(out, " {:>10}", "importance");
    for agent in 0..report.importance.len() {
        let _ = write!(out, "{:>5}", agent + 1);
        for &c in &report.capability[agent] {
            let _ = write!(out, " {c:>8}");
        }
        for &u in &report.usage[agent] {
            let _ = write!(out, " {u:>8.2}");
        }
        let _ = writeln!(out, " {:>10.2}", report.importance[agent]);
    }
    let _ = write!(out, "urgency:");
    for (ty, weight) in report.task_types.iter().zip(&report.urgency) {
        let _ = write!(out, " {ty}={weight:.3}");
    }
    out.push('\n');
    out
}

/// `ablation.csv`: histogram-ready per-trial completion steps for the
/// baseline and each inactivation variant (empty cell = not completed).
pub fn write_ablation_csv(
    path: &Path,
    fingerprint: &str,
    seed: u64,
    study: &InactivationStudy,
) -> Result<()> {
    let mut out = stamp(fingerprint, seed);
    out.push_str("trial,baseline");
    for (agent, _) in &study.ablations {
        let _ = write!(out, ",agent_{}", agent + 1);
    }
    out.push('\n');
    for trial in 0..study.baseline.trials {
        let cell = |step: Option<usize>| step.map(|s| s.to_string()).unwrap_or_default();
        let _ = write!(out, "{trial},{}", cell(study.baseline.completion_steps[trial]));
        for (_, report) in &study.ablations {
            let _ = write!(out, ",{}", cell(report.completion_steps[trial]));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

/// `manifest.toml`: enough to reproduce a training run byte for byte.
pub fn write_train_manifest(
    path: &Path,
    fingerprint: &str,
    seed: u64,
    scenario_path: &str,
    preset: &str,
    episodes: usize,
    num_agents: usize,
) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "scenario = \"{scenario_path}\"");
    let _ = writeln!(out, "scenario_fingerprint = \"{fingerprint}\"");
    let _ = writeln!(out, "seed = {seed}");
    let _ = writeln!(out, "reward_preset = \"{preset}\"");
    let _ = writeln!(out, "episodes = {episodes}");
    let _ = writeln!(out, "agents = {num_agents}");
    write_file(path, &out)
}
