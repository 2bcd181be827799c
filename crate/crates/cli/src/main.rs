//! Command-line driver: train teams, evaluate them, rank agent importance,
//! and run inactivation studies. Every subcommand takes a scenario file and a
//! run directory; training writes checkpoints into the run directory and the
//! analysis subcommands read them back, refusing checkpoints whose scenario
//! fingerprint does not match.

mod reports;

use anyhow::{anyhow, bail, Context, Result};
use brigade::metrics::{evaluate, importance_report, inactivation_study};
use brigade::net::{Checkpoint, QNet};
use brigade::prelude::*;
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "brigade",
    about = "Decentralized task allocation with load management: train, evaluate, analyze",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (.scn)
    #[arg(long)]
    scenario: PathBuf,
    /// Run directory: checkpoints and reports live here
    #[arg(long)]
    out: PathBuf,
    /// Master seed; all randomness derives from it
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Train one Q-network per agent and write checkpoints
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Reward preset; overrides the scenario's [reward] block
        #[arg(long)]
        preset: Option<String>,
        /// Training episodes
        #[arg(long, default_value_t = 5000)]
        episodes: usize,
    },
    /// Evaluate trained checkpoints over independent operation trials
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of evaluation trials
        #[arg(long, default_value_t = 500)]
        trials: usize,
        /// Comma-separated 1-based agent ids forced to idle
        #[arg(long, value_delimiter = ',')]
        inactive: Vec<u32>,
        /// Also write per-trial decision timelines over this many steps
        #[arg(long)]
        timeline: Option<usize>,
    },
    /// Rank agents by urgency-weighted capability usage
    Importance {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of evaluation trials behind the usage estimate
        #[arg(long, default_value_t = 500)]
        trials: usize,
    },
    /// Compare the team against single-agent inactivations
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
        /// Trials per variant
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Restrict the study to one 1-based agent id
        #[arg(long)]
        agent: Option<u32>,
    },
}

fn main() {
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, preset, episodes } => cmd_train(common, preset, episodes),
        Command::Evaluate { common, trials, inactive, timeline } => {
            cmd_evaluate(common, trials, inactive, timeline)
        }
        Command::Importance { common, trials } => cmd_importance(common, trials),
        Command::Ablate { common, trials, agent } => cmd_ablate(common, trials, agent),
    }
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::from_path(path).with_context(|| format!("loading scenario {}", path.display()))
}

fn reward_settings(scenario: &Scenario, preset: Option<&str>) -> Result<(String, RewardSettings)> {
    match preset {
        Some(name) => Ok((name.to_string(), RewardSettings::preset(name)?)),
        None => match &scenario.config().reward {
            Some(settings) => Ok(("scenario".to_string(), settings.clone())),
            None => Ok(("idle_medium_trp".to_string(), RewardSettings::default())),
        },
    }
}

fn checkpoint_path(out: &Path, agent_id: usize) -> PathBuf {
    out.join(format!("agent_{agent_id}.qnet"))
}

fn cmd_train(common: CommonArgs, preset: Option<String>, episodes: usize) -> Result<()> {
    let scenario = load_scenario(&common.scenario)?;
    let (preset_name, settings) = reward_settings(&scenario, preset.as_deref())?;
    let rewards = RewardConfig::per_agent(&settings, &scenario)?;
    if rewards.iter().any(|r| !r.load_management_is_secondary()) {
        eprintln!(
            "warning: load-management terms rival the completion reward; \
             effectiveness may degrade"
        );
    }
    let config = TrainConfig::for_scenario(&scenario)
        .with_episodes(episodes)
        .with_seed(common.seed);

    std::fs::create_dir_all(&common.out)
        .with_context(|| format!("creating output directory {}", common.out.display()))?;

    eprintln!(
        "training {} agents for {episodes} episodes (preset {preset_name}, seed {})",
        scenario.num_agents(),
        common.seed
    );
    let result = train(&scenario, &rewards, &config);

    for (index, net) in result.nets.iter().enumerate() {
        let path = checkpoint_path(&common.out, index + 1);
        Checkpoint::new(net.clone(), scenario.fingerprint(), common.seed)
            .save(&path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    reports::write_training_csv(
        &common.out.join("training.csv"),
        scenario.fingerprint(),
        common.seed,
        &result.log,
    )?;
    reports::write_train_manifest(
        &common.out.join("manifest.toml"),
        scenario.fingerprint(),
        common.seed,
        &common.scenario.display().to_string(),
        &preset_name,
        episodes,
        scenario.num_agents(),
    )?;
    eprintln!("wrote {} checkpoints to {}", result.nets.len(), common.out.display());
    Ok(())
}

/// Load one checkpoint per agent and verify it matches the scenario.
fn load_team(out: &Path, scenario: &Scenario) -> Result<Vec<QNet>> {
    let mut nets = Vec::with_capacity(scenario.num_agents());
    for agent_id in 1..=scenario.num_agents() {
        let path = checkpoint_path(out, agent_id);
        let checkpoint =
            Checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))?;
        if checkpoint.scenario_fingerprint != scenario.fingerprint() {
            bail!(
                "checkpoint {} was trained for a different scenario \
                 (fingerprint {} vs {})",
                path.display(),
                checkpoint.scenario_fingerprint,
                scenario.fingerprint()
            );
        }
        if checkpoint.net.input_len() != scenario.feature_len()
            || checkpoint.net.output_len() != scenario.actions.len()
        {
            bail!("checkpoint {} does not fit the scenario's dimensions", path.display());
        }
        nets.push(checkpoint.net);
    }
    Ok(nets)
}

fn parse_agent_ids(ids: &[u32], scenario: &Scenario) -> Result<Vec<usize>> {
    ids.iter()
        .map(|&id| {
            if id == 0 || id as usize > scenario.num_agents() {
                Err(anyhow!(
                    "agent id {id} outside 1..={}",
                    scenario.num_agents()
                ))
            } else {
                Ok(id as usize - 1)
            }
        })
        .collect()
}

fn cmd_evaluate(
    common: CommonArgs,
    trials: usize,
    inactive: Vec<u32>,
    timeline: Option<usize>,
) -> Result<()> {
    let scenario = load_scenario(&common.scenario)?;
    let nets = load_team(&common.out, &scenario)?;
    let inactive = parse_agent_ids(&inactive, &scenario)?;
    let report = evaluate(&nets, &scenario, trials, common.seed, &inactive);

    let fingerprint = scenario.fingerprint();
    reports::write_eval_csv(&common.out.join("evaluation.csv"), fingerprint, common.seed, &report)?;
    reports::write_eval_summary(
        &common.out.join("summary.txt"),
        fingerprint,
        common.seed,
        &scenario,
        &report,
    )?;
    if let Some(steps) = timeline {
        reports::write_timeline_csv(
            &common.out.join("timeline.csv"),
            fingerprint,
            common.seed,
            &scenario,
            &report,
            steps,
        )?;
    }
    println!(
        "{} trials: completion rate {:.3}, mean completion step {}, \
         unused capability fraction {:.3}",
        report.trials,
        report.completion_rate(),
        report
            .mean_completion_step()
            .map(|m| format!("{m:.2}"))
            .unwrap_or_else(|| "n/a".to_string()),
        report.unused_capability_fraction(&scenario)
    );
    Ok(())
}

fn cmd_importance(common: CommonArgs, trials: usize) -> Result<()> {
    let scenario = load_scenario(&common.scenario)?;
    let nets = load_team(&common.out, &scenario)?;
    let report = evaluate(&nets, &scenario, trials, common.seed, &[]);
    let importance = importance_report(&report, &scenario)?;
    reports::write_importance_csv(
        &common.out.join("importance.csv"),
        scenario.fingerprint(),
        common.seed,
        &importance,
    )?;
    print!("{}", reports::format_importance_table(&importance));
    println!(
        "least important: agent {}; most important: agent {}",
        importance.least_important_agent() + 1,
        importance.most_important_agent() + 1
    );
    Ok(())
}

fn cmd_ablate(common: CommonArgs, trials: usize, agent: Option<u32>) -> Result<()> {
    let scenario = load_scenario(&common.scenario)?;
    let nets = load_team(&common.out, &scenario)?;
    let only = match agent {
        Some(id) => Some(parse_agent_ids(&[id], &scenario)?[0]),
        None => None,
    };
    let study = inactivation_study(&nets, &scenario, trials, common.seed, only);
    reports::write_ablation_csv(
        &common.out.join("ablation.csv"),
        scenario.fingerprint(),
        common.seed,
        &study,
    )?;
    let describe = |label: &str, report: &brigade::metrics::EvalReport| {
        println!(
            "{label}: mean completion step {}, failure rate {:.3}",
            report
                .mean_completion_step()
                .map(|m| format!("{m:.2}"))
                .unwrap_or_else(|| "n/a".to_string()),
            report.failure_rate()
        );
    };
    describe("baseline", &study.baseline);
    for (agent, report) in &study.ablations {
        describe(&format!("inactivated agent {}", agent + 1), report);
    }
    Ok(())
}
