//! Offline calibration sweep: trains the shipped teams under the preset grid
//! and prints the evaluation metrics the acceptance thresholds are pinned to.

use brigade::prelude::*;
use std::time::Instant;

fn train_team(path: &str, preset: &str, seed: u64) -> (Scenario, Vec<QNet>) {
    let scenario = Scenario::from_path(path).unwrap();
    let rewards =
        RewardConfig::per_agent(&RewardSettings::preset(preset).unwrap(), &scenario).unwrap();
    let config = TrainConfig::for_scenario(&scenario).with_seed(seed);
    let start = Instant::now();
    let result = train(&scenario, &rewards, &config);
    println!(
        "trained {path} / {preset} (seed {seed}) in {:.1?}; final mean reward {:.1}",
        start.elapsed(),
        result.log.last().unwrap().mean_reward
    );
    (scenario, result.nets)
}

fn describe(tag: &str, scenario: &Scenario, report: &EvalReport) {
    println!(
        "{tag}: completion_rate {:.3}, mean_step {:?}, unused_frac {:.3}, idle {:.1}, reassign {:.1}",
        report.completion_rate(),
        report.mean_completion_step(),
        report.unused_capability_fraction(scenario),
        report.mean_idle_count(),
        report.mean_reassignment_count()
    );
}

fn study(path: &str, preset: &str, seed: u64) {
    let (scenario, nets) = train_team(path, preset, seed);
    let report = evaluate(&nets, &scenario, 500, 1000 + seed, &[]);
    describe(&format!("  eval {path}/{preset}"), &scenario, &report);
    match importance_report(&report, &scenario) {
        Ok(imp) => {
            println!("  urgency: {:?}", imp.urgency);
            for (agent, zeta) in imp.importance.iter().enumerate() {
                println!(
                    "  agent {}: C {:?} U {:?} zeta {:.2}",
                    agent + 1,
                    imp.capability[agent],
                    imp.usage[agent],
                    zeta
                );
            }
            let study = inactivation_study(&nets, &scenario, 200, 2000 + seed, None);
            describe("  ablate baseline", &scenario, &study.baseline);
            for (agent, rep) in &study.ablations {
                println!(
                    "  ablate agent {}: completion_rate {:.3}, mean_step {:?}, failure {:.3}",
                    agent + 1,
                    rep.completion_rate(),
                    rep.mean_completion_step(),
                    rep.failure_rate()
                );
            }
        }
        Err(err) => println!("  importance unavailable: {err}"),
    }
}

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(42);
    println!("== heterogeneous / idle_medium_trp ==");
    study("scenarios/heterogeneous.scn", "idle_medium_trp", seed);
    println!("== heterogeneous / no_idle_no_trp ==");
    let (scenario, nets) = train_team("scenarios/heterogeneous.scn", "no_idle_no_trp", seed);
    let report = evaluate(&nets, &scenario, 500, 1000 + seed, &[]);
    describe("  eval", &scenario, &report);
    println!("== heterogeneous / idle_no_trp ==");
    let (scenario, nets) = train_team("scenarios/heterogeneous.scn", "idle_no_trp", seed);
    let report = evaluate(&nets, &scenario, 500, 1000 + seed, &[]);
    describe("  eval", &scenario, &report);
    println!("== semi_heterogeneous / idle_medium_trp ==");
    study("scenarios/semi_heterogeneous.scn", "idle_medium_trp", seed);
    println!("== homogeneous / idle_medium_trp ==");
    study("scenarios/homogeneous.scn", "idle_medium_trp", seed);
}
