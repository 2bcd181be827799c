//! Shared scenario builders for the crate's own tests. Not part of the
//! public API.

use crate::scenario::Scenario;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The two-site fire-and-rescue world with the heterogeneous five-agent team.
pub fn two_site_scenario() -> Scenario {
    Scenario::from_toml_str(
        r#"
        locations = ["site1", "site2"]
        idle_locations = ["site1", "site2"]

        [[tasks]]
        id = 1
        location = "site1"
        task_type = "fire"
        initial_level = 4

        [[tasks]]
        id = 2
        location = "site1"
        task_type = "rescue"
        initial_level = 4
        coupled_fire_task = 1

        [[tasks]]
        id = 3
        location = "site2"
        task_type = "fire"
        initial_level = 4

        [[tasks]]
        id = 4
        location = "site2"
        task_type = "rescue"
        initial_level = 4
        coupled_fire_task = 3

        [[agents]]
        id = 1
        sensing = 3
        communication = 3
        capability = { fire = 3, rescue = 1 }

        [[agents]]
        id = 2
        sensing = 3
        communication = 3
        capability = { fire = 3, rescue = 2 }

        [[agents]]
        id = 3
        sensing = 3
        communication = 3
        capability = { fire = 2, rescue = 0 }

        [[agents]]
        id = 4
        sensing = 3
        communication = 3
        capability = { fire = 0, rescue = 1 }

        [[agents]]
        id = 5
        sensing = 3
        communication = 3
        capability = { fire = 1, rescue = 1 }
        "#,
    )
    .expect("the two-site test scenario is valid")
}

/// A one-task, one-agent world with perfect sensing and a deterministic fire
/// kernel (full capability on a single fire task).
pub fn single_task_scenario() -> Scenario {
    Scenario::from_toml_str(
        r#"
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
        "#,
    )
    .expect("the single-task test scenario is valid")
}
