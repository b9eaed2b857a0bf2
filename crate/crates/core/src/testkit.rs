//! Shared fixtures for unit tests.

use crate::data::{ScenarioSet, SystemInstance};
use crate::formulation::FirstStageSolution;

pub fn toy_instance() -> SystemInstance {
    SystemInstance::from_json_str(include_str!("../fixtures/toy-a.json")).expect("toy-a parses")
}

pub fn toy_scenarios(instance: &SystemInstance) -> ScenarioSet {
    ScenarioSet::from_csv_str(include_str!("../fixtures/toy-a.csv"), instance).expect("toy-a scenarios parse")
}

/// One wind farm, equiprobable scenarios.
pub fn scenarios(instance: &SystemInstance, rows: &[[f64; 4]]) -> ScenarioSet {
    let ids = (0..rows.len()).map(|s| format!("s{}", s + 1)).collect();
    let wind = rows.iter().map(|r| vec![r.to_vec()]).collect();
    ScenarioSet::new(instance, ids, wind, None).expect("valid scenarios")
}

pub fn zero_first_stage(instance: &SystemInstance) -> FirstStageSolution {
    let t = instance.horizon;
    let flags = |n: usize| vec![vec![false; t]; n];
    let zeros = |n: usize| vec![vec![0.0; t]; n];
    FirstStageSolution {
        commitment: flags(instance.num_generators()),
        startup: flags(instance.num_generators()),
        shutdown: flags(instance.num_generators()),
        power: zeros(instance.num_generators()),
        reserve_up: zeros(instance.num_generators()),
        reserve_down: zeros(instance.num_generators()),
        wind: zeros(instance.num_wind_farms()),
        angle: zeros(instance.num_nodes()),
        flow: zeros(instance.num_lines()),
        day_ahead_cost: 0.0,
    }
}

/// Day-ahead point with the given wind dispatch for the first farm, no reserves, no flow.
pub fn dispatch_without_reserves(instance: &SystemInstance, wind: &[f64]) -> FirstStageSolution {
    let mut x = zero_first_stage(instance);
    x.wind[0] = wind.to_vec();
    x
}
