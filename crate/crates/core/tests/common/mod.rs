#![allow(dead_code)]

use agesirs::scenario::{load_scenario, ForceConfig, ScenarioConfig, Table};

pub fn reference() -> ScenarioConfig {
    load_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/reference.toml")).unwrap()
}

/// Short horizon and weak coupling, so the a-priori radius and the flow-map
/// bound are finite.
pub fn mild() -> ScenarioConfig {
    ScenarioConfig::parse(
        r#"
[grid]
omega = 1.0
cells = 100
horizon = 0.2

[rates]
beta = 0.2
gamma = 0.5
delta = 0.3
p = 0.5
q = 0.5

[mortality]
regular = 0.1
theta = 2.0

[kernel]
kind = "constant"
value = 0.5

[initial]
s = 0.5
i = 0.2
r = 0.0

[solver]
seed = 7
"#,
    )
    .unwrap()
}

pub fn force_families(horizon: f64) -> Vec<ForceConfig> {
    vec![
        ForceConfig::Identity,
        ForceConfig::Saturating {
            sigma: Table::Constant(1.0),
            amplitude: 0.5,
            period: horizon,
        },
        ForceConfig::Power { exponent: 0.5 },
    ]
}

pub fn with_force(config: &ScenarioConfig, force: ForceConfig) -> ScenarioConfig {
    let mut c = config.clone();
    c.force = force;
    c
}
