//! Fixtures shared by the benches.

use std::path::PathBuf;

use roe_core::scenario::ErrorModelFile;
use roe_core::{Scenario, ScenarioConfig};

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// A bundled scenario by file name, e.g. `test1.json`.
pub fn bundled(name: &str) -> Scenario {
    let text = std::fs::read_to_string(scenario_dir().join(name)).expect("bundled scenario");
    let cfg: ScenarioConfig = serde_json::from_str(&text).expect("scenario json");
    cfg.resolve().expect("valid scenario")
}

pub fn bundled_errors(name: &str) -> ErrorModelFile {
    let text = std::fs::read_to_string(scenario_dir().join(name)).expect("bundled error models");
    serde_json::from_str(&text).expect("error model json")
}
