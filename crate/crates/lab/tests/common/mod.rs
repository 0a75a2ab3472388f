#![allow(dead_code)]

use std::path::{Path, PathBuf};

use fpp_lab::{Experiment, ExperimentConfig};

pub fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Names of the checked-in configs, sorted.
pub fn config_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(config_dir())
        .unwrap()
        .filter_map(|e| e.unwrap().file_name().to_string_lossy().strip_suffix(".toml").map(str::to_string))
        .collect();
    names.sort();
    names
}

pub fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&config_dir().join(format!("{name}.toml"))).unwrap()
}

/// A checked-in config cut down to a few seconds of work.
pub fn quick(name: &str) -> ExperimentConfig {
    let mut cfg = load(name);
    cfg.replicas = cfg.replicas.min(match cfg.experiment.name() {
        "regen" | "tube-sweep" => 30,
        "shells" => 1,
        _ => 30,
    });
    if let Experiment::PointToShape { mu, .. } = &mut cfg.experiment {
        mu.fan_norm = 4;
    }
    cfg
}

/// Every file in `dir` with its bytes, sorted by name.
pub fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

pub const MU_SMALL: &str = r#"
dimension = 2
master_seed = 1
replicas = 30

[distribution]
kind = "exponential"
rate = 1.0

[experiment]
kind = "mu"
z = [1, 0]
n_grid = [5, 10]
"#;

pub const SHELLS_SMALL: &str = r#"
dimension = 2
master_seed = 1
replicas = 2
window_radius = 50

[distribution]
kind = "uniform"

[experiment]
kind = "shells"
delta = 0.05
spacing = 20
centers_radius = 40
pairs = 3
"#;

pub const HEAVY_Z: &str = r#"
dimension = 2
master_seed = 2
replicas = 10
window_radius = 30

[distribution]
kind = "pareto"
a = 0.4

[experiment]
kind = "deviation-sets"
eps = 0.5
radii = [10, 20, 30]

[experiment.mu]
fan_norm = 4
n = 10
replicas = 200
statistic = "median"
"#;

pub fn parse(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap()
}
