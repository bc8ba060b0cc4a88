//! JSON-configured experiments: scene synthesis, the frontend, refinement
//! and its ablations, sweeps, and CSV/map output.

mod config;
mod runner;

pub use config::{
    load_config, parse_config, CoarseParams, CoarseSource, ExperimentConfig, LoadedConfig,
    NormalSource, SceneRef, Sweep, SweepPoint,
};
pub use runner::{
    csv_string, prepare, run_ablation_suite, run_experiment, run_points, write_csv, Artifacts,
    PreparedScene, Record,
};
