//! Experiment drivers: configuration, Monte Carlo and exact coverage,
//! the MA coverage grid, the cyclic experiment and CSV prediction.

pub mod config;
pub mod exact;
pub mod grid;
pub mod predict;
pub mod simulate;

pub use config::{ExperimentConfig, Process, ProcessSpec, ScoreKind, ScoreSpec};
pub use exact::{run_exact_coverage, ExactCoverage};
pub use grid::{
    run_cyclic_experiment, run_ma_grid, CyclicExperiment, CyclicReport, MaGrid, MaGridRow,
};
pub use predict::{predict_next, read_history, PredictConfig, PredictReport};
pub use simulate::{run_coverage_sim, CoverageReport};
