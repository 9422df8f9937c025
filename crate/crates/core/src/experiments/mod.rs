//! End-to-end experiment commands: training generators per schedule,
//! building labelled datasets, training the extractor, ownership checks,
//! tampering, FID comparison and collision odds.
//!
//! Every command is a deterministic function of its configuration and seed,
//! and writes its artifacts under the configured output directory.

mod collision;
mod commands;
mod config;

pub use collision::{collision_probability, collision_report, CollisionQuery, CollisionReport};
pub use commands::{
    build_grid, cell_seed, checkpoint_path, cmd_build_dataset, cmd_fid, cmd_tamper, cmd_train_classifier, cmd_train_qgan,
    cmd_verify, slug, verdict_exit_code, ClassifierReport, Context, DatasetReport, FidReport, FidRow, Suspect,
    TamperPoint, TamperReport, TrainedModel, CLASSIFIER_FILE, DATASET_FILE, TEST_FILE,
};
pub use config::{parse_schedule, ExperimentConfig, Preset};
