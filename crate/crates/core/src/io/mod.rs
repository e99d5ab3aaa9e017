//! Run configuration, file formats and result bundles.

pub mod bundle;
pub mod config;
pub mod files;

pub use bundle::{
    load_record, load_result, save_failure, save_result, save_traditional, simulate_measurements, write_simulation,
    Contrasts, FailureRecord, FullRecord, LoadedResult, ModelRecord, ResultRecord, TraditionalRecord, TruthRecord,
};
pub use config::{
    displaced_truth, displacement_signs, fixed_electrodes, parse_displacement, ModelConfig, ModelSpec, RunConfig,
    TruthConfig,
};
pub use files::{
    create_dir, read_json, write_json, write_pairs_csv, write_points_csv, write_raster_csv, write_samples_csv,
};
