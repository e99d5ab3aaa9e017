//! End-to-end reconstruction, map consistency and difference imaging.

pub mod difference;
pub mod maps;
pub mod metrics;
pub mod run;

pub use crate::geometry::domain_error;
pub use difference::{
    consistency_check, diff_fixed_geometry, diff_two_domains, rasterize, ConsistencyStats, DifferenceField, Raster,
};
pub use maps::ComposedMap;
pub use metrics::{annulus_total_variation, metrics, Metrics};
pub use run::{
    deformation_for, finish, run_full, run_traditional, GammaSample, PipelineFailure, PipelineStage,
    ReconstructionConfig, ReconstructionResult, TraditionalResult,
};
