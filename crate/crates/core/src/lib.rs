//! Crowd-flow tracking: links point detections across frames into motion
//! vectors, discovers directionally organized cohorts among them and turns
//! those into reports and approach alerts.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases at
//! the crate root fix the scalar to `f64`, which the file formats, the
//! simulator and the command-line tool use.

pub mod alert;
pub mod cohort;
pub mod detect;
pub mod error;
pub mod geometry;
pub mod io;
pub mod linker;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Vec2 = geometry::Vec2<f64>;
pub type Detection = geometry::Detection<f64>;
pub type FlowVector = geometry::FlowVector<f64>;
pub type CalibrationConfig = geometry::CalibrationConfig<f64>;
pub type ImageGrid = detect::ImageGrid<f64>;
pub type DetectorConfig = detect::DetectorConfig<f64>;
pub type CandidateLink = linker::CandidateLink<f64>;
pub type CostBreakdown = linker::CostBreakdown<f64>;
pub type AssignmentSolution = linker::AssignmentSolution<f64>;
pub type ParetoFrontier = linker::ParetoFrontier<f64>;
pub type TrackerConfig = linker::TrackerConfig<f64>;
pub type FrameStep = linker::FrameStep<f64>;
pub type TrackResult = linker::TrackResult<f64>;
pub type VonMisesComponent = cohort::VonMisesComponent<f64>;
pub type CohortModel = cohort::CohortModel<f64>;
pub type SensitiveLocation = alert::SensitiveLocation<f64>;
pub type CohortReport = alert::CohortReport<f64>;
pub type AlertEvent = alert::AlertEvent<f64>;

/// Single-precision variants.
pub mod f32 {
    pub type Vec2 = crate::geometry::Vec2<f32>;
    pub type Detection = crate::geometry::Detection<f32>;
    pub type FlowVector = crate::geometry::FlowVector<f32>;
    pub type ImageGrid = crate::detect::ImageGrid<f32>;
    pub type TrackerConfig = crate::linker::TrackerConfig<f32>;
    pub type CohortModel = crate::cohort::CohortModel<f32>;
}
