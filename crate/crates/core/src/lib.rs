//! Attraction-field curve detection for volumetric images.
//!
//! The crate covers the whole chain around a two-headed field/closeness
//! predictor: exact ground-truth construction from a reference polyline,
//! masked loss evaluation, the filter → shift → NMS → Isomap inference
//! pipeline with segmentation and heatmap baselines, 1-D curve metrics,
//! synthetic oracle fixtures, a sidecar-header volume format and a
//! reproducible benchmark harness.
//!
//! All coordinates, distances and field vectors are in millimeters.

pub mod bench;
pub mod detector;
pub mod exec;
pub mod geometry;
pub mod groundtruth;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod synth;

pub use detector::{
    baseline_heatmap, baseline_segmentation, detect_curve, extract_point_cloud, nms,
    order_points_isomap, Detection, DetectorConfig, OrderedCurve,
};
pub use exec::Execution;
pub use geometry::{
    resample_polyline, world_coordinates, Grid3, PointCloud, Polyline, ScalarField, Spacing,
    Vec3, VectorField,
};
pub use groundtruth::{
    attraction_field, closeness_map, distance_map, project_to_polyline, Projection,
};
pub use loss::{closeness_loss, field_loss, norm_loss, total_loss, LossReport};
pub use metrics::{curve_metrics, MetricReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("index {index:?} out of bounds for grid shape {shape:?}")]
    OutOfBounds { index: [usize; 3], shape: [usize; 3] },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty mask: no voxel satisfies {0}")]
    EmptyMask(String),
    #[error("no curve detected: {0}")]
    NoCurveDetected(String),
    #[error("power iteration did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("corrupt file {path}: {reason}")]
    CorruptFile { path: String, reason: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
