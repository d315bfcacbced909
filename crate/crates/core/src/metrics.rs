//! 1-D curve metrics: Hausdorff distance, ASSD and Surface Dice.
//!
//! Each curve is resampled at `sample_step`; every sample is then measured
//! against the *other* polyline exactly (closest point on a segment), not
//! against the other curve's samples.

use serde::{Deserialize, Serialize};

use crate::exec::{pairwise_sum, Execution};
use crate::geometry::{resample_polyline, Polyline};
use crate::groundtruth::SegmentIndex;
use crate::{invalid, Result};

pub const DEFAULT_SAMPLE_STEP: f64 = 0.5;
pub const DEFAULT_THRESHOLDS: [f64; 2] = [1.0, 3.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDice {
    pub tolerance: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub hd: f64,
    pub assd: f64,
    pub sd: Vec<SurfaceDice>,
    pub sample_step: f64,
}

impl MetricReport {
    /// Surface Dice at `tolerance`, if it was requested.
    pub fn sd_at(&self, tolerance: f64) -> Option<f64> {
        self.sd.iter().find(|s| s.tolerance == tolerance).map(|s| s.value)
    }
}

/// Distances from each resampled point of `from` to the polyline `to`.
pub fn directed_distances(from: &Polyline, to: &Polyline, sample_step: f64, exec: Execution) -> Result<Vec<f64>> {
    let samples = resample_polyline(from, sample_step)?;
    let index = SegmentIndex::new(to);
    let pts = samples.points();
    Ok(exec.map(pts.len(), |i| index.project(&pts[i]).distance))
}

pub fn curve_metrics(a: &Polyline, b: &Polyline, thresholds: &[f64], sample_step: f64) -> Result<MetricReport> {
    curve_metrics_with(a, b, thresholds, sample_step, Execution::default())
}

pub fn curve_metrics_with(
    a: &Polyline,
    b: &Polyline,
    thresholds: &[f64],
    sample_step: f64,
    exec: Execution,
) -> Result<MetricReport> {
    if let Some(t) = thresholds.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(invalid(format!("surface dice tolerance must be non-negative, got {t}")));
    }
    let ab = directed_distances(a, b, sample_step, exec)?;
    let ba = directed_distances(b, a, sample_step, exec)?;

    let hd = ab.iter().chain(&ba).copied().fold(0.0, f64::max);
    // Sum each direction separately so swapping the arguments is exact.
    let total = ab.len() + ba.len();
    let assd = (pairwise_sum(&ab) + pairwise_sum(&ba)) / total as f64;
    let sd = thresholds
        .iter()
        .map(|&tau| {
            let hits = ab.iter().chain(&ba).filter(|&&d| d <= tau).count();
            SurfaceDice { tolerance: tau, value: hits as f64 / total as f64 }
        })
        .collect();
    Ok(MetricReport { hd, assd, sd, sample_step })
}
