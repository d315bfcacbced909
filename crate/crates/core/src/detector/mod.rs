//! Inference: closeness/norm filtering, shift to the curve, NMS and Isomap
//! ordering, plus the raster-limited segmentation and heatmap baselines.

mod isomap;
mod nms;

pub use isomap::{
    order_points_isomap, order_points_isomap_with, top_eigenvector, OrderedCurve,
    POWER_MAX_ITERATIONS, POWER_TOLERANCE,
};
pub use nms::nms;

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::geometry::{check_same_grid, resample_polyline, PointCloud, Polyline, ScalarField, VectorField};
use crate::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Closeness threshold `t`; voxels with `Ĉ ≥ t` pass.
    pub threshold: f64,
    /// Field-norm threshold `R_f` in mm.
    pub r_f: f64,
    pub nms_radius: f64,
    pub isomap_k: usize,
    pub resample_step: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { threshold: 0.5, r_f: 5.0, nms_radius: 2.0, isomap_k: 6, resample_step: 1.0 }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(invalid(format!("threshold t must lie in [0, 1], got {}", self.threshold)));
        }
        for (name, v) in [("R_f", self.r_f), ("nms radius", self.nms_radius), ("resample step", self.resample_step)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.isomap_k < 2 {
            return Err(invalid(format!("isomap k must be at least 2, got {}", self.isomap_k)));
        }
        Ok(())
    }
}

/// Output of the full pipeline, with the intermediates the CLI can export.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub curve: Polyline,
    /// Size of the filtered cloud before suppression.
    pub extracted: usize,
    /// Cloud after suppression, in ordering (curve) order.
    pub thinned: PointCloud,
    pub bridged: bool,
}

impl Detection {
    pub fn warnings(&self) -> Vec<String> {
        if self.bridged {
            vec!["disconnected-graph-bridged".to_string()]
        } else {
            Vec::new()
        }
    }
}

/// `{ p + F̂_p : Ĉ_p ≥ t, ‖F̂_p‖ ≤ R_f }` in raster order, with confidence `−‖F̂_p‖`.
pub fn extract_point_cloud(field: &VectorField, closeness: &ScalarField, config: &DetectorConfig) -> Result<PointCloud> {
    extract_point_cloud_with(field, closeness, config, Execution::default())
}

pub fn extract_point_cloud_with(
    field: &VectorField,
    closeness: &ScalarField,
    config: &DetectorConfig,
    exec: Execution,
) -> Result<PointCloud> {
    config.validate()?;
    check_same_grid(field.grid(), closeness.grid(), "point cloud extraction")?;
    let grid = field.grid();
    let f = field.vectors();
    let c = closeness.values();
    let selected = exec.map(grid.len(), |l| {
        let norm = f[l].norm();
        (c[l] >= config.threshold && norm <= config.r_f).then(|| (grid.world_linear(l) + f[l], -norm))
    });
    let mut cloud = PointCloud::default();
    for (p, conf) in selected.into_iter().flatten() {
        cloud.push(p, conf);
    }
    Ok(cloud)
}

fn thin_and_order(cloud: PointCloud, config: &DetectorConfig, exec: Execution) -> Result<Detection> {
    if cloud.is_empty() {
        return Err(Error::NoCurveDetected("no voxel passed the filters".into()));
    }
    let extracted = cloud.len();
    let thinned = nms(&cloud, config.nms_radius)?;
    let ordered = order_points_isomap_with(&thinned, config.isomap_k, exec)?;
    let curve = resample_polyline(&ordered.curve, config.resample_step)?;
    let thinned = PointCloud::new(
        ordered.order.iter().map(|&i| thinned.points()[i]).collect(),
        ordered.order.iter().map(|&i| thinned.confidence()[i]).collect(),
    )?;
    Ok(Detection { curve, extracted, thinned, bridged: ordered.bridged })
}

/// Full pipeline: extract → NMS → Isomap ordering → resample.
pub fn detect_curve(field: &VectorField, closeness: &ScalarField, config: &DetectorConfig) -> Result<Detection> {
    detect_curve_with(field, closeness, config, Execution::default())
}

pub fn detect_curve_with(
    field: &VectorField,
    closeness: &ScalarField,
    config: &DetectorConfig,
    exec: Execution,
) -> Result<Detection> {
    let cloud = extract_point_cloud_with(field, closeness, config, exec)?;
    thin_and_order(cloud, config, exec)
}

/// Segmentation baseline: voxel centers of a binary curve mask, all with
/// equal confidence, then the same thinning and ordering.
pub fn baseline_segmentation(mask: &ScalarField, config: &DetectorConfig) -> Result<Detection> {
    config.validate()?;
    if !mask.is_binary() {
        return Err(invalid("segmentation mask must be binary"));
    }
    let grid = mask.grid();
    let mut cloud = PointCloud::default();
    for (l, _) in mask.values().iter().enumerate().filter(|(_, &v)| v == 1.0) {
        cloud.push(grid.world_linear(l), 0.0);
    }
    if cloud.len() < 2 {
        return Err(Error::NoCurveDetected(format!("mask has {} foreground voxels", cloud.len())));
    }
    thin_and_order(cloud, config, Execution::default())
}

/// Heatmap baseline: voxel centers with `Ĉ ≥ t` and predicted distance
/// `≤ tau`, confidence `−distance`.
pub fn baseline_heatmap(
    distances: &ScalarField,
    closeness: &ScalarField,
    tau: f64,
    config: &DetectorConfig,
) -> Result<Detection> {
    config.validate()?;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid(format!("heatmap threshold must be positive, got {tau}")));
    }
    check_same_grid(distances.grid(), closeness.grid(), "heatmap baseline")?;
    let grid = distances.grid();
    let mut cloud = PointCloud::default();
    for (l, (&d, &c)) in distances.values().iter().zip(closeness.values()).enumerate() {
        if c >= config.threshold && d <= tau {
            cloud.push(grid.world_linear(l), -d);
        }
    }
    thin_and_order(cloud, config, Execution::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Grid3, Spacing, Vec3};
    use crate::groundtruth::{attraction_field, closeness_map, distance_map};

    fn setup() -> (VectorField, ScalarField) {
        let g = Grid3::new([16, 16, 16], Spacing::isotropic(2.0).unwrap(), Vec3::zeros()).unwrap();
        let c = Polyline::new(vec![Vec3::new(3.3, 4.1, 2.0), Vec3::new(27.0, 25.2, 28.4)]).unwrap();
        let f = attraction_field(&g, &c);
        let cl = closeness_map(&f, 10.0).unwrap();
        (f, cl)
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig::default().validate().is_ok());
        assert!(DetectorConfig { threshold: 1.5, ..Default::default() }.validate().is_err());
        assert!(DetectorConfig { isomap_k: 1, ..Default::default() }.validate().is_err());
        assert!(DetectorConfig { nms_radius: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn zero_closeness_gives_empty_cloud_and_no_curve() {
        let (f, cl) = setup();
        let zeros = ScalarField::filled(cl.grid().clone(), 0.0);
        assert!(extract_point_cloud(&f, &zeros, &DetectorConfig::default()).unwrap().is_empty());
        assert!(matches!(
            detect_curve(&f, &zeros, &DetectorConfig::default()),
            Err(Error::NoCurveDetected(_))
        ));
    }

    #[test]
    fn single_voxel_mask_is_no_curve() {
        let (_, cl) = setup();
        let mut v = vec![0.0; cl.grid().len()];
        v[100] = 1.0;
        let mask = ScalarField::new(cl.grid().clone(), v).unwrap();
        assert!(matches!(
            baseline_segmentation(&mask, &DetectorConfig::default()),
            Err(Error::NoCurveDetected(_))
        ));
    }

    #[test]
    fn tiny_tau_is_no_curve() {
        let (f, cl) = setup();
        let d = distance_map(&f);
        let min = d.values().iter().copied().fold(f64::INFINITY, f64::min);
        assert!(matches!(
            baseline_heatmap(&d, &cl, min * 0.5, &DetectorConfig::default()),
            Err(Error::NoCurveDetected(_))
        ));
    }

    #[test]
    fn detection_is_repeatable() {
        let (f, cl) = setup();
        let a = detect_curve(&f, &cl, &DetectorConfig::default()).unwrap();
        let b = detect_curve_with(&f, &cl, &DetectorConfig::default(), Execution::Sequential).unwrap();
        assert_eq!(a, b);
    }
}
