//! Masked field, closeness and norm losses and their unweighted sum.
//!
//! The field term is averaged over voxels whose ground-truth distance is at
//! most `R_f`, the norm term over those within `R_c`, and the closeness
//! cross-entropy over every voxel. Every mean is a fixed-order pairwise sum,
//! so results are bitwise reproducible.

use serde::{Deserialize, Serialize};

use crate::exec::pairwise_sum;
use crate::geometry::{check_same_grid, ScalarField, Vec3, VectorField};
use crate::{invalid, Error, Result};

/// Probability clamp for the binary cross-entropy.
pub const BCE_EPSILON: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub field_loss: f64,
    pub closeness_loss: f64,
    pub norm_loss: f64,
    pub total: f64,
    pub field_mask_count: usize,
    pub norm_mask_count: usize,
    pub squared_field_loss: bool,
    pub r_c: f64,
    pub r_f: f64,
}

fn check_radius(name: &str, r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(invalid(format!("{name} must be positive, got {r}")));
    }
    Ok(())
}

fn masked_mean(
    pred: &VectorField,
    gt: &VectorField,
    radius: f64,
    label: &str,
    term: impl Fn(&Vec3, &Vec3) -> f64,
) -> Result<(f64, usize)> {
    check_same_grid(pred.grid(), gt.grid(), label)?;
    let terms: Vec<f64> = pred
        .vectors()
        .iter()
        .zip(gt.vectors())
        .filter(|(_, g)| g.norm() <= radius)
        .map(|(p, g)| term(p, g))
        .collect();
    if terms.is_empty() {
        return Err(Error::EmptyMask(format!("{label}: ‖F‖ ≤ {radius}")));
    }
    Ok((pairwise_sum(&terms) / terms.len() as f64, terms.len()))
}

fn field_loss_counted(
    pred: &VectorField,
    gt: &VectorField,
    r_f: f64,
    squared: bool,
) -> Result<(f64, usize)> {
    check_radius("R_f", r_f)?;
    masked_mean(pred, gt, r_f, "field loss", |p, g| {
        let d = (p - g).norm();
        if squared {
            d * d
        } else {
            d
        }
    })
}

/// Mean of `‖F̂ − F‖` (or its square) over voxels with `‖F‖ ≤ r_f`.
pub fn field_loss(pred: &VectorField, gt: &VectorField, r_f: f64, squared: bool) -> Result<f64> {
    field_loss_counted(pred, gt, r_f, squared).map(|(v, _)| v)
}

/// Mean binary cross-entropy over every voxel, with predictions clamped to
/// `[ε, 1 − ε]`.
pub fn closeness_loss(pred: &ScalarField, gt: &ScalarField) -> Result<f64> {
    check_same_grid(pred.grid(), gt.grid(), "closeness loss")?;
    if let Some(v) = gt.values().iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(invalid(format!("ground-truth closeness must be 0 or 1, found {v}")));
    }
    let terms: Vec<f64> = pred
        .values()
        .iter()
        .zip(gt.values())
        .map(|(&p, &c)| {
            let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            -(c * p.ln() + (1.0 - c) * (1.0 - p).ln())
        })
        .collect();
    Ok(pairwise_sum(&terms) / terms.len() as f64)
}

fn norm_loss_counted(pred: &VectorField, gt: &VectorField, r_c: f64) -> Result<(f64, usize)> {
    check_radius("R_c", r_c)?;
    masked_mean(pred, gt, r_c, "norm loss", |p, g| (p.norm() - g.norm()).abs())
}

/// Mean of `|‖F̂‖ − ‖F‖|` over voxels with `‖F‖ ≤ r_c`.
pub fn norm_loss(pred: &VectorField, gt: &VectorField, r_c: f64) -> Result<f64> {
    norm_loss_counted(pred, gt, r_c).map(|(v, _)| v)
}

pub fn total_loss(
    pred_field: &VectorField,
    gt_field: &VectorField,
    pred_closeness: &ScalarField,
    gt_closeness: &ScalarField,
    r_c: f64,
    r_f: f64,
    squared: bool,
) -> Result<LossReport> {
    check_same_grid(pred_field.grid(), pred_closeness.grid(), "total loss")?;
    if r_f > r_c {
        log::warn!("R_f = {r_f} exceeds R_c = {r_c}; the field mask is wider than the closeness region");
    }
    let (field, field_mask_count) = field_loss_counted(pred_field, gt_field, r_f, squared)?;
    let closeness = closeness_loss(pred_closeness, gt_closeness)?;
    let (norm, norm_mask_count) = norm_loss_counted(pred_field, gt_field, r_c)?;
    Ok(LossReport {
        field_loss: field,
        closeness_loss: closeness,
        norm_loss: norm,
        total: field + closeness + norm,
        field_mask_count,
        norm_mask_count,
        squared_field_loss: squared,
        r_c,
        r_f,
    })
}
