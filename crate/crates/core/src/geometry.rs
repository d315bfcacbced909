//! Voxel lattices, polylines and the per-voxel field containers.
//!
//! Voxel index `(i, j, k)` maps to the *center* of that voxel:
//! `origin + (i, j, k) ⊙ spacing`. Linear storage is x-fastest:
//! `i + nx * (j + ny * k)`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::{invalid, Error, Result};

pub type Vec3 = Vector3<f64>;

/// Millimeters per voxel along x, y and z.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spacing {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl Spacing {
    pub fn new(sx: f64, sy: f64, sz: f64) -> Result<Self> {
        for s in [sx, sy, sz] {
            if !(s.is_finite() && s > 0.0) {
                return Err(invalid(format!("spacing must be positive and finite, got {s}")));
            }
        }
        Ok(Self { sx, sy, sz })
    }

    pub fn isotropic(s: f64) -> Result<Self> {
        Self::new(s, s, s)
    }

    pub fn as_vec(&self) -> Vec3 {
        Vec3::new(self.sx, self.sy, self.sz)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.sx, self.sy, self.sz]
    }

    pub fn min(&self) -> f64 {
        self.sx.min(self.sy).min(self.sz)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid3 {
    shape: [usize; 3],
    spacing: Spacing,
    origin: Vec3,
}

impl Grid3 {
    pub fn new(shape: [usize; 3], spacing: Spacing, origin: Vec3) -> Result<Self> {
        if shape.contains(&0) {
            return Err(invalid(format!("grid shape must be at least 1 per axis, got {shape:?}")));
        }
        if !origin.iter().all(|c| c.is_finite()) {
            return Err(invalid("grid origin must be finite"));
        }
        shape
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| invalid("grid voxel count overflows"))?;
        Ok(Self { shape, spacing, origin })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, index: [usize; 3]) -> bool {
        index.iter().zip(self.shape.iter()).all(|(i, n)| i < n)
    }

    pub fn linear(&self, index: [usize; 3]) -> usize {
        index[0] + self.shape[0] * (index[1] + self.shape[1] * index[2])
    }

    pub fn unravel(&self, linear: usize) -> [usize; 3] {
        let [nx, ny, _] = self.shape;
        [linear % nx, (linear / nx) % ny, linear / (nx * ny)]
    }

    /// World position of a voxel center. The caller guarantees the index is in range.
    pub fn world(&self, index: [usize; 3]) -> Vec3 {
        Vec3::new(
            self.origin.x + index[0] as f64 * self.spacing.sx,
            self.origin.y + index[1] as f64 * self.spacing.sy,
            self.origin.z + index[2] as f64 * self.spacing.sz,
        )
    }

    pub fn world_linear(&self, linear: usize) -> Vec3 {
        self.world(self.unravel(linear))
    }

    /// Same lattice shifted by `offset` millimeters.
    pub fn translated(&self, offset: Vec3) -> Self {
        Self { origin: self.origin + offset, ..self.clone() }
    }
}

/// Checked voxel-center lookup.
pub fn world_coordinates(grid: &Grid3, index: [usize; 3]) -> Result<Vec3> {
    if !grid.contains(index) {
        return Err(Error::OutOfBounds { index, shape: grid.shape() });
    }
    Ok(grid.world(index))
}

/// An ordered, piecewise-linear curve with cached cumulative arc length.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    points: Vec<Vec3>,
    cumulative: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid(format!("polyline needs at least 2 points, got {}", points.len())));
        }
        if let Some(p) = points.iter().find(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(invalid(format!("polyline point {p:?} is not finite")));
        }
        let mut cumulative = Vec::with_capacity(points.len());
        cumulative.push(0.0);
        for (i, w) in points.windows(2).enumerate() {
            let len = (w[1] - w[0]).norm();
            if len <= 0.0 {
                return Err(invalid(format!("polyline segment {i} has zero length")));
            }
            cumulative.push(cumulative[i] + len);
        }
        Ok(Self { points, cumulative })
    }

    /// Builds a polyline after dropping consecutive duplicate points.
    pub fn from_points_dedup(points: impl IntoIterator<Item = Vec3>) -> Result<Self> {
        let mut out: Vec<Vec3> = Vec::new();
        for p in points {
            if out.last() != Some(&p) {
                out.push(p);
            }
        }
        Self::new(out)
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn segment_count(&self) -> usize {
        self.points.len() - 1
    }

    pub fn segment(&self, i: usize) -> (Vec3, Vec3) {
        (self.points[i], self.points[i + 1])
    }

    pub fn total_length(&self) -> f64 {
        self.cumulative[self.cumulative.len() - 1]
    }

    /// Arc length at each vertex.
    pub fn cumulative_lengths(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn first(&self) -> Vec3 {
        self.points[0]
    }

    pub fn last(&self) -> Vec3 {
        self.points[self.points.len() - 1]
    }

    pub fn translated(&self, offset: Vec3) -> Self {
        Self::new(self.points.iter().map(|p| p + offset).collect())
            .expect("translation keeps segments non-degenerate")
    }

    pub fn reversed(&self) -> Self {
        Self::new(self.points.iter().rev().copied().collect()).expect("reversal keeps invariants")
    }

    /// Applies `f` to every vertex. Fails if the image has a zero-length segment.
    pub fn map_points(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<Self> {
        Self::new(self.points.iter().map(f).collect())
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points[1..] {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }
}

/// Samples `curve` at arc lengths `0, step, 2·step, …` plus the final endpoint.
///
/// A sample closer than `1e-9·max(1, L)` to the end is treated as the end
/// itself, so exact multiples do not produce a duplicated endpoint.
pub fn resample_polyline(curve: &Polyline, step: f64) -> Result<Polyline> {
    if !(step.is_finite() && step > 0.0) {
        return Err(invalid(format!("resample step must be positive, got {step}")));
    }
    let total = curve.total_length();
    let tol = 1e-9 * total.max(1.0);
    let cum = curve.cumulative_lengths();
    let mut out = Vec::with_capacity((total / step) as usize + 2);
    out.push(curve.first());
    let mut seg = 0;
    let mut k = 1usize;
    loop {
        let s = k as f64 * step;
        if s >= total - tol {
            break;
        }
        while cum[seg + 1] < s {
            seg += 1;
        }
        let (a, b) = curve.segment(seg);
        let t = (s - cum[seg]) / (cum[seg + 1] - cum[seg]);
        out.push(a + (b - a) * t);
        k += 1;
    }
    out.push(curve.last());
    Polyline::new(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid3,
    vectors: Vec<Vec3>,
}

impl VectorField {
    pub fn new(grid: Grid3, vectors: Vec<Vec3>) -> Result<Self> {
        if vectors.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "vector field has {} entries, grid {:?} needs {}",
                vectors.len(),
                grid.shape(),
                grid.len()
            )));
        }
        if !vectors.iter().all(|v| v.iter().all(|c| c.is_finite())) {
            return Err(invalid("vector field contains non-finite components"));
        }
        Ok(Self { grid, vectors })
    }

    pub fn zeros(grid: Grid3) -> Self {
        let n = grid.len();
        Self { grid, vectors: vec![Vec3::zeros(); n] }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn vectors(&self) -> &[Vec3] {
        &self.vectors
    }

    pub fn get(&self, index: [usize; 3]) -> Vec3 {
        self.vectors[self.grid.linear(index)]
    }

    pub fn into_parts(self) -> (Grid3, Vec<Vec3>) {
        (self.grid, self.vectors)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid3,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid3, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "scalar field has {} entries, grid {:?} needs {}",
                values.len(),
                grid.shape(),
                grid.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(invalid("scalar field contains non-finite values"));
        }
        Ok(Self { grid, values })
    }

    pub fn filled(grid: Grid3, value: f64) -> Self {
        let n = grid.len();
        Self { grid, values: vec![value; n] }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, index: [usize; 3]) -> f64 {
        self.values[self.grid.linear(index)]
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn into_parts(self) -> (Grid3, Vec<f64>) {
        (self.grid, self.values)
    }
}

/// Unordered points with one confidence score each.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    confidence: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, confidence: Vec<f64>) -> Result<Self> {
        if points.len() != confidence.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} points but {} confidences",
                points.len(),
                confidence.len()
            )));
        }
        Ok(Self { points, confidence })
    }

    pub fn push(&mut self, point: Vec3, confidence: f64) {
        self.points.push(point);
        self.confidence.push(confidence);
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn confidence(&self) -> &[f64] {
        &self.confidence
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub(crate) fn check_same_grid(a: &Grid3, b: &Grid3, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!(
            "{what}: grid {:?} does not match {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(origin: [f64; 3], spacing: [f64; 3]) -> Grid3 {
        Grid3::new(
            [8, 8, 8],
            Spacing::new(spacing[0], spacing[1], spacing[2]).unwrap(),
            Vec3::from(origin),
        )
        .unwrap()
    }

    #[test]
    fn world_coordinates_examples() {
        let g = grid([0.0; 3], [2.0; 3]);
        assert_eq!(world_coordinates(&g, [0, 0, 0]).unwrap(), Vec3::zeros());
        assert_eq!(world_coordinates(&g, [3, 1, 0]).unwrap(), Vec3::new(6.0, 2.0, 0.0));
        let g = grid([-1.0, 0.0, 5.0], [1.0, 2.0, 3.0]);
        assert_eq!(world_coordinates(&g, [2, 2, 2]).unwrap(), Vec3::new(1.0, 4.0, 11.0));
    }

    #[test]
    fn world_coordinates_out_of_bounds() {
        let g = grid([0.0; 3], [2.0; 3]);
        assert!(matches!(world_coordinates(&g, [8, 0, 0]), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn linear_round_trip() {
        let g = Grid3::new([3, 4, 5], Spacing::isotropic(1.0).unwrap(), Vec3::zeros()).unwrap();
        for l in 0..g.len() {
            assert_eq!(g.linear(g.unravel(l)), l);
        }
        assert_eq!(g.linear([1, 0, 0]), 1);
        assert_eq!(g.linear([0, 1, 0]), 3);
        assert_eq!(g.linear([0, 0, 1]), 12);
    }

    #[test]
    fn invalid_spacing_and_shape() {
        assert!(Spacing::new(0.0, 1.0, 1.0).is_err());
        assert!(Spacing::new(1.0, f64::NAN, 1.0).is_err());
        assert!(Grid3::new([0, 1, 1], Spacing::isotropic(1.0).unwrap(), Vec3::zeros()).is_err());
    }

    #[test]
    fn polyline_rejects_degenerate() {
        assert!(Polyline::new(vec![Vec3::zeros()]).is_err());
        assert!(Polyline::new(vec![Vec3::zeros(), Vec3::zeros()]).is_err());
        let p = Polyline::new(vec![Vec3::zeros(), Vec3::new(3.0, 4.0, 0.0), Vec3::new(3.0, 4.0, 2.0)])
            .unwrap();
        assert_eq!(p.total_length(), 7.0);
    }

    #[test]
    fn resample_straight_segment() {
        let p = Polyline::new(vec![Vec3::zeros(), Vec3::new(10.0, 0.0, 0.0)]).unwrap();
        let r = resample_polyline(&p, 2.0).unwrap();
        let xs: Vec<f64> = r.points().iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
    }

    #[test]
    fn resample_coarse_step_keeps_endpoints() {
        let p = Polyline::new(vec![Vec3::zeros(), Vec3::new(1.0, 1.0, 0.0), Vec3::new(2.0, 0.0, 0.0)])
            .unwrap();
        for step in [p.total_length(), 10.0] {
            let r = resample_polyline(&p, step).unwrap();
            assert_eq!(r.points(), &[p.first(), p.last()]);
        }
    }

    #[test]
    fn resample_l_shape() {
        let p = Polyline::new(vec![Vec3::zeros(), Vec3::new(4.0, 0.0, 0.0), Vec3::new(4.0, 3.0, 0.0)])
            .unwrap();
        let r = resample_polyline(&p, 2.0).unwrap();
        let expected = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(4.0, 0.0, 0.0),
            Vec3::new(4.0, 2.0, 0.0),
            Vec3::new(4.0, 3.0, 0.0),
        ];
        assert_eq!(r.points(), &expected);
    }

    #[test]
    fn resample_rejects_bad_step() {
        let p = Polyline::new(vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)]).unwrap();
        assert!(resample_polyline(&p, 0.0).is_err());
        assert!(resample_polyline(&p, -1.0).is_err());
    }

    #[test]
    fn field_shape_checked() {
        let g = grid([0.0; 3], [1.0; 3]);
        assert!(matches!(ScalarField::new(g.clone(), vec![0.0; 3]), Err(Error::ShapeMismatch(_))));
        assert!(VectorField::new(g, vec![Vec3::zeros(); 512]).is_ok());
        assert!(PointCloud::new(vec![Vec3::zeros()], vec![]).is_err());
    }
}
