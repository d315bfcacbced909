//! Synthetic curves, oracle perturbations and distractors.
//!
//! These stand in for a trained field/closeness predictor: the oracle field
//! of a known curve plus controlled noise is fed through the same pipeline.

use std::f64::consts::PI;

use nalgebra::{Quaternion, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{Grid3, Polyline, ScalarField, Spacing, Vec3, VectorField};
use crate::groundtruth::{attraction_field, closeness_map, SegmentIndex};
use crate::{invalid, Result};

/// Upper bound on the gap between consecutive generated points.
pub const MAX_SAMPLE_GAP: f64 = 0.5;
const TARGET_GAP: f64 = 0.4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveKind {
    Line { start: [f64; 3], end: [f64; 3] },
    /// Planar arc in the xy-plane around the origin, starting on +x.
    Arc { radius: f64, sweep_degrees: f64 },
    /// Helix around the z-axis starting at `(radius, 0, 0)`.
    Helix { radius: f64, pitch: f64, turns: f64 },
    /// Semicircular arch in the xz-plane joined to a straight descent along −z.
    Cane { arch_radius: f64, descent: f64 },
    /// `x = amplitude · sin(2π z / wavelength)` for `z ∈ [0, length]`.
    Sinusoid { amplitude: f64, wavelength: f64, length: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    #[serde(flatten)]
    pub kind: CurveKind,
    /// When set, the curve is rotated about its centroid by a random rotation drawn from this seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl CurveSpec {
    pub fn new(kind: CurveKind) -> Self {
        Self { kind, seed: None }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            CurveKind::Line { .. } => "line",
            CurveKind::Arc { .. } => "arc",
            CurveKind::Helix { .. } => "helix",
            CurveKind::Cane { .. } => "cane",
            CurveKind::Sinusoid { .. } => "sinusoid",
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(invalid(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Samples `f` on `[0, 1]` with enough segments that no chord exceeds the
/// target gap, given an upper bound on `|f'|`.
fn sample(max_speed: f64, f: impl Fn(f64) -> Vec3) -> Vec<Vec3> {
    let n = ((max_speed / TARGET_GAP).ceil() as usize).max(1);
    (0..=n).map(|i| f(i as f64 / n as f64)).collect()
}

pub fn make_curve(spec: &CurveSpec) -> Result<Polyline> {
    let points = match spec.kind {
        CurveKind::Line { start, end } => {
            let (a, b) = (Vec3::from(start), Vec3::from(end));
            let len = (b - a).norm();
            positive("line length", len)?;
            sample(len, |u| a + (b - a) * u)
        }
        CurveKind::Arc { radius, sweep_degrees } => {
            positive("arc radius", radius)?;
            positive("arc sweep", sweep_degrees)?;
            if sweep_degrees >= 360.0 {
                return Err(invalid("arc sweep must be below 360 degrees"));
            }
            let sweep = sweep_degrees.to_radians();
            sample(radius * sweep, |u| {
                let a = sweep * u;
                Vec3::new(radius * a.cos(), radius * a.sin(), 0.0)
            })
        }
        CurveKind::Helix { radius, pitch, turns } => {
            positive("helix radius", radius)?;
            positive("helix pitch", pitch)?;
            positive("helix turns", turns)?;
            let angle = 2.0 * PI * turns;
            let len = turns * ((2.0 * PI * radius).powi(2) + pitch * pitch).sqrt();
            sample(len, |u| {
                let a = angle * u;
                Vec3::new(radius * a.cos(), radius * a.sin(), pitch * turns * u)
            })
        }
        CurveKind::Cane { arch_radius, descent } => {
            positive("cane arch radius", arch_radius)?;
            positive("cane descent", descent)?;
            let r = arch_radius;
            let mut pts = sample(PI * r, |u| {
                let a = PI * (1.0 - u);
                Vec3::new(r * a.cos(), 0.0, r * a.sin())
            });
            // The arch ends at (r, 0, 0) heading straight down.
            let joint = Vec3::new(r, 0.0, 0.0);
            *pts.last_mut().expect("non-empty") = joint;
            let tail = sample(descent, |u| joint - Vec3::new(0.0, 0.0, descent * u));
            pts.extend_from_slice(&tail[1..]);
            pts
        }
        CurveKind::Sinusoid { amplitude, wavelength, length } => {
            positive("sinusoid wavelength", wavelength)?;
            positive("sinusoid length", length)?;
            if !(amplitude.is_finite() && amplitude >= 0.0) {
                return Err(invalid(format!("sinusoid amplitude must be non-negative, got {amplitude}")));
            }
            let k = 2.0 * PI / wavelength;
            let max_speed = length * (1.0 + (amplitude * k).powi(2)).sqrt();
            sample(max_speed, |u| {
                let z = length * u;
                Vec3::new(amplitude * (k * z).sin(), 0.0, z)
            })
        }
    };
    let curve = Polyline::new(points)?;
    match spec.seed {
        None => Ok(curve),
        Some(seed) => {
            let rotation = random_rotation(seed);
            let n = curve.len() as f64;
            let centroid = curve.points().iter().fold(Vec3::zeros(), |acc, p| acc + p) / n;
            curve.map_points(|p| centroid + rotation * (p - centroid))
        }
    }
}

fn random_rotation(seed: u64) -> UnitQuaternion<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = [0.0; 4];
    loop {
        for c in &mut q {
            *c = StandardNormal.sample(&mut rng);
        }
        if q.iter().map(|c| c * c).sum::<f64>() > 1e-12 {
            break;
        }
    }
    UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
}

/// Adds independent `N(0, sigma²)` noise to every vector component.
pub fn perturb_field(field: &VectorField, sigma: f64, seed: u64) -> Result<VectorField> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(invalid(format!("noise sigma must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(field.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vectors = field
        .vectors()
        .iter()
        .map(|v| v + Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect();
    VectorField::new(field.grid().clone(), vectors)
}

/// Adds `N(0, sigma²)` noise to a scalar map (used for noisy heatmaps).
pub fn perturb_scalar(map: &ScalarField, sigma: f64, seed: u64) -> Result<ScalarField> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(invalid(format!("noise sigma must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(map.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = map.values().iter().map(|v| v + normal.sample(&mut rng)).collect();
    ScalarField::new(map.grid().clone(), values)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistractorMode {
    /// No closeness head: the distractor neighbourhood is marked close.
    Att,
    /// Closeness head intact: the closeness map is left as given.
    Ours,
}

/// Overwrites the field within `radius` of `distractor` so it points at the
/// distractor; in [`DistractorMode::Att`] those voxels also become close.
pub fn add_distractor(
    field: &VectorField,
    closeness: &ScalarField,
    distractor: &Polyline,
    radius: f64,
    mode: DistractorMode,
) -> Result<(VectorField, ScalarField)> {
    positive("distractor radius", radius)?;
    crate::geometry::check_same_grid(field.grid(), closeness.grid(), "distractor")?;
    let grid = field.grid();
    let index = SegmentIndex::new(distractor);
    let mut vectors = field.vectors().to_vec();
    let mut values = closeness.values().to_vec();
    for (l, (v, c)) in vectors.iter_mut().zip(values.iter_mut()).enumerate() {
        let p = grid.world_linear(l);
        let proj = index.project(&p);
        if proj.distance <= radius {
            *v = proj.offset;
            if mode == DistractorMode::Att {
                *c = 1.0;
            }
        }
    }
    Ok((VectorField::new(grid.clone(), vectors)?, ScalarField::new(grid.clone(), values)?))
}

/// Flips each voxel of a binary map independently with probability `flip_rate`.
pub fn corrupt_closeness(closeness: &ScalarField, flip_rate: f64, seed: u64) -> Result<ScalarField> {
    if !(0.0..=1.0).contains(&flip_rate) {
        return Err(invalid(format!("flip rate must lie in [0, 1], got {flip_rate}")));
    }
    if !closeness.is_binary() {
        return Err(invalid("closeness map to corrupt must be binary"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = closeness
        .values()
        .iter()
        .map(|&v| if rng.random::<f64>() < flip_rate { 1.0 - v } else { v })
        .collect();
    ScalarField::new(closeness.grid().clone(), values)
}

/// Tube intensity: 1 within `tube_radius`, a linear ramp to 0 over `falloff`, 0 beyond.
pub fn render_tube_volume(curve: &Polyline, tube_radius: f64, grid: &Grid3, falloff: f64) -> Result<ScalarField> {
    positive("tube radius", tube_radius)?;
    if !(falloff.is_finite() && falloff >= 0.0) {
        return Err(invalid(format!("falloff must be non-negative, got {falloff}")));
    }
    let index = SegmentIndex::new(curve);
    let values = (0..grid.len())
        .map(|l| {
            let d = index.project(&grid.world_linear(l)).distance;
            if d <= tube_radius {
                1.0
            } else if falloff > 0.0 && d < tube_radius + falloff {
                1.0 - (d - tube_radius) / falloff
            } else {
                0.0
            }
        })
        .collect();
    ScalarField::new(grid.clone(), values)
}

/// One-voxel-wide binary mask: the voxel nearest to each dense curve sample.
pub fn rasterize_curve(curve: &Polyline, grid: &Grid3) -> Result<ScalarField> {
    let step = grid.spacing().min() / 4.0;
    let dense = crate::geometry::resample_polyline(curve, step)?;
    let spacing = grid.spacing().as_vec();
    let shape = grid.shape();
    let mut values = vec![0.0; grid.len()];
    for p in dense.points() {
        let rel = (p - grid.origin()).component_div(&spacing);
        let idx = [rel.x, rel.y, rel.z].map(|c| c.round());
        if idx.iter().zip(shape).all(|(&c, n)| c >= 0.0 && (c as usize) < n) {
            values[grid.linear(idx.map(|c| c as usize))] = 1.0;
        }
    }
    ScalarField::new(grid.clone(), values)
}

/// Smallest world-aligned grid (voxel centers at integer multiples of
/// `spacing`) covering the curve plus `margin` on every side.
pub fn fit_grid(curve: &Polyline, spacing: f64, margin: f64, max_per_axis: usize) -> Result<Grid3> {
    positive("spacing", spacing)?;
    let (lo, hi) = curve.bounding_box();
    let origin = (lo - Vec3::repeat(margin)).map(|c| (c / spacing).floor() * spacing);
    let top = (hi + Vec3::repeat(margin)).map(|c| (c / spacing).ceil() * spacing);
    let shape = [0, 1, 2].map(|d| ((top[d] - origin[d]) / spacing).round() as usize + 1);
    if shape.iter().any(|&n| n > max_per_axis) {
        return Err(invalid(format!("curve needs grid {shape:?}, above the {max_per_axis} voxel cap")));
    }
    Grid3::new(shape, Spacing::isotropic(spacing)?, origin)
}

/// A curve on a fitted grid together with its exact field and closeness.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub curve: Polyline,
    pub grid: Grid3,
    pub field: VectorField,
}

impl Fixture {
    pub fn build(name: &str, curve: Polyline, spacing: f64, margin: f64, max_per_axis: usize) -> Result<Self> {
        let grid = fit_grid(&curve, spacing, margin, max_per_axis)?;
        let field = attraction_field(&grid, &curve);
        Ok(Self { name: name.to_string(), curve, grid, field })
    }

    pub fn closeness(&self, r_c: f64) -> Result<ScalarField> {
        closeness_map(&self.field, r_c)
    }
}

/// Sub-voxel shift applied to the standard fixtures so no curve sits on voxel centers.
pub const FIXTURE_OFFSET: [f64; 3] = [0.37, 0.61, 0.23];

/// The five reference shapes used by the acceptance suite and the benchmark.
pub fn standard_specs() -> Vec<CurveSpec> {
    vec![
        CurveSpec::new(CurveKind::Line { start: [0.0, 0.0, 0.0], end: [40.0, 25.0, 90.0] }),
        CurveSpec::new(CurveKind::Arc { radius: 40.0, sweep_degrees: 180.0 }),
        CurveSpec::new(CurveKind::Helix { radius: 15.0, pitch: 30.0, turns: 2.0 }),
        CurveSpec::new(CurveKind::Cane { arch_radius: 15.0, descent: 80.0 }),
        CurveSpec::new(CurveKind::Sinusoid { amplitude: 10.0, wavelength: 40.0, length: 100.0 }),
    ]
}

/// Standard fixtures at `spacing` with a 12 mm margin on a grid of at most 64 voxels per axis.
pub fn standard_fixtures(spacing: f64) -> Result<Vec<Fixture>> {
    standard_specs()
        .iter()
        .map(|spec| {
            let curve = make_curve(spec)?.translated(Vec3::from(FIXTURE_OFFSET));
            Fixture::build(spec.name(), curve, spacing, 12.0, 64)
        })
        .collect()
}
