//! Exact ground-truth attraction fields and closeness maps.
//!
//! For a voxel center `p` the attraction vector is `r_p − p`, where `r_p`
//! is the nearest point of the reference polyline. Equidistant candidates
//! (within [`TIE_TOLERANCE`]) resolve to the smallest segment index, which
//! makes the field single-valued even where several projections exist.

use crate::exec::Execution;
use crate::geometry::{Grid3, Polyline, ScalarField, Vec3, VectorField};
use crate::{invalid, Result};

/// Distances closer than this are considered tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    /// Nearest point on the curve.
    pub point: Vec3,
    /// `point − q`, formed from differences so it does not depend on where the origin sits.
    pub offset: Vec3,
    pub distance: f64,
    pub segment_index: usize,
    /// Position along the segment in `[0, 1]`.
    pub parameter: f64,
}

fn project_on_segment(q: &Vec3, a: &Vec3, b: &Vec3, segment_index: usize) -> Projection {
    let ab = b - a;
    let aq = q - a;
    let t = (aq.dot(&ab) / ab.dot(&ab)).clamp(0.0, 1.0);
    let offset = ab * t - aq;
    Projection { point: a + ab * t, offset, distance: offset.norm(), segment_index, parameter: t }
}

/// Canonical choice among candidate projections: the smallest segment index
/// whose distance is within [`TIE_TOLERANCE`] of the minimum.
fn select_canonical(candidates: &[Projection]) -> Projection {
    let dmin = candidates.iter().map(|p| p.distance).fold(f64::INFINITY, f64::min);
    *candidates
        .iter()
        .filter(|p| p.distance <= dmin + TIE_TOLERANCE)
        .min_by_key(|p| p.segment_index)
        .expect("at least one candidate")
}

/// Nearest point of `curve` to `q`, scanning every segment.
pub fn project_to_polyline(q: &Vec3, curve: &Polyline) -> Projection {
    let all: Vec<Projection> = (0..curve.segment_count())
        .map(|i| {
            let (a, b) = curve.segment(i);
            project_on_segment(q, &a, &b, i)
        })
        .collect();
    select_canonical(&all)
}

/// Uniform bucket grid over polyline segments.
///
/// Queries return exactly what [`project_to_polyline`] returns: a first
/// ring search gives an upper bound on the distance, then every bucket
/// overlapping the ball of that radius (plus the tie tolerance) is scanned.
pub struct SegmentIndex<'a> {
    curve: &'a Polyline,
    lo: Vec3,
    cell: f64,
    dims: [usize; 3],
    starts: Vec<usize>,
    items: Vec<u32>,
}

const MAX_BUCKETS: usize = 1 << 21;

impl<'a> SegmentIndex<'a> {
    pub fn new(curve: &'a Polyline) -> Self {
        let (lo, hi) = curve.bounding_box();
        let extent = hi - lo;
        let mean_segment = curve.total_length() / curve.segment_count() as f64;
        let mut cell = (2.0 * mean_segment).max(extent.max() / 32.0).max(1e-6);
        let dims = loop {
            let dims = [0, 1, 2].map(|d| (extent[d] / cell).floor() as usize + 1);
            if dims.iter().product::<usize>() <= MAX_BUCKETS {
                break dims;
            }
            cell *= 2.0;
        };

        let mut index = Self { curve, lo, cell, dims, starts: Vec::new(), items: Vec::new() };
        let n_buckets = dims.iter().product::<usize>();
        let ranges: Vec<([usize; 3], [usize; 3])> = (0..curve.segment_count())
            .map(|i| {
                let (a, b) = curve.segment(i);
                (index.cell_of(&a.inf(&b)), index.cell_of(&a.sup(&b)))
            })
            .collect();

        // Two-pass CSR fill.
        let mut counts = vec![0usize; n_buckets + 1];
        for (lo_c, hi_c) in &ranges {
            index.for_each_bucket(*lo_c, *hi_c, |b| counts[b + 1] += 1);
        }
        for b in 0..n_buckets {
            counts[b + 1] += counts[b];
        }
        let mut cursor = counts.clone();
        let mut items = vec![0u32; counts[n_buckets]];
        for (seg, (lo_c, hi_c)) in ranges.iter().enumerate() {
            index.for_each_bucket(*lo_c, *hi_c, |b| {
                items[cursor[b]] = seg as u32;
                cursor[b] += 1;
            });
        }
        index.starts = counts;
        index.items = items;
        index
    }

    fn axis_cell(&self, x: f64, d: usize) -> usize {
        let c = ((x - self.lo[d]) / self.cell).floor();
        if c <= 0.0 {
            0
        } else {
            (c as usize).min(self.dims[d] - 1)
        }
    }

    fn cell_of(&self, p: &Vec3) -> [usize; 3] {
        [0, 1, 2].map(|d| self.axis_cell(p[d], d))
    }

    fn bucket(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    fn for_each_bucket(&self, lo: [usize; 3], hi: [usize; 3], mut f: impl FnMut(usize)) {
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    f(self.bucket([x, y, z]));
                }
            }
        }
    }

    fn bucket_items(&self, b: usize) -> &[u32] {
        &self.items[self.starts[b]..self.starts[b + 1]]
    }

    fn upper_bound(&self, q: &Vec3) -> f64 {
        let center = self.cell_of(q);
        let max_ring = self.dims.iter().copied().max().unwrap_or(1);
        for ring in 0..=max_ring {
            let lo = [0, 1, 2].map(|d| center[d].saturating_sub(ring));
            let hi = [0, 1, 2].map(|d| (center[d] + ring).min(self.dims[d] - 1));
            let mut best = f64::INFINITY;
            let mut visit = |c: [usize; 3]| {
                for &s in self.bucket_items(self.bucket(c)) {
                    let (a, b) = self.curve.segment(s as usize);
                    best = best.min(project_on_segment(q, &a, &b, s as usize).distance);
                }
            };
            let on_shell = |v: usize, d: usize| v.abs_diff(center[d]) == ring;
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    if ring == 0 || on_shell(z, 2) || on_shell(y, 1) {
                        for x in lo[0]..=hi[0] {
                            visit([x, y, z]);
                        }
                    } else {
                        if on_shell(lo[0], 0) {
                            visit([lo[0], y, z]);
                        }
                        if hi[0] != lo[0] && on_shell(hi[0], 0) {
                            visit([hi[0], y, z]);
                        }
                    }
                }
            }
            if best.is_finite() {
                return best;
            }
        }
        unreachable!("every segment is registered in at least one bucket")
    }

    pub fn project(&self, q: &Vec3) -> Projection {
        let bound = self.upper_bound(q);
        let radius = (bound + TIE_TOLERANCE) * (1.0 + 1e-9) + 1e-9;
        let r = Vec3::repeat(radius);
        let lo = self.cell_of(&(q - r));
        let hi = self.cell_of(&(q + r));
        let mut segments: Vec<u32> = Vec::new();
        self.for_each_bucket(lo, hi, |b| segments.extend_from_slice(self.bucket_items(b)));
        segments.sort_unstable();
        segments.dedup();
        let candidates: Vec<Projection> = segments
            .iter()
            .map(|&s| {
                let (a, b) = self.curve.segment(s as usize);
                project_on_segment(q, &a, &b, s as usize)
            })
            .collect();
        select_canonical(&candidates)
    }
}

/// Attraction field `F_p = r_p − p` for every voxel, via the bucket index.
pub fn attraction_field(grid: &Grid3, curve: &Polyline) -> VectorField {
    attraction_field_with(grid, curve, Execution::default())
}

pub fn attraction_field_with(grid: &Grid3, curve: &Polyline, exec: Execution) -> VectorField {
    let index = SegmentIndex::new(curve);
    let vectors = exec.map(grid.len(), |l| {
        let q = grid.world_linear(l);
        index.project(&q).offset
    });
    VectorField::new(grid.clone(), vectors).expect("field matches grid")
}

/// Reference all-segments scan; the accelerated path must match it bitwise.
pub fn attraction_field_brute_force(grid: &Grid3, curve: &Polyline, exec: Execution) -> VectorField {
    let vectors = exec.map(grid.len(), |l| {
        let q = grid.world_linear(l);
        project_to_polyline(&q, curve).offset
    });
    VectorField::new(grid.clone(), vectors).expect("field matches grid")
}

/// Indicator of `‖F_p‖ ≤ r_c` (inclusive).
pub fn closeness_map(field: &VectorField, r_c: f64) -> Result<ScalarField> {
    if !(r_c.is_finite() && r_c > 0.0) {
        return Err(invalid(format!("closeness radius must be positive, got {r_c}")));
    }
    let values = field
        .vectors()
        .iter()
        .map(|v| if v.norm() <= r_c { 1.0 } else { 0.0 })
        .collect();
    ScalarField::new(field.grid().clone(), values)
}

/// Per-voxel `‖F_p‖`.
pub fn distance_map(field: &VectorField) -> ScalarField {
    let values = field.vectors().iter().map(|v| v.norm()).collect();
    ScalarField::new(field.grid().clone(), values).expect("norms of finite vectors are finite")
}
