use std::cmp::Ordering;
use std::collections::HashMap;

use crate::geometry::{PointCloud, Vec3};
use crate::{invalid, Result};

pub(crate) fn lexicographic(a: &Vec3, b: &Vec3) -> Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z))
}

/// Indices of `cloud` sorted by descending confidence, ties by ascending
/// lexicographic point order, then by index.
pub(crate) fn confidence_order(cloud: &PointCloud) -> Vec<usize> {
    let pts = cloud.points();
    let conf = cloud.confidence();
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.sort_by(|&i, &j| {
        conf[j]
            .total_cmp(&conf[i])
            .then_with(|| lexicographic(&pts[i], &pts[j]))
            .then(i.cmp(&j))
    });
    order
}

/// Greedy non-maximum suppression with Euclidean closeness.
///
/// Points are visited by descending confidence; a point is kept unless a
/// previously kept point lies within `radius` (inclusive). Kept points are
/// returned in visiting order.
pub fn nms(cloud: &PointCloud, radius: f64) -> Result<PointCloud> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(invalid(format!("nms radius must be positive, got {radius}")));
    }
    let pts = cloud.points();
    let conf = cloud.confidence();
    // Slightly oversized cells keep every neighbour within `radius` inside the 3x3x3 block.
    let cell = radius * (1.0 + 1e-9);
    let key = |p: &Vec3| -> [i64; 3] { [p.x, p.y, p.z].map(|c| (c / cell).floor() as i64) };

    let mut kept_by_cell: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut out = PointCloud::default();
    for i in confidence_order(cloud) {
        let p = &pts[i];
        let k = key(p);
        let mut suppressed = false;
        'search: for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(kept) = kept_by_cell.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if kept.iter().any(|&j| (pts[j] - p).norm() <= radius) {
                            suppressed = true;
                            break 'search;
                        }
                    }
                }
            }
        }
        if !suppressed {
            kept_by_cell.entry(k).or_default().push(i);
            out.push(*p, conf[i]);
        }
    }
    Ok(out)
}
