//! Upper-left convex hull of (cost, accuracy) points.

use super::report::TradeoffPoint;

/// Twice the signed area of `a, b, c`; positive when `b` lies strictly below
/// the segment `a → c` (for `a.0 < c.0`).
fn cross(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Indices of points on the upper-left hull, ordered by cost.
///
/// A point is kept when no other point is at least as cheap and at least as
/// accurate, and it does not lie strictly below a segment joining two kept
/// points on either side of it. Points on a hull edge are kept. Of several
/// points with identical coordinates only the first is kept. Non-finite
/// points are ignored.
pub fn hull_indices(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len())
        .filter(|&i| points[i].0.is_finite() && points[i].1.is_finite())
        .collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (points[a], points[b]);
        pa.0.total_cmp(&pb.0)
            .then(pb.1.total_cmp(&pa.1))
            .then(a.cmp(&b))
    });

    let mut front: Vec<usize> = Vec::new();
    let mut best_acc = f64::NEG_INFINITY;
    for i in order {
        if points[i].1 > best_acc {
            best_acc = points[i].1;
            front.push(i);
        }
    }

    let mut hull: Vec<usize> = Vec::with_capacity(front.len());
    for i in front {
        while hull.len() >= 2 {
            let b = hull[hull.len() - 1];
            let a = hull[hull.len() - 2];
            if cross(points[a], points[b], points[i]) > 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// Points on the upper-left convex hull of mean cost against accuracy.
///
/// Among points with identical coordinates the one with the smallest
/// `(lambda, seed, split)` is kept.
pub fn convex_hull_select(points: &[TradeoffPoint]) -> Vec<TradeoffPoint> {
    let mut sorted: Vec<&TradeoffPoint> = points.iter().collect();
    sorted.sort_by(|a, b| {
        a.lambda
            .total_cmp(&b.lambda)
            .then(a.seed.cmp(&b.seed))
            .then(a.split.as_str().cmp(b.split.as_str()))
    });
    let coords: Vec<(f64, f64)> = sorted.iter().map(|p| (p.mean_cost, p.accuracy)).collect();
    hull_indices(&coords)
        .into_iter()
        .map(|i| sorted[i].clone())
        .collect()
}
