//! Bottom-up stacking of opaque shapes.

use alloc::vec::Vec;

use crate::geometry::{visibility_above, RectiPolygon, ShapeKey, VisibilityReport};

/// Ranking key of the shape placed at one step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StackStep {
    pub key: ShapeKey,
    pub visible_edges: usize,
    pub total_edges: usize,
    pub area: usize,
}

impl StackStep {
    pub fn rank(&self) -> (usize, usize, usize) {
        (self.visible_edges, self.total_edges, self.area)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StackingResult {
    /// Bottom first.
    pub order: Vec<ShapeKey>,
    pub covered: Vec<ShapeKey>,
    pub trace: Vec<StackStep>,
}

/// Greedy stacking: repeatedly put down the remaining shape that the other
/// remaining shapes cover least, by visible edges, then edge count, then
/// area, then smallest key.
pub fn stack(polygons: &[RectiPolygon]) -> StackingResult {
    let mut remaining: Vec<&RectiPolygon> = polygons.iter().collect();
    remaining.sort_by(|a, b| a.key.cmp(&b.key));
    let mut order = Vec::with_capacity(polygons.len());
    let mut trace = Vec::with_capacity(polygons.len());
    while !remaining.is_empty() {
        let mut best: Option<(usize, StackStep)> = None;
        for (i, p) in remaining.iter().enumerate() {
            let others: Vec<&RectiPolygon> = remaining
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| *q)
                .collect();
            let step = StackStep {
                key: p.key.clone(),
                visible_edges: visibility_above(p, &others).visible_edges(&p.key),
                total_edges: p.edge_count(),
                area: p.area(),
            };
            // strict improvement only, so the smallest key wins ties
            if best.as_ref().is_none_or(|(_, b)| step.rank() > b.rank()) {
                best = Some((i, step));
            }
        }
        let (i, step) = best.expect("non-empty");
        remaining.remove(i);
        order.push(step.key.clone());
        trace.push(step);
    }
    let report = verify_stacking(polygons, &order);
    let covered = order.iter().filter(|k| !report.is_visible(k)).cloned().collect();
    StackingResult {
        order,
        covered,
        trace,
    }
}

/// Visibility of every shape against the shapes above it in `order`.
pub fn verify_stacking(polygons: &[RectiPolygon], order: &[ShapeKey]) -> VisibilityReport {
    let ranked: Vec<&RectiPolygon> = order
        .iter()
        .filter_map(|k| polygons.iter().find(|p| &p.key == k))
        .collect();
    let mut report = VisibilityReport::default();
    for (i, p) in ranked.iter().enumerate() {
        report.merge(visibility_above(p, &ranked[i + 1..]));
    }
    report
}
