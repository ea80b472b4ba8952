//! Rectilinear polygons on the unit lattice.
//!
//! Everything here is exact integer arithmetic. A cell `(row, col)` is the
//! closed unit square with lattice corners `(col, row)` and
//! `(col + 1, row + 1)`, where a lattice [`Point`] is `(x, y)` with `y`
//! growing downwards like the grid rows.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::model::{bounding_box, is_four_connected, Cell, CellSet, SetId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point {
    pub x: i32,
    pub y: i32,
}

impl Point {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }
}

/// Identifies one drawn shape: a set, and the part it was laid out in.
/// Sets duplicated by splitting own one shape per part.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ShapeKey {
    pub set: SetId,
    pub part: usize,
}

impl ShapeKey {
    pub fn new(set: impl Into<SetId>, part: usize) -> Self {
        Self {
            set: set.into(),
            part,
        }
    }
}

impl fmt::Display for ShapeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.set, self.part)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("cell set is empty")]
    Empty,
    #[error("cells are not 4-connected")]
    DisconnectedCells,
    #[error("cells enclose a hole")]
    HoleDetected,
}

/// A hole-free, 4-connected union of grid cells with its outer boundary.
///
/// `boundary` runs counterclockwise as seen on screen (interior on the left
/// of the direction of travel), keeps only corner vertices and repeats the
/// first vertex at the end.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RectiPolygon {
    pub key: ShapeKey,
    pub cells: CellSet,
    pub boundary: Vec<Point>,
}

impl RectiPolygon {
    pub fn new(key: ShapeKey, cells: CellSet) -> Result<Self, GeometryError> {
        let boundary = cells_to_boundary(&cells)?;
        Ok(Self {
            key,
            cells,
            boundary,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.boundary.len().saturating_sub(1)
    }

    pub fn edge(&self, i: usize) -> (Point, Point) {
        (self.boundary[i], self.boundary[i + 1])
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.boundary.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn area(&self) -> usize {
        self.cells.len()
    }
}

/// Polygon for `cells`, keyed under set `set` in part 0.
pub fn cells_to_polygon(set: &SetId, cells: &CellSet) -> Result<RectiPolygon, GeometryError> {
    RectiPolygon::new(ShapeKey::new(set.clone(), 0), cells.clone())
}

fn check_hole_free(cells: &CellSet) -> Result<(), GeometryError> {
    let (r0, r1, c0, c1) = bounding_box(cells).ok_or(GeometryError::Empty)?;
    let inside = |c: &Cell| c.row >= r0 - 1 && c.row <= r1 + 1 && c.col >= c0 - 1 && c.col <= c1 + 1;
    let start = Cell::new(r0 - 1, c0 - 1);
    let mut seen = BTreeSet::new();
    seen.insert(start);
    let mut stack = vec![start];
    while let Some(c) = stack.pop() {
        for n in c.neighbors() {
            if inside(&n) && !cells.contains(&n) && seen.insert(n) {
                stack.push(n);
            }
        }
    }
    let frame = ((r1 - r0 + 3) * (c1 - c0 + 3)) as usize;
    if seen.len() + cells.len() == frame {
        Ok(())
    } else {
        Err(GeometryError::HoleDetected)
    }
}

/// Traces the outer boundary of a hole-free, 4-connected cell set.
pub fn cells_to_boundary(cells: &CellSet) -> Result<Vec<Point>, GeometryError> {
    if cells.is_empty() {
        return Err(GeometryError::Empty);
    }
    if !is_four_connected(cells) {
        return Err(GeometryError::DisconnectedCells);
    }
    check_hole_free(cells)?;

    // Directed unit edges with the interior on their left. Hole-free
    // 4-connected sets have no pinch vertices, so successors are unique.
    let mut next: BTreeMap<Point, Point> = BTreeMap::new();
    for c in cells {
        let (x, y) = (c.col, c.row);
        let tl = Point::new(x, y);
        let tr = Point::new(x + 1, y);
        let br = Point::new(x + 1, y + 1);
        let bl = Point::new(x, y + 1);
        if !cells.contains(&Cell::new(c.row, c.col - 1)) {
            next.insert(tl, bl);
        }
        if !cells.contains(&Cell::new(c.row + 1, c.col)) {
            next.insert(bl, br);
        }
        if !cells.contains(&Cell::new(c.row, c.col + 1)) {
            next.insert(br, tr);
        }
        if !cells.contains(&Cell::new(c.row - 1, c.col)) {
            next.insert(tr, tl);
        }
    }
    let first = cells.iter().next().expect("non-empty");
    let start = Point::new(first.col, first.row);
    let mut walk = vec![start];
    let mut cur = start;
    loop {
        cur = next[&cur];
        if cur == start {
            break;
        }
        walk.push(cur);
    }
    let n = walk.len();
    let mut corners: Vec<Point> = (0..n)
        .filter(|&i| {
            let prev = walk[(i + n - 1) % n];
            let here = walk[i];
            let after = walk[(i + 1) % n];
            (here.x - prev.x, here.y - prev.y) != (after.x - here.x, after.y - here.y)
        })
        .map(|i| walk[i])
        .collect();
    corners.push(corners[0]);
    Ok(corners)
}

/// Cells whose centers lie inside the closed boundary cycle (even-odd rule).
pub fn rasterize(boundary: &[Point]) -> CellSet {
    let mut out = CellSet::new();
    if boundary.len() < 4 {
        return out;
    }
    let min_x = boundary.iter().map(|p| p.x).min().unwrap();
    let max_x = boundary.iter().map(|p| p.x).max().unwrap();
    let min_y = boundary.iter().map(|p| p.y).min().unwrap();
    let max_y = boundary.iter().map(|p| p.y).max().unwrap();
    for row in min_y..max_y {
        for col in min_x..max_x {
            // doubled coordinates keep the cell center on the integer lattice
            let (px, py) = (2 * col + 1, 2 * row + 1);
            let crossings = boundary
                .windows(2)
                .filter(|w| {
                    let (a, b) = (w[0], w[1]);
                    a.x == b.x && 2 * a.x > px && (2 * a.y.min(b.y) < py) && (py < 2 * a.y.max(b.y))
                })
                .count();
            if crossings % 2 == 1 {
                out.insert(Cell::new(row, col));
            }
        }
    }
    out
}

/// Smallest superset of `cells` whose every row and column slice is
/// contiguous, computed by filling rows and columns to a fixed point.
pub fn orthoconvex_hull(cells: &CellSet) -> CellSet {
    let mut hull = cells.clone();
    loop {
        let mut grown = hull.clone();
        let mut rows: BTreeMap<i32, (i32, i32)> = BTreeMap::new();
        let mut cols: BTreeMap<i32, (i32, i32)> = BTreeMap::new();
        for c in &hull {
            let r = rows.entry(c.row).or_insert((c.col, c.col));
            r.0 = r.0.min(c.col);
            r.1 = r.1.max(c.col);
            let k = cols.entry(c.col).or_insert((c.row, c.row));
            k.0 = k.0.min(c.row);
            k.1 = k.1.max(c.row);
        }
        for (&row, &(lo, hi)) in &rows {
            grown.extend((lo..=hi).map(|col| Cell::new(row, col)));
        }
        for (&col, &(lo, hi)) in &cols {
            grown.extend((lo..=hi).map(|row| Cell::new(row, col)));
        }
        if grown.len() == hull.len() {
            return hull;
        }
        hull = grown;
    }
}

/// A piece of one polygon edge between consecutive arrangement vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeFragment {
    pub owner: ShapeKey,
    pub edge_index: usize,
    pub start: Point,
    pub end: Point,
    /// Shapes whose proper interior contains the open fragment.
    pub covered_by: BTreeSet<ShapeKey>,
}

impl EdgeFragment {
    pub fn length(&self) -> i32 {
        (self.end.x - self.start.x).abs() + (self.end.y - self.start.y).abs()
    }
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    if a.x == b.x {
        p.x == a.x && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
    } else {
        p.y == a.y && p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x)
    }
}

/// Intersection point of two perpendicular axis-parallel segments, if any.
fn perpendicular_hit(a: (Point, Point), b: (Point, Point)) -> Option<Point> {
    let (h, v) = if a.0.y == a.1.y && b.0.x == b.1.x {
        (a, b)
    } else if a.0.x == a.1.x && b.0.y == b.1.y {
        (b, a)
    } else {
        return None;
    };
    let p = Point::new(v.0.x, h.0.y);
    (on_segment(p, h.0, h.1) && on_segment(p, v.0, v.1)).then_some(p)
}

/// The two cells on either side of the unit segment that starts at `from`
/// and heads towards `to`.
fn cells_beside(from: Point, to: Point) -> (Cell, Cell) {
    if from.y == to.y {
        let col = if to.x > from.x { from.x } else { from.x - 1 };
        (Cell::new(from.y - 1, col), Cell::new(from.y, col))
    } else {
        let row = if to.y > from.y { from.y } else { from.y - 1 };
        (Cell::new(row, from.x - 1), Cell::new(row, from.x))
    }
}

/// Splits every edge of `target` at the points where a boundary in `others`
/// touches or crosses it and records which of `others` interior-covers each
/// piece.
pub fn edge_fragments(target: &RectiPolygon, others: &[&RectiPolygon]) -> Vec<EdgeFragment> {
    let mut out = Vec::new();
    for (i, (a, b)) in target.edges().enumerate() {
        let mut cuts: BTreeSet<i32> = BTreeSet::new();
        let param = |p: Point| if a.x == b.x { (p.y - a.y).abs() } else { (p.x - a.x).abs() };
        cuts.insert(0);
        cuts.insert(param(b));
        for q in others {
            for v in &q.boundary {
                if on_segment(*v, a, b) {
                    cuts.insert(param(*v));
                }
            }
            for e in q.edges() {
                if let Some(p) = perpendicular_hit((a, b), e) {
                    cuts.insert(param(p));
                }
            }
        }
        let dx = (b.x - a.x).signum();
        let dy = (b.y - a.y).signum();
        let at = |t: i32| Point::new(a.x + dx * t, a.y + dy * t);
        let params: Vec<i32> = cuts.into_iter().collect();
        for w in params.windows(2) {
            let (s, e) = (at(w[0]), at(w[1]));
            let (left, right) = cells_beside(s, at(w[0] + 1));
            let covered_by = others
                .iter()
                .filter(|q| q.cells.contains(&left) && q.cells.contains(&right))
                .map(|q| q.key.clone())
                .collect();
            out.push(EdgeFragment {
                owner: target.key.clone(),
                edge_index: i,
                start: s,
                end: e,
                covered_by,
            });
        }
    }
    out
}

/// Fragments of all polygon edges against all other polygons.
pub fn build_arrangement(polygons: &[RectiPolygon]) -> Vec<EdgeFragment> {
    let mut out = Vec::new();
    for (i, p) in polygons.iter().enumerate() {
        let others: Vec<&RectiPolygon> = polygons
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, q)| q)
            .collect();
        out.extend(edge_fragments(p, &others));
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VisibilityReport {
    pub per_edge: BTreeMap<(ShapeKey, usize), bool>,
    pub per_polygon: BTreeMap<ShapeKey, bool>,
}

impl VisibilityReport {
    pub fn visible_edges(&self, key: &ShapeKey) -> usize {
        self.per_edge
            .iter()
            .filter(|((k, _), v)| k == key && **v)
            .count()
    }

    pub fn is_visible(&self, key: &ShapeKey) -> bool {
        self.per_polygon.get(key).copied().unwrap_or(false)
    }

    pub fn merge(&mut self, other: VisibilityReport) {
        self.per_edge.extend(other.per_edge);
        self.per_polygon.extend(other.per_polygon);
    }
}

/// Visibility of `target`'s edges when every polygon in `above` is painted
/// over it. An edge counts as visible when some positive-length piece of it
/// lies outside the proper interior of each polygon above.
pub fn visibility_above(target: &RectiPolygon, above: &[&RectiPolygon]) -> VisibilityReport {
    let mut per_edge: BTreeMap<(ShapeKey, usize), bool> = (0..target.edge_count())
        .map(|i| ((target.key.clone(), i), false))
        .collect();
    for frag in edge_fragments(target, above) {
        if frag.covered_by.is_empty() {
            per_edge.insert((target.key.clone(), frag.edge_index), true);
        }
    }
    let all = per_edge.values().all(|v| *v);
    let mut per_polygon = BTreeMap::new();
    per_polygon.insert(target.key.clone(), all);
    VisibilityReport {
        per_edge,
        per_polygon,
    }
}
