//! Packing part layouts into one grid.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use core::time::Duration;

use thiserror::Error;

use crate::geometry::orthoconvex_hull;
use crate::milp::{MilpError, MilpModel, MilpSolver, SolveStatus, VarId};
use crate::model::{bounding_box, ceil_sqrt, Cell, CellSet, GridLayout, ShapeClass, UnknownName};

/// The eight symmetries of the square, acting on a `height x width` box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Transform {
    Identity,
    MirrorH,
    MirrorV,
    Rot180,
    Rot90,
    Rot270,
    Transpose,
    AntiTranspose,
}

impl Transform {
    pub const ALL: [Transform; 8] = [
        Transform::Identity,
        Transform::MirrorH,
        Transform::MirrorV,
        Transform::Rot180,
        Transform::Rot90,
        Transform::Rot270,
        Transform::Transpose,
        Transform::AntiTranspose,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::MirrorH => "mirrorH",
            Transform::MirrorV => "mirrorV",
            Transform::Rot180 => "rot180",
            Transform::Rot90 => "rot90",
            Transform::Rot270 => "rot270",
            Transform::Transpose => "transpose",
            Transform::AntiTranspose => "antitranspose",
        }
    }

    /// Transforms that keep shapes of class `cls` inside the class.
    pub fn allowed(cls: ShapeClass) -> &'static [Transform] {
        match cls {
            ShapeClass::Orthoconvex => &Transform::ALL,
            ShapeClass::Nabla => &[Transform::Identity, Transform::MirrorH],
            ShapeClass::Gamma => &[Transform::Identity],
            ShapeClass::Rectangle => &[Transform::Identity, Transform::Rot90],
        }
    }

    pub fn swaps_axes(self) -> bool {
        matches!(
            self,
            Transform::Rot90 | Transform::Rot270 | Transform::Transpose | Transform::AntiTranspose
        )
    }

    /// Image of `c` inside a box of `h` rows and `w` columns.
    pub fn apply(self, c: Cell, h: i32, w: i32) -> Cell {
        let (r, k) = (c.row, c.col);
        let (r, k) = match self {
            Transform::Identity => (r, k),
            Transform::MirrorH => (r, w - 1 - k),
            Transform::MirrorV => (h - 1 - r, k),
            Transform::Rot180 => (h - 1 - r, w - 1 - k),
            Transform::Rot90 => (k, h - 1 - r),
            Transform::Rot270 => (w - 1 - k, r),
            Transform::Transpose => (k, r),
            Transform::AntiTranspose => (w - 1 - k, h - 1 - r),
        };
        Cell::new(r, k)
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Transform {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Transform::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownName(s.into()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variant {
    pub transform: Transform,
    /// Transformed cells, with the bounding box at the origin.
    pub cells: CellSet,
    pub height: i32,
    pub width: i32,
}

/// The cells one part occupies, and its distinct allowed orientations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentFootprint {
    pub part: usize,
    /// Top-left corner of the part's bounding box in its own layout.
    pub origin: Cell,
    pub height: i32,
    pub width: i32,
    pub variants: Vec<Variant>,
}

impl ComponentFootprint {
    pub fn variant(&self, t: Transform) -> Option<&Variant> {
        self.variants.iter().find(|v| v.transform == t)
    }

    pub fn max_dim(&self) -> i32 {
        self.height.max(self.width)
    }

    /// Where a cell of the part's own layout ends up.
    pub fn map_cell(&self, c: Cell, t: Transform, offset: Cell) -> Cell {
        let local = Cell::new(c.row - self.origin.row, c.col - self.origin.col);
        let m = t.apply(local, self.height, self.width);
        Cell::new(m.row + offset.row, m.col + offset.col)
    }
}

/// Footprint of a part layout: element cells plus all region cells.
pub fn layout_footprint(layout: &GridLayout) -> CellSet {
    let mut cells = layout.occupied_cells();
    for r in layout.set_regions.values() {
        cells.extend(r.iter().copied());
    }
    cells
}

pub fn footprint_variants(part: usize, cells: &CellSet, cls: ShapeClass) -> ComponentFootprint {
    let (r0, r1, c0, c1) = bounding_box(cells).unwrap_or((0, 0, 0, 0));
    let (h, w) = (r1 - r0 + 1, c1 - c0 + 1);
    let local: CellSet = cells.iter().map(|c| Cell::new(c.row - r0, c.col - c0)).collect();
    let mut variants: Vec<Variant> = Vec::new();
    for &t in Transform::allowed(cls) {
        let img: CellSet = local.iter().map(|c| t.apply(*c, h, w)).collect();
        if variants.iter().any(|v| v.cells == img) {
            continue;
        }
        let (vh, vw) = if t.swaps_axes() { (w, h) } else { (h, w) };
        variants.push(Variant {
            transform: t,
            cells: img,
            height: vh,
            width: vw,
        });
    }
    ComponentFootprint {
        part,
        origin: Cell::new(r0, c0),
        height: h,
        width: w,
        variants,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartPlacement {
    pub part: usize,
    pub transform: Transform,
    pub offset: Cell,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArrangeMethod {
    Single,
    Milp(SolveStatus),
    /// No solution within the time limit, parts packed in rows instead.
    Shelf,
    Manual,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArrangementResult {
    pub placements: Vec<PartPlacement>,
    pub width: i32,
    pub height: i32,
    pub hull_area: usize,
    pub method: ArrangeMethod,
}

impl ArrangementResult {
    /// `W + H + |W - H| + hull / 4`
    pub fn objective(&self) -> f64 {
        arrangement_objective(self.width, self.height, self.hull_area)
    }

    pub fn placement(&self, part: usize) -> Option<&PartPlacement> {
        self.placements.iter().find(|p| p.part == part)
    }
}

pub const HULL_WEIGHT: f64 = 0.25;

pub fn arrangement_objective(width: i32, height: i32, hull_area: usize) -> f64 {
    (width + height + (width - height).abs()) as f64 + HULL_WEIGHT * hull_area as f64
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArrangeError {
    #[error("no parts to arrange")]
    Empty,
    #[error("placement for part {0} is missing or repeated")]
    BadPart(usize),
    #[error("transform {transform} is not allowed for part {part}")]
    Transform { part: usize, transform: Transform },
    #[error("parts overlap at row {}, col {}", .0.row, .0.col)]
    Overlap(Cell),
    #[error("negative offset for part {0}")]
    NegativeOffset(usize),
    #[error(transparent)]
    Solver(#[from] MilpError),
}

/// Builds the result from explicit placements, checking every invariant.
pub fn arrangement_from(
    parts: &[ComponentFootprint],
    placements: Vec<PartPlacement>,
    method: ArrangeMethod,
) -> Result<ArrangementResult, ArrangeError> {
    if parts.is_empty() {
        return Err(ArrangeError::Empty);
    }
    let mut by_part: BTreeMap<usize, &PartPlacement> = BTreeMap::new();
    for p in &placements {
        if by_part.insert(p.part, p).is_some() {
            return Err(ArrangeError::BadPart(p.part));
        }
    }
    let mut occupied = CellSet::new();
    for fp in parts {
        let p = by_part.get(&fp.part).ok_or(ArrangeError::BadPart(fp.part))?;
        let v = fp.variant(p.transform).ok_or(ArrangeError::Transform {
            part: fp.part,
            transform: p.transform,
        })?;
        if p.offset.row < 0 || p.offset.col < 0 {
            return Err(ArrangeError::NegativeOffset(fp.part));
        }
        for c in &v.cells {
            let g = Cell::new(c.row + p.offset.row, c.col + p.offset.col);
            if !occupied.insert(g) {
                return Err(ArrangeError::Overlap(g));
            }
        }
    }
    if by_part.len() != parts.len() {
        let extra = by_part.keys().find(|k| parts.iter().all(|f| f.part != **k));
        return Err(ArrangeError::BadPart(*extra.unwrap_or(&0)));
    }
    let (_, r1, _, c1) = bounding_box(&occupied).expect("parts are non-empty");
    let mut placements = placements;
    placements.sort_by_key(|p| p.part);
    Ok(ArrangementResult {
        placements,
        width: c1 + 1,
        height: r1 + 1,
        hull_area: orthoconvex_hull(&occupied).len(),
        method,
    })
}

/// Side of the square grid the optimizer may use.
pub fn candidate_side(parts: &[ComponentFootprint]) -> i32 {
    let sum: i32 = parts.iter().map(|p| p.max_dim()).sum();
    let biggest = parts.iter().map(|p| p.max_dim()).max().unwrap_or(1);
    let area: i32 = parts.iter().map(|p| p.height * p.width).sum();
    sum.min((2 * ceil_sqrt(area as usize) as i32).max(biggest))
}

/// Parts in rows of at most `side` columns, identity orientation.
pub fn shelf_pack(parts: &[ComponentFootprint], side: i32) -> Vec<PartPlacement> {
    let (mut row, mut col, mut shelf) = (0, 0, 0);
    let mut out = Vec::new();
    for fp in parts {
        if col > 0 && col + fp.width > side {
            row += shelf;
            col = 0;
            shelf = 0;
        }
        out.push(PartPlacement {
            part: fp.part,
            transform: Transform::Identity,
            offset: Cell::new(row, col),
        });
        col += fp.width;
        shelf = shelf.max(fp.height);
    }
    out
}

struct Choice {
    part: usize,
    transform: Transform,
    offset: Cell,
    var: VarId,
}

/// Optimal packing of parts on a square candidate grid.
pub fn arrange<S: MilpSolver + ?Sized>(
    parts: &[ComponentFootprint],
    time_limit: Duration,
    solver: &S,
) -> Result<ArrangementResult, ArrangeError> {
    if parts.is_empty() {
        return Err(ArrangeError::Empty);
    }
    if parts.len() == 1 {
        let p = PartPlacement {
            part: parts[0].part,
            transform: Transform::Identity,
            offset: Cell::new(0, 0),
        };
        return arrangement_from(parts, vec![p], ArrangeMethod::Single);
    }
    let g = candidate_side(parts);
    let gu = g as usize;
    let mut m = MilpModel::new();
    let mut choices: Vec<Choice> = Vec::new();
    let mut cover: Vec<Vec<VarId>> = vec![Vec::new(); gu * gu];
    let width = m.continuous("W", 0.0, g as f64);
    let height = m.continuous("H", 0.0, g as f64);
    for fp in parts {
        let mut mine = Vec::new();
        for v in &fp.variants {
            for r in 0..=(g - v.height) {
                for c in 0..=(g - v.width) {
                    let z = m.binary(format!("z_{}_{}_{}_{}", fp.part, v.transform.as_str(), r, c));
                    for cell in &v.cells {
                        cover[((cell.row + r) * g + cell.col + c) as usize].push(z);
                    }
                    m.ge(vec![(width, 1.0), (z, -((c + v.width) as f64))], 0.0);
                    m.ge(vec![(height, 1.0), (z, -((r + v.height) as f64))], 0.0);
                    mine.push(z);
                    choices.push(Choice {
                        part: fp.part,
                        transform: v.transform,
                        offset: Cell::new(r, c),
                        var: z,
                    });
                }
            }
        }
        m.equal(mine.into_iter().map(|z| (z, 1.0)).collect(), 1.0);
    }
    for zs in &cover {
        if zs.len() > 1 {
            m.le(zs.iter().map(|z| (*z, 1.0)).collect(), 1.0);
        }
    }
    let diff = m.continuous("D", 0.0, g as f64);
    m.ge(vec![(diff, 1.0), (width, -1.0), (height, 1.0)], 0.0);
    m.ge(vec![(diff, 1.0), (height, -1.0), (width, 1.0)], 0.0);

    // Hull membership: at least the occupied cells, closed under filling
    // between two hull cells of the same row or column. The least such set
    // is the orthoconvex hull, and minimizing selects it.
    let idx = |r: i32, c: i32| (r * g + c) as usize;
    let mk = |m: &mut MilpModel, p: &str| -> Vec<VarId> {
        (0..gu * gu)
            .map(|k| m.continuous(format!("{p}_{}_{}", k / gu, k % gu), 0.0, 1.0))
            .collect()
    };
    let hull = mk(&mut m, "h");
    let left = mk(&mut m, "hl");
    let right = mk(&mut m, "hr");
    let up = mk(&mut m, "hu");
    let down = mk(&mut m, "hd");
    for r in 0..g {
        for c in 0..g {
            let k = idx(r, c);
            let mut occ: Vec<(VarId, f64)> = cover[k].iter().map(|z| (*z, -1.0)).collect();
            occ.push((hull[k], 1.0));
            m.ge(occ, 0.0);
            for side in [&left, &right, &up, &down] {
                m.ge(vec![(side[k], 1.0), (hull[k], -1.0)], 0.0);
            }
            if c > 0 {
                m.ge(vec![(left[k], 1.0), (left[idx(r, c - 1)], -1.0)], 0.0);
            }
            if c + 1 < g {
                m.ge(vec![(right[k], 1.0), (right[idx(r, c + 1)], -1.0)], 0.0);
            }
            if r > 0 {
                m.ge(vec![(up[k], 1.0), (up[idx(r - 1, c)], -1.0)], 0.0);
            }
            if r + 1 < g {
                m.ge(vec![(down[k], 1.0), (down[idx(r + 1, c)], -1.0)], 0.0);
            }
            m.ge(vec![(hull[k], 1.0), (left[k], -1.0), (right[k], -1.0)], -1.0);
            m.ge(vec![(hull[k], 1.0), (up[k], -1.0), (down[k], -1.0)], -1.0);
        }
    }
    m.minimize(width, 1.0);
    m.minimize(height, 1.0);
    m.minimize(diff, 1.0);
    for h in &hull {
        m.minimize(*h, HULL_WEIGHT);
    }
    m.validate().map_err(MilpError::from)?;

    let result = solver.solve(&m, time_limit)?;
    match (result.status.has_solution(), &result.assignment) {
        (true, Some(x)) => {
            let placements = choices
                .iter()
                .filter(|ch| x[ch.var.0] > 0.5)
                .map(|ch| PartPlacement {
                    part: ch.part,
                    transform: ch.transform,
                    offset: ch.offset,
                })
                .collect();
            arrangement_from(parts, placements, ArrangeMethod::Milp(result.status))
        }
        _ => arrangement_from(parts, shelf_pack(parts, g), ArrangeMethod::Shelf),
    }
}

/// Parses `part transform row col` lines; blank lines and `#` comments are
/// skipped. Used by tests and as a plain-text alternative to JSON.
pub fn parse_placements(text: &str) -> Result<Vec<PartPlacement>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || format!("line {}: expected `part transform row col`", n + 1);
        if f.len() != 4 {
            return Err(bad());
        }
        out.push(PartPlacement {
            part: f[0].parse().map_err(|_| bad())?,
            transform: f[1].parse().map_err(|_| bad())?,
            offset: Cell::new(f[2].parse().map_err(|_| bad())?, f[3].parse().map_err(|_| bad())?),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cells;

    fn rect(h: i32, w: i32) -> CellSet {
        (0..h).flat_map(|r| (0..w).map(move |c| Cell::new(r, c))).collect()
    }

    #[test]
    fn transforms_are_permutations_of_the_box() {
        let b = rect(2, 3);
        for t in Transform::ALL {
            let img: CellSet = b.iter().map(|c| t.apply(*c, 2, 3)).collect();
            let expect = if t.swaps_axes() { rect(3, 2) } else { rect(2, 3) };
            assert_eq!(img, expect, "{t}");
        }
        assert_eq!(Transform::Rot90.apply(Cell::new(0, 0), 2, 3), Cell::new(0, 1));
        assert_eq!("rot90".parse::<Transform>(), Ok(Transform::Rot90));
    }

    #[test]
    fn variant_counts() {
        let unit = cells([(0, 0)]);
        for cls in ShapeClass::ALL {
            assert_eq!(footprint_variants(0, &unit, cls).variants.len(), 1);
        }
        let domino = cells([(0, 0), (0, 1)]);
        assert_eq!(footprint_variants(0, &domino, ShapeClass::Rectangle).variants.len(), 2);
        let ell = cells([(0, 0), (1, 0), (1, 1)]);
        assert_eq!(footprint_variants(0, &ell, ShapeClass::Orthoconvex).variants.len(), 4);
        let f = footprint_variants(0, &ell, ShapeClass::Gamma);
        assert_eq!(f.variants.len(), 1);
        assert_eq!(f.variants[0].transform, Transform::Identity);
        let f = footprint_variants(0, &ell, ShapeClass::Nabla);
        assert!(f.variants.iter().all(|v| Transform::allowed(ShapeClass::Nabla).contains(&v.transform)));
    }

    #[test]
    fn manual_arrangement_checks_overlap() {
        let parts = [
            footprint_variants(0, &rect(1, 2), ShapeClass::Orthoconvex),
            footprint_variants(1, &rect(1, 2), ShapeClass::Orthoconvex),
        ];
        let ok = arrangement_from(
            &parts,
            parse_placements("0 identity 0 0\n1 identity 1 0\n").unwrap(),
            ArrangeMethod::Manual,
        )
        .unwrap();
        assert_eq!((ok.width, ok.height, ok.hull_area), (2, 2, 4));
        assert_eq!(ok.objective(), 5.0);
        let clash = arrangement_from(
            &parts,
            parse_placements("0 identity 0 0\n1 identity 0 1").unwrap(),
            ArrangeMethod::Manual,
        );
        assert!(matches!(clash, Err(ArrangeError::Overlap(_))));
        let gamma = [footprint_variants(0, &rect(1, 2), ShapeClass::Gamma)];
        let bad = arrangement_from(&gamma, parse_placements("0 rot90 0 0").unwrap(), ArrangeMethod::Manual);
        assert!(matches!(bad, Err(ArrangeError::Transform { .. })));
    }

    #[test]
    fn side_by_side_dominoes_score_worse() {
        assert_eq!(arrangement_objective(4, 1, 4), 4.0 + 1.0 + 3.0 + 1.0);
        assert_eq!(arrangement_objective(2, 2, 4), 5.0);
    }

    #[test]
    fn shelf_pack_is_valid() {
        let parts: Vec<_> = (0..4)
            .map(|i| footprint_variants(i, &rect(1 + i as i32 % 2, 2), ShapeClass::Gamma))
            .collect();
        let side = candidate_side(&parts);
        let r = arrangement_from(&parts, shelf_pack(&parts, side), ArrangeMethod::Shelf).unwrap();
        assert!(r.width <= side.max(2));
    }

    #[test]
    fn map_cell_follows_transform() {
        let fp = footprint_variants(0, &cells([(5, 5), (6, 5), (6, 6)]), ShapeClass::Orthoconvex);
        assert_eq!(fp.origin, Cell::new(5, 5));
        let c = fp.map_cell(Cell::new(5, 5), Transform::MirrorH, Cell::new(10, 0));
        assert_eq!(c, Cell::new(10, 1));
    }
}
