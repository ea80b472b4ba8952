//! Annealed starting layouts for the layout MILP.
//!
//! Elements move around the grid while every multi-member set takes the
//! smallest region of its class that covers its members. Non-members inside
//! a region, overlaps of disjoint sets and disconnected regions are
//! penalized. The best valid state seen is returned in the normal form the
//! symmetry-breaking constraints of the layout model expect, so it can be
//! handed to the solver as an incumbent.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::time::Duration;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::model::{Cell, CellSet, GridLayout, SetSystem, ShapeClass};

/// Cell bitmask, row-major.
type Mask = u128;

/// Grids with more cells than a mask holds get no starting layout.
pub const MAX_CELLS: usize = Mask::BITS as usize;

/// Weight of one constraint violation in the annealing energy.
const PENALTY: i64 = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnealSchedule {
    /// Moves over all restarts and boxes.
    pub moves: usize,
    pub restarts: usize,
    pub start_temperature: f64,
    pub end_temperature: f64,
    pub seed: u64,
}

impl AnnealSchedule {
    /// Moves grow with the square of the element count and stay a small
    /// fraction of the solver time limit, at roughly a million moves per
    /// second.
    pub fn for_problem(n: usize, time_limit: Duration) -> Self {
        let by_size = 20_000 * n * n;
        let by_time = (50_000.0 * time_limit.as_secs_f64()) as usize;
        Self {
            moves: by_size.min(by_time),
            restarts: 4,
            start_temperature: 3.0,
            end_temperature: 0.05,
            seed: 0,
        }
    }
}

struct Grid {
    w: usize,
    h: usize,
    cls: ShapeClass,
    full: Mask,
    /// `from_col[k]` holds the cells in column `k` or further right.
    from_col: Vec<Mask>,
}

impl Grid {
    fn new(w: usize, h: usize, cls: ShapeClass) -> Self {
        let column = |c: usize| (0..h).fold(0, |acc: Mask, r| acc | 1 << (r * w + c));
        let mut from_col = vec![0; w + 1];
        for k in (0..w).rev() {
            from_col[k] = from_col[k + 1] | column(k);
        }
        Self {
            w,
            h,
            cls,
            full: from_col[0],
            from_col,
        }
    }

    fn row(&self, m: Mask, r: usize) -> Mask {
        (m >> (r * self.w)) & ((1 << self.w) - 1)
    }

    /// Cells with a cell of `m` at or above them in their column.
    fn below_of(&self, mut m: Mask) -> Mask {
        let mut s = self.w;
        while s < self.w * self.h {
            m |= m << s;
            s *= 2;
        }
        m & self.full
    }

    fn above_of(&self, mut m: Mask) -> Mask {
        let mut s = self.w;
        while s < self.w * self.h {
            m |= m >> s;
            s *= 2;
        }
        m
    }

    /// Cells with a cell of `m` at or left of them in their row.
    fn right_of(&self, mut m: Mask) -> Mask {
        let mut s = 1;
        while s < self.w {
            m |= (m << s) & self.from_col[s];
            s *= 2;
        }
        m
    }

    fn left_of(&self, mut m: Mask) -> Mask {
        let mut s = 1;
        while s < self.w {
            m |= (m >> s) & !self.from_col[self.w - s] & self.full;
            s *= 2;
        }
        m
    }

    /// Smallest region of the class covering `m`, by filling rows and
    /// columns to a fixed point.
    fn hull(&self, m: Mask) -> Mask {
        if m == 0 {
            return 0;
        }
        let mut hull = m;
        loop {
            let top = hull.trailing_zeros() as usize / self.w;
            let from_top = self.full & !((1 << (top * self.w)) - 1);
            let rows = self.right_of(hull) & self.left_of(hull);
            let cols = self.below_of(hull) & self.above_of(hull);
            let grown = match self.cls {
                ShapeClass::Orthoconvex => hull | rows | cols,
                ShapeClass::Nabla => hull | rows | (from_top & self.above_of(hull)),
                ShapeClass::Gamma => {
                    let left = self.col_span(hull).0;
                    hull | (self.from_col[left] & self.left_of(hull)) | (from_top & self.above_of(hull))
                }
                ShapeClass::Rectangle => {
                    let (_, bottom, c0, c1) = self.bbox(hull).expect("non-empty");
                    let rows = from_top & ((1 << ((bottom + 1) * self.w)) - 1);
                    rows & self.from_col[c0] & !self.from_col[c1 + 1]
                }
            };
            if grown == hull {
                return hull;
            }
            hull = grown;
        }
    }

    /// Leftmost and rightmost occupied columns.
    fn col_span(&self, m: Mask) -> (usize, usize) {
        let cols = (0..self.h).fold(0, |acc, r| acc | self.row(m, r));
        (cols.trailing_zeros() as usize, (127 - cols.leading_zeros()) as usize)
    }

    fn bbox(&self, m: Mask) -> Option<(usize, usize, usize, usize)> {
        if m == 0 {
            return None;
        }
        let top = m.trailing_zeros() as usize / self.w;
        let bottom = (127 - m.leading_zeros()) as usize / self.w;
        let (c0, c1) = self.col_span(m);
        Some((top, bottom, c0, c1))
    }

    fn connected(&self, m: Mask) -> bool {
        if m == 0 {
            return true;
        }
        let mut seen: Mask = 1 << m.trailing_zeros();
        loop {
            let spread = seen
                | (seen << self.w)
                | (seen >> self.w)
                | ((seen << 1) & self.from_col[1])
                | ((seen >> 1) & !self.from_col[self.w - 1]);
            let next = spread & m;
            if next == seen {
                return seen == m;
            }
            seen = next;
        }
    }

    /// Corners of an orthoconvex region: four, plus two for every change of
    /// the start or end column between consecutive rows.
    fn vertices(&self, m: Mask) -> i64 {
        let mut v = 0;
        let mut prev: Option<(u32, u32)> = None;
        for r in 0..self.h {
            let bits = self.row(m, r);
            if bits == 0 {
                continue;
            }
            let span = (bits.trailing_zeros(), bits.leading_zeros());
            v += match prev {
                None => 4,
                Some(p) => 2 * ((p.0 != span.0) as i64 + (p.1 != span.1) as i64),
            };
            prev = Some(span);
        }
        v
    }
}

struct State<'a> {
    grid: &'a Grid,
    /// Members of each multi-member set, as element indices.
    members: &'a [Vec<usize>],
    /// Pairs of multi-member sets without a common member.
    disjoint: &'a [(usize, usize)],
    /// Cell of every element.
    pos: Vec<usize>,
    n: usize,
}

impl State<'_> {
    fn regions(&self) -> Vec<Mask> {
        self.members
            .iter()
            .map(|ms| self.grid.hull(ms.iter().fold(0, |acc, &e| acc | 1 << self.pos[e])))
            .collect()
    }

    /// Layout objective (without constant terms) and violation count.
    fn score(&self) -> (i64, i64) {
        let regions = self.regions();
        let occupied: Mask = self.pos.iter().fold(0, |acc, &k| acc | 1 << k);
        let (r0, r1, c0, c1) = self.grid.bbox(occupied).expect("elements exist");
        let mut cost = (r1 - r0 + c1 - c0 + 2) as i64;
        let mut bad = 0;
        for (ms, &region) in self.members.iter().zip(&regions) {
            let own: Mask = ms.iter().fold(0, |acc, &e| acc | 1 << self.pos[e]);
            cost += region.count_ones() as i64 + self.grid.vertices(region);
            bad += (region & occupied & !own).count_ones() as i64;
            if !self.grid.connected(region) {
                bad += 1;
            }
        }
        for &(a, b) in self.disjoint {
            bad += (regions[a] & regions[b]).count_ones() as i64;
        }
        (cost, bad)
    }
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// A valid layout on the configured grid found by annealing, or `None`
/// when the search ends without one.
pub fn anneal_layout(
    sys: &SetSystem,
    width: usize,
    height: usize,
    cls: ShapeClass,
    schedule: AnnealSchedule,
) -> Option<GridLayout> {
    let n = sys.len();
    if n == 0 || width * height > MAX_CELLS || width * height < n || width.max(height) >= MAX_CELLS {
        return None;
    }
    let grid = Grid::new(width, height, cls);
    let multi: Vec<usize> = (0..sys.sets().len()).filter(|&s| sys.sets()[s].members.len() >= 2).collect();
    let members: Vec<Vec<usize>> = multi
        .iter()
        .map(|&s| {
            (0..n)
                .filter(|&e| sys.sets()[s].members.contains(&sys.elements()[e].id))
                .collect()
        })
        .collect();
    let mut disjoint = Vec::new();
    for a in 0..multi.len() {
        for b in a + 1..multi.len() {
            if sys.sets()[multi[a]].members.is_disjoint(&sys.sets()[multi[b]].members) {
                disjoint.push((a, b));
            }
        }
    }

    // Boxes whose width plus height is within one of the smallest that
    // holds every element, then the whole grid. Tight boxes turn the search
    // into one over permutations.
    let tight = (2..).find(|t: &usize| (1..*t).any(|bw| bw * (t - bw) >= n)).expect("finite");
    let mut boxes: Vec<(usize, usize)> = Vec::new();
    for t in [tight, tight + 1] {
        for bw in 1..t {
            let bh = t - bw;
            if bw * bh >= n && bw <= width && bh <= height && bw.abs_diff(bh) <= 2 {
                boxes.push((bw, bh));
            }
        }
    }
    boxes.push((width, height));
    let runs = boxes.len() * schedule.restarts.max(1);
    let moves = schedule.moves / runs;

    let mut state = State {
        grid: &grid,
        members: &members,
        disjoint: &disjoint,
        pos: Vec::new(),
        n,
    };
    let mut best: Option<(i64, Vec<usize>)> = None;
    for i in 0..runs {
        let (bw, bh) = boxes[i % boxes.len()];
        let seed = schedule.seed.wrapping_add(i as u64);
        if let Some(found) = anneal_in(&mut state, bw, bh, AnnealSchedule { moves, seed, ..schedule }) {
            if best.as_ref().is_none_or(|b| found.0 < b.0) {
                best = Some(found);
            }
        }
    }
    let (_, pos) = best?;
    state.pos = pos;
    let layout = normalize(sys, &grid, &state);
    layout.validate(sys, cls).ok().map(|_| layout)
}

/// Anneals placements inside the top-left `bw` x `bh` box and returns the
/// cheapest valid one.
fn anneal_in(state: &mut State, bw: usize, bh: usize, schedule: AnnealSchedule) -> Option<(i64, Vec<usize>)> {
    let n = state.n;
    let w = state.grid.w;
    let cells: Vec<usize> = (0..bh).flat_map(|r| (0..bw).map(move |c| r * w + c)).collect();
    // start with elements grouped by their first set
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&e| state.members.iter().position(|ms| ms.contains(&e)).unwrap_or(usize::MAX));
    state.pos = vec![0; n];
    let mut occupant: Vec<Option<usize>> = vec![None; w * state.grid.h];
    for (&e, &k) in order.iter().zip(&cells) {
        state.pos[e] = k;
        occupant[k] = Some(e);
    }

    let energy = |(cost, bad): (i64, i64)| cost + PENALTY * bad;
    let mut current = state.score();
    let mut best = (current.1 == 0).then(|| (current.0, state.pos.clone()));
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let ratio = schedule.end_temperature / schedule.start_temperature;
    for step in 0..schedule.moves {
        let t = schedule.start_temperature * libm::pow(ratio, step as f64 / schedule.moves as f64);
        let e = (rng.next_u64() % n as u64) as usize;
        let to = cells[(rng.next_u64() % cells.len() as u64) as usize];
        let from = state.pos[e];
        if to == from {
            continue;
        }
        let other = occupant[to];
        state.pos[e] = to;
        if let Some(o) = other {
            state.pos[o] = from;
        }
        let next = state.score();
        let delta = (energy(next) - energy(current)) as f64;
        if delta <= 0.0 || unit(&mut rng) < libm::exp(-delta / t) {
            occupant[to] = Some(e);
            occupant[from] = other;
            current = next;
            if current.1 == 0 && best.as_ref().is_none_or(|b| current.0 < b.0) {
                best = Some((current.0, state.pos.clone()));
            }
        } else {
            state.pos[e] = from;
            if let Some(o) = other {
                state.pos[o] = to;
            }
        }
    }
    best
}

/// Moves the layout to the top-left corner, mirrors it so the smallest
/// element id sits in the half the class allows, and orders elements with
/// identical membership by cell.
fn normalize(sys: &SetSystem, grid: &Grid, state: &State) -> GridLayout {
    let n = sys.len();
    let regions = state.regions();
    let occupied: Mask = state.pos.iter().fold(0, |acc, &k| acc | 1 << k);
    let (r0, r1, c0, c1) = grid.bbox(occupied).expect("elements exist");
    let smallest = (0..n).min_by_key(|&e| &sys.elements()[e].id).expect("n >= 1");
    let (sr, sc) = (state.pos[smallest] / grid.w - r0, state.pos[smallest] % grid.w - c0);
    let (bh, bw) = (r1 - r0 + 1, c1 - c0 + 1);
    let flip_rows = matches!(grid.cls, ShapeClass::Orthoconvex | ShapeClass::Rectangle) && sr > (bh - 1) / 2;
    let flip_cols = grid.cls != ShapeClass::Gamma && sc > (bw - 1) / 2;
    let map = |k: usize| -> Cell {
        let (r, c) = (k / grid.w - r0, k % grid.w - c0);
        let r = if flip_rows { bh - 1 - r } else { r };
        let c = if flip_cols { bw - 1 - c } else { c };
        Cell::new(r as i32, c as i32)
    };
    let mut cells: Vec<Cell> = state.pos.iter().map(|&k| map(k)).collect();

    let mut by_signature: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (e, el) in sys.elements().iter().enumerate() {
        let sig = (0..sys.sets().len()).filter(|&s| sys.sets()[s].members.contains(&el.id)).collect();
        by_signature.entry(sig).or_default().push(e);
    }
    for group in by_signature.values().filter(|g| !g.contains(&smallest)) {
        let mut slots: Vec<Cell> = group.iter().map(|&e| cells[e]).collect();
        slots.sort();
        for (&e, slot) in group.iter().zip(slots) {
            cells[e] = slot;
        }
    }

    let placement = sys.elements().iter().zip(&cells).map(|(el, c)| (el.id.clone(), *c)).collect();
    let mut set_regions = BTreeMap::new();
    let mut region_of = regions.into_iter();
    for def in sys.sets() {
        let region: CellSet = if def.members.len() >= 2 {
            let m = region_of.next().expect("one region per multi-member set");
            (0..grid.w * grid.h).filter(|k| m >> k & 1 == 1).map(map).collect()
        } else {
            let e = (0..n).find(|&e| def.members.contains(&sys.elements()[e].id)).expect("one member");
            [cells[e]].into_iter().collect()
        };
        set_regions.insert(def.id.clone(), region);
    }
    GridLayout {
        width: grid.w as i32,
        height: grid.h as i32,
        placement,
        set_regions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{shape_class_predicate, Element, SetDef};
    use crate::layout::ObjectiveTerms;
    use alloc::format;
    use alloc::string::String;

    fn system(sets: &[(&str, &[&str])]) -> SetSystem {
        let mut ids: Vec<String> = sets.iter().flat_map(|(_, m)| m.iter().map(|s| String::from(*s))).collect();
        ids.sort();
        ids.dedup();
        let elements = ids.iter().map(|i| Element::text(i, i)).collect();
        let defs = sets.iter().map(|(s, m)| SetDef::new(s, m.iter().copied())).collect();
        SetSystem::new(elements, defs).unwrap()
    }

    #[test]
    fn masks_match_the_cell_geometry() {
        let g = Grid::new(4, 3, ShapeClass::Orthoconvex);
        let corners: Mask = 1 | 1 << 11;
        assert_eq!(g.hull(corners), corners);
        assert!(!g.connected(corners));
        let ell: Mask = 1 | 1 << 4 | 1 << 5;
        assert_eq!(g.vertices(ell), 6);
        let rect = Grid::new(4, 3, ShapeClass::Rectangle);
        assert_eq!(rect.hull(ell).count_ones(), 4);
        let gamma = Grid::new(4, 3, ShapeClass::Gamma);
        assert_eq!(gamma.hull(1 << 1 | 1 << 4), 0b11 | 1 << 4);
    }

    #[test]
    fn finds_a_valid_layout_for_every_class() {
        let sys = system(&[("A", &["a", "ab"]), ("B", &["ab", "b", "bc"]), ("C", &["bc", "c"]), ("D", &["d"])]);
        for cls in [ShapeClass::Orthoconvex, ShapeClass::Nabla, ShapeClass::Gamma, ShapeClass::Rectangle] {
            let layout = anneal_layout(&sys, 4, 4, cls, AnnealSchedule::for_problem(sys.len(), Duration::from_secs(60))).expect("found");
            layout.validate(&sys, cls).unwrap();
            assert!(layout.set_regions.values().all(|r| shape_class_predicate(r, cls)));
            let occupied = layout.occupied_cells();
            assert!(occupied.iter().any(|c| c.row == 0) && occupied.iter().any(|c| c.col == 0));
            // a chain of two-element overlaps fits tightly in one row
            assert!(ObjectiveTerms::measure(&layout).area <= 8, "{cls}: {:?}", format!("{layout:?}"));
        }
    }

    #[test]
    fn same_seed_same_layout() {
        let sys = system(&[("A", &["a", "b", "c"]), ("B", &["c", "d"]), ("C", &["e", "f"])]);
        let s = AnnealSchedule::for_problem(sys.len(), Duration::from_secs(60));
        assert_eq!(anneal_layout(&sys, 4, 4, ShapeClass::Orthoconvex, s), anneal_layout(&sys, 4, 4, ShapeClass::Orthoconvex, s));
    }
}
