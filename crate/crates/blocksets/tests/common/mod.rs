//! Independent oracles shared by the integration tests. Nothing here calls
//! into the algorithm under test except to read its types.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use blocksets::core::model::{Element, SetDef};
use blocksets::core::{Cell, CellSet, SetSystem, ShapeClass};
use rand::seq::IndexedRandom;
use rand::Rng;

pub type Cells = BTreeSet<(i32, i32)>;

pub fn to_cells(c: &CellSet) -> Cells {
    c.iter().map(|c| (c.row, c.col)).collect()
}

pub fn from_cells(c: &Cells) -> CellSet {
    c.iter().map(|&(r, c)| Cell::new(r, c)).collect()
}

fn connected(cells: &Cells) -> bool {
    let Some(&start) = cells.iter().next() else { return false };
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some((r, c)) = stack.pop() {
        for n in [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)] {
            if cells.contains(&n) && seen.insert(n) {
                stack.push(n);
            }
        }
    }
    seen.len() == cells.len()
}

/// Row and column ranges `(lo, hi)` keyed by row / column.
fn slices(cells: &Cells) -> (BTreeMap<i32, Vec<i32>>, BTreeMap<i32, Vec<i32>>) {
    let mut rows: BTreeMap<i32, Vec<i32>> = BTreeMap::new();
    let mut cols: BTreeMap<i32, Vec<i32>> = BTreeMap::new();
    for &(r, c) in cells {
        rows.entry(r).or_default().push(c);
        cols.entry(c).or_default().push(r);
    }
    (rows, cols)
}

fn contiguous(v: &[i32]) -> bool {
    let lo = *v.iter().min().unwrap();
    let hi = *v.iter().max().unwrap();
    (hi - lo + 1) as usize == v.len()
}

/// Shape class test written from the definitions: row and column slices
/// are intervals, the set is 4-connected, and the class adds alignments.
pub fn class_ok(cells: &Cells, cls: ShapeClass) -> bool {
    if cells.is_empty() || !connected(cells) {
        return false;
    }
    let (rows, cols) = slices(cells);
    if !rows.values().all(|v| contiguous(v)) || !cols.values().all(|v| contiguous(v)) {
        return false;
    }
    let top = *rows.keys().next().unwrap();
    let bottom = *rows.keys().last().unwrap();
    let left = *cols.keys().next().unwrap();
    let right = *cols.keys().last().unwrap();
    let top_aligned = cols.values().all(|v| *v.iter().min().unwrap() == top);
    let left_aligned = rows.values().all(|v| *v.iter().min().unwrap() == left);
    let full = cells.len() as i32 == (bottom - top + 1) * (right - left + 1);
    match cls {
        ShapeClass::Orthoconvex => true,
        ShapeClass::Nabla => top_aligned,
        ShapeClass::Gamma => top_aligned && left_aligned,
        ShapeClass::Rectangle => full,
    }
}

/// Corners of the outline, counted on 2x2 windows of the lattice.
pub fn vertex_count(cells: &Cells) -> usize {
    let mut points = BTreeSet::new();
    for &(r, c) in cells {
        for p in [(r, c), (r + 1, c), (r, c + 1), (r + 1, c + 1)] {
            points.insert(p);
        }
    }
    points
        .into_iter()
        .map(|(y, x)| {
            let q = [(y - 1, x - 1), (y - 1, x), (y, x - 1), (y, x)].map(|p| cells.contains(&p));
            match q.iter().filter(|b| **b).count() {
                1 | 3 => 1,
                2 if q[0] == q[3] => 2,
                _ => 0,
            }
        })
        .sum()
}

/// Fixed point of filling rows and columns between their extreme cells.
pub fn hull(cells: &Cells) -> Cells {
    let mut h = cells.clone();
    loop {
        let (rows, cols) = slices(&h);
        let mut next = h.clone();
        for (r, v) in rows {
            for c in *v.iter().min().unwrap()..=*v.iter().max().unwrap() {
                next.insert((r, c));
            }
        }
        for (c, v) in cols {
            for r in *v.iter().min().unwrap()..=*v.iter().max().unwrap() {
                next.insert((r, c));
            }
        }
        if next == h {
            return h;
        }
        h = next;
    }
}

pub fn bbox_dims(cells: &Cells) -> i64 {
    let r0 = cells.iter().map(|c| c.0).min().unwrap();
    let r1 = cells.iter().map(|c| c.0).max().unwrap();
    let c0 = cells.iter().map(|c| c.1).min().unwrap();
    let c1 = cells.iter().map(|c| c.1).max().unwrap();
    (r1 - r0 + 1 + c1 - c0 + 1) as i64
}

/// Exhaustive optimum of the unit-weight layout objective on a `side` grid:
/// all injective placements, and per set every region of the class that
/// holds exactly its members among the placed elements, with regions of
/// sets sharing no element kept apart.
pub fn brute_force_layout(sys: &SetSystem, cls: ShapeClass, side: i32) -> Option<i64> {
    let k = (side * side) as usize;
    assert!(k <= 16, "oracle is meant for tiny grids");
    let cell = |i: usize| ((i / side as usize) as i32, (i % side as usize) as i32);
    // (mask, cost) of every region of the class, cheapest first
    let mut regions: Vec<(u32, i64)> = (1u32..(1 << k))
        .filter_map(|m| {
            let cells: Cells = (0..k).filter(|i| m >> i & 1 == 1).map(cell).collect();
            class_ok(&cells, cls).then(|| (m, cells.len() as i64 + vertex_count(&cells) as i64))
        })
        .collect();
    regions.sort_by_key(|r| (r.1, r.0));

    let n = sys.len();
    let index: BTreeMap<&str, usize> = sys.elements().iter().enumerate().map(|(i, e)| (e.id.as_str(), i)).collect();
    let members: Vec<Vec<usize>> = sys
        .sets()
        .iter()
        .map(|s| s.members.iter().map(|m| index[m.as_str()]).collect())
        .collect();
    let disjoint: Vec<(usize, usize)> = (0..members.len())
        .flat_map(|a| (a + 1..members.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| members[a].iter().all(|x| !members[b].contains(x)))
        .collect();

    let mut best: Option<i64> = None;
    let mut place = vec![0usize; n];
    fn placements(i: usize, used: u32, k: usize, place: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if i == place.len() {
            f(place);
            return;
        }
        for c in 0..k {
            if used >> c & 1 == 0 {
                place[i] = c;
                placements(i + 1, used | 1 << c, k, place, f);
            }
        }
    }
    placements(0, 0, k, &mut place, &mut |p| {
        let occupied: u32 = p.iter().map(|c| 1u32 << c).sum();
        let dims = bbox_dims(&p.iter().map(|&c| cell(c)).collect());
        // feasible regions per set
        let cands: Vec<Vec<(u32, i64)>> = members
            .iter()
            .map(|ms| {
                let need: u32 = ms.iter().map(|&e| 1u32 << p[e]).sum();
                let forbid = occupied & !need;
                regions.iter().copied().filter(|(m, _)| m & need == need && m & forbid == 0).collect()
            })
            .collect();
        if cands.iter().any(|c| c.is_empty()) {
            return;
        }
        let mins: Vec<i64> = cands.iter().map(|c| c[0].1).collect();
        let mut chosen = vec![0u32; members.len()];
        fn search(
            s: usize,
            cost: i64,
            cands: &[Vec<(u32, i64)>],
            mins: &[i64],
            disjoint: &[(usize, usize)],
            chosen: &mut Vec<u32>,
            best: &mut Option<i64>,
        ) {
            let bound = cost + mins[s..].iter().sum::<i64>();
            if best.is_some_and(|b| bound >= b) {
                return;
            }
            if s == cands.len() {
                *best = Some(cost);
                return;
            }
            for &(m, c) in &cands[s] {
                if best.is_some_and(|b| cost + c + mins[s + 1..].iter().sum::<i64>() >= b) {
                    break;
                }
                let clash = disjoint.iter().any(|&(a, b)| (b == s && chosen[a] & m != 0) || (a == s && chosen[b] & m != 0 && b < s));
                if clash {
                    continue;
                }
                chosen[s] = m;
                search(s + 1, cost + c, cands, mins, disjoint, chosen, best);
            }
            chosen[s] = 0;
        }
        let mut local: Option<i64> = best.map(|b| b - dims);
        search(0, 0, &cands, &mins, &disjoint, &mut chosen, &mut local);
        if let Some(v) = local {
            let total = v + dims;
            if best.is_none_or(|b| total < b) {
                best = Some(total);
            }
        }
    });
    best
}

/// Random set system with `n` elements and `sets` non-empty sets.
pub fn random_system(rng: &mut impl Rng, n: usize, sets: usize) -> SetSystem {
    let ids: Vec<String> = (0..n).map(|i| format!("e{i}")).collect();
    let elements = ids.iter().map(|id| Element::text(id, &format!("statement {id}"))).collect();
    let defs = (0..sets)
        .map(|s| {
            let mut m: Vec<&str> = ids.iter().filter(|_| rng.random_bool(0.5)).map(|s| s.as_str()).collect();
            if m.is_empty() {
                m.push(ids.choose(rng).unwrap());
            }
            SetDef::new(&format!("S{s}"), m)
        })
        .collect();
    SetSystem::new(elements, defs).unwrap()
}

/// Random orthoconvex polygon cells: hull of a few random cells, kept only
/// when connected.
pub fn random_orthoconvex(rng: &mut impl Rng, side: i32, points: usize) -> Option<Cells> {
    let seeds: Cells = (0..points).map(|_| (rng.random_range(0..side), rng.random_range(0..side))).collect();
    let h = hull(&seeds);
    connected(&h).then_some(h)
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Transforms the arranger may apply, written out per class.
pub fn allowed_transform_names(cls: ShapeClass) -> &'static [&'static str] {
    match cls {
        ShapeClass::Orthoconvex => &[
            "identity",
            "mirrorH",
            "mirrorV",
            "rot180",
            "rot90",
            "rot270",
            "transpose",
            "antitranspose",
        ],
        ShapeClass::Nabla => &["identity", "mirrorH"],
        ShapeClass::Gamma => &["identity"],
        ShapeClass::Rectangle => &["identity", "rot90"],
    }
}

/// Cell image under a named transform, normalized to the origin.
pub fn transform_cells(cells: &Cells, name: &str) -> Cells {
    let f = |(r, c): (i32, i32)| -> (i32, i32) {
        match name {
            "identity" => (r, c),
            "mirrorH" => (r, -c),
            "mirrorV" => (-r, c),
            "rot180" => (-r, -c),
            "rot90" => (c, -r),
            "rot270" => (-c, r),
            "transpose" => (c, r),
            "antitranspose" => (-c, -r),
            other => panic!("unknown transform {other}"),
        }
    };
    let img: Vec<(i32, i32)> = cells.iter().map(|&p| f(p)).collect();
    let r0 = img.iter().map(|p| p.0).min().unwrap();
    let c0 = img.iter().map(|p| p.1).min().unwrap();
    img.into_iter().map(|(r, c)| (r - r0, c - c0)).collect()
}

pub fn arrangement_cost(occupied: &Cells) -> f64 {
    let w = occupied.iter().map(|c| c.1).max().unwrap() + 1;
    let h = occupied.iter().map(|c| c.0).max().unwrap() + 1;
    (w + h + (w - h).abs()) as f64 + hull(occupied).len() as f64 / 4.0
}

/// Searches for a non-negative placement of all parts, every part in one of
/// the images its class allows, with cost strictly below `bound`. Returns
/// the cheapest one found. Part 0 keeps its first image: the allowed image
/// sets are closed under the global symmetries, which leave the cost alone.
pub fn arrangement_below(parts: &[Cells], cls: ShapeClass, bound: f64) -> Option<f64> {
    // any placement under the bound fits in a square of side below bound / 2
    let side = ((bound / 2.0).ceil() as i32).max(1);
    assert!(side * side <= 128, "bound {bound} too large for the mask grid");
    let bit = |r: i32, c: i32| 1u128 << (r * side + c);
    let total: usize = parts.iter().map(|p| p.len()).sum();
    // per part: every allowed image at every offset, as (mask, max row, max col)
    let options: Vec<Vec<(u128, i32, i32)>> = parts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut images: Vec<Cells> = Vec::new();
            for t in allowed_transform_names(cls) {
                let img = transform_cells(p, t);
                if !images.contains(&img) {
                    images.push(img);
                }
            }
            if i == 0 {
                images.truncate(1);
            }
            let mut out = Vec::new();
            for img in images {
                let h = img.iter().map(|c| c.0).max().unwrap() + 1;
                let w = img.iter().map(|c| c.1).max().unwrap() + 1;
                for r in 0..=side - h {
                    for c in 0..=side - w {
                        let m = img.iter().map(|&(a, b)| bit(a + r, b + c)).fold(0, |x, y| x | y);
                        out.push((m, r + h, c + w));
                    }
                }
            }
            out
        })
        .collect();
    let mut best: Option<f64> = None;
    fn go(
        i: usize,
        occ: u128,
        extent: (i32, i32),
        options: &[Vec<(u128, i32, i32)>],
        side: i32,
        total: usize,
        bound: f64,
        best: &mut Option<f64>,
    ) {
        if i == options.len() {
            let cells: Cells = (0..side * side)
                .filter(|b| occ >> b & 1 == 1)
                .map(|b| (b / side, b % side))
                .collect();
            let c = arrangement_cost(&cells);
            if c < best.unwrap_or(bound) - 1e-9 {
                *best = Some(c);
            }
            return;
        }
        for &(m, h, w) in &options[i] {
            if occ & m != 0 {
                continue;
            }
            let ext = (extent.0.max(h), extent.1.max(w));
            // extent only grows and the hull holds at least every cell
            let lb = (2 * ext.0.max(ext.1)) as f64 + total as f64 / 4.0;
            if lb < best.unwrap_or(bound) - 1e-9 {
                go(i + 1, occ | m, ext, options, side, total, bound, best);
            }
        }
    }
    go(0, 0, (0, 0), &options, side, total, bound, &mut best);
    best
}

/// Relation of two axis-parallel segments in pixel space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Meet {
    Apart,
    /// Perpendicular segments crossing at interior points of both.
    Cross,
    /// A single shared point that is an endpoint of one of them.
    Touch,
    /// Collinear segments sharing a stretch of positive length.
    Overlap,
}

pub fn meet(a: ((f64, f64), (f64, f64)), b: ((f64, f64), (f64, f64))) -> Meet {
    const E: f64 = 1e-7;
    let horizontal = |s: ((f64, f64), (f64, f64))| (s.0 .1 - s.1 .1).abs() < E;
    let sorted = |x: f64, y: f64| if x <= y { (x, y) } else { (y, x) };
    let (ha, hb) = (horizontal(a), horizontal(b));
    if ha == hb {
        let (line_a, line_b, ra, rb) = if ha {
            (a.0 .1, b.0 .1, sorted(a.0 .0, a.1 .0), sorted(b.0 .0, b.1 .0))
        } else {
            (a.0 .0, b.0 .0, sorted(a.0 .1, a.1 .1), sorted(b.0 .1, b.1 .1))
        };
        if (line_a - line_b).abs() > E {
            return Meet::Apart;
        }
        let len = ra.1.min(rb.1) - ra.0.max(rb.0);
        return if len > E {
            Meet::Overlap
        } else if len > -E {
            Meet::Touch
        } else {
            Meet::Apart
        };
    }
    let (h, v) = if ha { (a, b) } else { (b, a) };
    let (x, y) = (v.0 .0, h.0 .1);
    let hx = sorted(h.0 .0, h.1 .0);
    let vy = sorted(v.0 .1, v.1 .1);
    let within = |r: (f64, f64), t: f64| t > r.0 - E && t < r.1 + E;
    let inner = |r: (f64, f64), t: f64| t > r.0 + E && t < r.1 - E;
    if !(within(hx, x) && within(vy, y)) {
        Meet::Apart
    } else if inner(hx, x) && inner(vy, y) {
        Meet::Cross
    } else {
        Meet::Touch
    }
}

/// Largest number of closed unit-lattice ranges on one line that share a
/// point, by direct point sampling.
pub fn max_stack(ranges: &[(i32, i32)]) -> usize {
    let lo = ranges.iter().map(|r| r.0).min().unwrap_or(0);
    let hi = ranges.iter().map(|r| r.1).max().unwrap_or(0);
    (lo..=hi)
        .map(|p| ranges.iter().filter(|r| r.0 <= p && p <= r.1).count())
        .max()
        .unwrap_or(0)
}

/// Attribute value from a single SVG tag.
pub fn attr<'a>(tag: &'a str, name: &str) -> Option<&'a str> {
    let key = format!(" {name}=\"");
    let i = tag.find(&key)? + key.len();
    let j = tag[i..].find('"')? + i;
    Some(&tag[i..j])
}

/// `<path>` tags inside the `<g id="shapes">` group, in document order.
pub fn shape_tags(svg: &str) -> Vec<&str> {
    let Some(start) = svg.find("<g id=\"shapes\">") else { return Vec::new() };
    let end = svg[start..].find("</g>").map(|e| e + start).unwrap_or(svg.len());
    svg[start..end].lines().filter(|l| l.starts_with("<path")).collect()
}

/// Maximal boundary edges of a cell set as lists of unit pieces. A piece is
/// `(horizontal, line, start)`: the segment on lattice line `line` from
/// `start` to `start + 1`.
pub fn unit_edges(cells: &Cells) -> Vec<Vec<(bool, i32, i32)>> {
    // (horizontal, line, interior side) -> pieces
    let mut runs: BTreeMap<(bool, i32, bool), Vec<i32>> = BTreeMap::new();
    for &(r, c) in cells {
        for (horizontal, line, start, side, n) in [
            (true, r, c, false, (r - 1, c)),
            (true, r + 1, c, true, (r + 1, c)),
            (false, c, r, false, (r, c - 1)),
            (false, c + 1, r, true, (r, c + 1)),
        ] {
            if !cells.contains(&n) {
                runs.entry((horizontal, line, side)).or_default().push(start);
            }
        }
    }
    let mut edges = Vec::new();
    for ((horizontal, line, _), mut starts) in runs {
        starts.sort();
        let mut cur: Vec<(bool, i32, i32)> = Vec::new();
        for s in starts {
            if cur.last().is_some_and(|p| p.2 + 1 != s) {
                edges.push(std::mem::take(&mut cur));
            }
            cur.push((horizontal, line, s));
        }
        edges.push(cur);
    }
    edges
}

/// Whether each shape of a bottom-first stack shows a piece of every edge
/// that no higher shape has in its interior.
pub fn visible_in_order(stack: &[&Cells]) -> Vec<bool> {
    let covered = |piece: (bool, i32, i32), q: &Cells| {
        let (h, line, s) = piece;
        if h {
            q.contains(&(line - 1, s)) && q.contains(&(line, s))
        } else {
            q.contains(&(s, line - 1)) && q.contains(&(s, line))
        }
    };
    stack
        .iter()
        .enumerate()
        .map(|(i, p)| {
            unit_edges(p)
                .iter()
                .all(|edge| edge.iter().any(|&piece| stack[i + 1..].iter().all(|q| !covered(piece, q))))
        })
        .collect()
}
