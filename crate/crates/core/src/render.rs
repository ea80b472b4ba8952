//! SVG output.
//!
//! Cells are separated by gutters. Every set boundary runs inside the
//! gutters, and where several boundaries share a gutter line each one gets
//! its own slot, so that drawn boundaries never run on top of each other.
//! Gutter widths grow with the number of slots they need.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use thiserror::Error;

use crate::color::{ColorAssignment, Rgb};
use crate::geometry::{Point, RectiPolygon, ShapeKey};
use crate::model::{Cell, ContentKind, Element, ElementId, SetId, SetSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum HighlightMode {
    #[default]
    ColoredText,
    ColoredBackground,
}

impl HighlightMode {
    pub fn as_str(self) -> &'static str {
        match self {
            HighlightMode::ColoredText => "colored-text",
            HighlightMode::ColoredBackground => "colored-background",
        }
    }
}

impl core::str::FromStr for HighlightMode {
    type Err = crate::model::UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "colored-text" | "coloredtext" | "text" => Ok(HighlightMode::ColoredText),
            "colored-background" | "coloredbackground" | "background" => {
                Ok(HighlightMode::ColoredBackground)
            }
            _ => Err(crate::model::UnknownName(s.into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderStyle {
    pub cell_width: f64,
    pub cell_height: f64,
    pub gutter: f64,
    pub edge_offset: f64,
    pub corner_radius: f64,
    pub highlight: HighlightMode,
    pub font_size: f64,
    pub line_height: f64,
    pub padding: f64,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            cell_width: 260.0,
            cell_height: 90.0,
            gutter: 10.0,
            edge_offset: 6.0,
            corner_radius: 5.0,
            highlight: HighlightMode::ColoredText,
            font_size: 13.0,
            line_height: 16.0,
            padding: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("boundary slot {slot} exceeds the {capacity} slots of gutter {gutter}")]
    OffsetOverflow {
        gutter: String,
        slot: usize,
        capacity: usize,
    },
    #[error("style values must be positive and finite")]
    BadStyle,
    #[error("corner radius {0} exceeds half the base gutter")]
    CornerRadius(f64),
}

impl RenderStyle {
    pub fn validate(&self) -> Result<(), RenderError> {
        let v = [
            self.cell_width,
            self.cell_height,
            self.gutter,
            self.edge_offset,
            self.font_size,
            self.line_height,
        ];
        if v.iter().any(|x| !x.is_finite() || *x <= 0.0) || !(self.corner_radius >= 0.0) || self.padding < 0.0 {
            return Err(RenderError::BadStyle);
        }
        if self.corner_radius > self.gutter / 2.0 {
            return Err(RenderError::CornerRadius(self.corner_radius));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Axis {
    /// Edge on a vertical gutter line `x = line`.
    Vertical,
    Horizontal,
}

#[derive(Clone, Debug)]
struct GutterEdge {
    shape: usize,
    edge: usize,
    lo: i32,
    hi: i32,
    /// Interior lies on the side of larger coordinates.
    interior_high: bool,
}

fn classify(a: Point, b: Point) -> (Axis, i32, i32, i32, bool) {
    if a.x == b.x {
        (Axis::Vertical, a.x, a.y.min(b.y), a.y.max(b.y), b.y > a.y)
    } else {
        (Axis::Horizontal, a.y, a.x.min(b.x), a.x.max(b.x), b.x < a.x)
    }
}

fn gutter_edges(shapes: &[RectiPolygon]) -> BTreeMap<(Axis, i32), Vec<GutterEdge>> {
    let mut out: BTreeMap<(Axis, i32), Vec<GutterEdge>> = BTreeMap::new();
    for (si, s) in shapes.iter().enumerate() {
        for (ei, (a, b)) in s.edges().enumerate() {
            let (axis, line, lo, hi, interior_high) = classify(a, b);
            out.entry((axis, line)).or_default().push(GutterEdge {
                shape: si,
                edge: ei,
                lo,
                hi,
                interior_high,
            });
        }
    }
    out
}

/// Largest number of closed edge ranges sharing one lattice point.
fn max_overlap(edges: &[GutterEdge]) -> usize {
    let mut events: Vec<(i32, i32)> = Vec::new();
    for e in edges {
        events.push((e.lo, -1));
        events.push((e.hi, 1));
    }
    // starts before ends at the same point, since ranges are closed
    events.sort();
    let (mut cur, mut best) = (0i32, 0i32);
    for (_, d) in events {
        cur -= d;
        best = best.max(cur);
    }
    best as usize
}

/// Widths of the gutters: `cols[j]` is the vertical gutter left of grid
/// column `j`, `rows[i]` the horizontal gutter above grid row `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct GutterWidths {
    pub cols: Vec<f64>,
    pub rows: Vec<f64>,
    pub col_slots: Vec<usize>,
    pub row_slots: Vec<usize>,
}

pub fn compute_gutters(rows: i32, cols: i32, shapes: &[RectiPolygon], style: &RenderStyle) -> GutterWidths {
    let mut col_slots = vec![0usize; cols as usize + 1];
    let mut row_slots = vec![0usize; rows as usize + 1];
    for ((axis, line), edges) in gutter_edges(shapes) {
        let slots = match axis {
            Axis::Vertical => col_slots.get_mut(line as usize),
            Axis::Horizontal => row_slots.get_mut(line as usize),
        };
        if let Some(s) = slots {
            *s = max_overlap(&edges);
        }
    }
    let width = |c: &usize| style.gutter + *c as f64 * style.edge_offset;
    GutterWidths {
        cols: col_slots.iter().map(width).collect(),
        rows: row_slots.iter().map(width).collect(),
        col_slots,
        row_slots,
    }
}

/// Pixel frame of the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    /// Left edge of vertical gutter `j`.
    pub gutter_x: Vec<f64>,
    /// Top edge of horizontal gutter `i`.
    pub gutter_y: Vec<f64>,
    pub width: f64,
    pub height: f64,
    pub cell_width: f64,
    pub cell_height: f64,
}

impl Frame {
    pub fn new(g: &GutterWidths, style: &RenderStyle) -> Self {
        let mut gutter_x = Vec::with_capacity(g.cols.len());
        let mut x = 0.0;
        for (j, w) in g.cols.iter().enumerate() {
            gutter_x.push(x);
            x += w;
            if j + 1 < g.cols.len() {
                x += style.cell_width;
            }
        }
        let mut gutter_y = Vec::with_capacity(g.rows.len());
        let mut y = 0.0;
        for (i, h) in g.rows.iter().enumerate() {
            gutter_y.push(y);
            y += h;
            if i + 1 < g.rows.len() {
                y += style.cell_height;
            }
        }
        Self {
            gutter_x,
            gutter_y,
            width: x,
            height: y,
            cell_width: style.cell_width,
            cell_height: style.cell_height,
        }
    }

    /// Top-left pixel of a cell's box.
    pub fn cell_origin(&self, g: &GutterWidths, c: Cell) -> (f64, f64) {
        (
            self.gutter_x[c.col as usize] + g.cols[c.col as usize],
            self.gutter_y[c.row as usize] + g.rows[c.row as usize],
        )
    }
}

/// Ranks shapes from outermost to innermost: strict supersets come before
/// their subsets, otherwise lower in the stack comes first.
fn outer_ranks(shapes: &[RectiPolygon], stack_index: &[usize]) -> Vec<usize> {
    let n = shapes.len();
    let mut indeg = vec![0usize; n];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for a in 0..n {
        for b in 0..n {
            if a != b && shapes[a].cells.len() > shapes[b].cells.len() && shapes[a].cells.is_superset(&shapes[b].cells) {
                succ[a].push(b);
                indeg[b] += 1;
            }
        }
    }
    let mut ready: BTreeSet<(usize, usize)> = (0..n).filter(|&i| indeg[i] == 0).map(|i| (stack_index[i], i)).collect();
    let mut rank = vec![0usize; n];
    let mut next = 0;
    while let Some(&(si, i)) = ready.iter().next() {
        ready.remove(&(si, i));
        rank[i] = next;
        next += 1;
        for &j in &succ[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                ready.insert((stack_index[j], j));
            }
        }
    }
    rank
}

fn overlaps(a: &GutterEdge, b: &GutterEdge) -> bool {
    a.lo <= b.hi && b.lo <= a.hi
}

/// Slot (1-based, from the low side) for every edge on one gutter line.
fn assign_slots(edges: &[GutterEdge], rank: &[usize], capacity: usize) -> Vec<usize> {
    // low-side interiors (right or bottom sides) first, inner to outer,
    // then high-side interiors outer to inner
    let key = |e: &GutterEdge| -> (bool, i64, usize) {
        let r = rank[e.shape] as i64;
        (e.interior_high, if e.interior_high { r } else { -r }, e.shape)
    };
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by_key(|&i| key(&edges[i]));
    let mut slot = vec![0usize; edges.len()];
    for (k, &i) in order.iter().enumerate() {
        let below = order[..k]
            .iter()
            .filter(|&&j| overlaps(&edges[i], &edges[j]))
            .map(|&j| slot[j])
            .max()
            .unwrap_or(0);
        slot[i] = below + 1;
    }
    if slot.iter().all(|s| *s <= capacity) {
        return slot;
    }
    // interval first-fit never needs more slots than the deepest point
    order.sort_by_key(|&i| (edges[i].lo, key(&edges[i])));
    let mut slot = vec![0usize; edges.len()];
    for (k, &i) in order.iter().enumerate() {
        let taken: BTreeSet<usize> = order[..k]
            .iter()
            .filter(|&&j| overlaps(&edges[i], &edges[j]))
            .map(|&j| slot[j])
            .collect();
        slot[i] = (1..).find(|s| !taken.contains(s)).expect("unbounded");
    }
    slot
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Px {
    pub x: f64,
    pub y: f64,
}

/// Drawn boundary of one shape: a closed rectilinear polyline in pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct OffsetPath {
    pub key: ShapeKey,
    /// Corner points; the first is repeated at the end.
    pub points: Vec<Px>,
}

pub fn offset_boundaries(
    shapes: &[RectiPolygon],
    stack_index: &[usize],
    gutters: &GutterWidths,
    frame: &Frame,
    style: &RenderStyle,
) -> Result<Vec<OffsetPath>, RenderError> {
    let rank = outer_ranks(shapes, stack_index);
    // (shape, edge) -> pixel coordinate of the edge's slot line
    let mut pos: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for ((axis, line), edges) in gutter_edges(shapes) {
        let li = line as usize;
        let (capacity, base) = match axis {
            Axis::Vertical => (gutters.col_slots[li], frame.gutter_x[li]),
            Axis::Horizontal => (gutters.row_slots[li], frame.gutter_y[li]),
        };
        let slots = assign_slots(&edges, &rank, capacity);
        for (e, s) in edges.iter().zip(slots) {
            if s > capacity {
                let name = match axis {
                    Axis::Vertical => format!("column {line}"),
                    Axis::Horizontal => format!("row {line}"),
                };
                return Err(RenderError::OffsetOverflow {
                    gutter: name,
                    slot: s,
                    capacity,
                });
            }
            let off = base + style.gutter / 2.0 + (s as f64 - 0.5) * style.edge_offset;
            pos.insert((e.shape, e.edge), off);
        }
    }
    let mut out = Vec::with_capacity(shapes.len());
    for (si, s) in shapes.iter().enumerate() {
        let n = s.edge_count();
        let mut pts = Vec::with_capacity(n + 1);
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let (a, b) = s.edge(i);
            // incoming edge `prev` and outgoing edge `i` meet at boundary[i]
            let (vx, hy) = if a.x == b.x { (i, prev) } else { (prev, i) };
            pts.push(Px {
                x: pos[&(si, vx)],
                y: pos[&(si, hy)],
            });
        }
        pts.push(pts[0]);
        out.push(OffsetPath {
            key: s.key.clone(),
            points: pts,
        });
    }
    Ok(out)
}

/// Helvetica advance widths for printable ASCII, in thousandths of an em.
const HELVETICA: [u16; 95] = [
    278, 278, 355, 556, 556, 889, 667, 191, 333, 333, 389, 584, 278, 333, 278, 278, // ' '..'/'
    556, 556, 556, 556, 556, 556, 556, 556, 556, 556, 278, 278, 584, 584, 584, 556, // '0'..'?'
    1015, 667, 667, 722, 722, 667, 611, 778, 722, 278, 500, 667, 556, 833, 722, 778, // '@'..'O'
    667, 778, 722, 667, 611, 722, 667, 944, 667, 667, 611, 278, 278, 278, 469, 556, // 'P'..'_'
    333, 556, 556, 500, 556, 556, 278, 556, 556, 222, 222, 500, 222, 833, 556, 556, // '`'..'o'
    556, 556, 333, 500, 278, 556, 500, 722, 500, 500, 500, 334, 260, 334, 584, // 'p'..'~'
];

/// Bold glyphs are drawn wider; one factor keeps the table small.
const BOLD_FACTOR: f64 = 1.08;

pub fn char_width(c: char, font_size: f64, bold: bool) -> f64 {
    let per_mille = match c as u32 {
        32..=126 => HELVETICA[(c as u32 - 32) as usize],
        _ => 600,
    };
    let w = per_mille as f64 / 1000.0 * font_size;
    if bold {
        w * BOLD_FACTOR
    } else {
        w
    }
}

pub fn text_width(s: &str, font_size: f64, bold: bool) -> f64 {
    s.chars().map(|c| char_width(c, font_size, bold)).sum()
}

/// One styled run of a laid-out line.
#[derive(Clone, Debug, PartialEq)]
pub struct TextRun {
    pub x: f64,
    pub text: String,
    pub mention: Option<SetId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextLayout {
    pub lines: Vec<Vec<TextRun>>,
    pub truncated: bool,
}

const ELLIPSIS: char = '\u{2026}';

/// Greedy word wrap of `text` into a box, keeping mention styling per
/// character. Singleton mentions count as bold.
pub fn layout_text(
    text: &str,
    mention_of: &[Option<SetId>],
    bold: &dyn Fn(&SetId) -> bool,
    width: f64,
    max_lines: usize,
    font_size: f64,
) -> TextLayout {
    let chars: Vec<char> = text.chars().collect();
    let cw = |i: usize, c: char| {
        let b = mention_of.get(i).and_then(|m| m.as_ref()).is_some_and(|s| bold(s));
        char_width(c, font_size, b)
    };
    // words as index ranges; whitespace collapses to the first blank
    let mut words: Vec<(usize, usize, Option<usize>)> = Vec::new();
    let mut i = 0;
    let mut pending_space: Option<usize> = None;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            if pending_space.is_none() {
                pending_space = Some(i);
            }
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        words.push((start, i, pending_space.take()));
    }

    // a line is a list of (char index, char) with char index of the blank
    let mut lines: Vec<Vec<(usize, char)>> = Vec::new();
    let mut cur: Vec<(usize, char)> = Vec::new();
    let mut cur_w = 0.0;
    for (s, e, space) in words {
        let word_w: f64 = (s..e).map(|k| cw(k, chars[k])).sum();
        let space_w = space.map(|k| cw(k, ' ')).unwrap_or(0.0);
        if !cur.is_empty() && cur_w + space_w + word_w <= width {
            if let Some(k) = space {
                cur.push((k, ' '));
            }
            cur.extend((s..e).map(|k| (k, chars[k])));
            cur_w += space_w + word_w;
            continue;
        }
        if !cur.is_empty() {
            lines.push(core::mem::take(&mut cur));
            cur_w = 0.0;
        }
        // words wider than the box break anywhere
        for k in s..e {
            let w = cw(k, chars[k]);
            if !cur.is_empty() && cur_w + w > width {
                lines.push(core::mem::take(&mut cur));
                cur_w = 0.0;
            }
            cur.push((k, chars[k]));
            cur_w += w;
        }
    }
    if !cur.is_empty() {
        lines.push(cur);
    }
    let mut truncated = false;
    if lines.len() > max_lines {
        truncated = true;
        lines.truncate(max_lines);
        if let Some(last) = lines.last_mut() {
            let ell = char_width(ELLIPSIS, font_size, false);
            while !last.is_empty() && last.iter().map(|&(k, c)| cw(k, c)).sum::<f64>() + ell > width {
                last.pop();
            }
            let k = last.last().map(|p| p.0).unwrap_or(0);
            last.push((k, ELLIPSIS));
        }
    }
    let runs = lines
        .into_iter()
        .map(|line| {
            let mut runs: Vec<TextRun> = Vec::new();
            let mut x = 0.0;
            for (k, c) in line {
                let m = if c == ELLIPSIS { None } else { mention_of.get(k).cloned().flatten() };
                let w = if c == ELLIPSIS { char_width(c, font_size, false) } else { cw(k, c) };
                match runs.last_mut() {
                    Some(r) if r.mention == m => r.text.push(c),
                    _ => runs.push(TextRun {
                        x,
                        text: String::from(c),
                        mention: m,
                    }),
                }
                x += w;
            }
            runs
        })
        .collect();
    TextLayout {
        lines: runs,
        truncated,
    }
}

/// Everything the emitter needs about one drawn shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapePlan {
    pub key: ShapeKey,
    pub color: Rgb,
    pub dashed: bool,
    pub covered: bool,
    pub stack_index: usize,
    pub path: OffsetPath,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderPlan {
    pub style: RenderStyle,
    pub rows: i32,
    pub cols: i32,
    pub gutters: GutterWidths,
    pub frame: Frame,
    /// Bottom to top.
    pub shapes: Vec<ShapePlan>,
}

/// Inputs of one figure, all in global grid coordinates.
pub struct Scene<'a> {
    pub system: &'a SetSystem,
    pub rows: i32,
    pub cols: i32,
    pub placement: &'a BTreeMap<ElementId, Cell>,
    /// Shapes in stacking order, bottom first.
    pub shapes: &'a [RectiPolygon],
    pub colors: &'a ColorAssignment,
    pub duplicated: &'a BTreeSet<SetId>,
    pub covered: &'a BTreeSet<ShapeKey>,
}

pub fn plan(scene: &Scene<'_>, style: &RenderStyle) -> Result<RenderPlan, RenderError> {
    style.validate()?;
    let gutters = compute_gutters(scene.rows, scene.cols, scene.shapes, style);
    let frame = Frame::new(&gutters, style);
    let stack: Vec<usize> = (0..scene.shapes.len()).collect();
    let paths = offset_boundaries(scene.shapes, &stack, &gutters, &frame, style)?;
    let shapes = scene
        .shapes
        .iter()
        .zip(paths)
        .enumerate()
        .map(|(i, (s, path))| ShapePlan {
            key: s.key.clone(),
            color: scene.colors.color(&s.key.set).unwrap_or(Rgb::new(0x7f, 0x7f, 0x7f)),
            dashed: scene.duplicated.contains(&s.key.set),
            covered: scene.covered.contains(&s.key),
            stack_index: i,
            path,
        })
        .collect();
    Ok(RenderPlan {
        style: *style,
        rows: scene.rows,
        cols: scene.cols,
        gutters,
        frame,
        shapes,
    })
}

/// Compact decimal with at most two fractional digits.
pub fn fmt_px(x: f64) -> String {
    let v = libm::round(x * 100.0) as i64;
    let (sign, v) = if v < 0 { ("-", -v) } else { ("", v) };
    let (int, frac) = (v / 100, v % 100);
    if frac == 0 {
        format!("{sign}{int}")
    } else if frac % 10 == 0 {
        format!("{sign}{int}.{}", frac / 10)
    } else {
        format!("{sign}{int}.{frac:02}")
    }
}

pub fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// SVG path data with corners rounded by `radius`, clipped to half of the
/// shorter adjoining segment.
pub fn rounded_path(points: &[Px], radius: f64) -> String {
    let n = points.len().saturating_sub(1);
    if n < 3 {
        return String::new();
    }
    let pt = |i: usize| points[i % n];
    let toward = |p: Px, q: Px, d: f64| {
        let len = (q.x - p.x).abs() + (q.y - p.y).abs();
        if len == 0.0 {
            p
        } else {
            Px {
                x: p.x + (q.x - p.x) * d / len,
                y: p.y + (q.y - p.y) * d / len,
            }
        }
    };
    let seg = |i: usize| {
        let (p, q) = (pt(i), pt(i + 1));
        (q.x - p.x).abs() + (q.y - p.y).abs()
    };
    let mut d = String::new();
    for i in 0..n {
        let corner = pt(i);
        let r = radius.min(seg(i + n - 1) / 2.0).min(seg(i) / 2.0);
        let enter = toward(corner, pt(i + n - 1), r);
        let leave = toward(corner, pt(i + 1), r);
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(d, "{cmd}{} {}", fmt_px(enter.x), fmt_px(enter.y));
        let _ = write!(
            d,
            "Q{} {} {} {}",
            fmt_px(corner.x),
            fmt_px(corner.y),
            fmt_px(leave.x),
            fmt_px(leave.y)
        );
    }
    d.push('Z');
    d
}

/// Per-character mention set for an element's text.
fn mentions(e: &Element) -> Vec<Option<SetId>> {
    let len = e.content.payload.chars().count();
    let mut out = vec![None; len];
    let mut spans = e.spans.clone();
    spans.sort_by_key(|s| (s.start, s.end));
    // earlier spans win where spans overlap
    for s in spans.iter().rev() {
        for slot in out.iter_mut().take(s.end.min(len)).skip(s.start) {
            *slot = Some(s.set.clone());
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput {
    pub svg: String,
    pub warnings: Vec<String>,
}

const FILL_LIGHTEN: f64 = 0.45;
const FONT_FAMILY: &str = "Helvetica, Arial, sans-serif";

pub fn render_svg(scene: &Scene<'_>, plan: &RenderPlan) -> RenderOutput {
    let style = &plan.style;
    let frame = &plan.frame;
    let mut warnings = Vec::new();
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = fmt_px(frame.width),
        h = fmt_px(frame.height)
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{}" height="{}" fill="#ffffff"/>"##, fmt_px(frame.width), fmt_px(frame.height));

    let _ = writeln!(s, r#"<g id="shapes">"#);
    for sh in &plan.shapes {
        let dash = if sh.dashed { r#" stroke-dasharray="6 3""# } else { "" };
        let _ = writeln!(
            s,
            r#"<path data-set="{}" data-part="{}" d="{}" fill="{}" stroke="{}" stroke-width="1.5"{}/>"#,
            escape_xml(sh.key.set.as_str()),
            sh.key.part,
            rounded_path(&sh.path.points, style.corner_radius),
            sh.color.mix(Rgb::WHITE, FILL_LIGHTEN),
            sh.color,
            dash
        );
    }
    let _ = writeln!(s, "</g>");

    let covered: Vec<&ShapePlan> = plan.shapes.iter().filter(|p| p.covered).collect();
    if !covered.is_empty() {
        let _ = writeln!(s, r#"<g id="covered-outlines">"#);
        for sh in covered {
            let _ = writeln!(
                s,
                r#"<path data-set="{}" data-part="{}" d="{}" fill="none" stroke="{}" stroke-width="1" stroke-dasharray="2 2"/>"#,
                escape_xml(sh.key.set.as_str()),
                sh.key.part,
                rounded_path(&sh.path.points, style.corner_radius),
                sh.color
            );
        }
        let _ = writeln!(s, "</g>");
    }

    let singleton = |id: &SetId| scene.system.set(id).is_some_and(|d| d.is_singleton());
    let _ = writeln!(s, r#"<g id="elements">"#);
    for e in scene.system.elements() {
        let Some(&cell) = scene.placement.get(&e.id) else { continue };
        let (x, y) = frame.cell_origin(&plan.gutters, cell);
        let _ = writeln!(
            s,
            r##"<rect data-element="{}" x="{}" y="{}" width="{}" height="{}" rx="3" fill="#ffffff" stroke="#b0b0b0" stroke-width="0.75"/>"##,
            escape_xml(e.id.as_str()),
            fmt_px(x),
            fmt_px(y),
            fmt_px(style.cell_width),
            fmt_px(style.cell_height)
        );
        let (ix, iy) = (x + style.padding, y + style.padding);
        let (iw, ih) = (style.cell_width - 2.0 * style.padding, style.cell_height - 2.0 * style.padding);
        match e.content.kind {
            ContentKind::Text => {
                let max_lines = libm::floor(ih / style.line_height).max(1.0) as usize;
                let tl = layout_text(&e.content.payload, &mentions(e), &singleton, iw, max_lines, style.font_size);
                if tl.truncated {
                    warnings.push(format!("content of `{}` truncated to fit its cell", e.id));
                }
                write_text(&mut s, scene, &tl, ix, iy, style, &singleton);
            }
            ContentKind::ImagePath => {
                let _ = writeln!(
                    s,
                    r#"<image x="{}" y="{}" width="{}" height="{}" preserveAspectRatio="xMidYMid meet" xlink:href="{}"/>"#,
                    fmt_px(ix),
                    fmt_px(iy),
                    fmt_px(iw),
                    fmt_px(ih),
                    escape_xml(&e.content.payload)
                );
            }
            ContentKind::RawSvgFragment => {
                let _ = writeln!(
                    s,
                    r#"<svg x="{}" y="{}" width="{}" height="{}" overflow="hidden">{}</svg>"#,
                    fmt_px(ix),
                    fmt_px(iy),
                    fmt_px(iw),
                    fmt_px(ih),
                    e.content.payload
                );
            }
        }
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    RenderOutput { svg: s, warnings }
}

fn write_text(
    s: &mut String,
    scene: &Scene<'_>,
    tl: &TextLayout,
    x: f64,
    y: f64,
    style: &RenderStyle,
    singleton: &dyn Fn(&SetId) -> bool,
) {
    for (li, line) in tl.lines.iter().enumerate() {
        let baseline = y + style.font_size + li as f64 * style.line_height;
        if style.highlight == HighlightMode::ColoredBackground {
            for run in line {
                let Some(set) = &run.mention else { continue };
                let Some(color) = scene.colors.color(set).filter(|_| !singleton(set)) else { continue };
                let _ = writeln!(
                    s,
                    r#"<rect x="{}" y="{}" width="{}" height="{}" rx="2" fill="{}"/>"#,
                    fmt_px(x + run.x),
                    fmt_px(baseline - style.font_size),
                    fmt_px(text_width(&run.text, style.font_size, false)),
                    fmt_px(style.font_size * 1.25),
                    color.mix(Rgb::WHITE, FILL_LIGHTEN)
                );
            }
        }
        let _ = write!(
            s,
            r##"<text x="{}" y="{}" font-family="{}" font-size="{}" fill="#222222" xml:space="preserve">"##,
            fmt_px(x),
            fmt_px(baseline),
            FONT_FAMILY,
            fmt_px(style.font_size)
        );
        for run in line {
            let mut attrs = String::new();
            if let Some(set) = &run.mention {
                if singleton(set) {
                    attrs.push_str(r#" font-weight="bold" text-decoration="underline""#);
                } else if style.highlight == HighlightMode::ColoredText {
                    if let Some(c) = scene.colors.color(set) {
                        let _ = write!(attrs, r#" fill="{c}""#);
                    }
                }
            }
            let _ = write!(s, r#"<tspan x="{}"{}>{}</tspan>"#, fmt_px(x + run.x), attrs, escape_xml(&run.text));
        }
        s.push_str("</text>\n");
    }
}

/// How two drawn boundary segments meet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Contact {
    None,
    /// Perpendicular segments crossing at interior points of both.
    Crossing,
    /// Segments sharing a single point that is an endpoint of one of them.
    Touching,
    /// Collinear segments sharing more than a point.
    Overlap,
}

pub fn segment_contact(a: (Px, Px), b: (Px, Px)) -> Contact {
    const EPS: f64 = 1e-9;
    let horiz = |s: (Px, Px)| (s.0.y - s.1.y).abs() < EPS;
    let range = |p: f64, q: f64| (p.min(q), p.max(q));
    match (horiz(a), horiz(b)) {
        (true, true) | (false, false) => {
            let same_line = if horiz(a) {
                (a.0.y - b.0.y).abs() < EPS
            } else {
                (a.0.x - b.0.x).abs() < EPS
            };
            if !same_line {
                return Contact::None;
            }
            let (ra, rb) = if horiz(a) {
                (range(a.0.x, a.1.x), range(b.0.x, b.1.x))
            } else {
                (range(a.0.y, a.1.y), range(b.0.y, b.1.y))
            };
            let lo = ra.0.max(rb.0);
            let hi = ra.1.min(rb.1);
            if hi - lo > EPS {
                Contact::Overlap
            } else if hi - lo >= -EPS {
                Contact::Touching
            } else {
                Contact::None
            }
        }
        _ => {
            let (h, v) = if horiz(a) { (a, b) } else { (b, a) };
            let (hx, vy) = (range(h.0.x, h.1.x), range(v.0.y, v.1.y));
            let (x, y) = (v.0.x, h.0.y);
            let inside = |r: (f64, f64), t: f64| t >= r.0 - EPS && t <= r.1 + EPS;
            if !(inside(hx, x) && inside(vy, y)) {
                return Contact::None;
            }
            let strict = |r: (f64, f64), t: f64| t > r.0 + EPS && t < r.1 - EPS;
            if strict(hx, x) && strict(vy, y) {
                Contact::Crossing
            } else {
                Contact::Touching
            }
        }
    }
}

/// Cells whose box centers lie inside a drawn path (even-odd rule).
pub fn enclosed_cells(path: &[Px], plan: &RenderPlan) -> BTreeSet<Cell> {
    let mut out = BTreeSet::new();
    for r in 0..plan.rows {
        for c in 0..plan.cols {
            let (x, y) = plan.frame.cell_origin(&plan.gutters, Cell::new(r, c));
            let (px, py) = (x + plan.style.cell_width / 2.0, y + plan.style.cell_height / 2.0);
            let crossings = path
                .windows(2)
                .filter(|w| {
                    let (a, b) = (w[0], w[1]);
                    (a.x - b.x).abs() < 1e-9 && a.x > px && py > a.y.min(b.y) && py < a.y.max(b.y)
                })
                .count();
            if crossings % 2 == 1 {
                out.insert(Cell::new(r, c));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{cells, CellSet};

    fn rect(name: &str, r0: i32, c0: i32, h: i32, w: i32) -> RectiPolygon {
        let cells: CellSet = (r0..r0 + h)
            .flat_map(|r| (c0..c0 + w).map(move |c| Cell::new(r, c)))
            .collect();
        RectiPolygon::new(ShapeKey::new(name, 0), cells).unwrap()
    }

    fn drawn(shapes: &[RectiPolygon], rows: i32, cols: i32) -> (Vec<OffsetPath>, GutterWidths, RenderPlan) {
        let style = RenderStyle::default();
        let g = compute_gutters(rows, cols, shapes, &style);
        let frame = Frame::new(&g, &style);
        let stack: Vec<usize> = (0..shapes.len()).collect();
        let paths = offset_boundaries(shapes, &stack, &g, &frame, &style).unwrap();
        let plan = RenderPlan {
            style,
            rows,
            cols,
            gutters: g.clone(),
            frame,
            shapes: Vec::new(),
        };
        (paths, g, plan)
    }

    #[test]
    fn gutter_counts() {
        let style = RenderStyle::default();
        let g = compute_gutters(2, 2, &[], &style);
        assert!(g.cols.iter().chain(&g.rows).all(|w| *w == 10.0));

        // outer and inner share the left gutter; a third shape sits to the
        // left with its right side on the same line
        let shapes = [rect("outer", 0, 1, 3, 2), rect("inner", 1, 1, 1, 1), rect("left", 0, 0, 3, 1)];
        let g = compute_gutters(3, 3, &shapes, &style);
        assert_eq!(g.col_slots[1], 3);
        assert_eq!(g.cols[1], 10.0 + 3.0 * 6.0);
        let two = [rect("a", 0, 0, 1, 1), rect("b", 0, 0, 1, 1)];
        let g = compute_gutters(1, 1, &two, &style);
        assert_eq!(g.cols[0], 10.0 + 2.0 * 6.0);
    }

    #[test]
    fn single_shape_is_centered() {
        let shapes = [rect("a", 0, 0, 1, 1)];
        let (paths, g, _) = drawn(&shapes, 1, 1);
        // one slot: centered in a 16px gutter
        assert_eq!(g.cols[0], 16.0);
        assert_eq!(paths[0].points[0], Px { x: 8.0, y: 8.0 });
    }

    #[test]
    fn nested_outer_is_outside() {
        let shapes = [rect("outer", 0, 0, 2, 2), rect("inner", 0, 0, 1, 1)];
        let (paths, _, plan) = drawn(&shapes, 2, 2);
        let min_x = |p: &OffsetPath| p.points.iter().map(|q| q.x).fold(f64::INFINITY, f64::min);
        let min_y = |p: &OffsetPath| p.points.iter().map(|q| q.y).fold(f64::INFINITY, f64::min);
        assert!(min_x(&paths[0]) < min_x(&paths[1]));
        assert!(min_y(&paths[0]) < min_y(&paths[1]));
        for (p, s) in paths.iter().zip(&shapes) {
            assert_eq!(enclosed_cells(&p.points, &plan), s.cells);
        }
    }

    #[test]
    fn lower_stacked_overlapping_set_is_outer() {
        let shapes = [rect("low", 0, 0, 1, 2), rect("high", 0, 0, 2, 1)];
        let (paths, _, _) = drawn(&shapes, 2, 2);
        // both left sides lie on x = 0; the lower one is further left
        let left = |p: &OffsetPath| p.points.iter().map(|q| q.x).fold(f64::INFINITY, f64::min);
        assert!(left(&paths[0]) < left(&paths[1]));
    }

    #[test]
    fn drawn_boundaries_never_overlap() {
        let shapes = [
            rect("A", 0, 0, 2, 2),
            rect("B", 1, 1, 2, 2),
            rect("C", 0, 2, 1, 1),
            RectiPolygon::new(ShapeKey::new("D", 0), cells([(2, 0), (2, 1), (1, 0)])).unwrap(),
        ];
        let (paths, _, plan) = drawn(&shapes, 3, 3);
        for (i, p) in paths.iter().enumerate() {
            for q in &paths[i + 1..] {
                for a in p.points.windows(2) {
                    for b in q.points.windows(2) {
                        assert_ne!(segment_contact((a[0], a[1]), (b[0], b[1])), Contact::Overlap);
                    }
                }
            }
        }
        for (p, s) in paths.iter().zip(&shapes) {
            assert_eq!(enclosed_cells(&p.points, &plan), s.cells);
        }
    }

    #[test]
    fn text_wraps_and_truncates() {
        let t = "alpha beta gamma delta";
        let none = vec![None; t.chars().count()];
        let never = |_: &SetId| false;
        let w = text_width("gamma delta", 10.0, false);
        let tl = layout_text(t, &none, &never, w, 5, 10.0);
        let joined: Vec<String> = tl.lines.iter().map(|l| l.iter().map(|r| r.text.clone()).collect()).collect();
        assert_eq!(joined, ["alpha beta", "gamma delta"].map(String::from));
        assert!(!tl.truncated);
        let tl = layout_text(t, &none, &never, w, 1, 10.0);
        assert!(tl.truncated);
        assert!(tl.lines[0].last().unwrap().text.ends_with(ELLIPSIS));
    }

    #[test]
    fn mention_runs_split_lines() {
        let t = "Robin met John";
        let mut m = vec![None; 14];
        for slot in m.iter_mut().take(5) {
            *slot = Some(SetId::from("robin"));
        }
        let tl = layout_text(t, &m, &|_| true, 1000.0, 3, 10.0);
        assert_eq!(tl.lines[0].len(), 2);
        assert_eq!(tl.lines[0][0].text, "Robin");
        assert_eq!(tl.lines[0][0].mention, Some(SetId::from("robin")));
        assert!((tl.lines[0][1].x - text_width("Robin", 10.0, true)).abs() < 1e-9);
    }

    #[test]
    fn px_formatting() {
        assert_eq!(fmt_px(3.0), "3");
        assert_eq!(fmt_px(3.5), "3.5");
        assert_eq!(fmt_px(-0.125), "-0.13");
        assert_eq!(fmt_px(12.34), "12.34");
        assert_eq!(escape_xml("a<b&\"c\""), "a&lt;b&amp;&quot;c&quot;");
    }

    #[test]
    fn contacts() {
        let p = |x: f64, y: f64| Px { x, y };
        assert_eq!(segment_contact((p(0., 0.), p(4., 0.)), (p(2., -1.), p(2., 1.))), Contact::Crossing);
        assert_eq!(segment_contact((p(0., 0.), p(4., 0.)), (p(4., 0.), p(4., 3.))), Contact::Touching);
        assert_eq!(segment_contact((p(0., 0.), p(4., 0.)), (p(3., 0.), p(6., 0.))), Contact::Overlap);
        assert_eq!(segment_contact((p(0., 0.), p(4., 0.)), (p(0., 1.), p(4., 1.))), Contact::None);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(256))]
        #[test]
        fn random_rectangles_draw_cleanly(
            specs in proptest::collection::vec((0i32..4, 0i32..4, 1i32..4, 1i32..4), 1..5)
        ) {
            let shapes: Vec<RectiPolygon> = specs
                .iter()
                .enumerate()
                .map(|(i, &(r, c, h, w))| rect(&format!("s{i}"), r, c, h.min(4 - r), w.min(4 - c)))
                .collect();
            let (paths, _, plan) = drawn(&shapes, 4, 4);
            for (p, s) in paths.iter().zip(&shapes) {
                proptest::prop_assert_eq!(&enclosed_cells(&p.points, &plan), &s.cells);
            }
            for (i, p) in paths.iter().enumerate() {
                for q in &paths[i + 1..] {
                    for a in p.points.windows(2) {
                        for b in q.points.windows(2) {
                            let c = segment_contact((a[0], a[1]), (b[0], b[1]));
                            proptest::prop_assert!(matches!(c, Contact::None | Contact::Crossing), "{:?}", c);
                        }
                    }
                }
            }
        }
    
        #[test]
        fn random_orthoconvex_shapes_draw_cleanly(
            seeds in proptest::collection::vec(proptest::collection::vec((0i32..4, 0i32..4), 1..4), 1..5)
        ) {
            let shapes: Vec<RectiPolygon> = seeds
                .iter()
                .enumerate()
                .filter_map(|(i, pts)| {
                    let hull = crate::geometry::orthoconvex_hull(&cells(pts.iter().copied()));
                    RectiPolygon::new(ShapeKey::new(format!("s{i}").as_str(), 0), hull).ok()
                })
                .collect();
            let (paths, _, plan) = drawn(&shapes, 4, 4);
            for (p, s) in paths.iter().zip(&shapes) {
                proptest::prop_assert_eq!(&enclosed_cells(&p.points, &plan), &s.cells);
            }
            for (i, p) in paths.iter().enumerate() {
                for q in &paths[i + 1..] {
                    for a in p.points.windows(2) {
                        for b in q.points.windows(2) {
                            let c = segment_contact((a[0], a[1]), (b[0], b[1]));
                            proptest::prop_assert!(matches!(c, Contact::None | Contact::Crossing), "{:?}", c);
                        }
                    }
                }
            }
        }
}
}
