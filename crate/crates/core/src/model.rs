//! Domain types shared by every stage, plus set-system validation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(id: &str) -> Self {
                Self(String::from(id))
            }
        }

        impl From<String> for $name {
            fn from(id: String) -> Self {
                Self(id)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

string_id!(
    /// Opaque identifier of an element.
    ElementId
);
string_id!(
    /// Opaque identifier of a set.
    SetId
);

/// A grid cell. Row 0 is the top row, column 0 the leftmost column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub row: i32,
    pub col: i32,
}

impl Cell {
    pub const fn new(row: i32, col: i32) -> Self {
        Self { row, col }
    }

    pub fn neighbors(self) -> [Cell; 4] {
        [
            Cell::new(self.row - 1, self.col),
            Cell::new(self.row + 1, self.col),
            Cell::new(self.row, self.col - 1),
            Cell::new(self.row, self.col + 1),
        ]
    }
}

pub type CellSet = BTreeSet<Cell>;

/// Builds a cell set from `(row, col)` pairs.
pub fn cells<I: IntoIterator<Item = (i32, i32)>>(pairs: I) -> CellSet {
    pairs.into_iter().map(|(r, c)| Cell::new(r, c)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ContentKind {
    Text,
    ImagePath,
    RawSvgFragment,
}

impl ContentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ContentKind::Text => "text",
            ContentKind::ImagePath => "imagePath",
            ContentKind::RawSvgFragment => "rawSvgFragment",
        }
    }
}

impl FromStr for ContentKind {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(ContentKind::Text),
            "imagePath" => Ok(ContentKind::ImagePath),
            "rawSvgFragment" => Ok(ContentKind::RawSvgFragment),
            _ => Err(UnknownName(String::from(s))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContentRef {
    pub kind: ContentKind,
    pub payload: String,
}

impl ContentRef {
    pub fn text(payload: impl Into<String>) -> Self {
        Self {
            kind: ContentKind::Text,
            payload: payload.into(),
        }
    }
}

/// An entity mention inside text content, in code-point offsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub set: SetId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Element {
    pub id: ElementId,
    pub content: ContentRef,
    pub spans: Vec<Span>,
}

impl Element {
    pub fn text(id: &str, text: &str) -> Self {
        Self {
            id: ElementId::from(id),
            content: ContentRef::text(text),
            spans: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetDef {
    pub id: SetId,
    pub name: String,
    pub members: BTreeSet<ElementId>,
}

impl SetDef {
    pub fn new<'a>(id: &str, members: impl IntoIterator<Item = &'a str>) -> Self {
        Self {
            id: SetId::from(id),
            name: String::from(id),
            members: members.into_iter().map(ElementId::from).collect(),
        }
    }

    pub fn is_singleton(&self) -> bool {
        self.members.len() == 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntegrityError {
    #[error("a set system needs at least one element")]
    NoElements,
    #[error("duplicate element id `{0}`")]
    DuplicateElement(ElementId),
    #[error("duplicate set id `{0}`")]
    DuplicateSet(SetId),
    #[error("element `{0}` has an empty content payload")]
    EmptyPayload(ElementId),
    #[error("set `{0}` has no members")]
    EmptySet(SetId),
    #[error("set `{set}` references unknown element `{element}`")]
    UnknownMember { set: SetId, element: ElementId },
    #[error("span in element `{element}` references unknown set `{set}`")]
    UnknownSpanSet { element: ElementId, set: SetId },
    #[error("span {start}..{end} in element `{element}` is outside its text of length {len}")]
    BadSpan {
        element: ElementId,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("element `{0}` has spans but its content is not text")]
    SpanOnNonText(ElementId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown name `{0}`")]
pub struct UnknownName(pub String);

/// Elements plus named subsets of them. Always referentially consistent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetSystem {
    elements: Vec<Element>,
    sets: Vec<SetDef>,
    index: BTreeMap<ElementId, usize>,
}

impl SetSystem {
    pub fn new(elements: Vec<Element>, sets: Vec<SetDef>) -> Result<Self, IntegrityError> {
        if elements.is_empty() {
            return Err(IntegrityError::NoElements);
        }
        let mut index = BTreeMap::new();
        for (i, e) in elements.iter().enumerate() {
            if index.insert(e.id.clone(), i).is_some() {
                return Err(IntegrityError::DuplicateElement(e.id.clone()));
            }
            if e.content.payload.is_empty() {
                return Err(IntegrityError::EmptyPayload(e.id.clone()));
            }
        }
        let mut set_ids = BTreeSet::new();
        for s in &sets {
            if !set_ids.insert(s.id.clone()) {
                return Err(IntegrityError::DuplicateSet(s.id.clone()));
            }
            if s.members.is_empty() {
                return Err(IntegrityError::EmptySet(s.id.clone()));
            }
            if let Some(missing) = s.members.iter().find(|m| !index.contains_key(*m)) {
                return Err(IntegrityError::UnknownMember {
                    set: s.id.clone(),
                    element: missing.clone(),
                });
            }
        }
        for e in &elements {
            if e.spans.is_empty() {
                continue;
            }
            if e.content.kind != ContentKind::Text {
                return Err(IntegrityError::SpanOnNonText(e.id.clone()));
            }
            let len = e.content.payload.chars().count();
            for span in &e.spans {
                if !set_ids.contains(&span.set) {
                    return Err(IntegrityError::UnknownSpanSet {
                        element: e.id.clone(),
                        set: span.set.clone(),
                    });
                }
                if span.start >= span.end || span.end > len {
                    return Err(IntegrityError::BadSpan {
                        element: e.id.clone(),
                        start: span.start,
                        end: span.end,
                        len,
                    });
                }
            }
        }
        Ok(Self {
            elements,
            sets,
            index,
        })
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn sets(&self) -> &[SetDef] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element(&self, id: &ElementId) -> Option<&Element> {
        self.index.get(id).map(|&i| &self.elements[i])
    }

    pub fn element_index(&self, id: &ElementId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn set(&self, id: &SetId) -> Option<&SetDef> {
        self.sets.iter().find(|s| &s.id == id)
    }

    /// Ids of the sets containing `element`, in set order.
    pub fn sets_of(&self, element: &ElementId) -> Vec<&SetId> {
        self.sets
            .iter()
            .filter(|s| s.members.contains(element))
            .map(|s| &s.id)
            .collect()
    }

    /// The subsystem induced by `elements`: sets are intersected with the
    /// kept elements and dropped when that leaves them empty.
    pub fn restrict(&self, elements: &BTreeSet<ElementId>) -> Result<SetSystem, IntegrityError> {
        let kept: Vec<Element> = self
            .elements
            .iter()
            .filter(|e| elements.contains(&e.id))
            .cloned()
            .collect();
        let sets: Vec<SetDef> = self
            .sets
            .iter()
            .filter_map(|s| {
                let members: BTreeSet<ElementId> =
                    s.members.intersection(elements).cloned().collect();
                (!members.is_empty()).then(|| SetDef {
                    id: s.id.clone(),
                    name: s.name.clone(),
                    members,
                })
            })
            .collect();
        let set_ids: BTreeSet<&SetId> = sets.iter().map(|s| &s.id).collect();
        let kept = kept
            .into_iter()
            .map(|mut e| {
                e.spans.retain(|sp| set_ids.contains(&sp.set));
                e
            })
            .collect();
        SetSystem::new(kept, sets)
    }
}

/// Enclosing-shape classes, from least to most restrictive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum ShapeClass {
    #[default]
    Orthoconvex,
    Nabla,
    Gamma,
    Rectangle,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 4] = [
        ShapeClass::Orthoconvex,
        ShapeClass::Nabla,
        ShapeClass::Gamma,
        ShapeClass::Rectangle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ShapeClass::Orthoconvex => "orthoconvex",
            ShapeClass::Nabla => "nabla",
            ShapeClass::Gamma => "gamma",
            ShapeClass::Rectangle => "rectangle",
        }
    }
}

impl FromStr for ShapeClass {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "orthoconvex" => Ok(ShapeClass::Orthoconvex),
            "nabla" | "∇" => Ok(ShapeClass::Nabla),
            "gamma" | "γ" => Ok(ShapeClass::Gamma),
            "rectangle" | "rect" => Ok(ShapeClass::Rectangle),
            _ => Err(UnknownName(String::from(s))),
        }
    }
}

impl fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Inclusive bounding box `(min_row, max_row, min_col, max_col)`.
pub fn bounding_box(cells: &CellSet) -> Option<(i32, i32, i32, i32)> {
    let first = cells.iter().next()?;
    let mut bb = (first.row, first.row, first.col, first.col);
    for c in cells {
        bb.0 = bb.0.min(c.row);
        bb.1 = bb.1.max(c.row);
        bb.2 = bb.2.min(c.col);
        bb.3 = bb.3.max(c.col);
    }
    Some(bb)
}

pub fn is_four_connected(cells: &CellSet) -> bool {
    let Some(&start) = cells.iter().next() else {
        return true;
    };
    let mut seen = BTreeSet::new();
    let mut stack = alloc::vec![start];
    seen.insert(start);
    while let Some(c) = stack.pop() {
        for n in c.neighbors() {
            if cells.contains(&n) && seen.insert(n) {
                stack.push(n);
            }
        }
    }
    seen.len() == cells.len()
}

fn row_slices(cells: &CellSet) -> BTreeMap<i32, Vec<i32>> {
    let mut rows: BTreeMap<i32, Vec<i32>> = BTreeMap::new();
    for c in cells {
        rows.entry(c.row).or_default().push(c.col);
    }
    rows
}

fn col_slices(cells: &CellSet) -> BTreeMap<i32, Vec<i32>> {
    let mut cols: BTreeMap<i32, Vec<i32>> = BTreeMap::new();
    for c in cells {
        cols.entry(c.col).or_default().push(c.row);
    }
    cols
}

// Slices come out of a BTreeSet in sorted order.
fn contiguous(sorted: &[i32]) -> bool {
    sorted.windows(2).all(|w| w[1] == w[0] + 1)
}

/// Every row slice and every column slice is one contiguous run.
pub fn is_row_column_convex(cells: &CellSet) -> bool {
    row_slices(cells).values().all(|v| contiguous(v))
        && col_slices(cells).values().all(|v| contiguous(v))
}

/// Tests whether `cells` forms a shape of class `cls`.
pub fn shape_class_predicate(cells: &CellSet, cls: ShapeClass) -> bool {
    let Some((min_row, max_row, min_col, max_col)) = bounding_box(cells) else {
        return false;
    };
    if !is_row_column_convex(cells) || !is_four_connected(cells) {
        return false;
    }
    if cls == ShapeClass::Orthoconvex {
        return true;
    }
    let cols = col_slices(cells);
    let top_aligned = cols
        .values()
        .all(|rows| rows.iter().copied().min() == Some(min_row));
    if !top_aligned {
        return false;
    }
    if cls == ShapeClass::Nabla {
        return true;
    }
    let rows = row_slices(cells);
    let left_aligned = rows.values().all(|cs| cs.first() == Some(&min_col));
    if !left_aligned {
        return false;
    }
    if cls == ShapeClass::Gamma {
        return true;
    }
    let bottom_aligned = cols
        .values()
        .all(|rows| rows.iter().copied().max() == Some(max_row));
    let right_aligned = rows.values().all(|cs| cs.last() == Some(&max_col));
    bottom_aligned && right_aligned
}

/// Assignment of elements to cells plus one region per set.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct GridLayout {
    pub width: i32,
    pub height: i32,
    pub placement: BTreeMap<ElementId, Cell>,
    pub set_regions: BTreeMap<SetId, CellSet>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutViolation {
    #[error("element `{0}` is not placed")]
    Unplaced(ElementId),
    #[error("elements `{0}` and `{1}` share a cell")]
    SharedCell(ElementId, ElementId),
    #[error("element `{element}` lies outside the {width}x{height} grid")]
    OutOfGrid {
        element: ElementId,
        width: i32,
        height: i32,
    },
    #[error("set `{0}` has no region")]
    MissingRegion(SetId),
    #[error("membership of `{element}` in `{set}` disagrees with the region")]
    Membership { set: SetId, element: ElementId },
    #[error("region of `{set}` is not a {class} shape")]
    ShapeClass { set: SetId, class: ShapeClass },
    #[error("disjoint sets `{0}` and `{1}` share a cell")]
    DisjointOverlap(SetId, SetId),
}

impl GridLayout {
    pub fn occupied_cells(&self) -> CellSet {
        self.placement.values().copied().collect()
    }

    /// Checks every layout invariant against `sys` for shape class `cls`.
    pub fn validate(&self, sys: &SetSystem, cls: ShapeClass) -> Result<(), LayoutViolation> {
        let mut by_cell: BTreeMap<Cell, &ElementId> = BTreeMap::new();
        for e in sys.elements() {
            let cell = *self
                .placement
                .get(&e.id)
                .ok_or_else(|| LayoutViolation::Unplaced(e.id.clone()))?;
            if cell.row < 0 || cell.col < 0 || cell.row >= self.height || cell.col >= self.width {
                return Err(LayoutViolation::OutOfGrid {
                    element: e.id.clone(),
                    width: self.width,
                    height: self.height,
                });
            }
            if let Some(other) = by_cell.insert(cell, &e.id) {
                return Err(LayoutViolation::SharedCell(other.clone(), e.id.clone()));
            }
        }
        for s in sys.sets() {
            let region = self
                .set_regions
                .get(&s.id)
                .ok_or_else(|| LayoutViolation::MissingRegion(s.id.clone()))?;
            for e in sys.elements() {
                let inside = region.contains(&self.placement[&e.id]);
                if inside != s.members.contains(&e.id) {
                    return Err(LayoutViolation::Membership {
                        set: s.id.clone(),
                        element: e.id.clone(),
                    });
                }
            }
            if !shape_class_predicate(region, cls) {
                return Err(LayoutViolation::ShapeClass {
                    set: s.id.clone(),
                    class: cls,
                });
            }
        }
        for (i, s) in sys.sets().iter().enumerate() {
            for t in &sys.sets()[i + 1..] {
                if s.members.is_disjoint(&t.members)
                    && !self.set_regions[&s.id].is_disjoint(&self.set_regions[&t.id])
                {
                    return Err(LayoutViolation::DisjointOverlap(s.id.clone(), t.id.clone()));
                }
            }
        }
        Ok(())
    }
}

/// Smallest `k` with `k * k >= n`.
pub fn ceil_sqrt(n: usize) -> usize {
    if n == 0 {
        0
    } else {
        (n - 1).isqrt() + 1
    }
}

/// Default square grid side for `n` elements: `ceil(sqrt(n)) + 1`.
pub fn default_grid_side(n: usize) -> usize {
    ceil_sqrt(n) + 1
}
