//! End-to-end composition: layout with recursive splitting, arrangement of
//! the parts, stacking, coloring and rendering.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::time::Duration;

use thiserror::Error;

use crate::arranger::{
    arrange, arrangement_from, footprint_variants, layout_footprint, ArrangeError, ArrangeMethod,
    ArrangementResult, ComponentFootprint, PartPlacement,
};
use crate::color::{assign_colors, closeness_from_regions, tableau10_dark, AnnealingSchedule, ColorAssignment, Rgb};
use crate::geometry::{GeometryError, RectiPolygon, ShapeKey};
use crate::layout::{compactness_gap, solve_layout, LayoutConfig, LayoutError, LayoutSolution, Weights};
use crate::milp::{MilpSolver, SolveStatus};
use crate::model::{Cell, CellSet, ElementId, SetId, SetSystem, ShapeClass};
use crate::render::{plan, render_svg, RenderError, RenderOutput, RenderPlan, RenderStyle, Scene};
use crate::splitter::{default_threshold_factor, plan_split, should_split, SeparatorOptions, SplitPlan};
use crate::stacker::{stack, StackingResult};

/// Deepest split level; below it every element becomes its own part.
pub const MAX_SPLIT_DEPTH: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct SplitOptions {
    pub shape_class: ShapeClass,
    pub time_limit: Duration,
    pub weights: Weights,
    pub threshold_factor: f64,
    pub separator: SeparatorOptions,
    pub max_depth: usize,
}

impl SplitOptions {
    pub fn new(shape_class: ShapeClass, time_limit: Duration) -> Self {
        Self {
            shape_class,
            time_limit,
            weights: Weights::default(),
            threshold_factor: default_threshold_factor(shape_class),
            separator: SeparatorOptions::default(),
            max_depth: MAX_SPLIT_DEPTH,
        }
    }

    /// Layout configuration for a system of `n` elements at any level.
    pub fn layout_config(&self, n: usize) -> LayoutConfig {
        let mut cfg = LayoutConfig::for_elements(n, self.shape_class, self.time_limit);
        cfg.weights = self.weights;
        cfg
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartLayout {
    pub system: SetSystem,
    pub solution: LayoutSolution,
    pub depth: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    /// Layout accepted as a part.
    Accepted,
    Split { parts: usize, fallback: bool },
    /// Depth cap reached without an acceptable layout.
    PerElement,
}

/// What happened to one system during decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitEvent {
    pub depth: usize,
    pub elements: usize,
    /// Solver outcome, `None` when the layout failed.
    pub status: Option<SolveStatus>,
    pub gap: Option<usize>,
    pub kind: StepKind,
}

pub enum Step {
    Leaf(LayoutSolution),
    Split(SplitPlan),
    PerElement(Vec<PartLayout>),
}

/// One element per part with the trivial single cell layout.
pub fn per_element_parts(sys: &SetSystem, opts: &SplitOptions, depth: usize) -> Vec<PartLayout> {
    sys.elements()
        .iter()
        .map(|e| {
            let system = sys.restrict(&[e.id.clone()].into_iter().collect()).expect("restriction of a valid system");
            // a single element never reaches the solver
            let solution = solve_layout(&system, &opts.layout_config(1), &Unreachable).expect("trivial layout");
            PartLayout { system, solution, depth }
        })
        .collect()
}

struct Unreachable;

impl MilpSolver for Unreachable {
    fn name(&self) -> &str {
        "unreachable"
    }

    fn solve(
        &self,
        _: &crate::milp::MilpModel,
        _: Duration,
    ) -> Result<crate::milp::SolveResult, crate::milp::MilpError> {
        unreachable!("single element layouts are solved in closed form")
    }
}

/// Solves `sys` once and decides whether to keep, split or dissolve it.
pub fn split_step<S: MilpSolver + ?Sized>(
    sys: &SetSystem,
    opts: &SplitOptions,
    depth: usize,
    solver: &S,
) -> Result<(Step, SplitEvent), LayoutError> {
    let n = sys.len();
    let result = solve_layout(sys, &opts.layout_config(n), solver);
    if let Err(e) = &result {
        if !e.is_failure() {
            return Err(e.clone());
        }
    }
    let mut event = SplitEvent {
        depth,
        elements: n,
        status: result.as_ref().ok().map(|s| s.status),
        gap: result.as_ref().ok().map(|s| compactness_gap(&s.layout)),
        kind: StepKind::Accepted,
    };
    if n <= 1 || !should_split(&result, n, opts.threshold_factor) {
        return Ok((Step::Leaf(result?), event));
    }
    let split = if depth < opts.max_depth {
        let p = plan_split(sys, &opts.separator);
        // only splits that shrink every part make progress
        (p.parts.len() >= 2 && p.parts.iter().all(|q| q.len() < n)).then_some(p)
    } else {
        None
    };
    match (split, result) {
        (Some(p), _) => {
            event.kind = StepKind::Split {
                parts: p.parts.len(),
                fallback: p.fallback,
            };
            Ok((Step::Split(p), event))
        }
        (None, Ok(sol)) => Ok((Step::Leaf(sol), event)),
        (None, Err(_)) => {
            event.kind = StepKind::PerElement;
            Ok((Step::PerElement(per_element_parts(sys, opts, depth)), event))
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Decomposition {
    pub parts: Vec<PartLayout>,
    /// Depth-first order.
    pub events: Vec<SplitEvent>,
}

impl Decomposition {
    pub fn append(&mut self, other: Decomposition) {
        self.parts.extend(other.parts);
        self.events.extend(other.events);
    }

    /// Sets that ended up in more than one part.
    pub fn duplicated_sets(&self) -> BTreeSet<SetId> {
        let mut count: BTreeMap<&SetId, usize> = BTreeMap::new();
        for p in &self.parts {
            for s in p.system.sets() {
                *count.entry(&s.id).or_default() += 1;
            }
        }
        count.into_iter().filter(|(_, c)| *c > 1).map(|(s, _)| s.clone()).collect()
    }
}

/// Depth-first decomposition on the calling thread.
pub fn split_recursively<S: MilpSolver + ?Sized>(
    sys: &SetSystem,
    opts: &SplitOptions,
    solver: &S,
) -> Result<Decomposition, LayoutError> {
    fn go<S: MilpSolver + ?Sized>(
        sys: &SetSystem,
        opts: &SplitOptions,
        depth: usize,
        solver: &S,
    ) -> Result<Decomposition, LayoutError> {
        let (step, event) = split_step(sys, opts, depth, solver)?;
        let mut d = Decomposition {
            parts: Vec::new(),
            events: alloc::vec![event],
        };
        match step {
            Step::Leaf(solution) => d.parts.push(PartLayout {
                system: sys.clone(),
                solution,
                depth,
            }),
            Step::PerElement(parts) => d.parts = parts,
            Step::Split(plan) => {
                for p in &plan.parts {
                    d.append(go(p, opts, depth + 1, solver)?);
                }
            }
        }
        Ok(d)
    }
    go(sys, opts, 0, solver)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Arrange(#[from] ArrangeError),
    #[error("shape {key}: {source}")]
    Geometry { key: ShapeKey, source: GeometryError },
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("palette must not be empty")]
    EmptyPalette,
}

/// The final figure in global grid coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Assembled {
    pub width: i32,
    pub height: i32,
    pub placement: BTreeMap<ElementId, Cell>,
    /// One shape per (set, part), sorted by key. Singleton sets have none.
    pub shapes: Vec<RectiPolygon>,
}

pub fn footprints(d: &Decomposition, cls: ShapeClass) -> Vec<ComponentFootprint> {
    d.parts
        .iter()
        .enumerate()
        .map(|(i, p)| footprint_variants(i, &layout_footprint(&p.solution.layout), cls))
        .collect()
}

/// Moves every part layout to where the arrangement put it.
pub fn assemble(
    sys: &SetSystem,
    d: &Decomposition,
    parts: &[ComponentFootprint],
    arrangement: &ArrangementResult,
) -> Result<Assembled, PipelineError> {
    let mut placement = BTreeMap::new();
    let mut shapes = Vec::new();
    for (fp, part) in parts.iter().zip(&d.parts) {
        let pl = arrangement.placement(fp.part).ok_or(ArrangeError::BadPart(fp.part))?;
        let map = |c: &Cell| fp.map_cell(*c, pl.transform, pl.offset);
        let layout = &part.solution.layout;
        for (e, c) in &layout.placement {
            placement.insert(e.clone(), map(c));
        }
        for (set, region) in &layout.set_regions {
            if sys.set(set).is_none_or(|s| s.is_singleton()) {
                continue;
            }
            let key = ShapeKey::new(set.clone(), fp.part);
            let cells: CellSet = region.iter().map(map).collect();
            let poly = RectiPolygon::new(key.clone(), cells).map_err(|source| PipelineError::Geometry { key, source })?;
            shapes.push(poly);
        }
    }
    shapes.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(Assembled {
        width: arrangement.width,
        height: arrangement.height,
        placement,
        shapes,
    })
}

/// Colors sets by how close their shapes end up, stacking order included.
pub fn color_sets(
    assembled: &Assembled,
    stacking: &StackingResult,
    palette: &[Rgb],
    seed: u64,
    schedule: &AnnealingSchedule,
) -> ColorAssignment {
    let mut regions: BTreeMap<SetId, CellSet> = BTreeMap::new();
    for s in &assembled.shapes {
        regions.entry(s.key.set.clone()).or_default().extend(s.cells.iter().copied());
    }
    let mut order: Vec<SetId> = Vec::new();
    for k in &stacking.order {
        if !order.contains(&k.set) {
            order.push(k.set.clone());
        }
    }
    let closeness = closeness_from_regions(&regions, &order);
    assign_colors(&closeness, &order, palette, seed, schedule)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub split: SplitOptions,
    pub manual_arrangement: Option<Vec<PartPlacement>>,
    pub palette: Vec<Rgb>,
    pub color_seed: u64,
    pub schedule: AnnealingSchedule,
    pub style: RenderStyle,
}

impl PipelineConfig {
    pub fn new(shape_class: ShapeClass, time_limit: Duration) -> Self {
        Self {
            split: SplitOptions::new(shape_class, time_limit),
            manual_arrangement: None,
            palette: tableau10_dark(),
            color_seed: 0,
            schedule: AnnealingSchedule::default(),
            style: RenderStyle::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutput {
    pub decomposition: Decomposition,
    pub duplicated_sets: BTreeSet<SetId>,
    pub arrangement: ArrangementResult,
    pub assembled: Assembled,
    /// Stacking order indexes into `assembled.shapes` via keys.
    pub stacking: StackingResult,
    pub colors: ColorAssignment,
    pub plan: RenderPlan,
    pub render: RenderOutput,
}

impl PipelineOutput {
    pub fn covered(&self) -> &[ShapeKey] {
        &self.stacking.covered
    }
}

/// Stages of [`compose`], reported to an observer as each one finishes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Arrange,
    Assemble,
    Stack,
    Color,
    Render,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Arrange => "arrange",
            Stage::Assemble => "assemble",
            Stage::Stack => "stack",
            Stage::Color => "color",
            Stage::Render => "render",
        }
    }
}

/// Everything after decomposition.
pub fn compose<S: MilpSolver + ?Sized>(
    sys: &SetSystem,
    decomposition: Decomposition,
    cfg: &PipelineConfig,
    solver: &S,
) -> Result<PipelineOutput, PipelineError> {
    compose_observed(sys, decomposition, cfg, solver, &mut |_| {})
}

/// [`compose`] that calls `done` after every stage.
pub fn compose_observed<S: MilpSolver + ?Sized>(
    sys: &SetSystem,
    decomposition: Decomposition,
    cfg: &PipelineConfig,
    solver: &S,
    done: &mut dyn FnMut(Stage),
) -> Result<PipelineOutput, PipelineError> {
    if cfg.palette.is_empty() {
        return Err(PipelineError::EmptyPalette);
    }
    let cls = cfg.split.shape_class;
    let parts = footprints(&decomposition, cls);
    let arrangement = match &cfg.manual_arrangement {
        Some(p) => arrangement_from(&parts, p.clone(), ArrangeMethod::Manual)?,
        None => arrange(&parts, cfg.split.time_limit, solver)?,
    };
    done(Stage::Arrange);
    let assembled = assemble(sys, &decomposition, &parts, &arrangement)?;
    done(Stage::Assemble);
    let stacking = stack(&assembled.shapes);
    done(Stage::Stack);
    let colors = color_sets(&assembled, &stacking, &cfg.palette, cfg.color_seed, &cfg.schedule);
    done(Stage::Color);
    let ordered: Vec<RectiPolygon> = stacking
        .order
        .iter()
        .filter_map(|k| assembled.shapes.iter().find(|s| &s.key == k).cloned())
        .collect();
    let duplicated_sets = decomposition.duplicated_sets();
    let covered: BTreeSet<ShapeKey> = stacking.covered.iter().cloned().collect();
    let scene = Scene {
        system: sys,
        rows: assembled.height,
        cols: assembled.width,
        placement: &assembled.placement,
        shapes: &ordered,
        colors: &colors,
        duplicated: &duplicated_sets,
        covered: &covered,
    };
    let plan = plan(&scene, &cfg.style)?;
    let render = render_svg(&scene, &plan);
    done(Stage::Render);
    Ok(PipelineOutput {
        decomposition,
        duplicated_sets,
        arrangement,
        assembled,
        stacking,
        colors,
        plan,
        render,
    })
}

/// Sequential end-to-end run.
pub fn run<S: MilpSolver + ?Sized>(
    sys: &SetSystem,
    cfg: &PipelineConfig,
    solver: &S,
) -> Result<PipelineOutput, PipelineError> {
    let d = split_recursively(sys, &cfg.split, solver)?;
    compose(sys, d, cfg, solver)
}

/// Short human readable summary of a decomposition event.
pub fn describe(e: &SplitEvent) -> String {
    match e.kind {
        StepKind::Accepted => alloc::format!("depth {}: {} elements accepted", e.depth, e.elements),
        StepKind::Split { parts, fallback } => alloc::format!(
            "depth {}: {} elements split into {parts}{}",
            e.depth,
            e.elements,
            if fallback { " (fallback)" } else { "" }
        ),
        StepKind::PerElement => alloc::format!("depth {}: {} elements dissolved", e.depth, e.elements),
    }
}
