//! Parallel orchestration of the pipeline and the run report.

use std::collections::BTreeMap;
use std::time::Instant;

use blocksets_core::arranger::ArrangeMethod;
use blocksets_core::layout::LayoutError;
use blocksets_core::milp::{MilpSolver, SolveStatus};
use blocksets_core::pipeline::{
    compose_observed, split_step, Decomposition, PartLayout, PipelineConfig, PipelineError, PipelineOutput, SplitEvent,
    SplitOptions, Stage, Step, StepKind,
};
use blocksets_core::SetSystem;
use rayon::prelude::*;
use serde::Serialize;

/// Decomposition with independent parts solved on the rayon pool. The
/// result is identical to the sequential one: children are concatenated in
/// part order.
pub fn split_parallel<S: MilpSolver + ?Sized>(
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
            events: vec![event],
        };
        match step {
            Step::Leaf(solution) => d.parts.push(PartLayout {
                system: sys.clone(),
                solution,
                depth,
            }),
            Step::PerElement(parts) => d.parts = parts,
            Step::Split(plan) => {
                let children: Vec<Result<Decomposition, LayoutError>> =
                    plan.parts.par_iter().map(|p| go(p, opts, depth + 1, solver)).collect();
                for c in children {
                    d.append(c?);
                }
            }
        }
        Ok(d)
    }
    go(sys, opts, 0, solver)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct StageReport {
    pub stage: String,
    /// Only filled in when timings are requested, so that reports stay
    /// reproducible by default.
    pub wall_ms: Option<f64>,
    pub status: Option<String>,
    pub objective: Option<f64>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SplitNodeReport {
    pub depth: usize,
    pub elements: usize,
    pub status: Option<String>,
    pub gap: Option<usize>,
    pub outcome: String,
    pub parts: Option<usize>,
    pub fallback: bool,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct PartReport {
    pub part: usize,
    pub depth: usize,
    pub elements: Vec<String>,
    pub sets: Vec<String>,
    pub status: String,
    pub objective: f64,
    pub area: usize,
    pub dims: usize,
    pub vertices: usize,
    pub transform: String,
    pub offset: [i32; 2],
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct StepReport {
    pub shape: String,
    pub visible_edges: usize,
    pub total_edges: usize,
    pub area: usize,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct StackingReport {
    /// Bottom first, as `set#part`.
    pub order: Vec<String>,
    pub covered: Vec<String>,
    pub trace: Vec<StepReport>,
    /// Cells of every shape as `[row, col]`, in the assembled grid.
    pub shapes: BTreeMap<String, Vec<[i32; 2]>>,
    /// Cell of every element in the assembled grid.
    pub placement: BTreeMap<String, [i32; 2]>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RunReport {
    pub solver: String,
    pub shape_class: String,
    pub time_limit_s: f64,
    pub elements: usize,
    pub sets: usize,
    pub stages: Vec<StageReport>,
    pub split_tree: Vec<SplitNodeReport>,
    pub parts: Vec<PartReport>,
    pub duplicated_sets: Vec<String>,
    pub grid: [i32; 2],
    pub arrangement: String,
    pub stacking: StackingReport,
    pub colors: BTreeMap<String, String>,
    pub color_energy: f64,
    pub column_gutters: Vec<f64>,
    pub row_gutters: Vec<f64>,
    pub svg_size: [f64; 2],
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn has_covered_sets(&self) -> bool {
        !self.stacking.covered.is_empty()
    }
}

pub fn stacking_report(out: &PipelineOutput) -> StackingReport {
    StackingReport {
        order: out.stacking.order.iter().map(|k| k.to_string()).collect(),
        covered: out.stacking.covered.iter().map(|k| k.to_string()).collect(),
        trace: out
            .stacking
            .trace
            .iter()
            .map(|s| StepReport {
                shape: s.key.to_string(),
                visible_edges: s.visible_edges,
                total_edges: s.total_edges,
                area: s.area,
            })
            .collect(),
        shapes: out
            .assembled
            .shapes
            .iter()
            .map(|p| (p.key.to_string(), p.cells.iter().map(|c| [c.row, c.col]).collect()))
            .collect(),
        placement: out
            .assembled
            .placement
            .iter()
            .map(|(e, c)| (e.to_string(), [c.row, c.col]))
            .collect(),
    }
}

fn node(e: &SplitEvent) -> SplitNodeReport {
    let (outcome, parts, fallback) = match e.kind {
        StepKind::Accepted => ("accepted", None, false),
        StepKind::Split { parts, fallback } => ("split", Some(parts), fallback),
        StepKind::PerElement => ("per-element", None, false),
    };
    SplitNodeReport {
        depth: e.depth,
        elements: e.elements,
        status: e.status.map(|s| s.as_str().to_owned()),
        gap: e.gap,
        outcome: outcome.into(),
        parts,
        fallback,
    }
}

fn method_str(m: ArrangeMethod) -> String {
    match m {
        ArrangeMethod::Single => "single".into(),
        ArrangeMethod::Milp(s) => format!("milp ({})", s.as_str()),
        ArrangeMethod::Shelf => "shelf".into(),
        ArrangeMethod::Manual => "manual".into(),
    }
}

/// Options of one run beyond the pipeline configuration.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Worker threads for part layouts; 0 uses all cores.
    pub jobs: usize,
    pub timings: bool,
}

pub struct Run {
    pub output: PipelineOutput,
    pub report: RunReport,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("layout stage: {0}")]
    Layout(#[from] LayoutError),
    #[error("{stage} stage: {source}")]
    Pipeline { stage: &'static str, source: PipelineError },
    #[error("cannot start worker threads: {0}")]
    Threads(String),
}

fn stage_of(e: &PipelineError) -> &'static str {
    match e {
        PipelineError::Layout(_) => "layout",
        PipelineError::Arrange(_) => "arrange",
        PipelineError::Geometry { .. } => "assemble",
        PipelineError::Render(_) => "render",
        PipelineError::EmptyPalette => "color",
    }
}

/// Runs the full pipeline and builds its report.
pub fn run<S: MilpSolver + ?Sized>(
    sys: &SetSystem,
    cfg: &PipelineConfig,
    solver: &S,
    opts: RunOptions,
) -> Result<Run, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| RunError::Threads(e.to_string()))?;
    let ms = |t: Instant| opts.timings.then(|| t.elapsed().as_secs_f64() * 1000.0);

    let t0 = Instant::now();
    let decomposition = pool.install(|| split_parallel(sys, &cfg.split, solver))?;
    let mut stages = vec![StageReport {
        stage: "layout".into(),
        wall_ms: ms(t0),
        status: Some(worst_status(&decomposition).as_str().into()),
        objective: Some(decomposition.parts.iter().map(|p| p.solution.objective).sum()),
    }];

    let mut marks: Vec<(Stage, Option<f64>)> = Vec::new();
    let mut last = Instant::now();
    let output = compose_observed(sys, decomposition, cfg, solver, &mut |s| {
        marks.push((s, ms(last)));
        last = Instant::now();
    })
    .map_err(|e| RunError::Pipeline {
        stage: stage_of(&e),
        source: e,
    })?;
    for (s, wall_ms) in marks {
        let (status, objective) = match s {
            Stage::Arrange => (Some(method_str(output.arrangement.method)), Some(output.arrangement.objective())),
            Stage::Stack => (
                Some(if output.stacking.covered.is_empty() { "all visible" } else { "covered sets" }.into()),
                None,
            ),
            Stage::Color => (None, Some(output.colors.energy)),
            _ => (None, None),
        };
        stages.push(StageReport {
            stage: s.as_str().into(),
            wall_ms,
            status,
            objective,
        });
    }
    let report = build_report(sys, cfg, solver.name(), &output, stages);
    Ok(Run { output, report })
}

fn worst_status(d: &Decomposition) -> SolveStatus {
    let failed = d.events.iter().any(|e| e.status.is_none());
    let timed_out = d.parts.iter().any(|p| p.solution.status == SolveStatus::FeasibleTimeout);
    if failed {
        SolveStatus::NoSolutionTimeout
    } else if timed_out {
        SolveStatus::FeasibleTimeout
    } else {
        SolveStatus::Optimal
    }
}

fn build_report(
    sys: &SetSystem,
    cfg: &PipelineConfig,
    solver: &str,
    out: &PipelineOutput,
    stages: Vec<StageReport>,
) -> RunReport {
    let mut warnings = Vec::new();
    for e in &out.decomposition.events {
        match (e.status, e.kind) {
            (None, _) => warnings.push(format!(
                "no layout for {} elements at depth {} within the time limit",
                e.elements, e.depth
            )),
            (Some(SolveStatus::FeasibleTimeout), StepKind::Accepted) => warnings.push(format!(
                "layout of {} elements at depth {} is not proven optimal",
                e.elements, e.depth
            )),
            _ => {}
        }
        if e.kind == StepKind::PerElement {
            warnings.push(format!("{} elements at depth {} were laid out one per part", e.elements, e.depth));
        }
    }
    match out.arrangement.method {
        ArrangeMethod::Shelf => warnings.push("parts were packed in rows: the arrangement found no solution in time".into()),
        ArrangeMethod::Milp(SolveStatus::FeasibleTimeout) => {
            warnings.push("arrangement is not proven optimal".into())
        }
        _ => {}
    }
    for k in &out.stacking.covered {
        warnings.push(format!("shape {k} is covered in every drawn position"));
    }
    warnings.extend(out.render.warnings.iter().cloned());

    let parts = out
        .decomposition
        .parts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let pl = out.arrangement.placement(i);
            PartReport {
                part: i,
                depth: p.depth,
                elements: p.system.elements().iter().map(|e| e.id.to_string()).collect(),
                sets: p.system.sets().iter().map(|s| s.id.to_string()).collect(),
                status: p.solution.status.as_str().into(),
                objective: p.solution.objective,
                area: p.solution.terms.area,
                dims: p.solution.terms.dims,
                vertices: p.solution.terms.vertices,
                transform: pl.map(|p| p.transform.as_str().to_owned()).unwrap_or_default(),
                offset: pl.map(|p| [p.offset.row, p.offset.col]).unwrap_or_default(),
            }
        })
        .collect();
    RunReport {
        solver: solver.into(),
        shape_class: cfg.split.shape_class.as_str().into(),
        time_limit_s: cfg.split.time_limit.as_secs_f64(),
        elements: sys.len(),
        sets: sys.sets().len(),
        stages,
        split_tree: out.decomposition.events.iter().map(node).collect(),
        parts,
        duplicated_sets: out.duplicated_sets.iter().map(|s| s.to_string()).collect(),
        grid: [out.assembled.width, out.assembled.height],
        arrangement: method_str(out.arrangement.method),
        stacking: stacking_report(out),
        colors: out
            .colors
            .index
            .keys()
            .filter_map(|s| out.colors.color(s).map(|c| (s.to_string(), c.to_string())))
            .collect(),
        color_energy: out.colors.energy,
        column_gutters: out.plan.gutters.cols.clone(),
        row_gutters: out.plan.gutters.rows.clone(),
        svg_size: [out.plan.frame.width, out.plan.frame.height],
        warnings,
    }
}
