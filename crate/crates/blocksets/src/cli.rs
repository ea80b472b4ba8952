//! Command line interface.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use blocksets_core::color::{tableau10_dark, TABLEAU20};
use blocksets_core::pipeline::PipelineConfig;
use blocksets_core::render::HighlightMode;
use blocksets_core::ShapeClass;
use clap::{Args, Parser, Subcommand};

use crate::io::{read_manual_arrangement, read_palette, read_set_system};
use crate::run::{run, stacking_report, RunOptions};
use crate::solver::Backend;

#[derive(Debug, Parser)]
#[command(name = "blocksets", version, about = "Grid-based set visualizations with opaque orthoconvex shapes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lay out, stack, color and render INPUT as SVG.
    Render {
        input: PathBuf,
        /// Output SVG, defaults to INPUT with an .svg extension.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the JSON run report here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Validate INPUT without solving anything.
    Check { input: PathBuf },
    /// Run the pipeline and print the JSON run report.
    Report {
        input: PathBuf,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the SVG here.
        #[arg(long)]
        svg: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Shape class of set regions.
    #[arg(long, default_value = "orthoconvex")]
    pub shape: ShapeClass,
    /// Time limit of every MILP solve, in seconds.
    #[arg(long, default_value_t = 300.0)]
    pub time_limit: f64,
    /// Multiplier of the compactness gap threshold (3 for rectangles, else 1).
    #[arg(long)]
    pub split_threshold_factor: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub max_separator_size: usize,
    /// Allowed component sizes as fractions of the set count, `LO..HI`.
    #[arg(long, default_value = "1/3..2/3", value_parser = parse_window)]
    pub balance_window: (f64, f64),
    /// Part placements, one `part transform row col` line per part.
    #[arg(long)]
    pub manual_arrangement: Option<PathBuf>,
    /// Write the stacking trace and covered shapes as JSON.
    #[arg(long)]
    pub stacking_report: Option<PathBuf>,
    /// Hex colors replacing the default palette.
    #[arg(long)]
    pub palette: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub color_seed: u64,
    #[arg(long, default_value = "colored-text")]
    pub style: HighlightMode,
    /// Cell box in pixels, `WxH`.
    #[arg(long, default_value = "260x90", value_parser = parse_size)]
    pub cell_size: (f64, f64),
    #[arg(long, default_value_t = 10.0)]
    pub gutter: f64,
    #[arg(long, default_value_t = 6.0)]
    pub edge_offset: f64,
    #[arg(long, default_value_t = 5.0)]
    pub corner_radius: f64,
    /// Parallel part layouts, 0 for one per core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Record wall times in the report (makes reports differ between runs).
    #[arg(long)]
    pub timings: bool,
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad number `{a}`"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad number `{b}`"))?;
            a / b
        }
        None => s.parse().map_err(|_| format!("bad number `{s}`"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

pub fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once("..")
        .or_else(|| s.split_once(','))
        .ok_or_else(|| format!("expected LO..HI, got `{s}`"))?;
    let (lo, hi) = (parse_fraction(lo)?, parse_fraction(hi)?);
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(format!("window {lo}..{hi} must satisfy 0 <= LO <= HI <= 1"));
    }
    Ok((lo, hi))
}

pub fn parse_size(s: &str) -> Result<(f64, f64), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got `{s}`"))?;
    let w: f64 = w.trim().parse().map_err(|_| format!("bad width `{w}`"))?;
    let h: f64 = h.trim().parse().map_err(|_| format!("bad height `{h}`"))?;
    if w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite() {
        Ok((w, h))
    } else {
        Err(format!("cell size {s} must be positive"))
    }
}

impl RunArgs {
    pub fn config(&self) -> Result<PipelineConfig, String> {
        if !(self.time_limit >= 0.0 && self.time_limit.is_finite()) {
            return Err(format!("time limit {} must be a non-negative number of seconds", self.time_limit));
        }
        let mut cfg = PipelineConfig::new(self.shape, Duration::from_secs_f64(self.time_limit));
        if let Some(f) = self.split_threshold_factor {
            if !(f >= 0.0 && f.is_finite()) {
                return Err(format!("split threshold factor {f} must be non-negative"));
            }
            cfg.split.threshold_factor = f;
        }
        cfg.split.separator.max_size = self.max_separator_size;
        cfg.split.separator.balance = self.balance_window;
        cfg.manual_arrangement = self
            .manual_arrangement
            .as_deref()
            .map(read_manual_arrangement)
            .transpose()
            .map_err(|e| e.to_string())?;
        cfg.palette = match &self.palette {
            Some(p) => read_palette(p).map_err(|e| e.to_string())?,
            // dark colors keep colored text legible
            None => match self.style {
                HighlightMode::ColoredText => tableau10_dark(),
                HighlightMode::ColoredBackground => TABLEAU20.to_vec(),
            },
        };
        cfg.color_seed = self.color_seed;
        cfg.style.highlight = self.style;
        (cfg.style.cell_width, cfg.style.cell_height) = self.cell_size;
        cfg.style.gutter = self.gutter;
        cfg.style.edge_offset = self.edge_offset;
        cfg.style.corner_radius = self.corner_radius;
        cfg.style.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    fn options(&self) -> RunOptions {
        RunOptions {
            jobs: self.jobs,
            timings: self.timings,
        }
    }
}

/// Exit status when the figure was produced but some shapes are covered.
pub const EXIT_COVERED: u8 = 2;

fn write(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn execute(
    input: &Path,
    args: &RunArgs,
    svg_out: Option<&Path>,
    report_out: Option<&Path>,
    report_stdout: bool,
) -> Result<ExitCode, String> {
    let sys = read_set_system(input).map_err(|e| format!("{}: {e}", input.display()))?;
    let cfg = args.config()?;
    let solver = Backend::from_env()?;
    let done = run(&sys, &cfg, &solver, args.options()).map_err(|e| e.to_string())?;
    if let Some(p) = svg_out {
        write(p, &done.output.render.svg)?;
    }
    if let Some(p) = &args.stacking_report {
        let json = serde_json::to_string_pretty(&stacking_report(&done.output)).expect("serializable");
        write(p, &json)?;
    }
    let json = done.report.to_json();
    if let Some(p) = report_out {
        write(p, &json)?;
    }
    if report_stdout {
        println!("{json}");
    }
    for w in &done.report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(if done.report.has_covered_sets() {
        ExitCode::from(EXIT_COVERED)
    } else {
        ExitCode::SUCCESS
    })
}

pub fn main_with(cli: Cli) -> ExitCode {
    let result = match &cli.command {
        Command::Render {
            input,
            out,
            report,
            run,
        } => {
            let svg = out.clone().unwrap_or_else(|| input.with_extension("svg"));
            execute(input, run, Some(&svg), report.as_deref(), false)
        }
        Command::Report { input, out, svg, run } => execute(input, run, svg.as_deref(), out.as_deref(), out.is_none()),
        Command::Check { input } => read_set_system(input)
            .map(|sys| {
                println!("{}: {} elements, {} sets", input.display(), sys.len(), sys.sets().len());
                ExitCode::SUCCESS
            })
            .map_err(|e| format!("{}: {e}", input.display())),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}

pub fn main() -> ExitCode {
    main_with(Cli::parse())
}
