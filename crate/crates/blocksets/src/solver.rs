//! MILP backends behind the core solver contract.

use std::time::Duration;

use blocksets_core::milp::{Cmp, MilpError, MilpModel, MilpSolver, ModelError, SolveResult, SolveStatus, VarKind};

/// Environment variable naming the backend: `highs` (default) or `microlp`.
pub const SOLVER_ENV: &str = "BLOCKSETS_SOLVER";

/// Checks shared by all backends. Returns a result when the model is
/// decided without a solver run.
fn presolve(model: &MilpModel, time_limit: Duration) -> Result<Option<SolveResult>, MilpError> {
    model.validate()?;
    if model.variables.iter().any(|v| v.lower > v.upper) {
        return Ok(Some(SolveResult::without_solution(SolveStatus::Infeasible)));
    }
    // rows without terms compare the constant 0 against the right-hand side
    let empty = vec![0.0; model.num_vars()];
    if model
        .constraints
        .iter()
        .any(|c| c.terms.is_empty() && !c.satisfied_by(&empty, blocksets_core::milp::TOLERANCE))
    {
        return Ok(Some(SolveResult::without_solution(SolveStatus::Infeasible)));
    }
    if model.num_vars() == 0 {
        return SolveResult::from_values(model, SolveStatus::Optimal, Vec::new()).map(Some);
    }
    if time_limit.is_zero() {
        return Ok(Some(SolveResult::without_solution(SolveStatus::NoSolutionTimeout)));
    }
    Ok(None)
}

/// HiGHS through its C API.
#[derive(Clone, Copy, Debug, Default)]
pub struct HighsSolver {
    /// Threads per solve; `None` lets HiGHS decide.
    pub threads: Option<u32>,
    /// Print the HiGHS log to standard output.
    pub log: bool,
}

impl MilpSolver for HighsSolver {
    fn name(&self) -> &str {
        "highs"
    }

    fn solve(&self, model: &MilpModel, time_limit: Duration) -> Result<SolveResult, MilpError> {
        use highs::{HighsModelStatus as S, HighsSolutionStatus, RowProblem, Sense};

        if let Some(r) = presolve(model, time_limit)? {
            return Ok(r);
        }
        let objective = model.dense_objective();
        let mut pb = RowProblem::default();
        let cols: Vec<highs::Col> = model
            .variables
            .iter()
            .zip(&objective)
            .map(|(v, &c)| {
                let bounds = v.lower..=v.upper;
                match v.kind {
                    VarKind::Continuous => pb.add_column(c, bounds),
                    VarKind::Binary | VarKind::Integer => pb.add_integer_column(c, bounds),
                }
            })
            .collect();
        for con in &model.constraints {
            if con.terms.is_empty() {
                continue;
            }
            let row: Vec<(highs::Col, f64)> = con.terms.iter().map(|(v, a)| (cols[v.0], *a)).collect();
            match con.cmp {
                Cmp::Le => pb.add_row(..=con.rhs, &row),
                Cmp::Ge => pb.add_row(con.rhs.., &row),
                Cmp::Eq => pb.add_row(con.rhs..=con.rhs, &row),
            }
        }
        let mut m = pb
            .try_optimise(Sense::Minimise)
            .map_err(|s| MilpError::Backend(format!("HiGHS rejected the model: {s:?}")))?;
        if self.log {
            m.set_option("output_flag", true);
            m.set_option("log_to_console", true);
        } else {
            m.make_quiet();
        }
        m.set_option("time_limit", time_limit.as_secs_f64());
        m.set_option("mip_rel_gap", 0.0);
        m.set_option("mip_feasibility_tolerance", 1e-9);
        m.set_option("primal_feasibility_tolerance", 1e-9);
        if let Some(t) = self.threads {
            m.set_option("threads", t as i32);
        }
        if let Some(start) = &model.start {
            m.try_set_solution(Some(start), None, None, None)
                .map_err(|s| MilpError::Backend(format!("HiGHS rejected the start: {s:?}")))?;
        }
        let solved = m
            .try_solve()
            .map_err(|s| MilpError::Backend(format!("HiGHS failed: {s:?}")))?;
        let has_point = solved.primal_solution_status() == HighsSolutionStatus::Feasible;
        let values = || solved.get_solution().columns().to_vec();
        match solved.status() {
            S::Optimal => SolveResult::from_values(model, SolveStatus::Optimal, values()),
            S::Infeasible => Ok(SolveResult::without_solution(SolveStatus::Infeasible)),
            S::Unbounded => Err(ModelError::Unbounded.into()),
            // every integer column is bounded, so only continuous freedom
            // could make the model unbounded
            S::UnboundedOrInfeasible => {
                if model.variables.iter().all(|v| v.lower.is_finite() && v.upper.is_finite()) {
                    Ok(SolveResult::without_solution(SolveStatus::Infeasible))
                } else {
                    Err(MilpError::Backend("HiGHS: unbounded or infeasible".into()))
                }
            }
            S::ReachedTimeLimit | S::ReachedIterationLimit | S::ReachedSolutionLimit | S::ObjectiveBound | S::ObjectiveTarget => {
                if has_point {
                    SolveResult::from_values(model, SolveStatus::FeasibleTimeout, values())
                } else {
                    Ok(SolveResult::without_solution(SolveStatus::NoSolutionTimeout))
                }
            }
            other => Err(MilpError::Backend(format!("HiGHS stopped with status {other:?}"))),
        }
    }
}

/// Pure Rust branch and bound from the `microlp` crate.
#[derive(Clone, Copy, Debug, Default)]
pub struct MicrolpSolver;

impl MilpSolver for MicrolpSolver {
    fn name(&self) -> &str {
        "microlp"
    }

    fn solve(&self, model: &MilpModel, time_limit: Duration) -> Result<SolveResult, MilpError> {
        use microlp::{ComparisonOp, Error, OptimizationDirection, Problem, SolutionStatus, SolveOutcome};

        if let Some(r) = presolve(model, time_limit)? {
            return Ok(r);
        }
        let objective = model.dense_objective();
        let mut pb = Problem::new(OptimizationDirection::Minimize);
        let mut vars = Vec::with_capacity(model.num_vars());
        for (v, &c) in model.variables.iter().zip(&objective) {
            let var = match v.kind {
                VarKind::Continuous => pb.add_var(c, (v.lower, v.upper)),
                VarKind::Binary | VarKind::Integer => {
                    let to_i32 = |x: f64| x.clamp(i32::MIN as f64, i32::MAX as f64) as i32;
                    pb.add_integer_var(c, (to_i32(v.lower.ceil()), to_i32(v.upper.floor())))
                }
            };
            vars.push(var);
        }
        for con in &model.constraints {
            if con.terms.is_empty() {
                continue;
            }
            let expr: Vec<(microlp::Variable, f64)> = con.terms.iter().map(|(v, a)| (vars[v.0], *a)).collect();
            let op = match con.cmp {
                Cmp::Le => ComparisonOp::Le,
                Cmp::Ge => ComparisonOp::Ge,
                Cmp::Eq => ComparisonOp::Eq,
            };
            pb.add_constraint(expr, op, con.rhs);
        }
        pb.set_time_limit(time_limit);
        match pb.solve() {
            Ok(SolveOutcome::Solution(sol)) => {
                let status = match sol.status() {
                    SolutionStatus::Optimal => SolveStatus::Optimal,
                    SolutionStatus::Feasible => SolveStatus::FeasibleTimeout,
                };
                let values = vars.iter().map(|v| sol.var_value(*v)).collect();
                SolveResult::from_values(model, status, values)
            }
            Ok(SolveOutcome::Interrupted(_)) => Ok(SolveResult::without_solution(SolveStatus::NoSolutionTimeout)),
            Err(Error::Infeasible) => Ok(SolveResult::without_solution(SolveStatus::Infeasible)),
            Err(Error::Unbounded) => Err(ModelError::Unbounded.into()),
            Err(e) => Err(MilpError::Backend(format!("microlp: {e}"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Backend {
    Highs(HighsSolver),
    Microlp(MicrolpSolver),
}

impl Backend {
    pub fn from_name(name: &str) -> Result<Self, String> {
        match name.trim().to_ascii_lowercase().as_str() {
            "" | "highs" => Ok(Backend::Highs(HighsSolver::default())),
            "microlp" => Ok(Backend::Microlp(MicrolpSolver)),
            other => Err(format!("unknown solver backend `{other}` (expected highs or microlp)")),
        }
    }

    /// Backend named by [`SOLVER_ENV`], HiGHS when unset.
    pub fn from_env() -> Result<Self, String> {
        Self::from_name(&std::env::var(SOLVER_ENV).unwrap_or_default())
    }
}

impl MilpSolver for Backend {
    fn name(&self) -> &str {
        match self {
            Backend::Highs(s) => s.name(),
            Backend::Microlp(s) => s.name(),
        }
    }

    fn solve(&self, model: &MilpModel, time_limit: Duration) -> Result<SolveResult, MilpError> {
        match self {
            Backend::Highs(s) => s.solve(model, time_limit),
            Backend::Microlp(s) => s.solve(model, time_limit),
        }
    }
}
