//! A small MILP modeling layer and the contract every solver backend meets.
//!
//! Models are always minimized. Backends live outside this crate; see
//! [`MilpSolver`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;
use core::time::Duration;

use thiserror::Error;

/// Integrality and feasibility tolerance shared by all checks.
pub const TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(VarId, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

impl Constraint {
    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|(v, c)| c * values[v.0]).sum()
    }

    pub fn satisfied_by(&self, values: &[f64], tol: f64) -> bool {
        let lhs = self.lhs(values);
        match self.cmp {
            Cmp::Le => lhs <= self.rhs + tol,
            Cmp::Ge => lhs >= self.rhs - tol,
            Cmp::Eq => (lhs - self.rhs).abs() <= tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("term references undeclared variable #{0}")]
    UnknownVariable(usize),
    #[error("integral variable `{0}` needs finite bounds")]
    InfiniteIntegerBounds(String),
    #[error("variable `{0}` has empty or NaN bounds")]
    BadBounds(String),
    #[error("non-finite coefficient")]
    NonFiniteCoefficient,
    #[error("model is unbounded")]
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MilpError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("solver backend failed: {0}")]
    Backend(String),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MilpModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(VarId, f64)>,
    pub objective_constant: f64,
    /// Feasible assignment a backend may start from.
    pub start: Option<Vec<f64>>,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        self.variables.push(Variable {
            name: name.into(),
            kind,
            lower,
            upper,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn integer(&mut self, name: impl Into<String>, lower: i64, upper: i64) -> VarId {
        self.add_var(name, VarKind::Integer, lower as f64, upper as f64)
    }

    pub fn continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    pub fn constrain(&mut self, terms: Vec<(VarId, f64)>, cmp: Cmp, rhs: f64) {
        self.constraints.push(Constraint { terms, cmp, rhs });
    }

    pub fn le(&mut self, terms: Vec<(VarId, f64)>, rhs: f64) {
        self.constrain(terms, Cmp::Le, rhs)
    }

    pub fn ge(&mut self, terms: Vec<(VarId, f64)>, rhs: f64) {
        self.constrain(terms, Cmp::Ge, rhs)
    }

    pub fn equal(&mut self, terms: Vec<(VarId, f64)>, rhs: f64) {
        self.constrain(terms, Cmp::Eq, rhs)
    }

    pub fn minimize(&mut self, var: VarId, coef: f64) {
        self.objective.push((var, coef));
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    /// Objective coefficient per variable, with repeated terms summed.
    pub fn dense_objective(&self) -> Vec<f64> {
        let mut c = alloc::vec![0.0; self.variables.len()];
        for (v, k) in &self.objective {
            c[v.0] += k;
        }
        c
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.variables.len();
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(ModelError::BadBounds(v.name.clone()));
            }
            if v.kind.is_integral() && !(v.lower.is_finite() && v.upper.is_finite()) {
                return Err(ModelError::InfiniteIntegerBounds(v.name.clone()));
            }
        }
        let check = |terms: &[(VarId, f64)]| -> Result<(), ModelError> {
            for (v, c) in terms {
                if v.0 >= n {
                    return Err(ModelError::UnknownVariable(v.0));
                }
                if !c.is_finite() {
                    return Err(ModelError::NonFiniteCoefficient);
                }
            }
            Ok(())
        };
        check(&self.objective)?;
        for c in &self.constraints {
            check(&c.terms)?;
            if !c.rhs.is_finite() {
                return Err(ModelError::NonFiniteCoefficient);
            }
        }
        if !self.objective_constant.is_finite() {
            return Err(ModelError::NonFiniteCoefficient);
        }
        Ok(())
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().map(|(v, c)| c * values[v.0]).sum::<f64>()
    }

    /// Independent feasibility check of an assignment against bounds,
    /// integrality and every constraint.
    pub fn check_assignment(&self, values: &[f64], tol: f64) -> Result<(), AssignmentViolation> {
        if values.len() != self.variables.len() {
            return Err(AssignmentViolation::Length {
                expected: self.variables.len(),
                got: values.len(),
            });
        }
        for (i, (var, &x)) in self.variables.iter().zip(values).enumerate() {
            if !x.is_finite() || x < var.lower - tol || x > var.upper + tol {
                return Err(AssignmentViolation::Bounds(i));
            }
            if var.kind.is_integral() && (x - libm::round(x)).abs() > tol {
                return Err(AssignmentViolation::Integrality(i));
            }
        }
        match self.constraints.iter().position(|c| !c.satisfied_by(values, tol)) {
            Some(i) => Err(AssignmentViolation::Constraint(i)),
            None => Ok(()),
        }
    }

    /// LP-file style text, for debugging.
    pub fn to_lp_string(&self) -> String {
        let mut out = String::new();
        let name = |v: &VarId| self.variables[v.0].name.as_str();
        let expr = |terms: &[(VarId, f64)]| {
            let mut s = String::new();
            for (i, (v, c)) in terms.iter().enumerate() {
                let neg = *c < 0.0;
                let _ = match (i, neg) {
                    (0, false) => write!(s, "{} {}", fmt_num(c.abs()), name(v)),
                    (0, true) => write!(s, "-{} {}", fmt_num(c.abs()), name(v)),
                    (_, false) => write!(s, " + {} {}", fmt_num(c.abs()), name(v)),
                    (_, true) => write!(s, " - {} {}", fmt_num(c.abs()), name(v)),
                };
            }
            if s.is_empty() {
                s.push('0');
            }
            s
        };
        let _ = writeln!(out, "Minimize\n obj: {}", expr(&self.objective));
        if self.objective_constant != 0.0 {
            let _ = writeln!(out, "\\ constant {}", fmt_num(self.objective_constant));
        }
        let _ = writeln!(out, "Subject To");
        for (i, c) in self.constraints.iter().enumerate() {
            let op = match c.cmp {
                Cmp::Le => "<=",
                Cmp::Ge => ">=",
                Cmp::Eq => "=",
            };
            let _ = writeln!(out, " c{}: {} {} {}", i, expr(&c.terms), op, fmt_num(c.rhs));
        }
        let _ = writeln!(out, "Bounds");
        for v in &self.variables {
            if v.kind != VarKind::Binary {
                let _ = writeln!(out, " {} <= {} <= {}", fmt_num(v.lower), v.name, fmt_num(v.upper));
            }
        }
        let section = |out: &mut String, title: &str, kind: VarKind| {
            let names: Vec<&str> = self
                .variables
                .iter()
                .filter(|v| v.kind == kind)
                .map(|v| v.name.as_str())
                .collect();
            if !names.is_empty() {
                let _ = writeln!(out, "{}\n {}", title, names.join(" "));
            }
        };
        section(&mut out, "Generals", VarKind::Integer);
        section(&mut out, "Binaries", VarKind::Binary);
        out.push_str("End\n");
        out
    }
}

fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        return String::from(if x > 0.0 { "+inf" } else { "-inf" });
    }
    if x == libm::trunc(x) && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{}", x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AssignmentViolation {
    #[error("assignment has {got} values for {expected} variables")]
    Length { expected: usize, got: usize },
    #[error("variable #{0} is out of bounds")]
    Bounds(usize),
    #[error("variable #{0} is not integral")]
    Integrality(usize),
    #[error("constraint #{0} is violated")]
    Constraint(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    FeasibleTimeout,
    Infeasible,
    NoSolutionTimeout,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleTimeout)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::FeasibleTimeout => "FeasibleTimeout",
            SolveStatus::Infeasible => "Infeasible",
            SolveStatus::NoSolutionTimeout => "NoSolutionTimeout",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// One value per model variable; present iff `status.has_solution()`.
    pub assignment: Option<Vec<f64>>,
    pub objective: Option<f64>,
}

impl SolveResult {
    pub fn without_solution(status: SolveStatus) -> Self {
        Self {
            status,
            assignment: None,
            objective: None,
        }
    }

    /// Builds a result from raw backend values: integral variables are
    /// snapped to the nearest integer, and the assignment is re-checked
    /// against the model before being accepted.
    pub fn from_values(model: &MilpModel, status: SolveStatus, mut values: Vec<f64>) -> Result<Self, MilpError> {
        for (x, v) in values.iter_mut().zip(&model.variables) {
            if v.kind.is_integral() {
                *x = libm::round(*x);
            }
        }
        model
            .check_assignment(&values, TOLERANCE * 10.0)
            .map_err(|e| MilpError::Backend(format!("returned assignment rejected: {e}")))?;
        let objective = model.objective_value(&values);
        Ok(Self {
            status,
            assignment: Some(values),
            objective: Some(objective),
        })
    }

    pub fn value(&self, v: VarId) -> Option<f64> {
        self.assignment.as_ref().map(|a| a[v.0])
    }
}

/// Anything that can minimize a [`MilpModel`] within a time budget.
///
/// `Optimal` must only be reported with a proof of optimality. A zero time
/// limit may return `NoSolutionTimeout` immediately.
pub trait MilpSolver: Sync {
    fn name(&self) -> &str;
    fn solve(&self, model: &MilpModel, time_limit: Duration) -> Result<SolveResult, MilpError>;
}

impl<S: MilpSolver + ?Sized> MilpSolver for &S {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn solve(&self, model: &MilpModel, time_limit: Duration) -> Result<SolveResult, MilpError> {
        (**self).solve(model, time_limit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn check_assignment_catches_each_violation() {
        let mut m = MilpModel::new();
        let x = m.binary("x");
        let y = m.integer("y", 0, 3);
        m.ge(vec![(x, 1.0), (y, 1.0)], 2.0);
        assert!(m.check_assignment(&[1.0, 1.0], TOLERANCE).is_ok());
        assert_eq!(m.check_assignment(&[0.0, 1.0], TOLERANCE), Err(AssignmentViolation::Constraint(0)));
        assert_eq!(m.check_assignment(&[0.5, 2.0], TOLERANCE), Err(AssignmentViolation::Integrality(0)));
        assert_eq!(m.check_assignment(&[1.0, 4.0], TOLERANCE), Err(AssignmentViolation::Bounds(1)));
        assert!(m.check_assignment(&[1.0], TOLERANCE).is_err());
    }

    #[test]
    fn validation() {
        let mut m = MilpModel::new();
        m.add_var("z", VarKind::Integer, 0.0, f64::INFINITY);
        assert!(matches!(m.validate(), Err(ModelError::InfiniteIntegerBounds(_))));
        let mut m = MilpModel::new();
        m.minimize(VarId(3), 1.0);
        assert_eq!(m.validate(), Err(ModelError::UnknownVariable(3)));
        let mut m = MilpModel::new();
        m.continuous("c", 2.0, 1.0);
        assert!(matches!(m.validate(), Err(ModelError::BadBounds(_))));
    }

    #[test]
    fn lp_dump_lists_sections() {
        let mut m = MilpModel::new();
        let x = m.binary("x");
        let y = m.integer("y", -1, 4);
        m.minimize(x, 1.0);
        m.minimize(y, -2.5);
        m.le(vec![(x, 1.0), (y, -1.0)], 0.0);
        let s = m.to_lp_string();
        assert!(s.contains("obj: 1 x - 2.5 y"));
        assert!(s.contains("c0: 1 x - 1 y <= 0"));
        assert!(s.contains("-1 <= y <= 4"));
        assert!(s.contains("Generals\n y"));
        assert!(s.contains("Binaries\n x"));
        assert!(s.ends_with("End\n"));
    }

    #[test]
    fn from_values_snaps_and_checks() {
        let mut m = MilpModel::new();
        let x = m.binary("x");
        m.ge(vec![(x, 1.0)], 1.0);
        m.minimize(x, 3.0);
        m.objective_constant = 1.0;
        let r = SolveResult::from_values(&m, SolveStatus::Optimal, vec![0.9999999]).unwrap();
        assert_eq!(r.assignment, Some(vec![1.0]));
        assert_eq!(r.objective, Some(4.0));
        assert!(SolveResult::from_values(&m, SolveStatus::Optimal, vec![0.0]).is_err());
    }
}
