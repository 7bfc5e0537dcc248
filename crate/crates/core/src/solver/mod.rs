//! Exact placement of a request chain onto deployed function instances.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::PlacementEvaluation;
use crate::workload::FunctionInstance;

mod exact;
pub mod graph;
pub mod ilp;
pub mod oracle;

pub use graph::{build_instance_graph, ArcCost, InstanceGraph, InstanceNode, NodeCost, NodeRef, PlacementProblem};
pub use ilp::{validate_placement, ConstraintFamily, ConstraintVerdict, IlpAssignment};
pub use oracle::{candidate_count, enumerate_oracle, DEFAULT_ORACLE_CAP};

/// Energies closer than this are treated as equal.
pub const TIE_TOLERANCE_J: f64 = 1e-9;
/// Completion times may exceed the deadline by at most this much.
pub const DEADLINE_TOLERANCE_MS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Overall,
    Marginal,
}

impl Objective {
    pub const ALL: [Objective; 2] = [Objective::Overall, Objective::Marginal];

    pub fn of(self, evaluation: &PlacementEvaluation) -> f64 {
        match self {
            Objective::Overall => evaluation.energy_overall_j,
            Objective::Marginal => evaluation.energy_marginal_j,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Overall => "overall",
            Objective::Marginal => "marginal",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "overall" => Ok(Objective::Overall),
            "marginal" => Ok(Objective::Marginal),
            other => Err(format!("unknown objective `{other}` (expected overall or marginal)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementOutcome {
    pub objective: Objective,
    pub status: Status,
    /// One instance per chain function, empty when infeasible.
    pub placement: Vec<FunctionInstance>,
    pub evaluation: Option<PlacementEvaluation>,
    pub solver_time_ms: f64,
    pub deadline_ms: f64,
}

impl PlacementOutcome {
    pub fn infeasible(objective: Objective, deadline_ms: f64) -> Self {
        Self {
            objective,
            status: Status::Infeasible,
            placement: Vec::new(),
            evaluation: None,
            solver_time_ms: 0.0,
            deadline_ms,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.status == Status::Feasible
    }

    /// Value of the optimized objective.
    pub fn objective_value(&self) -> Option<f64> {
        self.evaluation.as_ref().map(|e| self.objective.of(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tie_tolerance_j: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tie_tolerance_j: TIE_TOLERANCE_J,
        }
    }
}

/// Minimum-energy placement meeting `deadline_ms`.
pub fn solve_exact(graph: &InstanceGraph, objective: Objective, deadline_ms: f64) -> PlacementOutcome {
    solve_exact_with(graph, objective, deadline_ms, &SolverOptions::default())
}

pub fn solve_exact_with(
    graph: &InstanceGraph,
    objective: Objective,
    deadline_ms: f64,
    options: &SolverOptions,
) -> PlacementOutcome {
    exact::solve(graph, objective, deadline_ms, options)
}

/// Builds the instance graph for `problem` and solves it against the
/// request deadline.
pub fn solve(problem: &PlacementProblem<'_>, objective: Objective) -> Result<PlacementOutcome> {
    let graph = build_instance_graph(problem)?;
    Ok(solve_exact(&graph, objective, problem.request.deadline_ms))
}

/// How the two objectives' placements for the same request compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Infeasible,
    Same,
    Different,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Infeasible => "infeasible",
            Category::Same => "same",
            Category::Different => "different",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Feasibility does not depend on the objective, so a one-sided result
/// means something upstream is broken.
pub fn categorize(overall: &PlacementOutcome, marginal: &PlacementOutcome) -> Result<Category> {
    match (overall.is_feasible(), marginal.is_feasible()) {
        (false, false) => Ok(Category::Infeasible),
        (true, true) if overall.placement == marginal.placement => Ok(Category::Same),
        (true, true) => Ok(Category::Different),
        (o, m) => Err(Error::InconsistentFeasibility { overall: o, marginal: m }),
    }
}
