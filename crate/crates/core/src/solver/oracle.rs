//! Exhaustive reference search. It never looks at the instance graph: every
//! combination of deployed instances is re-evaluated from scratch through
//! [`evaluate_placement`], so it checks the graph construction as well as
//! the branch-and-bound.

use std::time::Instant;

use super::graph::PlacementProblem;
use super::{Objective, PlacementOutcome, Status, DEADLINE_TOLERANCE_MS, TIE_TOLERANCE_J};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_placement, Evaluation};
use crate::workload::FunctionInstance;

pub const DEFAULT_ORACLE_CAP: u64 = 1_000_000;

/// Number of candidate placements the oracle would evaluate.
pub fn candidate_count(problem: &PlacementProblem<'_>) -> Result<u128> {
    let mut total: u128 = 1;
    for f in problem.request.service.functions() {
        total = total.saturating_mul(problem.deployment.instances_of(&f.id)?.len() as u128);
    }
    Ok(total)
}

/// Evaluates every instance combination, in ascending device-sequence
/// order, and keeps the first one that is cheaper than the incumbent by
/// more than the tie tolerance.
pub fn enumerate_oracle(
    problem: &PlacementProblem<'_>,
    objective: Objective,
    deadline_ms: f64,
    cap: u64,
) -> Result<PlacementOutcome> {
    let combinations = candidate_count(problem)?;
    if combinations > u128::from(cap) {
        return Err(Error::OracleCapExceeded { combinations, cap });
    }
    let started = Instant::now();
    let choices: Vec<Vec<FunctionInstance>> = problem
        .request
        .service
        .functions()
        .iter()
        .map(|f| problem.deployment.instances_of(&f.id))
        .collect::<Result<_>>()?;

    let mut outcome = PlacementOutcome::infeasible(objective, deadline_ms);
    let mut best: Option<f64> = None;
    let mut odometer = vec![0usize; choices.len()];
    loop {
        let placement: Vec<FunctionInstance> = odometer
            .iter()
            .zip(&choices)
            .map(|(&i, c)| c[i].clone())
            .collect();
        let evaluation = evaluate_placement(
            problem.request,
            &placement,
            problem.topology,
            problem.load,
            problem.model,
        )?;
        if let Evaluation::Feasible(e) = evaluation {
            if e.completion_ms <= deadline_ms + DEADLINE_TOLERANCE_MS {
                let value = objective.of(&e);
                if best.is_none_or(|b| value < b - TIE_TOLERANCE_J) {
                    best = Some(value);
                    outcome.status = Status::Feasible;
                    outcome.placement = placement;
                    outcome.evaluation = Some(e);
                }
            }
        }
        // last position turns fastest
        let mut pos = choices.len();
        loop {
            if pos == 0 {
                outcome.solver_time_ms = started.elapsed().as_secs_f64() * 1000.0;
                return Ok(outcome);
            }
            pos -= 1;
            odometer[pos] += 1;
            if odometer[pos] < choices[pos].len() {
                break;
            }
            odometer[pos] = 0;
        }
    }
}
