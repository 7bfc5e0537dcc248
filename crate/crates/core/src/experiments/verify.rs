use rayon::prelude::*;

use super::{ExperimentContext, GroupSpec, RunInputs};
use crate::error::{Error, Result};
use crate::solver::{
    build_instance_graph, candidate_count, enumerate_oracle, solve_exact_with, Objective, PlacementOutcome,
    SolverOptions, TIE_TOLERANCE_J,
};

/// Disagreement between the exact solver and the exhaustive oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub group_id: u32,
    pub load_level: u32,
    pub run_index: u32,
    pub objective: Objective,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub runs: usize,
    pub mismatches: Vec<Mismatch>,
}

fn compare(exact: &PlacementOutcome, oracle: &PlacementOutcome) -> Option<String> {
    if exact.status != oracle.status {
        return Some(format!("status {:?} vs oracle {:?}", exact.status, oracle.status));
    }
    if let (Some(a), Some(b)) = (exact.objective_value(), oracle.objective_value()) {
        if (a - b).abs() > TIE_TOLERANCE_J {
            return Some(format!("value {a} J vs oracle {b} J"));
        }
    }
    if exact.placement != oracle.placement {
        let seq = |p: &PlacementOutcome| p.placement.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
        return Some(format!("placement [{}] vs oracle [{}]", seq(exact), seq(oracle)));
    }
    None
}

/// Largest oracle search space over the runs of `group`.
pub fn max_candidates(ctx: &ExperimentContext, group: &GroupSpec, base_seed: u64) -> Result<u128> {
    // the deployment only varies with the begin device under co-location,
    // so probing every run index of one level covers every case
    let level = group.levels.first().copied().unwrap_or(0);
    let mut max = 0;
    for index in 0..group.runs_per_cell {
        let inputs = RunInputs::new(ctx, group, base_seed, level, index)?;
        max = max.max(candidate_count(&inputs.problem(ctx))?);
        if !group.colocate_all_on_begin {
            break;
        }
    }
    Ok(max)
}

/// Re-solves every run of `group` with both the exact solver and the
/// oracle. Refuses to start when a run exceeds `cap` candidates.
pub fn verify_group(
    ctx: &ExperimentContext,
    group: &GroupSpec,
    base_seed: u64,
    cap: u64,
    options: &SolverOptions,
    jobs: usize,
) -> Result<VerifyReport> {
    group.validate(&ctx.topology)?;
    let combinations = max_candidates(ctx, group, base_seed)?;
    if combinations > u128::from(cap) {
        return Err(Error::OracleCapExceeded { combinations, cap });
    }
    let cells: Vec<(u32, u32)> = group
        .levels
        .iter()
        .flat_map(|&l| (0..group.runs_per_cell).map(move |i| (l, i)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Records(format!("cannot start worker pool: {e}")))?;
    let per_run: Vec<Vec<Mismatch>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(level, index)| {
                let inputs = RunInputs::new(ctx, group, base_seed, level, index)?;
                let problem = inputs.problem(ctx);
                let graph = build_instance_graph(&problem)?;
                let mut found = Vec::new();
                for objective in Objective::ALL {
                    let exact = solve_exact_with(&graph, objective, ctx.deadline_ms, options);
                    let oracle = enumerate_oracle(&problem, objective, ctx.deadline_ms, cap)?;
                    if let Some(detail) = compare(&exact, &oracle) {
                        found.push(Mismatch {
                            group_id: group.id,
                            load_level: level,
                            run_index: index,
                            objective,
                            detail,
                        });
                    }
                }
                Ok(found)
            })
            .collect::<Result<_>>()
    })?;
    Ok(VerifyReport {
        runs: cells.len(),
        mismatches: per_run.into_iter().flatten().collect(),
    })
}
