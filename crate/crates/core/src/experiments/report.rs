use std::collections::BTreeMap;

use serde::Serialize;

use super::{BeginDevice, GroupSpec, LoadDistribution, RecordRow};
use crate::error::{Error, Result};
use crate::solver::{Category, Objective, TIE_TOLERANCE_J};

/// How much larger `value_alt` is than the optimum `value_opt`, in percent.
/// Shortfalls within the tie tolerance read as zero.
pub fn relative_difference(value_alt: f64, value_opt: f64) -> Result<f64> {
    if !(value_opt > 0.0) {
        return Err(Error::NonPositiveReference(value_opt));
    }
    let diff = value_alt - value_opt;
    let diff = if (-TIE_TOLERANCE_J..0.0).contains(&diff) { 0.0 } else { diff };
    Ok(100.0 * diff / value_opt)
}

/// Nearest-rank percentile: the element at rank `ceil(q / 100 * n)`.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyPercentile);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((q / 100.0) * n as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CategoryCounts {
    pub level: u32,
    pub infeasible: u32,
    pub same: u32,
    pub different: u32,
}

impl CategoryCounts {
    pub fn total(&self) -> u32 {
        self.infeasible + self.same + self.different
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PercentileRow {
    /// Instances per function.
    pub availability: u32,
    pub metric: Objective,
    /// `None` when no run of the pooled groups had different placements.
    pub p10: Option<f64>,
    pub p90: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilizationRow {
    pub level: u32,
    pub run_index: u32,
    pub util_mean_overall: f64,
    pub util_mean_marginal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRow {
    pub level: u32,
    pub run_index: u32,
    pub completion_overall_ms: f64,
    pub completion_marginal_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportTables {
    pub categorization: BTreeMap<u32, Vec<CategoryCounts>>,
    /// Pooled over groups with a fixed begin device.
    pub percentiles: Vec<PercentileRow>,
    /// Pooled over groups with a random begin device.
    pub percentiles_random: Vec<PercentileRow>,
    /// Runs with different placements only.
    pub utilization: BTreeMap<u32, Vec<UtilizationRow>>,
    /// Feasible runs only.
    pub completion: BTreeMap<u32, Vec<CompletionRow>>,
}

/// Groups whose percentiles are pooled per availability: normally
/// distributed device load with std 10, no link load, no forced
/// co-location.
fn percentile_pool(group: &GroupSpec) -> bool {
    matches!(group.device_load, LoadDistribution::Normal { std } if std == 10.0)
        && group.link_load == LoadDistribution::None
        && !group.colocate_all_on_begin
}

fn percentile_rows(groups: &[&GroupSpec], rows: &[RecordRow]) -> Result<Vec<PercentileRow>> {
    let mut by_availability: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for g in groups {
        by_availability.entry(g.instances_per_function).or_default().push(g.id);
    }
    let mut out = Vec::new();
    for (availability, ids) in by_availability {
        for metric in Objective::ALL {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| ids.contains(&r.group_id) && r.category == Category::Different)
                .filter_map(|r| match metric {
                    Objective::Overall => r.reldiff_overall_pct,
                    Objective::Marginal => r.reldiff_marginal_pct,
                })
                .collect();
            let (p10, p90) = if values.is_empty() {
                (None, None)
            } else {
                (Some(percentile(&values, 10.0)?), Some(percentile(&values, 90.0)?))
            };
            out.push(PercentileRow {
                availability,
                metric,
                p10,
                p90,
            });
        }
    }
    Ok(out)
}

/// Builds every report table from the records of `groups`.
pub fn aggregate(groups: &[GroupSpec], rows: &[RecordRow]) -> Result<ReportTables> {
    let mut tables = ReportTables::default();
    for g in groups {
        let mine: Vec<&RecordRow> = rows.iter().filter(|r| r.group_id == g.id).collect();
        let mut counts: BTreeMap<u32, CategoryCounts> = g
            .levels
            .iter()
            .map(|&l| (l, CategoryCounts { level: l, ..Default::default() }))
            .collect();
        let mut util = Vec::new();
        let mut completion = Vec::new();
        for r in &mine {
            let c = counts.entry(r.load_level).or_insert(CategoryCounts {
                level: r.load_level,
                ..Default::default()
            });
            match r.category {
                Category::Infeasible => c.infeasible += 1,
                Category::Same => c.same += 1,
                Category::Different => c.different += 1,
            }
            if r.category == Category::Different {
                if let (Some(o), Some(m)) = (r.util_mean_overall, r.util_mean_marginal) {
                    util.push(UtilizationRow {
                        level: r.load_level,
                        run_index: r.run_index,
                        util_mean_overall: o,
                        util_mean_marginal: m,
                    });
                }
            }
            if let (Some(o), Some(m)) = (r.completion_overall_ms, r.completion_marginal_ms) {
                completion.push(CompletionRow {
                    level: r.load_level,
                    run_index: r.run_index,
                    completion_overall_ms: o,
                    completion_marginal_ms: m,
                });
            }
        }
        let key = |r: &UtilizationRow| (r.level, r.run_index);
        util.sort_by_key(key);
        completion.sort_by_key(|r| (r.level, r.run_index));
        tables.categorization.insert(g.id, counts.into_values().collect());
        tables.utilization.insert(g.id, util);
        tables.completion.insert(g.id, completion);
    }
    let fixed: Vec<&GroupSpec> = groups
        .iter()
        .filter(|g| percentile_pool(g) && matches!(g.begin_device, BeginDevice::Fixed(_)))
        .collect();
    let random: Vec<&GroupSpec> = groups
        .iter()
        .filter(|g| percentile_pool(g) && g.begin_device == BeginDevice::RandomPerRun)
        .collect();
    tables.percentiles = percentile_rows(&fixed, rows)?;
    tables.percentiles_random = percentile_rows(&random, rows)?;
    Ok(tables)
}
