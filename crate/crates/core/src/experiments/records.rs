use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::RunRecord;
use crate::error::{Error, Result};
use crate::infrastructure::DeviceId;
use crate::solver::{Category, Status};

/// First line of every record file.
pub const RECORDS_VERSION: &str = "# edgeplace-records v1";

/// One CSV line of a record file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub group_id: u32,
    pub load_level: u32,
    pub run_index: u32,
    pub seed: u64,
    pub begin_device: DeviceId,
    pub category: Category,
    pub status: Status,
    pub completion_overall_ms: Option<f64>,
    pub completion_marginal_ms: Option<f64>,
    pub e_overall_of_overall_j: Option<f64>,
    pub e_overall_of_marginal_j: Option<f64>,
    pub e_marginal_of_overall_j: Option<f64>,
    pub e_marginal_of_marginal_j: Option<f64>,
    pub reldiff_overall_pct: Option<f64>,
    pub reldiff_marginal_pct: Option<f64>,
    pub util_mean_overall: Option<f64>,
    pub util_mean_marginal: Option<f64>,
    pub solver_ms_overall: Option<f64>,
    pub solver_ms_marginal: Option<f64>,
}

impl RunRecord {
    /// Flattens the record. Solver times are wall-clock and only kept when
    /// `timing` is set, so that files stay reproducible by default.
    pub fn row(&self, timing: bool) -> RecordRow {
        let o = self.overall.evaluation;
        let m = self.marginal.evaluation;
        RecordRow {
            group_id: self.group_id,
            load_level: self.load_level,
            run_index: self.run_index,
            seed: self.seed,
            begin_device: self.begin_device,
            category: self.category,
            status: self.overall.status,
            completion_overall_ms: o.map(|e| e.completion_ms),
            completion_marginal_ms: m.map(|e| e.completion_ms),
            e_overall_of_overall_j: o.map(|e| e.energy_overall_j),
            e_overall_of_marginal_j: m.map(|e| e.energy_overall_j),
            e_marginal_of_overall_j: o.map(|e| e.energy_marginal_j),
            e_marginal_of_marginal_j: m.map(|e| e.energy_marginal_j),
            reldiff_overall_pct: self.reldiff_overall_pct,
            reldiff_marginal_pct: self.reldiff_marginal_pct,
            util_mean_overall: self.util_mean_overall,
            util_mean_marginal: self.util_mean_marginal,
            solver_ms_overall: timing.then_some(self.overall.solver_time_ms),
            solver_ms_marginal: timing.then_some(self.marginal.solver_time_ms),
        }
    }
}

pub fn write_records<W: Write>(mut out: W, rows: &[RecordRow]) -> Result<()> {
    writeln!(out, "{RECORDS_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: BufRead>(mut input: R) -> Result<Vec<RecordRow>> {
    let mut first = String::new();
    input.read_line(&mut first)?;
    let first = first.trim_end();
    if first != RECORDS_VERSION {
        return Err(Error::Records(if first.starts_with("# edgeplace-records") {
            format!("unsupported record file version `{first}`")
        } else {
            format!("missing `{RECORDS_VERSION}` header line")
        }));
    }
    let mut rows = Vec::new();
    for row in csv::Reader::from_reader(input).deserialize() {
        let row: RecordRow = row?;
        check_row(&row)?;
        rows.push(row);
    }
    Ok(rows)
}

fn check_row(r: &RecordRow) -> Result<()> {
    let feasible = r.status == Status::Feasible;
    let consistent = match r.category {
        Category::Infeasible => !feasible,
        Category::Same | Category::Different => feasible,
    };
    let diffs = r.reldiff_overall_pct.is_some() && r.reldiff_marginal_pct.is_some();
    if !consistent || diffs != (r.category == Category::Different) {
        return Err(Error::Records(format!(
            "group {} level {} run {}: category {} does not match the row",
            r.group_id, r.load_level, r.run_index, r.category
        )));
    }
    Ok(())
}
