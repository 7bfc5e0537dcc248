use std::path::PathBuf;

use crate::infrastructure::DeviceId;
use crate::metrics::Infeasible;
use crate::workload::FunctionId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown device {0}")]
    UnknownDevice(DeviceId),

    #[error("unknown link index {0}")]
    UnknownLink(usize),

    #[error("unknown function {0}")]
    UnknownFunction(FunctionId),

    #[error("no path between device {src} and device {dst}")]
    NoPath { src: DeviceId, dst: DeviceId },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid load state: {0}")]
    InvalidLoad(String),

    #[error("utilization {0} outside [0, 1]")]
    UtilizationOutOfRange(f64),

    #[error("invalid service: {0}")]
    InvalidService(String),

    #[error("invalid deployment: {0}")]
    InvalidDeployment(String),

    #[error("function {0} has no deployed instance")]
    NoInstances(FunctionId),

    #[error("infeasible: {0}")]
    Infeasible(Infeasible),

    #[error("invalid placement: {0}")]
    InvalidPlacement(String),

    #[error("{combinations} candidate placements exceed the oracle cap of {cap}")]
    OracleCapExceeded { combinations: u128, cap: u64 },

    #[error("feasibility differs between objectives: overall={overall}, marginal={marginal}")]
    InconsistentFeasibility { overall: bool, marginal: bool },

    #[error("relative difference needs a positive reference value, got {0}")]
    NonPositiveReference(f64),

    #[error("percentile of an empty list")]
    EmptyPercentile,

    #[error("invalid group spec: {0}")]
    InvalidGroup(String),

    #[error("{path}: {detail}")]
    Config { path: PathBuf, detail: String },

    #[error("records: {0}")]
    Records(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
