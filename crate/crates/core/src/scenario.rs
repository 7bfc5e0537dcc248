//! Scenario files: which topology, service, deployment plan and run groups
//! an experiment uses. Every part falls back to the bundled default.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{ExperimentContext, GroupSpec};
use crate::infrastructure::{DeviceId, Topology, TopologyConfig};
use crate::metrics::{EnergyModel, MarginalReading};
use crate::workload::{DeploymentPlan, ServiceConfig};

pub const BUNDLED_TOPOLOGY: &str = include_str!("../data/abilene.json");
pub const BUNDLED_SERVICE: &str = include_str!("../data/service.json");
pub const BUNDLED_PLAN: &str = include_str!("../data/plan.json");
pub const BUNDLED_GROUPS: &str = include_str!("../data/table4.json");

/// Base seed of the bundled experiments.
pub const DEFAULT_BASE_SEED: u64 = 2025;
pub const DEFAULT_BEGIN_DEVICE: DeviceId = DeviceId(4);
pub const DEFAULT_OUTPUT_DIR: &str = "results";

/// On-disk scenario. Relative paths are resolved against the scenario
/// file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub topology: Option<PathBuf>,
    pub service: Option<PathBuf>,
    pub plan: Option<PathBuf>,
    pub groups: Option<PathBuf>,
    pub base_seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    /// Begin (and end) device of single solves.
    pub begin_device: Option<DeviceId>,
    pub marginal_reading: Option<MarginalReading>,
}

/// Fully validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub context: ExperimentContext,
    pub groups: Vec<GroupSpec>,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    pub begin_device: DeviceId,
}

fn parse<T: DeserializeOwned>(origin: &Path, text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        let detail = if field.is_empty() || field == "." {
            inner.to_string()
        } else {
            format!("field `{field}`: {inner}")
        };
        Error::Config {
            path: origin.to_path_buf(),
            detail,
        }
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

/// Parses the referenced file, or the bundled text when there is none.
fn part<T: DeserializeOwned>(base: &Path, reference: Option<&PathBuf>, bundled: &str, name: &str) -> Result<(PathBuf, T)> {
    match reference {
        Some(p) => {
            let path = base.join(p);
            let text = read(&path)?;
            Ok((path.clone(), parse(&path, &text)?))
        }
        None => {
            let origin = PathBuf::from(format!("<bundled {name}>"));
            Ok((origin.clone(), parse(&origin, bundled)?))
        }
    }
}

fn context_err(path: &Path) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        e @ Error::Config { .. } => e,
        other => Error::Config {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    }
}

impl Scenario {
    pub fn bundled() -> Result<Self> {
        Self::from_file(Path::new("."), &ScenarioFile::default())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read(path)?;
        let file: ScenarioFile = parse(path, &text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_file(base, &file)
    }

    /// Resolves and cross-checks every part of `file`.
    pub fn from_file(base: &Path, file: &ScenarioFile) -> Result<Self> {
        let (topo_path, topo): (_, TopologyConfig) = part(base, file.topology.as_ref(), BUNDLED_TOPOLOGY, "topology")?;
        let topology = Topology::from_config(&topo).map_err(context_err(&topo_path))?;

        let (svc_path, svc): (_, ServiceConfig) = part(base, file.service.as_ref(), BUNDLED_SERVICE, "service")?;
        let chain = svc.chain().map_err(context_err(&svc_path))?;
        if !(svc.deadline_ms > 0.0) {
            return Err(Error::Config {
                path: svc_path,
                detail: format!("field `deadline_ms`: must be positive, got {}", svc.deadline_ms),
            });
        }

        let (plan_path, plan): (_, DeploymentPlan) = part(base, file.plan.as_ref(), BUNDLED_PLAN, "plan")?;
        plan.validate(&topology, &chain).map_err(context_err(&plan_path))?;

        let (groups_path, groups): (_, Vec<GroupSpec>) = part(base, file.groups.as_ref(), BUNDLED_GROUPS, "groups")?;
        let mut seen = std::collections::BTreeSet::new();
        for g in &groups {
            g.validate(&topology).map_err(context_err(&groups_path))?;
            if !seen.insert(g.id) {
                return Err(Error::Config {
                    path: groups_path,
                    detail: format!("duplicate group id {}", g.id),
                });
            }
            if !plan.0.contains_key(&g.instances_per_function) {
                return Err(Error::Config {
                    path: groups_path,
                    detail: format!(
                        "group {}: the plan has no level for {} instances per function",
                        g.id, g.instances_per_function
                    ),
                });
            }
        }

        let begin_device = file.begin_device.unwrap_or(DEFAULT_BEGIN_DEVICE);
        if !topology.contains(begin_device) {
            return Err(Error::Config {
                path: base.to_path_buf(),
                detail: format!("field `begin_device`: unknown device {begin_device}"),
            });
        }

        Ok(Scenario {
            context: ExperimentContext {
                topology,
                chain,
                deadline_ms: svc.deadline_ms,
                plan,
                model: EnergyModel {
                    marginal: file.marginal_reading.unwrap_or_default(),
                },
            },
            groups,
            base_seed: file.base_seed.unwrap_or(DEFAULT_BASE_SEED),
            output_dir: file
                .output_dir
                .as_ref()
                .map(|p| base.join(p))
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
            begin_device,
        })
    }

    pub fn group(&self, id: u32) -> Result<&GroupSpec> {
        self.groups
            .iter()
            .find(|g| g.id == id)
            .ok_or_else(|| Error::InvalidGroup(format!("no group with id {id}")))
    }
}
