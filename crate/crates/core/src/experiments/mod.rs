//! Seeded load scenarios, run groups and their aggregation.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infrastructure::{DeviceId, LoadState, Topology};
use crate::metrics::EnergyModel;
use crate::solver::{self, categorize, Category, Objective, PlacementOutcome, PlacementProblem};
use crate::workload::{deploy_instances, DeploymentPlan, FunctionInstance, Request, ServiceChain};

mod records;
mod report;
mod verify;

pub use records::{read_records, write_records, RecordRow, RECORDS_VERSION};
pub use verify::{max_candidates, verify_group, Mismatch, VerifyReport};
pub use report::{
    aggregate, percentile, relative_difference, CategoryCounts, CompletionRow, PercentileRow, ReportTables, UtilizationRow,
};

/// Utilization distribution of one element, in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadSpec {
    Fixed(f64),
    Normal { mean: f64, std: f64 },
}

/// How a group draws loads at a given sweep level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LoadDistribution {
    /// Always zero.
    None,
    /// Every element at the sweep level.
    Fixed,
    /// Independent normal draws centered on the sweep level.
    Normal { std: f64 },
}

impl LoadDistribution {
    pub fn at(self, level: f64) -> LoadSpec {
        match self {
            LoadDistribution::None => LoadSpec::Fixed(0.0),
            LoadDistribution::Fixed => LoadSpec::Fixed(level),
            LoadDistribution::Normal { std } => LoadSpec::Normal { mean: level, std },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeginDevice {
    Fixed(DeviceId),
    /// Drawn uniformly per run index and shared by all levels of that index.
    RandomPerRun,
}

fn default_levels() -> Vec<u32> {
    (0..=100).step_by(10).collect()
}

fn default_runs() -> u32 {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub id: u32,
    #[serde(default)]
    pub name: String,
    pub device_load: LoadDistribution,
    pub link_load: LoadDistribution,
    /// Sweep levels in percent.
    #[serde(default = "default_levels")]
    pub levels: Vec<u32>,
    pub instances_per_function: u32,
    pub begin_device: BeginDevice,
    #[serde(default)]
    pub colocate_all_on_begin: bool,
    #[serde(default = "default_runs")]
    pub runs_per_cell: u32,
}

impl GroupSpec {
    pub fn validate(&self, topology: &Topology) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidGroup(format!("group {}: {what}", self.id)));
        if self.runs_per_cell == 0 {
            return bad("runs_per_cell must be at least 1".into());
        }
        if self.levels.is_empty() {
            return bad("no load levels".into());
        }
        if let Some(l) = self.levels.iter().find(|&&l| l > 100) {
            return bad(format!("load level {l} is above 100"));
        }
        for d in [self.device_load, self.link_load] {
            if let LoadDistribution::Normal { std } = d {
                if !(std.is_finite() && std >= 0.0) {
                    return bad(format!("standard deviation must be non-negative, got {std}"));
                }
            }
        }
        if let BeginDevice::Fixed(id) = self.begin_device {
            if !topology.contains(id) {
                return bad(format!("unknown begin device {id}"));
            }
        }
        Ok(())
    }

    pub fn run_count(&self) -> usize {
        self.levels.len() * self.runs_per_cell as usize
    }
}

/// Bundled or user-provided group list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupSet(pub Vec<GroupSpec>);

/// Draws one utilization per device (in id order) and then per link, from
/// a single stream seeded with `seed`.
pub fn generate_load(topology: &Topology, device: LoadSpec, link: LoadSpec, seed: u64) -> Result<LoadState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |spec: LoadSpec| -> Result<f64> {
        let pct = match spec {
            LoadSpec::Fixed(v) => v,
            LoadSpec::Normal { mean, std } => Normal::new(mean, std)
                .map_err(|e| Error::InvalidLoad(format!("normal({mean}, {std}): {e}")))?
                .sample(&mut rng),
        };
        if pct.is_nan() {
            return Err(Error::InvalidLoad("utilization is NaN".into()));
        }
        Ok(pct.clamp(0.0, 100.0) / 100.0)
    };
    let devices: BTreeMap<DeviceId, f64> = topology
        .device_ids()
        .map(|id| Ok((id, draw(device)?)))
        .collect::<Result<_>>()?;
    let links = (0..topology.links().len()).map(|_| draw(link)).collect::<Result<Vec<_>>>()?;
    LoadState::new(topology, devices, links)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0, |acc, &p| splitmix64(acc ^ p))
}

/// Seed of the load draw for one run.
pub fn run_seed(base_seed: u64, group: u32, level: u32, index: u32) -> u64 {
    mix(&[base_seed, u64::from(group), u64::from(level), u64::from(index)])
}

/// Seed of the begin-device draw for one run index; it does not depend on
/// the level, so every level of a run index starts at the same device.
pub fn begin_seed(base_seed: u64, group: u32, index: u32) -> u64 {
    mix(&[base_seed, u64::from(group), u64::MAX, u64::from(index)])
}

pub fn draw_begin_device(topology: &Topology, seed: u64) -> DeviceId {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<DeviceId> = topology.device_ids().collect();
    ids[rng.random_range(0..ids.len())]
}

/// Fixed inputs shared by every run of an experiment.
#[derive(Debug, Clone)]
pub struct ExperimentContext {
    pub topology: Topology,
    pub chain: ServiceChain,
    pub deadline_ms: f64,
    pub plan: DeploymentPlan,
    pub model: EnergyModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub group_id: u32,
    pub load_level: u32,
    pub run_index: u32,
    pub seed: u64,
    pub begin_device: DeviceId,
    pub overall: PlacementOutcome,
    pub marginal: PlacementOutcome,
    pub category: Category,
    /// Extra overall energy of the marginal placement, in percent.
    pub reldiff_overall_pct: Option<f64>,
    /// Extra marginal energy of the overall placement, in percent.
    pub reldiff_marginal_pct: Option<f64>,
    /// Mean pre-placement utilization of the distinct chosen devices, in
    /// percent.
    pub util_mean_overall: Option<f64>,
    pub util_mean_marginal: Option<f64>,
}

impl RunRecord {
    pub fn outcome(&self, objective: Objective) -> &PlacementOutcome {
        match objective {
            Objective::Overall => &self.overall,
            Objective::Marginal => &self.marginal,
        }
    }
}

/// Inputs of a single run, rebuilt from its coordinates.
#[derive(Debug, Clone)]
pub struct RunInputs {
    pub seed: u64,
    pub request: Request,
    pub deployment: crate::workload::Deployment,
    pub load: LoadState,
}

impl RunInputs {
    pub fn new(ctx: &ExperimentContext, group: &GroupSpec, base_seed: u64, level: u32, index: u32) -> Result<Self> {
        let seed = run_seed(base_seed, group.id, level, index);
        let begin = match group.begin_device {
            BeginDevice::Fixed(id) => id,
            BeginDevice::RandomPerRun => draw_begin_device(&ctx.topology, begin_seed(base_seed, group.id, index)),
        };
        let level_pct = f64::from(level);
        let load = generate_load(
            &ctx.topology,
            group.device_load.at(level_pct),
            group.link_load.at(level_pct),
            seed,
        )?;
        let mut deployment = deploy_instances(&ctx.topology, &ctx.chain, group.instances_per_function, &ctx.plan)?;
        if group.colocate_all_on_begin {
            deployment.colocate_all(&ctx.chain, begin);
        }
        let request = Request::new(ctx.chain.clone(), begin, begin, ctx.deadline_ms)?;
        Ok(Self {
            seed,
            request,
            deployment,
            load,
        })
    }

    pub fn problem<'a>(&'a self, ctx: &'a ExperimentContext) -> PlacementProblem<'a> {
        PlacementProblem {
            topology: &ctx.topology,
            deployment: &self.deployment,
            request: &self.request,
            load: &self.load,
            model: ctx.model,
        }
    }
}

fn mean_utilization(load: &LoadState, placement: &[FunctionInstance]) -> Result<Option<f64>> {
    let devices: BTreeSet<DeviceId> = placement.iter().map(|i| i.device).collect();
    if devices.is_empty() {
        return Ok(None);
    }
    let mut sum = 0.0;
    for d in &devices {
        sum += load.device_utilization(*d)?;
    }
    Ok(Some(100.0 * sum / devices.len() as f64))
}

/// Solves one run under both objectives on the same load state.
pub fn execute_run(ctx: &ExperimentContext, group: &GroupSpec, base_seed: u64, level: u32, index: u32) -> Result<RunRecord> {
    let inputs = RunInputs::new(ctx, group, base_seed, level, index)?;
    let graph = solver::build_instance_graph(&inputs.problem(ctx))?;
    let overall = solver::solve_exact(&graph, Objective::Overall, ctx.deadline_ms);
    let marginal = solver::solve_exact(&graph, Objective::Marginal, ctx.deadline_ms);
    let category = categorize(&overall, &marginal)?;
    let (mut rd_o, mut rd_m) = (None, None);
    if category == Category::Different {
        let (o, m) = (overall.evaluation.unwrap(), marginal.evaluation.unwrap());
        rd_o = Some(relative_difference(m.energy_overall_j, o.energy_overall_j)?);
        rd_m = Some(relative_difference(o.energy_marginal_j, m.energy_marginal_j)?);
    }
    Ok(RunRecord {
        group_id: group.id,
        load_level: level,
        run_index: index,
        seed: inputs.seed,
        begin_device: inputs.request.begin_device,
        util_mean_overall: mean_utilization(&inputs.load, &overall.placement)?,
        util_mean_marginal: mean_utilization(&inputs.load, &marginal.placement)?,
        overall,
        marginal,
        category,
        reldiff_overall_pct: rd_o,
        reldiff_marginal_pct: rd_m,
    })
}

/// Runs every (level, index) cell of `group` on a pool of `jobs` workers.
/// Records come back ordered by level, then run index, whatever `jobs` is.
pub fn run_group(ctx: &ExperimentContext, group: &GroupSpec, base_seed: u64, jobs: usize) -> Result<Vec<RunRecord>> {
    group.validate(&ctx.topology)?;
    let cells: Vec<(u32, u32)> = group
        .levels
        .iter()
        .flat_map(|&l| (0..group.runs_per_cell).map(move |i| (l, i)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Records(format!("cannot start worker pool: {e}")))?;
    let mut records: Vec<RunRecord> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(level, index)| execute_run(ctx, group, base_seed, level, index))
            .collect::<Result<_>>()
    })?;
    records.sort_by_key(|r| (r.load_level, r.run_index));
    Ok(records)
}
