//! Command-line interface.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::experiments::{
    self, aggregate, generate_load, read_records, run_group, verify_group, write_records, CategoryCounts,
    GroupSpec, LoadSpec, PercentileRow, RecordRow, ReportTables,
};
use crate::infrastructure::DeviceId;
use crate::scenario::Scenario;
use crate::solver::{self, Category, Objective, PlacementProblem, SolverOptions, Status, DEFAULT_ORACLE_CAP};
use crate::workload::{deploy_instances, Request};

/// Version line of every report CSV.
pub const REPORT_VERSION: &str = "# edgeplace-report v1";

#[derive(Debug, Parser)]
#[command(name = "edgeplace", version, about = "Energy-centric placement of microservice request chains on edge devices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Place a single request and print the outcome.
    Solve(SolveArgs),
    /// Run experiment groups and write one record file per group.
    Experiment(ExperimentArgs),
    /// Cross-check the exact solver against exhaustive enumeration.
    Verify(VerifyArgs),
    /// Turn record files into report tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArg {
    /// Scenario file; the bundled defaults are used when absent.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
}

impl ScenarioArg {
    fn load(&self) -> anyhow::Result<Scenario> {
        Ok(match &self.scenario {
            Some(p) => Scenario::load(p)?,
            None => Scenario::bundled()?,
        })
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub scenario: ScenarioArg,
    #[arg(long, default_value = "overall")]
    pub objective: Objective,
    /// Seed of the load draw.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Begin and end device; defaults to the scenario's.
    #[arg(long)]
    pub begin_device: Option<u32>,
    /// Instances per function, taken from the deployment plan.
    #[arg(long, default_value_t = 2)]
    pub instances: u32,
    /// Device load: `none`, `fixed:<pct>` or `normal:<mean>:<std>`.
    #[arg(long, default_value = "normal:50:10")]
    pub device_load: String,
    /// Link load, same syntax as `--device-load`.
    #[arg(long, default_value = "none")]
    pub link_load: String,
    /// Print the solver's wall-clock time.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub scenario: ScenarioArg,
    /// Group ids to run (repeatable); all groups when absent.
    #[arg(long = "group")]
    pub groups: Vec<u32>,
    /// Base seed; defaults to the scenario's.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; defaults to the scenario's.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Record wall-clock solver times (makes files non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub scenario: ScenarioArg,
    #[arg(long = "group")]
    pub groups: Vec<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Largest number of candidate placements the oracle may enumerate.
    #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
    pub oracle_cap: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Tie tolerance of the exact solver, in joules.
    #[arg(long, hide = true)]
    pub solver_tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by `experiment`.
    #[arg(long)]
    pub records: PathBuf,
    /// Where to write the tables; defaults to the records directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs the command and maps the result to an exit code: 0 on success,
/// 1 on errors, 2 for an infeasible single solve, 3 on verification
/// mismatches.
pub fn run(cli: Cli) -> ExitCode {
    let result = match cli.command {
        Command::Solve(a) => solve(&a),
        Command::Experiment(a) => experiment(&a),
        Command::Verify(a) => verify(&a),
        Command::Report(a) => report(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Parses `none`, `fixed:<pct>` or `normal:<mean>:<std>`.
pub fn parse_load_spec(s: &str) -> anyhow::Result<LoadSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| -> anyhow::Result<f64> {
        let v: f64 = t.parse().with_context(|| format!("`{t}` is not a number"))?;
        if !v.is_finite() {
            bail!("`{t}` is not finite");
        }
        Ok(v)
    };
    match parts.as_slice() {
        ["none"] => Ok(LoadSpec::Fixed(0.0)),
        ["fixed", pct] => Ok(LoadSpec::Fixed(num(pct)?)),
        ["normal", mean, std] => {
            let std = num(std)?;
            if std < 0.0 {
                bail!("standard deviation must be non-negative");
            }
            Ok(LoadSpec::Normal { mean: num(mean)?, std })
        }
        _ => bail!("load spec `{s}`: expected none, fixed:<pct> or normal:<mean>:<std>"),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn solve(args: &SolveArgs) -> anyhow::Result<u8> {
    let scenario = args.scenario.load()?;
    let ctx = &scenario.context;
    let begin = args.begin_device.map(DeviceId).unwrap_or(scenario.begin_device);
    ctx.topology.device(begin)?;
    let device = parse_load_spec(&args.device_load).context("--device-load")?;
    let link = parse_load_spec(&args.link_load).context("--link-load")?;
    let load = generate_load(&ctx.topology, device, link, args.seed)?;
    let deployment = deploy_instances(&ctx.topology, &ctx.chain, args.instances, &ctx.plan)?;
    let request = Request::new(ctx.chain.clone(), begin, begin, ctx.deadline_ms)?;
    let problem = PlacementProblem {
        topology: &ctx.topology,
        deployment: &deployment,
        request: &request,
        load: &load,
        model: ctx.model,
    };
    let outcome = solver::solve(&problem, args.objective)?;

    let mut out = std::io::stdout().lock();
    writeln!(out, "objective: {}", args.objective)?;
    writeln!(out, "status: {}", if outcome.is_feasible() { "feasible" } else { "infeasible" })?;
    let seq: Vec<String> = outcome.placement.iter().map(ToString::to_string).collect();
    writeln!(out, "placement: {}", if seq.is_empty() { "-".into() } else { seq.join(" ") })?;
    let e = outcome.evaluation;
    writeln!(out, "completion_ms: {}", fmt_opt(e.map(|e| e.completion_ms)))?;
    writeln!(out, "energy_overall_j: {}", fmt_opt(e.map(|e| e.energy_overall_j)))?;
    writeln!(out, "energy_marginal_j: {}", fmt_opt(e.map(|e| e.energy_marginal_j)))?;
    if args.timing {
        writeln!(out, "solver_ms: {}", outcome.solver_time_ms)?;
    }
    Ok(if outcome.status == Status::Feasible { 0 } else { 2 })
}

fn selected_groups(scenario: &Scenario, ids: &[u32]) -> anyhow::Result<Vec<GroupSpec>> {
    if ids.is_empty() {
        return Ok(scenario.groups.clone());
    }
    ids.iter().map(|&id| Ok(scenario.group(id)?.clone())).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct GroupSummary {
    id: u32,
    name: String,
    runs: usize,
    solves: usize,
    infeasible: usize,
    same: usize,
    different: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Summary {
    base_seed: u64,
    total_runs: usize,
    total_solves: usize,
    groups: Vec<GroupSummary>,
}

fn records_file(dir: &Path, group: u32) -> PathBuf {
    dir.join(format!("records_{group}.csv"))
}

/// Files created so far; removed again unless the command succeeds.
struct Outputs {
    created: Vec<PathBuf>,
    keep: bool,
}

impl Outputs {
    fn create(&mut self, path: PathBuf) -> anyhow::Result<BufWriter<File>> {
        let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        self.created.push(path);
        Ok(BufWriter::new(file))
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.keep {
            for p in &self.created {
                let _ = fs::remove_file(p);
            }
        }
    }
}

fn experiment(args: &ExperimentArgs) -> anyhow::Result<u8> {
    let scenario = args.scenario.load()?;
    let groups = selected_groups(&scenario, &args.groups)?;
    let base_seed = args.seed.unwrap_or(scenario.base_seed);
    let dir = args.out.clone().unwrap_or_else(|| scenario.output_dir.clone());
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;

    let mut outputs = Outputs {
        created: Vec::new(),
        keep: false,
    };
    let mut summary = Summary {
        base_seed,
        total_runs: 0,
        total_solves: 0,
        groups: Vec::new(),
    };
    for g in &groups {
        let records = run_group(&scenario.context, g, base_seed, args.jobs)
            .with_context(|| format!("group {}", g.id))?;
        let rows: Vec<RecordRow> = records.iter().map(|r| r.row(args.timing)).collect();
        let mut w = outputs.create(records_file(&dir, g.id))?;
        write_records(&mut w, &rows)?;
        w.flush()?;
        let count = |c: Category| records.iter().filter(|r| r.category == c).count();
        let gs = GroupSummary {
            id: g.id,
            name: g.name.clone(),
            runs: records.len(),
            solves: 2 * records.len(),
            infeasible: count(Category::Infeasible),
            same: count(Category::Same),
            different: count(Category::Different),
        };
        println!(
            "group {:>2}: {} runs, {} infeasible, {} same, {} different",
            gs.id, gs.runs, gs.infeasible, gs.same, gs.different
        );
        summary.total_runs += gs.runs;
        summary.total_solves += gs.solves;
        summary.groups.push(gs);
    }
    let mut w = outputs.create(dir.join("groups.json"))?;
    serde_json::to_writer_pretty(&mut w, &groups)?;
    writeln!(w)?;
    w.flush()?;
    let mut w = outputs.create(dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w)?;
    w.flush()?;
    println!("total: {} runs, {} solves", summary.total_runs, summary.total_solves);
    outputs.keep = true;
    Ok(0)
}

fn verify(args: &VerifyArgs) -> anyhow::Result<u8> {
    let scenario = args.scenario.load()?;
    let groups = selected_groups(&scenario, &args.groups)?;
    let base_seed = args.seed.unwrap_or(scenario.base_seed);
    let mut options = SolverOptions::default();
    if let Some(t) = args.solver_tolerance {
        options.tie_tolerance_j = t;
    }
    // refuse before doing any work
    for g in &groups {
        let combinations = experiments::max_candidates(&scenario.context, g, base_seed)?;
        if combinations > u128::from(args.oracle_cap) {
            return Err(anyhow!(crate::Error::OracleCapExceeded {
                combinations,
                cap: args.oracle_cap
            }))
            .with_context(|| format!("group {}", g.id));
        }
    }
    let mut total = 0;
    let mut runs = 0;
    for g in &groups {
        let report = verify_group(&scenario.context, g, base_seed, args.oracle_cap, &options, args.jobs)?;
        for m in &report.mismatches {
            println!(
                "mismatch: group {} level {} run {} {}: {}",
                m.group_id, m.load_level, m.run_index, m.objective, m.detail
            );
        }
        println!("group {:>2}: {} runs, {} mismatches", g.id, report.runs, report.mismatches.len());
        total += report.mismatches.len();
        runs += report.runs;
    }
    println!("verified {runs} runs: {total} mismatches");
    Ok(if total == 0 { 0 } else { 3 })
}

/// Writes `rows` under an explicit header, so that empty tables still
/// name their columns.
fn write_csv<T: Serialize>(outputs: &mut Outputs, path: PathBuf, header: &[&str], rows: &[T]) -> anyhow::Result<()> {
    let mut w = outputs.create(path)?;
    writeln!(w, "{REPORT_VERSION}")?;
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    csv.write_record(header)?;
    for r in rows {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(())
}

const CATEGORY_HEADER: &[&str] = &["level", "infeasible", "same", "different"];
const PERCENTILE_HEADER: &[&str] = &["availability", "metric", "p10", "p90"];
const UTILIZATION_HEADER: &[&str] = &["level", "run_index", "util_mean_overall", "util_mean_marginal"];
const COMPLETION_HEADER: &[&str] = &["level", "run_index", "completion_overall_ms", "completion_marginal_ms"];

#[derive(Serialize)]
struct PercentileLine {
    availability: u32,
    metric: Objective,
    p10: String,
    p90: String,
}

fn percentile_lines(rows: &[PercentileRow]) -> Vec<PercentileLine> {
    rows.iter()
        .map(|r| PercentileLine {
            availability: r.availability,
            metric: r.metric,
            p10: fmt_opt(r.p10),
            p90: fmt_opt(r.p90),
        })
        .collect()
}

/// Reads `groups.json` and every group's record file from `dir`.
pub fn load_records(dir: &Path) -> anyhow::Result<(Vec<GroupSpec>, Vec<RecordRow>)> {
    let groups_path = dir.join("groups.json");
    let text = fs::read_to_string(&groups_path).with_context(|| format!("cannot read {}", groups_path.display()))?;
    let groups: Vec<GroupSpec> =
        serde_json::from_str(&text).with_context(|| format!("corrupt {}", groups_path.display()))?;
    let mut rows = Vec::new();
    for g in &groups {
        let path = records_file(dir, g.id);
        let file = File::open(&path).with_context(|| format!("missing records for group {}", g.id))?;
        let mine = read_records(BufReader::new(file)).with_context(|| format!("corrupt {}", path.display()))?;
        if let Some(r) = mine.iter().find(|r| r.group_id != g.id) {
            bail!("{} contains a row of group {}", path.display(), r.group_id);
        }
        if mine.len() != g.run_count() {
            bail!("{}: {} rows, expected {}", path.display(), mine.len(), g.run_count());
        }
        rows.extend(mine);
    }
    Ok((groups, rows))
}

fn write_report(outputs: &mut Outputs, dir: &Path, tables: &ReportTables) -> anyhow::Result<()> {
    for (id, counts) in &tables.categorization {
        write_csv(outputs, dir.join(format!("categorization_{id}.csv")), CATEGORY_HEADER, counts)?;
    }
    write_csv(outputs, dir.join("percentiles.csv"), PERCENTILE_HEADER, &percentile_lines(&tables.percentiles))?;
    write_csv(outputs, dir.join("percentiles_random.csv"), PERCENTILE_HEADER, &percentile_lines(&tables.percentiles_random))?;
    for (id, rows) in &tables.utilization {
        write_csv(outputs, dir.join(format!("utilization_{id}.csv")), UTILIZATION_HEADER, rows)?;
    }
    for (id, rows) in &tables.completion {
        write_csv(outputs, dir.join(format!("completion_{id}.csv")), COMPLETION_HEADER, rows)?;
    }
    Ok(())
}

fn report(args: &ReportArgs) -> anyhow::Result<u8> {
    let (groups, rows) = load_records(&args.records)?;
    let tables = aggregate(&groups, &rows)?;
    let dir = args.out.clone().unwrap_or_else(|| args.records.clone());
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut outputs = Outputs {
        created: Vec::new(),
        keep: false,
    };
    write_report(&mut outputs, &dir, &tables)?;
    let mut fractions = BTreeMap::new();
    for (id, counts) in &tables.categorization {
        let total: u32 = counts.iter().map(CategoryCounts::total).sum();
        let different: u32 = counts.iter().map(|c| c.different).sum();
        fractions.insert(*id, (different, total));
    }
    for (id, (d, t)) in fractions {
        println!("group {id:>2}: {d}/{t} runs with different placements");
    }
    println!("wrote {} files to {}", outputs.created.len(), dir.display());
    outputs.keep = true;
    Ok(0)
}
