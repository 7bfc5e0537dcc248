//! Services, requests and function-instance deployments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infrastructure::{DeviceId, Topology};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FunctionId(pub String);

impl FunctionId {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSpec {
    pub id: FunctionId,
    pub compute_size_mi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataflowSpec {
    pub data_size_mb: f64,
}

/// Ordered chain of functions. Dataflow `i` feeds function `i`; the last
/// dataflow carries the result to the end device.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceChain {
    functions: Vec<FunctionSpec>,
    dataflows: Vec<DataflowSpec>,
}

impl ServiceChain {
    pub fn new(functions: Vec<FunctionSpec>, dataflows: Vec<DataflowSpec>) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::InvalidService("chain has no functions".into()));
        }
        if dataflows.len() != functions.len() + 1 {
            return Err(Error::InvalidService(format!(
                "{} functions need {} dataflows, got {}",
                functions.len(),
                functions.len() + 1,
                dataflows.len()
            )));
        }
        let mut ids = BTreeSet::new();
        for f in &functions {
            if !ids.insert(&f.id) {
                return Err(Error::InvalidService(format!("duplicate function id {}", f.id)));
            }
            if !(f.compute_size_mi.is_finite() && f.compute_size_mi > 0.0) {
                return Err(Error::InvalidService(format!(
                    "function {}: compute size must be positive, got {}",
                    f.id, f.compute_size_mi
                )));
            }
        }
        for (i, d) in dataflows.iter().enumerate() {
            if !(d.data_size_mb.is_finite() && d.data_size_mb >= 0.0) {
                return Err(Error::InvalidService(format!(
                    "dataflow {}: size must be >= 0, got {}",
                    i + 1,
                    d.data_size_mb
                )));
            }
        }
        Ok(Self { functions, dataflows })
    }

    pub fn functions(&self) -> &[FunctionSpec] {
        &self.functions
    }

    pub fn dataflows(&self) -> &[DataflowSpec] {
        &self.dataflows
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Zero-based position of a function in the chain.
    pub fn position(&self, id: &FunctionId) -> Option<usize> {
        self.functions.iter().position(|f| &f.id == id)
    }

    pub fn function(&self, id: &FunctionId) -> Result<&FunctionSpec> {
        self.functions
            .iter()
            .find(|f| &f.id == id)
            .ok_or_else(|| Error::UnknownFunction(id.clone()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub service: ServiceChain,
    pub begin_device: DeviceId,
    pub end_device: DeviceId,
    /// Kept for bookkeeping; a solve covers a single decision point.
    pub arrival_ms: f64,
    pub deadline_ms: f64,
}

impl Request {
    pub fn new(service: ServiceChain, begin: DeviceId, end: DeviceId, deadline_ms: f64) -> Result<Self> {
        if !(deadline_ms > 0.0) {
            return Err(Error::InvalidService(format!("deadline must be positive, got {deadline_ms}")));
        }
        Ok(Self {
            service,
            begin_device: begin,
            end_device: end,
            arrival_ms: 0.0,
            deadline_ms,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FunctionInstance {
    pub device: DeviceId,
    pub function: FunctionId,
}

impl FunctionInstance {
    pub fn new(device: DeviceId, function: FunctionId) -> Self {
        Self { device, function }
    }
}

impl fmt::Display for FunctionInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.function, self.device)
    }
}

/// Which devices host an instance of which function.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Deployment {
    hosts: BTreeMap<FunctionId, BTreeSet<DeviceId>>,
}

impl Deployment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an instance; returns false if it already existed.
    pub fn insert(&mut self, instance: FunctionInstance) -> bool {
        self.hosts
            .entry(instance.function)
            .or_default()
            .insert(instance.device)
    }

    /// Removes an instance; returns false if it was not deployed.
    pub fn remove(&mut self, instance: &FunctionInstance) -> bool {
        self.hosts
            .get_mut(&instance.function)
            .is_some_and(|d| d.remove(&instance.device))
    }

    pub fn contains(&self, instance: &FunctionInstance) -> bool {
        self.hosts
            .get(&instance.function)
            .is_some_and(|d| d.contains(&instance.device))
    }

    /// Instances of `function`, ordered by device id.
    pub fn instances_of(&self, function: &FunctionId) -> Result<Vec<FunctionInstance>> {
        match self.hosts.get(function) {
            Some(devices) if !devices.is_empty() => Ok(devices
                .iter()
                .map(|&d| FunctionInstance::new(d, function.clone()))
                .collect()),
            Some(_) => Err(Error::NoInstances(function.clone())),
            None => Err(Error::UnknownFunction(function.clone())),
        }
    }

    pub fn instances(&self) -> impl Iterator<Item = FunctionInstance> + '_ {
        self.hosts
            .iter()
            .flat_map(|(f, ds)| ds.iter().map(move |&d| FunctionInstance::new(d, f.clone())))
    }

    pub fn len(&self) -> usize {
        self.hosts.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_subset(&self, other: &Deployment) -> bool {
        self.instances().all(|i| other.contains(&i))
    }

    /// Adds an instance of every chain function on `device`.
    pub fn colocate_all(&mut self, chain: &ServiceChain, device: DeviceId) {
        for f in chain.functions() {
            self.insert(FunctionInstance::new(device, f.id.clone()));
        }
    }
}

/// Device lists per instance count, as read from the plan file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeploymentPlan(pub BTreeMap<u32, BTreeMap<FunctionId, Vec<DeviceId>>>);

impl DeploymentPlan {
    pub fn counts(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.keys().copied()
    }

    /// Checks every level: known devices and functions, one instance per
    /// (device, function), the right count, nesting across levels and
    /// disjoint device sets between functions at the smallest level.
    pub fn validate(&self, topology: &Topology, chain: &ServiceChain) -> Result<()> {
        let mut previous: Option<(u32, &BTreeMap<FunctionId, Vec<DeviceId>>)> = None;
        for (&count, level) in &self.0 {
            for f in chain.functions() {
                if !level.contains_key(&f.id) {
                    return Err(Error::InvalidDeployment(format!(
                        "count {count}: no devices listed for function {}",
                        f.id
                    )));
                }
            }
            for (fid, devices) in level {
                if chain.position(fid).is_none() {
                    return Err(Error::UnknownFunction(fid.clone()));
                }
                if devices.len() != count as usize {
                    return Err(Error::InvalidDeployment(format!(
                        "count {count}: function {fid} lists {} devices",
                        devices.len()
                    )));
                }
                let mut seen = BTreeSet::new();
                for d in devices {
                    if !topology.contains(*d) {
                        return Err(Error::InvalidDeployment(format!(
                            "count {count}: function {fid} references unknown device {d}"
                        )));
                    }
                    if !seen.insert(*d) {
                        return Err(Error::InvalidDeployment(format!(
                            "count {count}: duplicate instance of {fid} on device {d}"
                        )));
                    }
                }
                if let Some((prev_count, prev)) = previous {
                    let before = &prev[fid];
                    if let Some(missing) = before.iter().find(|d| !devices.contains(d)) {
                        return Err(Error::InvalidDeployment(format!(
                            "count {count}: function {fid} drops device {missing} placed at count {prev_count}"
                        )));
                    }
                }
            }
            if previous.is_none() {
                let mut owner: BTreeMap<DeviceId, &FunctionId> = BTreeMap::new();
                for (fid, devices) in level {
                    for d in devices {
                        if let Some(other) = owner.insert(*d, fid) {
                            return Err(Error::InvalidDeployment(format!(
                                "count {count}: device {d} hosts both {other} and {fid} at the base level"
                            )));
                        }
                    }
                }
            }
            previous = Some((count, level));
        }
        Ok(())
    }
}

/// Materializes the plan level for `count` instances per function.
pub fn deploy_instances(
    topology: &Topology,
    chain: &ServiceChain,
    count: u32,
    plan: &DeploymentPlan,
) -> Result<Deployment> {
    plan.validate(topology, chain)?;
    let level = plan.0.get(&count).ok_or_else(|| {
        Error::InvalidDeployment(format!(
            "plan has no level for {count} instances per function (available: {:?})",
            plan.counts().collect::<Vec<_>>()
        ))
    })?;
    let mut deployment = Deployment::new();
    for f in chain.functions() {
        for &d in &level[&f.id] {
            deployment.insert(FunctionInstance::new(d, f.id.clone()));
        }
    }
    Ok(deployment)
}

/// On-disk service description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_deadline")]
    pub deadline_ms: f64,
    pub functions: Vec<FunctionConfig>,
    pub dataflows_mb: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionConfig {
    pub id: FunctionId,
    pub mi: f64,
}

pub const DEFAULT_DEADLINE_MS: f64 = 100.0;

fn default_deadline() -> f64 {
    DEFAULT_DEADLINE_MS
}

impl ServiceConfig {
    pub fn chain(&self) -> Result<ServiceChain> {
        ServiceChain::new(
            self.functions
                .iter()
                .map(|f| FunctionSpec {
                    id: f.id.clone(),
                    compute_size_mi: f.mi,
                })
                .collect(),
            self.dataflows_mb
                .iter()
                .map(|&mb| DataflowSpec { data_size_mb: mb })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infrastructure::abilene;

    fn fid(s: &str) -> FunctionId {
        FunctionId::new(s)
    }

    fn chain() -> ServiceChain {
        ServiceChain::new(
            ["F1", "F2", "F3", "F4"]
                .iter()
                .zip([20.0, 200.0, 200.0, 20.0])
                .map(|(id, mi)| FunctionSpec {
                    id: fid(id),
                    compute_size_mi: mi,
                })
                .collect(),
            [250.0, 500.0, 750.0, 500.0, 250.0]
                .iter()
                .map(|&mb| DataflowSpec { data_size_mb: mb })
                .collect(),
        )
        .unwrap()
    }

    fn topo() -> Topology {
        Topology::from_config(&abilene::config(abilene::DEFAULT_DELAY_MS_PER_KM)).unwrap()
    }

    fn ids(v: &[u32]) -> Vec<DeviceId> {
        v.iter().map(|&d| DeviceId(d)).collect()
    }

    fn plan() -> DeploymentPlan {
        let mut levels = BTreeMap::new();
        let l2: BTreeMap<_, _> = [
            (fid("F1"), ids(&[1, 2])),
            (fid("F2"), ids(&[3, 4])),
            (fid("F3"), ids(&[5, 6])),
            (fid("F4"), ids(&[7, 8])),
        ]
        .into_iter()
        .collect();
        let l4: BTreeMap<_, _> = [
            (fid("F1"), ids(&[1, 2, 9, 10])),
            (fid("F2"), ids(&[3, 4, 9, 11])),
            (fid("F3"), ids(&[5, 6, 1, 2])),
            (fid("F4"), ids(&[7, 8, 3, 4])),
        ]
        .into_iter()
        .collect();
        levels.insert(2, l2);
        levels.insert(4, l4);
        DeploymentPlan(levels)
    }

    #[test]
    fn chain_rejects_wrong_dataflow_count() {
        let f = vec![FunctionSpec {
            id: fid("F1"),
            compute_size_mi: 1.0,
        }];
        let err = ServiceChain::new(f.clone(), vec![DataflowSpec { data_size_mb: 1.0 }]);
        assert!(matches!(err, Err(Error::InvalidService(_))));
        let bad_size = vec![FunctionSpec {
            id: fid("F1"),
            compute_size_mi: 0.0,
        }];
        assert!(ServiceChain::new(bad_size, vec![DataflowSpec { data_size_mb: 1.0 }; 2]).is_err());
        assert!(ServiceChain::new(f, vec![DataflowSpec { data_size_mb: 1.0 }; 2]).is_ok());
    }

    #[test]
    fn plan_echo_at_base_level() {
        let d = deploy_instances(&topo(), &chain(), 2, &plan()).unwrap();
        assert_eq!(d.len(), 8);
        let f1 = d.instances_of(&fid("F1")).unwrap();
        assert_eq!(
            f1,
            vec![
                FunctionInstance::new(DeviceId(1), fid("F1")),
                FunctionInstance::new(DeviceId(2), fid("F1"))
            ]
        );
        assert!(matches!(d.instances_of(&fid("F9")), Err(Error::UnknownFunction(_))));
    }

    #[test]
    fn empty_instance_set_is_an_error() {
        let mut d = Deployment::new();
        d.hosts.insert(fid("F1"), BTreeSet::new());
        assert!(matches!(d.instances_of(&fid("F1")), Err(Error::NoInstances(_))));
    }

    #[test]
    fn levels_are_nested() {
        let t = topo();
        let two = deploy_instances(&t, &chain(), 2, &plan()).unwrap();
        let four = deploy_instances(&t, &chain(), 4, &plan()).unwrap();
        assert!(two.is_subset(&four));
        assert_eq!(four.len(), 16);
        assert!(deploy_instances(&t, &chain(), 6, &plan()).is_err());
    }

    #[test]
    fn plan_validation_errors() {
        let t = topo();
        let mut p = plan();
        p.0.get_mut(&2).unwrap().insert(fid("F1"), ids(&[1, 99]));
        assert!(matches!(
            deploy_instances(&t, &chain(), 2, &p),
            Err(Error::InvalidDeployment(m)) if m.contains("unknown device 99")
        ));

        let mut p = plan();
        p.0.get_mut(&4).unwrap().insert(fid("F1"), ids(&[1, 1, 9, 10]));
        assert!(deploy_instances(&t, &chain(), 4, &p).is_err());

        // level 4 must keep level 2's devices
        let mut p = plan();
        p.0.get_mut(&4).unwrap().insert(fid("F1"), ids(&[1, 9, 10, 11]));
        assert!(deploy_instances(&t, &chain(), 4, &p).is_err());

        // base level functions must not share devices
        let mut p = plan();
        p.0.get_mut(&2).unwrap().insert(fid("F2"), ids(&[1, 4]));
        assert!(deploy_instances(&t, &chain(), 2, &p).is_err());
    }

    #[test]
    fn colocation_adds_every_function_on_begin_device() {
        let mut d = deploy_instances(&topo(), &chain(), 2, &plan()).unwrap();
        d.colocate_all(&chain(), DeviceId(11));
        for f in chain().functions() {
            assert!(d.contains(&FunctionInstance::new(DeviceId(11), f.id.clone())));
        }
        assert_eq!(d.len(), 12);
    }

    #[test]
    fn deterministic() {
        let t = topo();
        assert_eq!(
            deploy_instances(&t, &chain(), 4, &plan()).unwrap(),
            deploy_instances(&t, &chain(), 4, &plan()).unwrap()
        );
    }

    #[test]
    fn service_config_defaults_deadline() {
        let cfg: ServiceConfig =
            serde_json::from_str(r#"{"functions":[{"id":"F1","mi":20}],"dataflows_mb":[1,2]}"#).unwrap();
        assert_eq!(cfg.deadline_ms, 100.0);
        assert_eq!(cfg.chain().unwrap().len(), 1);
    }

    #[test]
    fn request_requires_positive_deadline() {
        assert!(Request::new(chain(), DeviceId(1), DeviceId(1), 0.0).is_err());
        assert!(Request::new(chain(), DeviceId(1), DeviceId(1), 100.0).is_ok());
    }
}
