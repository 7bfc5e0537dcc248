//! Fixtures and generators shared by unit tests.

use std::collections::BTreeMap;

use proptest::prelude::*;

use crate::infrastructure::{abilene, DeviceConfig, DeviceId, LinkConfig, LoadState, Topology, TopologyConfig};
use crate::metrics::{EnergyModel, MarginalReading};
use crate::solver::PlacementProblem;
use crate::workload::{DataflowSpec, Deployment, FunctionId, FunctionInstance, FunctionSpec, Request, ServiceChain};

pub fn abilene_topology() -> Topology {
    Topology::from_config(&abilene::config(abilene::DEFAULT_DELAY_MS_PER_KM)).unwrap()
}

pub fn chain(mi: &[f64], mb: &[f64]) -> ServiceChain {
    ServiceChain::new(
        mi.iter()
            .enumerate()
            .map(|(i, &m)| FunctionSpec {
                id: FunctionId::new(format!("F{}", i + 1)),
                compute_size_mi: m,
            })
            .collect(),
        mb.iter().map(|&d| DataflowSpec { data_size_mb: d }).collect(),
    )
    .unwrap()
}

pub fn four_function_chain() -> ServiceChain {
    chain(&[20.0, 200.0, 200.0, 20.0], &[250.0, 500.0, 750.0, 500.0, 250.0])
}

/// Deployment with `hosts[i]` listing the devices of function `F{i+1}`.
pub fn deployment(hosts: &[&[u32]]) -> Deployment {
    let mut d = Deployment::new();
    for (i, devices) in hosts.iter().enumerate() {
        for &dev in devices.iter() {
            d.insert(FunctionInstance::new(DeviceId(dev), FunctionId::new(format!("F{}", i + 1))));
        }
    }
    d
}

/// Self-contained placement problem for property tests.
#[derive(Debug, Clone)]
pub struct Case {
    pub topology: Topology,
    pub deployment: Deployment,
    pub request: Request,
    pub load: LoadState,
    pub model: EnergyModel,
}

impl Case {
    pub fn problem(&self) -> PlacementProblem<'_> {
        PlacementProblem {
            topology: &self.topology,
            deployment: &self.deployment,
            request: &self.request,
            load: &self.load,
            model: self.model,
        }
    }
}

fn utilization() -> impl Strategy<Value = f64> {
    prop_oneof![
        6 => 0.0..1.0f64,
        1 => Just(0.0),
        1 => Just(1.0),
    ]
}

fn breakpoints(cores: u32) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..20.0f64, cores as usize).prop_map(|steps| {
        let mut acc = 0.0;
        let mut bps = vec![0.0];
        for s in steps {
            acc += s;
            bps.push(acc);
        }
        bps
    })
}

fn device_config(id: u32) -> impl Strategy<Value = DeviceConfig> {
    (1u32..=6, 50.0..800.0f64, 10.0..150.0f64).prop_flat_map(move |(cores, cap, idle)| {
        breakpoints(cores).prop_map(move |bps| DeviceConfig {
            id: DeviceId(id),
            name: None,
            capacity_mi_ms: cap,
            cores,
            idle_w: idle,
            dyn_breakpoints_w: bps,
        })
    })
}

/// Random connected topology on devices `1..=n`.
pub fn topology(max_devices: u32) -> impl Strategy<Value = Topology> {
    (2..=max_devices)
        .prop_flat_map(|n| {
            let devices: Vec<_> = (1..=n).map(device_config).collect();
            let parents: Vec<_> = (2..=n).map(|k| 1..k).collect();
            let extra = prop::collection::vec((1..=n, 1..=n), 0..(n as usize));
            let link_params = prop::collection::vec((0.01..5.0f64, 50.0..600.0f64, 0.0..3.0f64, 0.0..12.0f64), 2 * n as usize);
            (devices, parents, extra, link_params)
        })
        .prop_map(|(devices, parents, extra, params)| {
            let mut pairs: Vec<(u32, u32)> = parents.iter().enumerate().map(|(i, &p)| (p, i as u32 + 2)).collect();
            for (a, b) in extra {
                let (a, b) = (a.min(b), a.max(b));
                if a != b && !pairs.contains(&(a, b)) {
                    pairs.push((a, b));
                }
            }
            let links = pairs
                .into_iter()
                .zip(params)
                .map(|((a, b), (delay, bw, idle, dynw))| LinkConfig {
                    a: DeviceId(a),
                    b: DeviceId(b),
                    delay_ms: delay,
                    bandwidth_mb_ms: bw,
                    idle_w: idle,
                    dyn_w: dynw,
                })
                .collect();
            Topology::from_config(&TopologyConfig { devices, links }).unwrap()
        })
}

pub fn load(topology: &Topology) -> impl Strategy<Value = LoadState> {
    let ids: Vec<DeviceId> = topology.device_ids().collect();
    let topo = topology.clone();
    (
        prop::collection::vec(utilization(), ids.len()),
        prop::collection::vec(prop_oneof![3 => 0.0..0.9f64, 1 => Just(0.0), 1 => Just(1.0)], topology.links().len()),
    )
        .prop_map(move |(du, lu)| {
            let devices: BTreeMap<_, _> = ids.iter().copied().zip(du).collect();
            LoadState::new(&topo, devices, lu).unwrap()
        })
}

/// Random problem with up to `max_functions` functions and up to
/// `max_instances` instances per function.
pub fn case(max_devices: u32, max_functions: usize, max_instances: usize) -> impl Strategy<Value = Case> {
    topology(max_devices)
        .prop_flat_map(move |topo| {
            let n = topo.devices().len() as u32;
            let f = 1..=max_functions;
            (Just(topo.clone()), load(&topo), f, 1..=n, 1..=n).prop_flat_map(move |(topo, load, f, b, e)| {
                let hosts = prop::collection::vec(
                    prop::collection::btree_set(1..=n, 1..=max_instances.min(n as usize)),
                    f,
                );
                let mi = prop::collection::vec(1.0..300.0f64, f);
                let mb = prop::collection::vec(prop_oneof![4 => 1.0..800.0f64, 1 => Just(0.0)], f + 1);
                let deadline = prop_oneof![3 => 5.0..200.0f64, 1 => Just(1e6)];
                let reading = prop_oneof![Just(MarginalReading::Increment), Just(MarginalReading::Literal)];
                (Just(topo), Just(load), hosts, mi, mb, deadline, Just((b, e)), reading)
            })
        })
        .prop_map(|(topology, load, hosts, mi, mb, deadline, (b, e), reading)| {
            let service = chain(&mi, &mb);
            let mut deployment = Deployment::new();
            for (f, devices) in service.functions().iter().zip(&hosts) {
                for &d in devices {
                    deployment.insert(FunctionInstance::new(DeviceId(d), f.id.clone()));
                }
            }
            let request = Request::new(service, DeviceId(b), DeviceId(e), deadline).unwrap();
            Case {
                topology,
                deployment,
                request,
                load,
                model: EnergyModel { marginal: reading },
            }
        })
}
